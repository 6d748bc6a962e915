"""Command-line entry point.

Subcommands: fig1, synth, moments, privatize, attack-eval. Every run prints
a JSON manifest (config hash, versions, seed) and writes its outputs under
the chosen directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .attack import optimal_attacker_accuracy
from .core import MeanQuery, ValidationError, load_dataset, rng_stream
from .experiments import (
    ExperimentConfig,
    CovarianceFitGD,
    emit_results,
    load_config,
    run_fig1,
    run_synth,
)
from .mechanisms import (
    BinaryReleaseMechanism,
    LaplaceDpMechanism,
    MipNoiseMechanism,
    privatize_laplace_dp,
    privatize_mip,
)
from .moments import ReciprocalSum, estimate_moments, exact_moments

ALGORITHMS = {
    "mean": MeanQuery,
    "reciprocal-sum": ReciprocalSum,
    "covariance": CovarianceFitGD,
}


def _make_algorithm(name: str):
    if name not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    return ALGORITHMS[name]()


def _manifest(command: str, config: ExperimentConfig) -> dict:
    return {
        "command": command,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "config": asdict(config),
        "versions": {
            "mipnoise": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }


def _emit_manifest(manifest: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(json.dumps(manifest))


def _profile_json(profile) -> dict:
    return {"M": profile.order, "sigma": [float(s) for s in profile.sigma]}


def _cmd_experiment(args: argparse.Namespace) -> int:
    name = args.command
    overrides = {"seed": args.seed, "output_dir": args.out}
    config = load_config(args.config, name, overrides)
    out_dir = Path(config.output_dir)
    _emit_manifest(_manifest(name, config), out_dir)
    rows = run_fig1(config) if name == "fig1" else run_synth(config)
    paths = emit_results(
        rows, ["csv", "json", "svg_data"], out_dir, name=name, log_y=config.log_y
    )
    print(json.dumps({"outputs": [str(p) for p in paths], "rows": len(rows)}))
    return 0


def _cmd_moments(args: argparse.Namespace) -> int:
    config = load_config(args.config, "moments", {"seed": args.seed, "output_dir": args.out})
    data = load_dataset(args.data)
    alg = _make_algorithm(args.alg)
    if args.estimator == "bootstrap":
        profile = estimate_moments(data, alg, args.B, args.M, rng_stream(config.seed, "moments"))
        payload = {**_profile_json(profile), "estimator": "bootstrap", "B": args.B}
    else:
        k = args.k if args.k is not None else data.n // 2
        profile = exact_moments(data, alg, k, args.M)
        payload = {**_profile_json(profile), "estimator": "exact", "B": 0}
    out_dir = Path(config.output_dir)
    _emit_manifest(_manifest("moments", config), out_dir)
    (out_dir / "moments.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return 0


def _cmd_privatize(args: argparse.Namespace) -> int:
    config = load_config(args.config, "privatize", {"seed": args.seed, "output_dir": args.out})
    data = load_dataset(args.data)
    alg = _make_algorithm(args.alg)
    if args.method == "mip":
        if args.eta is None:
            raise ValidationError("--eta is required for the mip method")
        out = privatize_mip(
            data, alg, args.eta, args.M, config.seed, B=args.B, variant=args.variant
        )
    else:
        if args.epsilon is None:
            raise ValidationError("--epsilon is required for the laplace-dp method")
        out = privatize_laplace_dp(data, alg, args.epsilon, args.sensitivity, config.seed)
    payload = {
        "theta_hat": [float(x) for x in out.theta_hat],
        "mechanism_id": out.mechanism_id,
        "seed": out.seed,
        "noise_scale": out.noise_scale,
        "profile": _profile_json(out.profile) if out.profile is not None else None,
    }
    out_dir = Path(config.output_dir)
    _emit_manifest(_manifest("privatize", config), out_dir)
    (out_dir / "mechanism_output.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return 0


def _mechanism_from_config(path: str):
    """Build a density-capable mechanism from a key=value description."""
    settings: dict = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, raw = line.partition("=")
        settings[key.strip()] = raw.strip()
    method = settings.get("method")
    if method == "binary-dp":
        return BinaryReleaseMechanism(float(settings["epsilon"]))
    if method == "subset-publisher":
        from .mechanisms import SubsetPublisherMechanism

        data = load_dataset(settings["data"])
        return SubsetPublisherMechanism(data, float(settings["p"]))
    if method == "mip":
        data = load_dataset(settings["data"])
        alg = _make_algorithm(settings.get("alg", "mean"))
        M = int(settings.get("M", 2))
        B = int(settings.get("B", 64))
        seed = int(settings.get("profile_seed", 0))
        profile = estimate_moments(data, alg, B, M, rng_stream(seed, "attack-profile"))
        return MipNoiseMechanism(
            data, alg, float(settings["eta"]), profile, variant="density_exact"
        )
    if method == "laplace-dp":
        data = load_dataset(settings["data"])
        alg = _make_algorithm(settings.get("alg", "mean"))
        return LaplaceDpMechanism(
            data, alg, float(settings["epsilon"]), float(settings.get("sensitivity", 1.0))
        )
    raise ValidationError(
        "mechanism config needs method=mip|laplace-dp|subset-publisher|binary-dp"
    )


def _cmd_attack_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config, "attack-eval", {"seed": args.seed, "output_dir": args.out})
    mech = _mechanism_from_config(args.mechanism)
    if args.targets == "all":
        targets = list(range(mech.data.n))
    else:
        targets = [int(t) for t in args.targets.split(",")]
    reports = [
        optimal_attacker_accuracy(
            mech.data, mech, t, args.rounds, rng_stream(config.seed, "attack-eval", t)
        )
        for t in targets
    ]
    out_dir = Path(config.output_dir)
    _emit_manifest(_manifest("attack-eval", config), out_dir)
    payload = [r.as_dict() for r in reports]
    (out_dir / "attack_eval.json").write_text(json.dumps(payload, indent=2))
    csv_lines = ["target_id,accuracy,stderr"]
    csv_lines += [f"{r.target_id},{r.accuracy!r},{r.std_error!r}" for r in reports]
    (out_dir / "attack_eval.csv").write_text("\n".join(csv_lines) + "\n")
    print(json.dumps(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mipnoise",
        description="Membership-inference privacy mechanisms, attacks, and studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    for name in ("fig1", "synth"):
        p = sub.add_parser(name, help=f"run the {name} study")
        add_common(p)
        p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("moments", help="estimate or enumerate a moment profile")
    add_common(p)
    p.add_argument("--data", required=True, help="headerless CSV dataset")
    p.add_argument("--alg", default="mean", choices=sorted(ALGORITHMS))
    p.add_argument("--estimator", default="bootstrap", choices=["bootstrap", "exact"])
    p.add_argument("--B", type=int, default=64)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--k", type=int, default=None, help="subset size for the exact estimator")
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("privatize", help="release one privatized output")
    add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--alg", default="mean", choices=sorted(ALGORITHMS))
    p.add_argument("--method", default="mip", choices=["mip", "laplace-dp"])
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--B", type=int, default=64)
    p.add_argument("--variant", default="paper_literal", choices=["paper_literal", "density_exact"])
    p.set_defaults(func=_cmd_privatize)

    p = sub.add_parser("attack-eval", help="optimal-attacker accuracy per target")
    add_common(p)
    p.add_argument("--mechanism", required=True, help="mechanism config file")
    p.add_argument("--targets", default="all", help="'all' or a comma list of record ids")
    p.add_argument("--rounds", type=int, default=10_000)
    p.set_defaults(func=_cmd_attack_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
