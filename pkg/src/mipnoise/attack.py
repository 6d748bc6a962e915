"""The optimal membership attacker, the attack game, and level conversions.

The optimal attacker guesses membership whenever the posterior probability
that the target sits in the training mask, given the observed release, is at
least one half. For mechanisms exposing a conditional density the posterior
is computed exactly by enumerating candidate masks; arbitrary black-box
attackers are evaluated through the generic game instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DatasetTable, ValidationError, draw_seed, rng_stream
from .mechanisms import Mechanism


class UndefinedPosteriorError(RuntimeError):
    """Every candidate mask assigns zero density to the observed output."""


@dataclass(frozen=True)
class AttackReport:
    """Per-target accuracy estimate for one attacker against one mechanism."""

    target_id: int
    accuracy: float
    std_error: float
    rounds: int
    attacker: str
    eta_claimed: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValidationError("accuracy must lie in [0, 1]")
        if self.std_error < 0:
            raise ValidationError("standard error must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "target_id": self.target_id,
            "accuracy": self.accuracy,
            "std_error": self.std_error,
            "rounds": self.rounds,
            "attacker": self.attacker,
            "eta_claimed": self.eta_claimed,
        }


def mip_eta_from_dp(epsilon: float) -> float:
    """Membership level implied by a pure DP level: 1/(1+e^-eps) - 1/2."""
    if epsilon < 0 or not math.isfinite(epsilon):
        raise ValidationError("epsilon must be nonnegative and finite")
    # tanh form of the same expression; exact inverse of dp_epsilon_from_eta.
    return 0.5 * math.tanh(epsilon / 2.0)


def dp_epsilon_from_eta(eta: float) -> float:
    """DP level whose implied membership bound equals eta: log((1+2eta)/(1-2eta))."""
    if not (0.0 <= eta < 0.5):
        raise ValidationError("eta must lie in [0, 1/2)")
    return 2.0 * math.atanh(2.0 * eta)


def _logsumexp(values: np.ndarray) -> float:
    peak = values.max()
    if peak == -np.inf:
        return -np.inf
    return float(peak + np.log(np.exp(values - peak).sum()))


def bayes_posterior(
    theta_hat: object, target_id: int, data: DatasetTable, mech: Mechanism
) -> float:
    """Posterior probability that the target is in the training mask.

    Uniform prior over candidate masks; the mechanism's conditional density
    only needs to be correct up to a constant shared across masks.
    """
    if not mech.has_density:
        raise ValidationError(
            f"{mech.mechanism_id} exposes no conditional density; "
            "use attack_game with a plug-in attacker instead"
        )
    if mech.data.records.shape != data.records.shape:
        raise ValidationError("mechanism was built on a different dataset")
    log_dens = mech.log_density_all(theta_hat)
    member = mech.membership(target_id)
    denominator = _logsumexp(log_dens)
    if denominator == -np.inf:
        raise UndefinedPosteriorError("all masks assign zero density to this output")
    numerator = _logsumexp(log_dens[member])
    if numerator == -np.inf:
        return 0.0
    return float(np.exp(numerator - denominator))


def _binomial_std_error(accuracy: float, rounds: int) -> float:
    return math.sqrt(max(accuracy * (1.0 - accuracy), 0.0) / rounds)


def optimal_attacker_accuracy(
    data: DatasetTable,
    mech: Mechanism,
    target_id: int,
    rounds: int,
    rng: int | np.random.Generator,
    eta_claimed: float | None = None,
) -> AttackReport:
    """Monte Carlo accuracy of the posterior-threshold attacker.

    Each round draws a uniform mask, runs the mechanism, and guesses
    membership when the posterior is at least 1/2 (ties count as a guess of
    membership).
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    seed = draw_seed(rng)
    game_rng = rng_stream(seed, "game")
    member = mech.membership(target_id)
    count = mech.mask_count
    indices = game_rng.integers(0, count, int(rounds))
    correct = 0
    for idx in indices:
        output = mech.sample_by_index(int(idx), game_rng)
        posterior = bayes_posterior(output, target_id, data, mech)
        guess = posterior >= 0.5
        correct += guess == bool(member[idx])
    accuracy = correct / int(rounds)
    return AttackReport(
        target_id=int(target_id),
        accuracy=accuracy,
        std_error=_binomial_std_error(accuracy, int(rounds)),
        rounds=int(rounds),
        attacker="bayes_exact",
        eta_claimed=eta_claimed,
    )


def optimal_attacker_accuracy_exact(
    data: DatasetTable, mech: Mechanism, target_id: int, eta_claimed: float | None = None
) -> AttackReport:
    """Exact optimal accuracy for mechanisms with a finite output range.

    Sums max(P(output, target in), P(output, target out)) over the whole
    output space, weighting masks uniformly. No sampling error.
    """
    if not mech.enumerable:
        raise ValidationError(f"{mech.mechanism_id} has no finite output range")
    member = mech.membership(target_id)
    weights: dict[object, list[float]] = {}
    for i, mask in enumerate(mech.masks):
        side = 0 if member[i] else 1
        for output, probability in mech.enumerate_outputs(mask):
            slot = weights.setdefault(output, [0.0, 0.0])
            slot[side] += probability
    total = sum(max(w_in, w_out) for w_in, w_out in weights.values())
    accuracy = total / mech.mask_count
    return AttackReport(
        target_id=int(target_id),
        accuracy=min(accuracy, 1.0),
        std_error=0.0,
        rounds=0,
        attacker="bayes_exact",
        eta_claimed=eta_claimed,
    )


Attacker = Callable[[int, np.ndarray, object, np.random.Generator], int]


def attack_game(
    data: DatasetTable,
    mech: Mechanism,
    attacker: Attacker,
    targets: list[int],
    rounds: int,
    rng: int | np.random.Generator,
    attacker_name: str = "plugin",
) -> list[AttackReport]:
    """Evaluate an arbitrary attacker, one report per target.

    The attacker receives (target_id, target_record, output, rng) and returns
    a membership guess in {0, 1}. Mechanism randomness and attacker
    randomness come from separate streams derived from the same seed, so two
    attackers evaluated at the same seed see identical transcripts.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    seed = draw_seed(rng)
    reports = []
    for target_id in targets:
        target_id = int(target_id)
        member = mech.membership(target_id)
        mech_rng = rng_stream(seed, "mechanism", target_id)
        attacker_rng = rng_stream(seed, "attacker", target_id)
        indices = mech_rng.integers(0, mech.mask_count, int(rounds))
        record = data.records[target_id]
        correct = 0
        for idx in indices:
            output = mech.sample_by_index(int(idx), mech_rng)
            guess = int(attacker(target_id, record, output, attacker_rng))
            correct += (guess == 1) == bool(member[idx])
        accuracy = correct / int(rounds)
        reports.append(
            AttackReport(
                target_id=target_id,
                accuracy=accuracy,
                std_error=_binomial_std_error(accuracy, int(rounds)),
                rounds=int(rounds),
                attacker=attacker_name,
            )
        )
    return reports


def make_bayes_attacker(mech: Mechanism) -> Attacker:
    """Plug-in attacker that thresholds the exact posterior at 1/2."""

    def attacker(target_id: int, record: np.ndarray, output: object, rng) -> int:
        return int(bayes_posterior(output, target_id, mech.data, mech) >= 0.5)

    return attacker


def make_distance_attacker(
    threshold: float, feature: Callable[[np.ndarray], np.ndarray] | None = None
) -> Attacker:
    """Guess membership when the release is close to the target's feature.

    feature maps a record to a vector comparable with the release; the
    default uses the record itself. This is the natural black-box heuristic
    when no conditional density is available.
    """

    def attacker(target_id: int, record: np.ndarray, output: object, rng) -> int:
        probe = record if feature is None else feature(record)
        gap = np.linalg.norm(np.asarray(output, dtype=float).ravel() - probe.ravel())
        return int(gap <= threshold)

    return attacker
