import time

import pytest

from mipnoise.core import DatasetTable, MeanQuery, rng_stream
from mipnoise.experiments import ExperimentConfig, run_synth, summarize


@pytest.fixture(scope="session")
def synth_results():
    """One full desk-scale synth run, shared by every test that needs it."""
    config = ExperimentConfig(name="synth", runs=5, seed=1234)
    start = time.monotonic()
    rows = run_synth(config)
    elapsed = time.monotonic() - start
    summary = {(g["method"], g["eta"]): g for g in summarize(rows)}
    return {"config": config, "rows": rows, "summary": summary, "elapsed": elapsed}


@pytest.fixture(scope="session")
def mean_query_setup():
    """The 12-record scalar mean-query instance used by the attack tests."""
    data = DatasetTable(rng_stream(7, "acc-data").normal(0.0, 1.0, 12))
    return data, MeanQuery()
