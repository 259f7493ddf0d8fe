import numpy as np
import pytest

from proxilearn import evaluation, synthdata


@pytest.fixture(scope="session")
def a_grid():
    return evaluation.default_a_grid()


@pytest.fixture(scope="session")
def frozen_truth(a_grid):
    return synthdata.true_ate(a_grid, evaluation.ORACLE_MC_SAMPLES,
                              seed=evaluation.ORACLE_SEED)


@pytest.fixture(scope="session")
def table500(a_grid, frozen_truth):
    """20-seed comparison at n=500 shared by acceptance and invariants."""
    return evaluation.run_table(500, n_seeds=20,
                                methods=("kpv", "pmmr", "ridge", "ridge-w"),
                                a_grid=a_grid, truth=frozen_truth)


@pytest.fixture(scope="session")
def table1000(a_grid, frozen_truth):
    return evaluation.run_table(1000, n_seeds=20,
                                methods=("kpv", "pmmr", "ridge", "ridge-w"),
                                a_grid=a_grid, truth=frozen_truth)


@pytest.fixture(scope="session")
def table200(a_grid, frozen_truth):
    return evaluation.run_table(200, n_seeds=20, methods=("pmmr",),
                                a_grid=a_grid, truth=frozen_truth)


def rng_dataset(seed, n, dz=2, dw=2, dx=0):
    """Small random dataset for oracle tests."""
    from proxilearn.data import Dataset

    rng = np.random.default_rng(seed)
    return Dataset(
        a=rng.normal(size=n),
        x=rng.normal(size=(n, dx)) if dx else np.empty((n, 0)),
        z=rng.normal(size=(n, dz)),
        w=rng.normal(size=(n, dw)),
        y=rng.normal(size=n),
    )
