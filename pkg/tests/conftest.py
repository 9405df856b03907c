import os

# Pin BLAS threading before numpy is imported anywhere: keeps tiny-matrix
# reductions bit-deterministic across runs on the same machine.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from tsnas.network import ForecastNetwork, NetworkConfig  # noqa: E402
from tsnas.rng import Rng  # noqa: E402


def tiny_config(**kw):
    base = dict(
        L=8,
        H=4,
        n_targets=2,
        d_model=4,
        nbeats_width=8,
        n_intermediate=2,
        ma_kernel=3,
        dropout=0.0,
        dtype="float64",
    )
    base.update(kw)
    return NetworkConfig(**base)


@pytest.fixture
def tiny_net():
    return ForecastNetwork(tiny_config(), Rng(0, "net"))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
