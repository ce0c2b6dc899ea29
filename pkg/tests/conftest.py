import numpy as np
import pytest

from vredge import ChannelConfig, ComputeConfig, TileGrid, default_grid


@pytest.fixture(scope="session")
def grid():
    """Reference 7x5 geometry: 2x2 FoV, unit strides, K=24, tau=1.5e8 bit."""
    return default_grid()


@pytest.fixture(scope="session")
def tiny_grid():
    """2x2 plane with 1x1 FoV: Z=1, K=4; small enough to reason by hand."""
    return TileGrid(n_rows=2, n_cols=2, fov_rows=1, fov_cols=1, total_bits=400)


@pytest.fixture(scope="session")
def channel():
    return ChannelConfig()


@pytest.fixture(scope="session")
def compute():
    return ComputeConfig()


def spearman(x, y) -> float:
    """Rank correlation; average ranks for ties."""
    def ranks(v):
        v = np.asarray(v, dtype=float)
        order = np.argsort(v, kind="stable")
        r = np.empty(len(v))
        r[order] = np.arange(1, len(v) + 1, dtype=float)
        for val in np.unique(v):
            mask = v == val
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r
    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    return float((rx * ry).sum() / denom) if denom else 0.0
