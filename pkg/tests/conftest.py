import numpy as np
import pytest

from hexatlas import LabelVolume, voxels_to_hexmesh


def block_volume(dims, label=1, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), direction=None):
    n = int(np.prod(dims))
    return LabelVolume(dims, spacing, origin,
                       np.eye(3) if direction is None else direction,
                       np.full(n, label, dtype=np.int64))


def block_mesh(dims, spacing=(1.0, 1.0, 1.0), **kw):
    vol = block_volume(dims, spacing=spacing, **kw)
    return voxels_to_hexmesh(vol, vol)


def random_volume(rng, max_dim=6, n_labels=4, fill=0.6):
    dims = tuple(int(v) for v in rng.integers(1, max_dim + 1, size=3))
    n = int(np.prod(dims))
    labels = rng.integers(1, n_labels + 1, size=n)
    labels[rng.random(n) > fill] = 0
    return LabelVolume(dims, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), np.eye(3), labels)


@pytest.fixture
def rng():
    return np.random.default_rng(20240519)


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
