from pathlib import Path

import numpy as np
import pytest

from dikintrack.config import load_barrier

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = ["box1d", "box2d", "box3d", "triangle", "disk", "lens"]


def shipped_barrier(name):
    return load_barrier(CONFIG_DIR / "barriers" / f"{name}.yaml")


@pytest.fixture(params=SHIPPED)
def any_barrier(request):
    return shipped_barrier(request.param)


@pytest.fixture
def box2d():
    return shipped_barrier("box2d")


@pytest.fixture
def box1d():
    return shipped_barrier("box1d")


@pytest.fixture
def config_dir():
    return CONFIG_DIR


def interior_points_with_slack(barrier, n, min_slack, seed=0):
    rng = np.random.default_rng(seed)
    lo, hi = barrier.bounding_box()
    out = []
    while len(out) < n:
        x = rng.uniform(lo, hi)
        if barrier.contains(x) and barrier.slack(x).min() >= min_slack:
            out.append(x)
    return np.array(out)
