import os
from pathlib import Path

import numpy as np
import pytest

from qgrom.bench import CASE1, CASE2, load_or_run_case
from qgrom.field import Field
from qgrom.mesh import build_mesh

ARTIFACTS = Path(__file__).resolve().parent.parent / "_artifacts"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def case1():
    force = os.environ.get("QGROM_FORCE_BENCH") == "1"
    return load_or_run_case(CASE1, ARTIFACTS / "case1", force=force)


@pytest.fixture(scope="session")
def case2():
    force = os.environ.get("QGROM_FORCE_BENCH") == "1"
    return load_or_run_case(CASE2, ARTIFACTS / "case2", force=force)


@pytest.fixture
def unit_mesh_2x2():
    return build_mesh(2, 2, (0.0, 1.0, 0.0, 1.0))


@pytest.fixture
def gyre_mesh_small():
    """Small instance of the benchmark domain [0,1] x [-1,1]."""
    return build_mesh(4, 8, (0.0, 1.0, -1.0, 1.0))


@pytest.fixture
def gyre_mesh_16x32():
    return build_mesh(16, 32, (0.0, 1.0, -1.0, 1.0))


def random_field(mesh, rng, scale=1.0):
    return Field(mesh, scale * rng.standard_normal(mesh.n_cells))
