"""
Shared fixtures for the meshgrade test suite.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.meshgrade.mesh import LabelSet
from src.meshgrade.synth import SynthSpec, generate_grid
from tests.helpers import make_mesh


@pytest.fixture
def unit_square():
    return make_mesh([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], [(1, 2, 3, 4)])


@pytest.fixture
def grid():
    """Factory of flat (or bent) quad grids, all elements passed."""
    def build(rows, cols, **options):
        mesh, _ = generate_grid(SynthSpec(rows=rows, cols=cols, **options))
        return mesh
    return build


@pytest.fixture
def labelled_grid(grid):
    """3x3 grid whose centre element is marked for rework."""
    mesh = grid(3, 3)
    return mesh, LabelSet.from_rework(mesh.element_ids, [5])


@pytest.fixture
def rng():
    return np.random.default_rng(7)
