import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from formheat.assembly import CoefficientSet, build_pencil
from formheat.geometry import Points, Polyline
from formheat.model_problems import standard_fixture_mesh, unit_square_mesh
from formheat.weights import WeightSpec


def ramp_half(points):
    """Surface coefficient vanishing on the left half of a unit edge."""
    import numpy as np
    return np.maximum(2.0 * points[:, 0] - 1.0, 0.0)


def form_fixture_coefficients():
    """The four coefficient scenarios exercised by the form checks:
    nondegenerate, surface-degenerate, bulk-degenerate away from the
    dynamic surfaces (case A), and at the interface (case B)."""
    return [
        ("nondegenerate", CoefficientSet()),
        ("surface-degenerate", CoefficientSet(mu_sigma=ramp_half)),
        ("bulk-case-A", CoefficientSet(
            bulk_weight=WeightSpec(Points((0.5, 0.25)), 1.0))),
        ("bulk-case-B", CoefficientSet(
            bulk_weight=WeightSpec(Polyline([(0.0, 0.5), (1.0, 0.5)]), 0.5))),
    ]


@pytest.fixture(scope="session")
def std_mesh_8():
    return standard_fixture_mesh(8)


@pytest.fixture(scope="session")
def std_pencil_8(std_mesh_8):
    return build_pencil(std_mesh_8, CoefficientSet())


@pytest.fixture(scope="session")
def conserving_mesh_8():
    """No Dirichlet part: dynamic top, Neumann elsewhere, interface."""
    return unit_square_mesh(8, bottom="neumann", top="dynamic",
                            interface_y=0.5)


@pytest.fixture(scope="session")
def conserving_pencil_8(conserving_mesh_8):
    return build_pencil(conserving_mesh_8, CoefficientSet())
