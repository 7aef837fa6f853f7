"""Shared fixtures: small reference surfaces and material models."""
import numpy as np
import pytest

from shell6p import constitutive
from shell6p.surface import CylinderChart, FlatChart, Grid, build_reference


@pytest.fixture(scope="session")
def flat_surf():
    return build_reference(FlatChart(), Grid(12, 12, (0.0, 1.0), (0.0, 1.0)))


@pytest.fixture(scope="session")
def cyl_surf():
    return build_reference(CylinderChart(0.9), Grid(12, 14, (0.0, 1.0), (0.0, 1.2)))


@pytest.fixture(scope="session")
def active_material():
    return constitutive.coefficients_drill_active(
        youngs=1.0e4, poisson=0.3, thickness=0.05
    )


@pytest.fixture(scope="session")
def free_material(active_material):
    return constitutive.counterpart(active_material)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
