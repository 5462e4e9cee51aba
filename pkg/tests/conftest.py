import numpy as np
import pytest

from robinstrip import CurvatureProfile, Mode, build_curve

TAU = 2.0 * np.pi


@pytest.fixture(scope="session")
def circle():
    return build_curve(CurvatureProfile.circle(), 256)


@pytest.fixture(scope="session")
def circle_fine():
    return build_curve(CurvatureProfile.circle(), 1024)


@pytest.fixture(scope="session")
def convex_k2():
    """kappa(s) = 1 + 0.5 cos(2s) on L = 2*pi; convex, closure exact."""
    return build_curve(CurvatureProfile(TAU, (Mode(2, 0.5),)), 512)


@pytest.fixture(scope="session")
def signed_k3():
    """kappa(s) = 1 + 1.5 cos(3s): sign-changing, min kappa = -0.5."""
    return build_curve(CurvatureProfile(TAU, (Mode(3, 1.5),)), 512)
