import numpy as np
import pytest

from thermodyne import DetectorPreset, build_detector


@pytest.fixture
def detector_vacuum():
    return build_detector(DetectorPreset(kappa=1.0))


@pytest.fixture
def detector_thermal():
    return build_detector(DetectorPreset(kappa=1.0, nbar=1.0))


@pytest.fixture
def excited():
    return np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


@pytest.fixture
def plus():
    return 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
