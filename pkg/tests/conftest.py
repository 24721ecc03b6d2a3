import numpy as np
import pytest
from hypothesis import settings

from kolmoflow.spectral import SpectralField, TorusSpec

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


def random_field(torus: TorusSpec, rng: np.random.Generator, scale: float = 1.0,
                 decay: float = 0.0) -> SpectralField:
    """Random real field; ``decay`` tapers amplitudes as exp(-decay·|k|)."""
    half = rng.normal(size=torus.n_half) + 1j * rng.normal(size=torus.n_half)
    if decay:
        k = np.hypot(*torus.half_modes.T)
        half = half * np.exp(-decay * k)
    return SpectralField.from_half(torus, scale * half)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
