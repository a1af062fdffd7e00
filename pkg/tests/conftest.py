import numpy as np
import pytest

from sheetfuse import BlurModel, sample_geometry, simulate_views, textured_phantom


@pytest.fixture
def synth_pair():
    """Factory for (gt, view_a, view_b, profile) synthetic-blur pairs."""

    def make(seed=0, shape=(256, 256), band=(40, 216), sigma_max=4.0,
             noise_sigma=0.0, ghosts=()):
        gt = textured_phantom(shape, seed=seed, band=band)
        _, profile = sample_geometry(gt, gt)
        model = BlurModel(sigma_max=sigma_max, noise_sigma=noise_sigma,
                          seed=seed, ghosts=list(ghosts))
        view_a, view_b = simulate_views(gt, profile, model)
        return gt, view_a, view_b, profile

    return make


@pytest.fixture
def small_pair(synth_pair):
    """One modest pair shared by tests that only need plausible data."""
    return synth_pair(seed=3, shape=(128, 96), band=(20, 108), sigma_max=3.0)


def random_slice(seed, shape=(64, 64)):
    rng = np.random.default_rng(seed)
    return rng.random(shape)
