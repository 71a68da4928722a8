"""Shared construction helpers for the test suite."""

import numpy as np

from dpwaves.spectral import PeriodicGrid, RealField, field_from_cosine


def random_smooth_even_field(grid: PeriodicGrid, rng: np.random.Generator,
                             scale: float = 1.0, decay: float = 4.0) -> RealField:
    """Random cosine series with exponentially decaying coefficients."""
    modes = np.arange(grid.n_modes)
    coeffs = scale * rng.standard_normal(grid.n_modes) * np.exp(-modes / decay)
    return field_from_cosine(grid, coeffs)


def random_nonneg_bump(grid: PeriodicGrid, rng: np.random.Generator,
                       scale: float = 0.5) -> np.ndarray:
    """Non-negative, not identically zero node values."""
    base = random_smooth_even_field(grid, rng, scale=scale)
    values = base.values**2
    if np.max(values) < 1e-8:  # vanishingly unlikely; keep the property strict
        values = values + 1e-4
    return values
