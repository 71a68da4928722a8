"""Steady traveling-wave equation and its discretization.

A wave profile phi with speed mu and integration constant a solves

    F(phi, mu) = mu phi - (3/2) L(phi^2) - phi^2 / 2 + a = 0.

Constant solutions form two curves; the upper one,

    lambda(mu) = mu/4 + sqrt(mu^2 + 8a)/4,

is the branch every nontrivial wave bifurcates from.  Shifting by it,
phi = lambda(mu) - p turns F into the equivalent form

    Ft(p, mu) = (lambda - mu) p + 3 lambda L(p) - (3/2) L(p^2) - p^2 / 2,

which vanishes identically at p = 0.

Discretely, even profiles are cosine polynomials of degree n/2 and the
residual is computed in Galerkin (coefficient) form.  Squares are
evaluated on a doubled grid, which represents the quadratic product
exactly, so no aliasing enters any retained mode.  The residual is
therefore an exactly quadratic polynomial map of the coefficients, and
the Jacobian assembled here is its exact derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spectral import (
    PeriodicGrid,
    RealField,
    cosine_coefficients,
    field_from_cosine,
)


class SingularHeight(RuntimeError):
    """The wave touched or crossed the maximal height phi = mu.

    Raised whenever an evaluation would require the square root in
    mu - sqrt(mu^2 + 2a - 3 L(phi^2)) to leave the real axis, i.e. the
    state is at or beyond the peaked limit of the smooth regime.
    """


def lambda_of_mu(mu: float, a: float) -> float:
    """Upper constant solution mu/4 + sqrt(mu^2 + 8a)/4."""
    disc = mu * mu + 8.0 * a
    if disc < 0.0:
        raise ValueError(f"mu^2 + 8a = {disc} < 0: no real constant solutions")
    return 0.25 * mu + 0.25 * math.sqrt(disc)


def lambda_prime(mu: float, a: float) -> float:
    """Slope of the constant branch; lies in [1/3, 1/2) for mu >= sqrt(a) > 0."""
    if a <= 0.0:
        raise ValueError(f"a must be positive, got {a}")
    if mu < math.sqrt(a):
        raise ValueError(f"mu = {mu} below sqrt(a) = {math.sqrt(a)}")
    return 0.25 + 0.25 * mu / math.sqrt(mu * mu + 8.0 * a)


@dataclass(frozen=True)
class WaveState:
    """One candidate wave: cosine coefficients plus (mu, a) and diagnostics.

    The cosine representation keeps the profile exactly even with its
    crest (for branch states) at x = 0.  ``phi`` holds the synthesized
    node values; ``residual_norm`` is the sup-norm of the residual at
    acceptance time (NaN until a solver stamps it).
    """

    grid: PeriodicGrid
    coeffs: np.ndarray
    mu: float
    a: float
    residual_norm: float = float("nan")
    allow_nonpositive_a: bool = field(default=False, repr=False, compare=False)
    phi: RealField = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.shape[0] > self.grid.n_modes:
            raise ValueError(
                f"need at most {self.grid.n_modes} cosine coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients contain non-finite entries")
        if c.shape[0] < self.grid.n_modes:
            c = np.concatenate([c, np.zeros(self.grid.n_modes - c.shape[0])])
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"wave speed must be positive, got {self.mu}")
        if self.a <= 0.0 and not self.allow_nonpositive_a:
            raise ValueError(
                "a <= 0 is outside the main branch regime; pass "
                "allow_nonpositive_a=True for boundary-case experiments"
            )
        if self.mu * self.mu + 8.0 * self.a < 0.0:
            raise ValueError("mu^2 + 8a < 0: outside the solution regime")
        object.__setattr__(self, "phi", field_from_cosine(self.grid, c))

    @classmethod
    def from_values(cls, grid: PeriodicGrid, values: np.ndarray, mu: float, a: float,
                    residual_norm: float = float("nan"),
                    allow_nonpositive_a: bool = False) -> "WaveState":
        """Build a state from node values, projecting onto the even part."""
        f = values if isinstance(values, RealField) else RealField(grid, values)
        return cls(grid, cosine_coefficients(f), mu, a, residual_norm, allow_nonpositive_a)

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float, mu: float, a: float,
                 allow_nonpositive_a: bool = False) -> "WaveState":
        c = np.zeros(grid.n_modes)
        c[0] = value
        return cls(grid, c, mu, a, 0.0, allow_nonpositive_a)

    @property
    def crest_height(self) -> float:
        """phi(0) = sum of all cosine coefficients."""
        return float(np.sum(self.coeffs))

    @property
    def trough_height(self) -> float:
        """phi(+-P/2) = alternating sum of cosine coefficients."""
        signs = np.where(np.arange(self.coeffs.shape[0]) % 2 == 0, 1.0, -1.0)
        return float(signs @ self.coeffs)

    @property
    def gap_crest(self) -> float:
        return self.mu - self.crest_height

    @property
    def gap_trough(self) -> float:
        return self.mu - self.trough_height

    def with_residual_norm(self, value: float) -> "WaveState":
        return WaveState(self.grid, self.coeffs, self.mu, self.a, float(value),
                         self.allow_nonpositive_a)

    def is_constant(self, tol: float = 1e-13) -> bool:
        scale = max(1.0, abs(float(self.coeffs[0])))
        return bool(np.max(np.abs(self.coeffs[1:])) <= tol * scale)


@dataclass(frozen=True)
class LinearOperatorRep:
    """Dense derivative of the residual on cosine coefficients."""

    matrix: np.ndarray
    mu: float
    a: float

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# exact quadratic products on the doubled grid
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _fine_cosine_basis(grid: PeriodicGrid) -> np.ndarray:
    """cos(2 pi m x / P) on the doubled grid, one column per retained mode."""
    fine = grid.refined(2)
    modes = np.arange(grid.n_modes)
    return np.cos(np.outer(2.0 * np.pi * fine.nodes / grid.period, modes))


def _on_fine_grid(coeffs: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    fine = grid.refined(2)
    padded = np.zeros(fine.n_modes)
    padded[: coeffs.shape[0]] = coeffs
    return field_from_cosine(fine, padded).values


def _analyze_fine_columns(grid: PeriodicGrid, columns: np.ndarray) -> np.ndarray:
    """Cosine coefficients (modes 0..n) of each doubled-grid column."""
    fine = grid.refined(2)
    nf = fine.n_points
    rolled = np.roll(columns, -fine.center_index, axis=0)
    F = np.fft.rfft(rolled, axis=0)
    c = 2.0 * F.real / nf
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def product_coefficients(coeffs_a: np.ndarray, coeffs_b: np.ndarray,
                         grid: PeriodicGrid) -> np.ndarray:
    """Exact cosine coefficients (modes 0..n) of a product of two fields."""
    va = _on_fine_grid(coeffs_a, grid)
    vb = _on_fine_grid(coeffs_b, grid)
    return _analyze_fine_columns(grid, (va * vb)[:, None])[:, 0]


def square_coefficients(coeffs: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    v = _on_fine_grid(coeffs, grid)
    return _analyze_fine_columns(grid, (v * v)[:, None])[:, 0]


def _nonlinear_multiplier(grid: PeriodicGrid) -> np.ndarray:
    # coefficient-space factor of phi^2 in the residual: (3/2) m(xi) + 1/2
    return 1.5 / (1.0 + grid.wavenumbers**2) + 0.5


# ---------------------------------------------------------------------------
# residual, shifted residual, fixed-point form, Jacobian
# ---------------------------------------------------------------------------

def residual_coefficients(state: WaveState) -> np.ndarray:
    """Galerkin residual of F(phi, mu) on the retained cosine modes."""
    grid = state.grid
    sq = square_coefficients(state.coeffs, grid)[: grid.n_modes]
    rc = state.mu * state.coeffs - _nonlinear_multiplier(grid) * sq
    rc[0] += state.a
    return rc


def residual(state: WaveState) -> RealField:
    """Node values of mu phi - (3/2) L(phi^2) - phi^2/2 + a."""
    return field_from_cosine(state.grid, residual_coefficients(state))


def residual_sup_norm(state: WaveState) -> float:
    return float(np.max(np.abs(residual(state).values)))


def shifted_residual(phi_pert: RealField, mu: float, a: float) -> RealField:
    """Residual of the shifted form; identical to F(lambda(mu) - p, mu)."""
    grid = phi_pert.grid
    lam = lambda_of_mu(mu, a)
    c = cosine_coefficients(phi_pert)
    sq = square_coefficients(c, grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    rc = (lam - mu) * c + 3.0 * lam * m * c - _nonlinear_multiplier(grid) * sq
    return field_from_cosine(grid, rc)


def smoothed_square(state: WaveState) -> RealField:
    """L(phi^2) through the same dealiased pipeline as the residual."""
    grid = state.grid
    sq = square_coefficients(state.coeffs, grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    return field_from_cosine(grid, m * sq)


def fixed_point_map(phi: RealField, mu: float, a: float) -> RealField:
    """One application of phi -> mu - sqrt(mu^2 + 2a - 3 L(phi^2)).

    Fixed points below the wave speed are solutions.  The radicand must
    stay strictly positive; otherwise the state has reached maximal
    height and :class:`SingularHeight` is raised.
    """
    grid = phi.grid
    state_sq = square_coefficients(cosine_coefficients(phi), grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    lsq = field_from_cosine(grid, m * state_sq).values
    radicand = mu * mu + 2.0 * a - 3.0 * lsq
    if np.min(radicand) <= 0.0:
        raise SingularHeight(
            f"3 max L(phi^2) = {float(3.0 * np.max(lsq))} reaches mu^2 + 2a = {mu * mu + 2 * a}"
        )
    return RealField(grid, mu - np.sqrt(radicand))


def jacobian(state: WaveState) -> LinearOperatorRep:
    """Exact derivative of the residual in the cosine coefficients.

    The directional derivative of F at phi is v -> (mu - phi) v - 3 L(phi v);
    columns are assembled per basis mode with the same doubled-grid
    products as the residual, so finite differences of
    :func:`residual_coefficients` reproduce this matrix to round-off.
    """
    grid = state.grid
    basis_fine = _fine_cosine_basis(grid)
    phi_fine = _on_fine_grid(state.coeffs, grid)
    prod = _analyze_fine_columns(grid, phi_fine[:, None] * basis_fine)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    mat = -(1.0 + 3.0 * m)[:, None] * prod
    mat[np.diag_indices_from(mat)] += state.mu
    return LinearOperatorRep(matrix=mat, mu=state.mu, a=state.a)


def residual_mu_derivative(state: WaveState) -> np.ndarray:
    """d(residual)/d(mu) in coefficient space, which is just phi itself."""
    return state.coeffs.copy()
