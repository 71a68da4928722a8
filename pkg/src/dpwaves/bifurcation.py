"""Bifurcation points on the constant branch and the local branch model.

Linearizing the shifted equation at the constant state gives the
operator (lambda(mu) - mu) id + 3 lambda(mu) L, whose kernel on
P-periodic even functions is one-dimensional exactly when

    sqrt((4 lambda(mu) - mu) / (mu - lambda(mu))) = 2 k pi / P

for some integer k >= 1.  The left side (the ``dispersion`` function
here) decreases strictly from +infinity to sqrt(2) as mu runs over
(sqrt(a), infinity), so each mode k with 2 k pi / P > sqrt(2) selects a
unique speed mu_k.  Squaring the relation gives the closed form

    mu_k = sqrt(a) (q^2 + 4) / sqrt((q^2 - 2)(q^2 + 1)),   q = 2 k pi / P,

used by the tests as an independent oracle; the solver below finds the
root by bracketed bisection as befits a monotone function.

Around a bifurcation point the branch behaves like

    phi(s)  = lambda(mu(s)) + s cos(q x) - (s^2/2) psi2(x) + O(s^3),
    mu(s)   = mu_star + (s^2/2) mu_ddot + O(s^4),

after re-centering the crest at x = 0 (the raw kernel direction has its
maximum at +-P/2; a half-period translation flips the sign of odd
cosine modes only).  The shape correction psi2 contains cosine modes 0
and 2 only:

    psi2 = 2 / (4 lambda - mu)
         + [1/2 + 3/(2 (1 + 4 q^2))] / [(lambda - mu) + 3 lambda / (1 + 4 q^2)] cos(2 q x).

Both coefficients follow from inverting the linearized operator on the
right-hand side (cos(q .))^2 + 3 L((cos(q .))^2); the mode-0 eigenvalue
is 4 lambda - mu because L fixes constants.  second_order_shape also
recomputes psi2 by solving the dense linear system and insists the two
routes agree, which pins down the algebra independently.

The curvature of the speed along the branch is

    mu_ddot = C (1 + 3/(1 + q^2)) / (lambda'(mu)(1 + 3/(1 + q^2)) - 1),

with C = c0 + c2/2 the cos(q x) coefficient of phi_star psi2.  The
denominator cannot vanish: it would need lambda'(mu) = lambda(mu)/mu,
impossible since the slopes lie in (1/3, 1/2) while the secants lie in
(1/2, 1).  C itself vanishes only where lambda(mu)/mu = 2/3, i.e. at
the isolated combination q^2 = 5; away from it the branch is a genuine
pitchfork in mu.  Everything here is cross-checked against a fitted
quadratic of the actually-continued branch in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    PeriodicGrid,
    RealField,
    cosine_coefficients,
    field_from_cosine,
    inner_product,
)
from .equation import (
    WaveState,
    jacobian,
    lambda_of_mu,
    lambda_prime,
    product_coefficients,
    residual,
    square_coefficients,
)

SQRT2 = math.sqrt(2.0)

DEFAULT_GRID_POINTS = 512


class NoBifurcation(ValueError):
    """Requested mode lies below the 2 k pi / P > sqrt(2) threshold."""


class InternalError(RuntimeError):
    """Cross-validation inside an operation failed; indicates a bug."""


def dispersion(mu: float, a: float) -> float:
    """sqrt((4 lambda - mu)/(mu - lambda)); strictly decreasing in mu.

    Defined for a >= 0 and mu > sqrt(a), where mu > lambda(mu) and
    4 lambda(mu) > mu.  Tends to +infinity as mu decreases to sqrt(a)
    and to sqrt(2) as mu grows without bound.  At the boundary a = 0
    the constant branch is lambda = mu/2 and the value is exactly
    sqrt(2) for every positive speed.
    """
    if a < 0.0:
        raise ValueError(f"a must be non-negative, got {a}")
    if mu <= math.sqrt(a):
        raise ValueError(f"mu = {mu} must exceed sqrt(a) = {math.sqrt(a)}")
    lam = lambda_of_mu(mu, a)
    return math.sqrt((4.0 * lam - mu) / (mu - lam))


@dataclass(frozen=True)
class BifurcationPoint:
    """Mode-k bifurcation point on the constant branch."""

    k: int
    mu_star: float
    lambda_star: float
    wavenumber: float
    P: float
    a: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"mode number must be a positive integer, got {self.k}")
        if self.wavenumber <= SQRT2:
            raise NoBifurcation(
                f"2 k pi / P = {self.wavenumber} does not exceed sqrt(2); no bifurcation"
            )
        gap = dispersion(self.mu_star, self.a) - self.wavenumber
        if abs(gap) > 1e-9 * max(1.0, self.wavenumber):
            raise ValueError(f"dispersion relation violated by {gap} at mu = {self.mu_star}")


def bifurcation_mu(k: int, P: float, a: float) -> BifurcationPoint:
    """Locate the unique mu_k with dispersion(mu_k, a) = 2 k pi / P.

    Bracketed bisection (the dispersion function is strictly monotone,
    so the bracket is guaranteed) down to relative width ~1e-13,
    followed by secant polishing of the dispersion equation.
    """
    if P <= 0 or not math.isfinite(P):
        raise ValueError(f"period must be positive and finite, got {P}")
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    if k < 1 or k != int(k):
        raise ValueError(f"mode number must be a positive integer, got {k}")
    target = 2.0 * math.pi * k / P
    if target <= SQRT2:
        raise NoBifurcation(
            f"mode k={k} needs 2 k pi / P > sqrt(2), got {target:.6f} at P={P}"
        )

    root_a = math.sqrt(a)
    lo = root_a * (1.0 + 1e-12)
    while dispersion(lo, a) <= target:  # pathological rounding guard
        lo = root_a + (lo - root_a) * 0.5
    hi = max(2.0 * root_a, 1.0)
    while dispersion(hi, a) > target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if dispersion(mid, a) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    mu = 0.5 * (lo + hi)
    # secant polish on g(mu) = dispersion(mu) - target
    g_mu = dispersion(mu, a) - target
    mu_prev, g_prev = lo, dispersion(lo, a) - target
    for _ in range(8):
        if g_mu == 0.0 or g_mu == g_prev:
            break
        step = g_mu * (mu - mu_prev) / (g_mu - g_prev)
        mu_prev, g_prev = mu, g_mu
        mu = mu - step
        g_mu = dispersion(mu, a) - target
        if abs(g_mu) < 1e-13 * max(1.0, target):
            break
    return BifurcationPoint(
        k=int(k),
        mu_star=float(mu),
        lambda_star=lambda_of_mu(mu, a),
        wavenumber=target,
        P=float(P),
        a=float(a),
    )


def default_grid(bp: BifurcationPoint, n_points: int | None = None) -> PeriodicGrid:
    return PeriodicGrid(bp.P, n_points or DEFAULT_GRID_POINTS)


def kernel_mode(bp: BifurcationPoint, grid: PeriodicGrid) -> RealField:
    """The normalized kernel direction cos(2 k pi x / P) on the grid."""
    c = np.zeros(grid.n_modes)
    c[bp.k] = 1.0
    return field_from_cosine(grid, c)


def mixed_derivative_projection(bp: BifurcationPoint) -> float:
    """Projection of the mixed second derivative on the kernel direction.

    Equals lambda'(mu*) (1 + 3/(1 + q^2)) - 1 with q the bifurcation
    wavenumber; nonzero on the whole admissible range, negative in
    practice since lambda' < 1/2.
    """
    q2 = bp.wavenumber**2
    return lambda_prime(bp.mu_star, bp.a) * (1.0 + 3.0 / (1.0 + q2)) - 1.0


def mu_dot_zero_check(bp: BifurcationPoint, grid: PeriodicGrid | None = None) -> float:
    """Numerically evaluate the first branch-slope coefficient (expected 0).

    Returns -1/2 <(phi*)^2 + 3 L((phi*)^2) projected on phi*> divided by
    the mixed-derivative projection, with the projection formed by grid
    quadrature.  The numerator carries only even cosine modes (a cubed
    cosine integrates to zero), so the quotient vanishes to round-off.
    """
    grid = grid or default_grid(bp)
    phistar = kernel_mode(bp, grid)
    ek = np.zeros(grid.n_modes)
    ek[bp.k] = 1.0
    sq = square_coefficients(ek, grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    rhs = field_from_cosine(grid, -(sq + 3.0 * m * sq))
    # quadrature form of (2/P) int rhs phi*
    num = 2.0 / grid.n_points * float(rhs.values @ phistar.values)
    return -0.5 * num / mixed_derivative_projection(bp)


def second_order_coefficients(bp: BifurcationPoint) -> tuple[float, float]:
    """Closed-form cosine coefficients (c0, c2 at mode 2k) of psi2.

    c0 = 2 / (4 lambda - mu), the constant-mode eigenvalue being
    4 lambda - mu because L fixes constants; c2 divides the cosine
    coefficient of (phi*)^2 + 3 L((phi*)^2) by the mode-2k eigenvalue.
    Always c0 > 0 and c2 < 0 on the admissible range.
    """
    mu, lam, q = bp.mu_star, bp.lambda_star, bp.wavenumber
    c0 = 2.0 / (4.0 * lam - mu)
    rhs2 = 0.5 + 1.5 / (1.0 + 4.0 * q * q)
    eig2 = (lam - mu) + 3.0 * lam / (1.0 + 4.0 * q * q)
    return c0, rhs2 / eig2


def second_order_shape(bp: BifurcationPoint, grid: PeriodicGrid | None = None,
                       cross_check_tol: float = 1e-10) -> RealField:
    """Second-order shape correction psi2, with a built-in cross check.

    Computes the closed form c0 + c2 cos(4 k pi x / P) and, separately,
    solves the linearized system on the non-kernel modes for the same
    object.  Raises :class:`InternalError` if the two routes disagree
    beyond ``cross_check_tol`` or the restricted solve is singular.
    """
    grid = grid or default_grid(bp)
    if 2 * bp.k >= grid.n_modes:
        raise ValueError(f"grid with {grid.n_modes} modes cannot hold mode {2 * bp.k}")
    c0, c2 = second_order_coefficients(bp)
    closed = np.zeros(grid.n_modes)
    closed[0] = c0
    closed[2 * bp.k] = c2

    # independent route: restrict the constant-state linearization to the
    # complement of the kernel mode and solve against the quadratic term
    ek = np.zeros(grid.n_modes)
    ek[bp.k] = 1.0
    sq = square_coefficients(ek, grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    rhs = sq + 3.0 * m * sq
    const_state = WaveState.constant(grid, bp.lambda_star, bp.mu_star, bp.a)
    shifted_jac = -jacobian(const_state).matrix
    keep = np.arange(grid.n_modes) != bp.k
    sub = shifted_jac[np.ix_(keep, keep)]
    try:
        solved_part = np.linalg.solve(sub, rhs[keep])
    except np.linalg.LinAlgError as exc:
        raise InternalError(f"restricted linearized solve is singular: {exc}") from exc
    solved = np.zeros(grid.n_modes)
    solved[keep] = solved_part

    gap = float(np.max(np.abs(solved - closed)))
    if gap > cross_check_tol * max(1.0, abs(c0), abs(c2)):
        raise InternalError(
            f"closed-form and linear-solve shape corrections differ by {gap}"
        )
    return field_from_cosine(grid, closed)


def cubic_term_projection(bp: BifurcationPoint, grid: PeriodicGrid | None = None) -> float:
    """Grid-quadrature projection <phi* psi2 + 3 L(phi* psi2), phi*>.

    Equals C (1 + 3/(1 + q^2)) with C = c0 + c2/2 from the symbolic
    product-to-sum expansion; used to cross-check mu_ddot assembly.
    """
    grid = grid or default_grid(bp)
    psi2 = second_order_shape(bp, grid)
    phistar = kernel_mode(bp, grid)
    prod = product_coefficients(cosine_coefficients(psi2), cosine_coefficients(phistar),
                                grid)[: grid.n_modes]
    m = 1.0 / (1.0 + grid.wavenumbers**2)
    total = field_from_cosine(grid, prod + 3.0 * m * prod)
    return inner_product(total, phistar)


def mu_ddot(bp: BifurcationPoint) -> float:
    """Branch curvature of the wave speed at the bifurcation point.

    mu(s) = mu* + (s^2/2) mu_ddot + O(s^4) along the branch, with s the
    amplitude of the kernel cosine mode.  Nonzero except at the isolated
    degenerate wavenumber q^2 = 5 (where lambda(mu)/mu passes 2/3).
    """
    c0, c2 = second_order_coefficients(bp)
    q2 = bp.wavenumber**2
    amp = 1.0 + 3.0 / (1.0 + q2)
    C = c0 + 0.5 * c2
    return C * amp / mixed_derivative_projection(bp)


@dataclass(frozen=True)
class LocalBranchModel:
    """Quadratic branch model at a bifurcation point.

    ``psi2`` is even, orthogonal to the kernel mode, and contains cosine
    modes 0 and 2k only.  ``validity_radius`` is the heuristic largest
    amplitude at which the seeded state is still worth handing to the
    Newton corrector.
    """

    bp: BifurcationPoint
    mu_ddot: float
    psi2: RealField
    validity_radius: float

    def __post_init__(self):
        if self.mu_ddot == 0.0:
            raise ValueError("degenerate branch: mu_ddot vanished")
        if self.validity_radius <= 0.0:
            raise ValueError(f"validity radius must be positive, got {self.validity_radius}")


def seed_state(bp: BifurcationPoint, s: float, grid: PeriodicGrid | None = None,
               model: LocalBranchModel | None = None) -> WaveState:
    """Second-order seed for the branch at kernel amplitude ``s``.

    Crest re-centered at x = 0 (half-period translation of the raw
    kernel direction, flipping the sign of odd modes), constant mode
    tracking lambda along the shifted speed mu* + (s^2/2) mu_ddot; the
    residual of the result is O(s^3).  The sign of s is immaterial after
    re-centering, so |s| is used.
    """
    grid = grid or default_grid(bp)
    s = abs(float(s))
    curvature = model.mu_ddot if model is not None else mu_ddot(bp)
    c0, c2 = second_order_coefficients(bp)
    mu_s = bp.mu_star + 0.5 * s * s * curvature
    coeffs = np.zeros(grid.n_modes)
    coeffs[0] = lambda_of_mu(mu_s, bp.a) - 0.5 * s * s * c0
    coeffs[bp.k] = s
    coeffs[2 * bp.k] = -0.5 * s * s * c2
    state = WaveState(grid, coeffs, mu_s, bp.a)
    sup = float(np.max(np.abs(residual(state).values)))
    return state.with_residual_norm(sup)


def local_branch_model(bp: BifurcationPoint, grid: PeriodicGrid | None = None) -> LocalBranchModel:
    """Assemble psi2, mu_ddot, and a validity radius for seeding."""
    grid = grid or default_grid(bp)
    psi2 = second_order_shape(bp, grid)
    curvature = mu_ddot(bp)
    gap0 = bp.mu_star - bp.lambda_star

    # seed residual grows ~ rho3 s^3 while the wave height is ~ 2 s; accept
    # seeds while the residual stays under 1e-3 of the height.  The second
    # pass re-measures rho3 at the candidate radius, where quartic terms
    # already contribute.
    radius = 0.8 * gap0
    probe = min(1e-2, 0.1 * gap0)
    for _ in range(2):
        rho3 = seed_state(bp, probe, grid).residual_norm / probe**3
        if rho3 <= 0.0 or not math.isfinite(rho3):
            break
        radius = float(min(max(math.sqrt(2e-3 / rho3), 1e-6), 0.8 * gap0))
        probe = radius
    return LocalBranchModel(bp=bp, mu_ddot=curvature, psi2=psi2, validity_radius=radius)
