"""Pseudo-arclength continuation of the bifurcation branch.

The branch starts at a constant state, leaves it along the kernel
cosine mode, and steepens toward the wave of maximal height.  Tracing
proceeds in the extended space (cosine coefficients, mu) with the
resolution-aware metric

    ||(c, mu)||^2 = |c|^2 / n_modes + mu^2,

a secant tangent predictor, and a Newton corrector that solves the
Galerkin residual together with one scalar linear constraint.  The
constraint is what distinguishes the phases of a trace: the first point
pins the kernel-mode amplitude produced by the quadratic seed, interior
steps pin the arclength plane through the predictor, and the gap pin is
available for landing on a prescribed crest gap (used when reproducing
a branch at different step sizes).

Every accepted point must pass the mandatory wave checks (height
sandwich, subcritical height, half-period monotonicity, positive trough
gap) and have residual below the Newton tolerance.  The crest gap
mu - phi(0) is the distance to the peaked limit; it must never increase
along the branch (monitored, aborts loudly if violated) and the trace
terminates once it drops below ``stop_gap``.  The peaked wave itself is
not representable at finite spectral resolution, so ``stop_gap`` is the
honest stand-in for "reached the end of the branch": the limit has a
Lipschitz corner at the crest, outside any smooth cosine truncation.

Steps adapt multiplicatively: growth after fast Newton convergence,
halving after a failure, with a guard that never lets a single
predictor step plan to remove more than a fixed fraction of the
remaining crest gap.  When the spectral tail of an accepted point rises
above ``refine_threshold`` the grid is doubled and the point
re-corrected, so resolution follows the slowly decaying coefficients of
the steepening wave.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .spectral import PeriodicGrid, field_from_cosine
from .equation import (
    SingularHeight,
    WaveState,
    jacobian,
    residual_coefficients,
    residual_mu_derivative,
    square_coefficients,
)
from .bifurcation import BifurcationPoint, LocalBranchModel, local_branch_model, seed_state
from .analysis import WindowTooSmall, crest_exponent, mandatory_failures

log = logging.getLogger(__name__)


class NewtonFailure(RuntimeError):
    """Corrector did not converge within the allotted iterations."""


class BranchMonotonicityError(RuntimeError):
    """The crest gap increased along the branch; tracing is unsound."""


class Termination(enum.Enum):
    GAP_REACHED = "gap_reached"
    MAX_POINTS = "max_points"
    NEWTON_FAILURE = "newton_failure"
    STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class ContinuationConfig:
    """Step sizes, tolerances, and stopping rules for a branch trace."""

    initial_step: float = 1e-3
    min_step: float = 1e-7
    max_step: float = 2e-2
    newton_tol: float = 1e-10
    newton_max_iter: int = 12
    stop_gap: float = 1e-3
    max_points: int = 500
    refine_threshold: float = 1e-10
    max_grid_points: int = 2048
    step_growth: float = 1.3
    fast_iters: int = 3
    gap_fraction_per_step: float = 0.25

    def __post_init__(self):
        if not (0 < self.min_step <= self.initial_step <= self.max_step):
            raise ValueError(
                f"need 0 < min_step <= initial_step <= max_step, got "
                f"{self.min_step}, {self.initial_step}, {self.max_step}"
            )
        for name in ("newton_tol", "stop_gap", "refine_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iter < 1 or self.max_points < 1:
            raise ValueError("newton_max_iter and max_points must be at least 1")
        if not (0 < self.gap_fraction_per_step < 1):
            raise ValueError("gap_fraction_per_step must lie in (0, 1)")


@dataclass(frozen=True)
class BranchPoint:
    """One accepted continuation point with its acceptance diagnostics."""

    state: WaveState
    s_arclength: float
    gap_crest: float
    gap_trough: float
    newton_iters: int
    crest_exponent: float


@dataclass(frozen=True)
class Branch:
    """Ordered trace of a bifurcation branch."""

    points: tuple[BranchPoint, ...]
    bp: BifurcationPoint
    termination: Termination

    @property
    def final(self) -> BranchPoint:
        return self.points[-1]

    @property
    def observed_alternative(self) -> str:
        """Which global alternative the finite trace ran into."""
        if self.termination is Termination.GAP_REACHED:
            return "crest gap closed: approach to the peaked wave of maximal height"
        if not self.points:
            return "no points accepted"
        dmu = self.points[-1].state.mu - self.points[0].state.mu
        return (
            f"stopped by {self.termination.value} with crest gap "
            f"{self.points[-1].gap_crest:.3e} and net speed change {dmu:+.3e}"
        )


# ---------------------------------------------------------------------------
# constraints and the Newton corrector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearConstraint:
    """Scalar equation row . c + mu_coef * mu = target."""

    row: np.ndarray
    mu_coef: float
    target: float
    label: str = ""

    def defect(self, coeffs: np.ndarray, mu: float) -> float:
        return float(self.row @ coeffs + self.mu_coef * mu - self.target)


def pin_mode(grid: PeriodicGrid, mode: int, value: float) -> LinearConstraint:
    row = np.zeros(grid.n_modes)
    row[mode] = 1.0
    return LinearConstraint(row, 0.0, value, label=f"c[{mode}]={value:.3e}")


def pin_mu(grid: PeriodicGrid, value: float) -> LinearConstraint:
    return LinearConstraint(np.zeros(grid.n_modes), 1.0, value, label=f"mu={value:.6e}")


def pin_gap_crest(grid: PeriodicGrid, value: float) -> LinearConstraint:
    # mu - phi(0) = mu - sum(c)
    return LinearConstraint(-np.ones(grid.n_modes), 1.0, value, label=f"gap={value:.3e}")


def _pad_coeffs(c: np.ndarray, n_modes: int) -> np.ndarray:
    if c.shape[0] == n_modes:
        return np.asarray(c, dtype=float)
    out = np.zeros(n_modes)
    out[: c.shape[0]] = c
    return out


def metric_distance(state_a: WaveState, state_b: WaveState) -> float:
    """Branch metric between two states (coefficients scaled by 1/sqrt(m))."""
    m = max(state_a.coeffs.shape[0], state_b.coeffs.shape[0])
    dc = _pad_coeffs(state_a.coeffs, m) - _pad_coeffs(state_b.coeffs, m)
    dmu = state_a.mu - state_b.mu
    return math.sqrt(float(dc @ dc) / m + dmu * dmu)


def arclength_plane(tangent_c: np.ndarray, tangent_mu: float,
                    ref_coeffs: np.ndarray, ref_mu: float) -> LinearConstraint:
    """Plane through the reference point, metric-orthogonal to the tangent."""
    m = tangent_c.shape[0]
    row = tangent_c / m
    target = float(row @ ref_coeffs) + tangent_mu * ref_mu
    return LinearConstraint(row, tangent_mu, target, label="arclength plane")


def newton_correct(guess: WaveState, constraint: LinearConstraint,
                   tol: float = 1e-10, max_iter: int = 12) -> tuple[WaveState, int]:
    """Solve residual = 0 together with one linear constraint.

    Returns the corrected state (residual norm stamped) and the number
    of iterations used.  Raises :class:`SingularHeight` whenever an
    iterate's crest reaches the wave speed, and :class:`NewtonFailure`
    on non-convergence or a numerically singular system.
    """
    grid = guess.grid
    m = grid.n_modes
    if constraint.row.shape[0] != m:
        raise ValueError("constraint dimension does not match the grid")
    c = guess.coeffs.copy()
    mu = guess.mu
    a = guess.a
    state = guess
    for iteration in range(max_iter + 1):
        if float(np.max(state.phi.values)) >= mu:
            raise SingularHeight(
                f"iterate reached maximal height: max phi >= mu = {mu}"
            )
        rc = residual_coefficients(state)
        sup = _values_sup(state, rc)
        defect = constraint.defect(c, mu)
        if sup < tol and abs(defect) < 1e-12 * max(1.0, abs(constraint.target)):
            return state.with_residual_norm(sup), iteration
        if iteration == max_iter:
            raise NewtonFailure(
                f"no convergence in {max_iter} iterations; residual {sup:.3e} "
                f"({constraint.label})"
            )
        system = np.zeros((m + 1, m + 1))
        system[:m, :m] = jacobian(state).matrix
        system[:m, m] = residual_mu_derivative(state)
        system[m, :m] = constraint.row
        system[m, m] = constraint.mu_coef
        rhs = np.concatenate([-rc, [-defect]])
        try:
            delta = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise NewtonFailure(f"singular corrector system: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise NewtonFailure("corrector step is not finite")
        c = c + delta[:m]
        mu = mu + delta[m]
        state = WaveState(grid, c, mu, a)
    raise NewtonFailure("unreachable")


def _values_sup(state: WaveState, rc: np.ndarray) -> float:
    return float(np.max(np.abs(field_from_cosine(state.grid, rc).values)))


def _branch_tangent(prev: BranchPoint, prev2: BranchPoint | None,
                    kernel_index: int) -> tuple[np.ndarray, float]:
    """Unit tangent (in the branch metric) at ``prev``."""
    state = prev.state
    m = state.coeffs.shape[0]
    if prev2 is None:
        tc = np.zeros(m)
        tc[kernel_index] = 1.0
        tmu = 0.0
    else:
        tc = state.coeffs - _pad_coeffs(prev2.state.coeffs, m)
        tmu = state.mu - prev2.state.mu
    norm = math.sqrt(float(tc @ tc) / m + tmu * tmu)
    if norm == 0.0:
        raise ValueError("degenerate tangent: consecutive branch points coincide")
    return tc / norm, tmu / norm


def tangent_predictor(prev: BranchPoint, prev2: BranchPoint | None, step: float,
                      kernel_index: int = 1) -> WaveState:
    """Predict the next state a metric distance ``step`` past ``prev``.

    With two prior points the tangent is their normalized secant; for
    the first continuation step it is the local branch direction (the
    kernel cosine mode, no speed component).
    """
    state = prev.state
    tc, tmu = _branch_tangent(prev, prev2, kernel_index)
    return WaveState(state.grid, state.coeffs + step * tc, state.mu + step * tmu, state.a)


# ---------------------------------------------------------------------------
# branch tracing
# ---------------------------------------------------------------------------

def _spectral_tail_fraction(state: WaveState) -> float:
    c2 = state.coeffs**2
    total = float(np.sum(c2))
    if total == 0.0:
        return 0.0
    cut = int(math.floor(0.9 * c2.shape[0]))
    return float(np.sum(c2[cut:])) / total


def _square_tail_defect(state: WaveState) -> float:
    """Sup-norm bound on the truncated part of the phi^2 series.

    The subcritical-height margin mu^2 + 2a - 3 max L(phi^2) of an exact
    solution equals gap^2, but on the grid it is lowered by the crest
    value of the discarded phi^2 modes.  That tail is computable exactly
    (the doubled-grid product is exact through mode n), so it drives the
    resolution requirement near the peaked limit.
    """
    sq = square_coefficients(state.coeffs, state.grid)
    return float(np.sum(np.abs(sq[state.grid.n_modes:])))


def _needs_refinement(state: WaveState, cfg: ContinuationConfig) -> bool:
    if _spectral_tail_fraction(state) > cfg.refine_threshold:
        return True
    # keep the discrete subcritical-height margin (~ gap^2) clear of the
    # truncation defect while the crest closes in on the wave speed
    return _square_tail_defect(state) > 0.2 * state.gap_crest**2


def _crest_fit_or_nan(state: WaveState) -> float:
    try:
        return crest_exponent(state).exponent
    except WindowTooSmall:
        return float("nan")


def _accept(state: WaveState, iters: int, s_arclength: float,
            newton_tol: float) -> BranchPoint:
    failures = mandatory_failures(state)
    if failures:
        raise NewtonFailure(f"converged state fails mandatory checks: {failures}")
    if not state.residual_norm < newton_tol:
        raise NewtonFailure(f"residual {state.residual_norm} above tolerance")
    return BranchPoint(
        state=state,
        s_arclength=s_arclength,
        gap_crest=state.gap_crest,
        gap_trough=state.gap_trough,
        newton_iters=iters,
        crest_exponent=_crest_fit_or_nan(state),
    )


def _maybe_refine(point: BranchPoint, cfg: ContinuationConfig,
                  kernel_index: int) -> BranchPoint:
    """Double the grid while the resolution triggers fire."""
    while (_needs_refinement(point.state, cfg)
           and point.state.grid.n_points < cfg.max_grid_points):
        fine = point.state.grid.refined(2)
        lifted = WaveState(fine, _pad_coeffs(point.state.coeffs, fine.n_modes),
                           point.state.mu, point.state.a)
        pin = pin_mode(fine, kernel_index, float(point.state.coeffs[kernel_index]))
        try:
            corrected, iters = newton_correct(lifted, pin, cfg.newton_tol,
                                              cfg.newton_max_iter)
        except (NewtonFailure, SingularHeight) as exc:
            log.warning("refinement to n=%d failed (%s); keeping coarse point",
                        fine.n_points, exc)
            return point
        log.info("refined grid to n=%d at gap %.3e", fine.n_points, corrected.gap_crest)
        point = _accept(corrected, iters, point.s_arclength, cfg.newton_tol)
    return point


def _constant_origin(bp: BifurcationPoint, grid: PeriodicGrid) -> WaveState:
    return WaveState.constant(grid, bp.lambda_star, bp.mu_star, bp.a)


def continue_branch(bp: BifurcationPoint, cfg: ContinuationConfig,
                    grid: PeriodicGrid | None = None,
                    model: LocalBranchModel | None = None,
                    warm_points: list[BranchPoint] | None = None,
                    on_point=None) -> Branch:
    """Trace the branch from its bifurcation point toward maximal height.

    ``on_point`` is called with each accepted :class:`BranchPoint`
    immediately after acceptance (immutable snapshots, in order), which
    is how incremental persistence hooks in.  ``warm_points`` restarts
    a trace from previously accepted points.

    A mode-k point bifurcates into P/k-periodic waves, so for k > 1 the
    trace runs on the fundamental circle of circumference P/k (where the
    wave has a single crest and the wave checks apply verbatim); the
    returned branch keeps the original bifurcation point.
    """
    if bp.k > 1:
        reduced = BifurcationPoint(k=1, mu_star=bp.mu_star, lambda_star=bp.lambda_star,
                                   wavenumber=bp.wavenumber, P=bp.P / bp.k, a=bp.a)
        if grid is not None and not math.isclose(grid.period, reduced.P):
            grid = PeriodicGrid(reduced.P, grid.n_points)
        inner = continue_branch(reduced, cfg, grid=grid, model=model,
                                warm_points=warm_points, on_point=on_point)
        return Branch(points=inner.points, bp=bp, termination=inner.termination)

    grid = grid or PeriodicGrid(bp.P, 512)
    points: list[BranchPoint] = list(warm_points or [])

    if not points:
        if model is None:
            model = local_branch_model(bp, grid)
        seed_amp = cfg.initial_step * math.sqrt(grid.n_modes)
        seed_amp = float(min(max(seed_amp, 1e-8), model.validity_radius))
        guess = seed_state(bp, seed_amp, grid, model)
        try:
            corrected, iters = newton_correct(
                guess, pin_mode(grid, bp.k, seed_amp), cfg.newton_tol, cfg.newton_max_iter)
        except (NewtonFailure, SingularHeight) as exc:
            raise NewtonFailure(f"first branch point failed: {exc}") from exc
        origin = _constant_origin(bp, grid)
        first = _accept(corrected, iters, metric_distance(corrected, origin), cfg.newton_tol)
        first = _maybe_refine(first, cfg, bp.k)
        points.append(first)
        if on_point is not None:
            on_point(first)

    step = cfg.initial_step
    termination = Termination.MAX_POINTS
    while True:
        last = points[-1]
        if last.gap_crest < cfg.stop_gap:
            termination = Termination.GAP_REACHED
            break
        if len(points) >= cfg.max_points:
            termination = Termination.MAX_POINTS
            break

        prev2 = points[-2] if len(points) >= 2 else None
        ref_state = prev2.state if prev2 is not None else _constant_origin(bp, last.state.grid)
        dist = metric_distance(last.state, ref_state)
        gap_drop_rate = (ref_state.gap_crest - last.gap_crest) / dist if dist > 0 else 0.0

        # never plan to consume more than a fraction of the remaining gap,
        # but once within reach, aim just past the stopping threshold
        step_cap = math.inf
        if gap_drop_rate > 0:
            remaining = last.gap_crest - 0.9 * cfg.stop_gap
            budget = cfg.gap_fraction_per_step * last.gap_crest
            step_cap = max(min(budget, remaining) / gap_drop_rate, cfg.min_step)
        trial = min(step, step_cap)

        accepted = None
        while True:
            try:
                tc, tmu = _branch_tangent(last, prev2, bp.k)
                predictor = WaveState(last.state.grid, last.state.coeffs + trial * tc,
                                      last.state.mu + trial * tmu, last.state.a)
                plane = arclength_plane(tc, tmu, predictor.coeffs, predictor.mu)
                corrected, iters = newton_correct(predictor, plane,
                                                  cfg.newton_tol, cfg.newton_max_iter)
                advance = metric_distance(corrected, last.state)
                if advance <= 0.0:
                    raise NewtonFailure("corrector returned the previous point")
                candidate = _accept(corrected, iters, last.s_arclength + advance,
                                    cfg.newton_tol)
                accepted = candidate
                break
            except (NewtonFailure, SingularHeight) as exc:
                log.debug("step %.3e rejected: %s", trial, exc)
                trial *= 0.5
                if trial < cfg.min_step:
                    break

        if accepted is None:
            termination = (Termination.STEP_UNDERFLOW
                           if trial < cfg.min_step else Termination.NEWTON_FAILURE)
            break

        if accepted.gap_crest > last.gap_crest + 1e-12 * max(1.0, last.gap_crest):
            raise BranchMonotonicityError(
                f"crest gap rose from {last.gap_crest:.6e} to {accepted.gap_crest:.6e} "
                f"at arclength {accepted.s_arclength:.6e}"
            )

        accepted = _maybe_refine(accepted, cfg, bp.k)
        points.append(accepted)
        if on_point is not None:
            on_point(accepted)

        if iters <= cfg.fast_iters:
            step = min(trial * cfg.step_growth, cfg.max_step)
        else:
            step = max(trial, cfg.min_step)

    return Branch(points=tuple(points), bp=bp, termination=termination)
