"""Command-line interface: batch tracing, verification, and export.

Subcommands: ``bif-points``, ``trace``, ``verify``, ``export``,
``cuspon-demo``.  Exit codes: 0 success, 1 verification failure,
2 usage/configuration error, 3 numerical failure.  The environment
variable ``DPWAVES_LOG`` selects log verbosity (DEBUG/INFO/WARNING).

This is the only module with side effects; all numeric parameters are
validated before any output file is created.
"""

from __future__ import annotations

import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .spectral import PeriodicGrid
from .equation import SingularHeight
from .bifurcation import (
    NoBifurcation,
    bifurcation_mu,
    dispersion,
    local_branch_model,
    seed_state,
)
from .continuation import (
    Branch,
    BranchMonotonicityError,
    ContinuationConfig,
    NewtonFailure,
    continue_branch,
)
from . import branchio
from .branchio import SchemaError
from .analysis import (
    CheckStatus,
    cuspon_expected_value,
    cuspon_pairing_demo,
    standard_test_functions,
    verify_branch,
)

log = logging.getLogger(__name__)

FLOAT_FMT = "%.17g"

EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (NewtonFailure, SingularHeight, BranchMonotonicityError,
                     np.linalg.LinAlgError)


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise click.UsageError(f"cannot parse float list {text!r}: {exc}") from exc


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise click.UsageError(f"cannot parse integer list {text!r}: {exc}") from exc


@click.group()
def main():
    """Tools for periodic traveling waves of the nonlocal shallow-water model."""
    level = os.environ.get("DPWAVES_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# bif-points
# ---------------------------------------------------------------------------

@main.command("bif-points")
@click.option("--period", default=1.0, show_default=True, help="Circle circumference P.")
@click.option("--a", "a_const", default=1.0, show_default=True,
              help="Integration constant a > 0.")
@click.option("--k-max", default=5, show_default=True, help="Largest mode to report.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the table to this file.")
def cmd_bif_points(period: float, a_const: float, k_max: int, out: Path | None):
    """Bifurcation speeds mu_k on the constant branch for modes k <= k-max."""
    if period <= 0 or a_const <= 0 or k_max < 1:
        raise click.UsageError("need period > 0, a > 0, k-max >= 1")
    rows = []
    admissible = 0
    for k in range(1, k_max + 1):
        wavenumber = 2.0 * math.pi * k / period
        try:
            bp = bifurcation_mu(k, period, a_const)
        except NoBifurcation:
            rows.append(f"{k:4d}  {_fmt(wavenumber):>24s}  inadmissible (2 k pi / P <= sqrt(2))")
            continue
        admissible += 1
        resid = dispersion(bp.mu_star, a_const) - bp.wavenumber
        rows.append(
            f"{k:4d}  {_fmt(wavenumber):>24s}  {_fmt(bp.mu_star):>24s}  "
            f"{_fmt(bp.lambda_star):>24s}  {resid:+.3e}"
        )
    header = (f"# P={_fmt(period)} a={_fmt(a_const)}\n"
              f"#  k  {'2 k pi / P':>24s}  {'mu_k':>24s}  {'lambda(mu_k)':>24s}  dispersion residual")
    table = "\n".join([header] + rows)
    if admissible == 0:
        table += "\n# no admissible modes: every 2 k pi / P is at or below sqrt(2)"
    click.echo(table)
    if out is not None:
        out.write_text(table + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

def _build_config(grid_points, stop_gap, newton_tol, seed_amplitude, max_points) -> ContinuationConfig:
    kwargs = dict(stop_gap=stop_gap, newton_tol=newton_tol, max_points=max_points)
    if seed_amplitude is not None:
        if seed_amplitude <= 0:
            raise click.UsageError("seed amplitude must be positive")
        n_modes = grid_points // 2 + 1
        kwargs["initial_step"] = seed_amplitude / math.sqrt(n_modes)
    try:
        return ContinuationConfig(**kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _trace_one(period: float, a_const: float, k: int, grid_points: int,
               cfg: ContinuationConfig, out_path: Path, resume: bool) -> Branch:
    bp = bifurcation_mu(k, period, a_const)
    grid = PeriodicGrid(period, grid_points)
    warm = None
    mode = "w"
    if resume and out_path.exists():
        warm = branchio.read_branch_points(out_path, tolerate_truncated_tail=True)
        if warm:
            # drop any partial tail line by rewriting the complete records
            with open(out_path, "w", encoding="utf-8") as fh:
                for p in warm:
                    branchio.write_record(fh, p)
            mode = "a"
            log.info("resuming from %d records in %s", len(warm), out_path)
        else:
            warm = None
    with open(out_path, mode, encoding="utf-8") as fh:
        branch = continue_branch(
            bp, cfg, grid=grid, warm_points=warm,
            on_point=lambda point: branchio.write_record(fh, point),
        )
    return branch


def _trace_worker(args):
    period, a_const, k, grid_points, cfg, out_path, resume = args
    branch = _trace_one(period, a_const, k, grid_points, cfg, Path(out_path), resume)
    final = branch.final
    return (f"P={_fmt(period)} a={_fmt(a_const)} k={k}: {branch.termination.value} "
            f"after {len(branch.points)} points; gap_crest={_fmt(final.gap_crest)} "
            f"gap_trough={_fmt(final.gap_trough)} crest_exponent={_fmt(final.crest_exponent)} "
            f"-> {out_path}")


@main.command("trace")
@click.option("--period", default="1.0", show_default=True,
              help="Circumference P (comma list sweeps).")
@click.option("--a", "a_const", default="1.0", show_default=True,
              help="Integration constant a > 0 (comma list sweeps).")
@click.option("--mode-k", default="1", show_default=True,
              help="Bifurcation mode k (comma list sweeps).")
@click.option("--grid", "grid_points", default=512, show_default=True,
              help="Collocation points (even, >= 8).")
@click.option("--stop-gap", default=1e-3, show_default=True,
              help="Terminate once mu - phi(0) falls below this.")
@click.option("--newton-tol", default=1e-10, show_default=True,
              help="Sup-norm residual tolerance of the corrector.")
@click.option("--seed-amplitude", type=float, default=None,
              help="Kernel-mode amplitude of the first point (default from step size).")
@click.option("--max-points", default=500, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("branch.ndjson"),
              show_default=True, help="Output file (directory when sweeping).")
@click.option("--jobs", default=1, show_default=True,
              help="Parallel workers for parameter sweeps.")
@click.option("--resume", is_flag=True, help="Continue from the last complete record.")
@click.option("--dry-run", is_flag=True, help="Validate the configuration and exit.")
def cmd_trace(period, a_const, mode_k, grid_points, stop_gap, newton_tol,
              seed_amplitude, max_points, out: Path, jobs, resume, dry_run):
    """Trace bifurcation branches toward the wave of maximal height."""
    periods = _parse_floats(period)
    a_values = _parse_floats(a_const)
    modes = _parse_ints(mode_k)
    if not periods or not a_values or not modes:
        raise click.UsageError("empty parameter list")
    if any(p <= 0 for p in periods) or any(av <= 0 for av in a_values):
        raise click.UsageError("period and a must be positive (a <= 0 has no branch to trace)")
    if grid_points < 8 or grid_points % 2:
        raise click.UsageError("grid must be an even integer >= 8")
    cfg = _build_config(grid_points, stop_gap, newton_tol, seed_amplitude, max_points)

    combos = [(p, av, k) for p in periods for av in a_values for k in modes]
    # validate every bifurcation point before creating any file
    for p, av, k in combos:
        try:
            bifurcation_mu(k, p, av)
        except (NoBifurcation, ValueError) as exc:
            raise click.UsageError(str(exc)) from exc

    if dry_run:
        for p, av, k in combos:
            bp = bifurcation_mu(k, p, av)
            click.echo(f"P={_fmt(p)} a={_fmt(av)} k={k}: mu*={_fmt(bp.mu_star)} "
                       f"lambda*={_fmt(bp.lambda_star)} (dry run, nothing traced)")
        return

    if len(combos) == 1:
        out.parent.mkdir(parents=True, exist_ok=True)
        p, av, k = combos[0]
        try:
            click.echo(_trace_worker((p, av, k, grid_points, cfg, str(out), resume)))
        except _NUMERICAL_ERRORS as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)
        return

    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for p, av, k in combos:
        name = f"branch_P{p:g}_a{av:g}_k{k}.ndjson"
        tasks.append((p, av, k, grid_points, cfg, str(out / name), resume))
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for line in pool.map(_trace_worker, tasks):
                    click.echo(line)
        else:
            for task in tasks:
                click.echo(_trace_worker(task))
    except _NUMERICAL_ERRORS as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

@main.command("verify")
@click.argument("branch_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--report-format", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
def cmd_verify(branch_file: Path, report_format: str):
    """Run the wave-property checks on every record of a branch file.

    Exits 1 if any mandatory check fails, 2 on a schema error.
    """
    try:
        records = branchio.read_records(branch_file)
    except SchemaError as exc:
        click.echo(f"schema error in {branch_file}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    if not records:
        click.echo(f"{branch_file} contains no records", err=True)
        sys.exit(EXIT_USAGE)
    states = [branchio.record_to_state(r) for r in records]
    reports, summary = verify_branch(states)

    if report_format == "json":
        import json

        payload = {
            "file": str(branch_file),
            "points": [r.to_dict() for r in reports],
            "summary": summary.to_dict(),
        }
        click.echo(json.dumps(payload, indent=2))
    else:
        for i, (rec, rep) in enumerate(zip(records, reports)):
            status = "PASS" if rep.overall else "FAIL"
            parts = []
            for c in rep.checks:
                mark = {"pass": "+", "fail": "!", "not_applicable": "."}[c.status.value]
                parts.append(f"{mark}{c.name}")
            click.echo(f"point {i:4d} gap={_fmt(rec['gap_crest'])} mu={_fmt(rec['mu'])} "
                       f"[{status}] {' '.join(parts)}")
        click.echo("summary:")
        for c in summary.checks:
            click.echo(f"  {c.name}: {c.status.value} (measured {_fmt(c.measured)})")

    ok = all(r.overall for r in reports) and summary.overall \
        and all(c.status is not CheckStatus.FAIL for c in summary.checks)
    if not ok:
        sys.exit(EXIT_VERIFICATION)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _select_profile_indices(n: int, count: int = 5) -> list[int]:
    if n <= count:
        return list(range(n))
    positions = np.linspace(0, n - 1, count)
    return sorted({int(round(p)) for p in positions})


@main.command("export")
@click.argument("branch_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["columns", "svg"]), default="columns",
              show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("export"),
              show_default=True, help="Output directory.")
@click.option("--profiles", default=5, show_default=True,
              help="Number of wave profiles to export along the branch.")
def cmd_export(branch_file: Path, fmt: str, out: Path, profiles: int):
    """Write plot-ready profile, branch-diagram, and crest-trend files."""
    try:
        records = branchio.read_records(branch_file)
    except SchemaError as exc:
        click.echo(f"schema error in {branch_file}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    if not records:
        click.echo(f"{branch_file} contains no records", err=True)
        sys.exit(EXIT_USAGE)
    out.mkdir(parents=True, exist_ok=True)
    states = [branchio.record_to_state(r) for r in records]

    # wave profiles at selected branch points
    chosen = _select_profile_indices(len(states), profiles)
    profile_paths = []
    for idx in chosen:
        st = states[idx]
        path = out / f"profile_{idx:04d}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# x phi  (P={_fmt(st.grid.period)} mu={_fmt(st.mu)} "
                     f"a={_fmt(st.a)} gap={_fmt(records[idx]['gap_crest'])})\n")
            for x, v in zip(st.grid.nodes, st.phi.values):
                fh.write(f"{_fmt(x)} {_fmt(v)}\n")
        profile_paths.append(path)

    # branch diagram (gap_crest, mu) plus the local quadratic model overlay
    first = records[0]
    bp = bifurcation_mu(_infer_mode(records), first["P"], first["a"])
    model = local_branch_model(bp, states[0].grid)
    s_grid = np.linspace(0.0, model.validity_radius, 64)
    overlay = [seed_state(bp, s, states[0].grid, model) for s in s_grid]
    branch_path = out / "branch_diagram.txt"
    with open(branch_path, "w", encoding="utf-8") as fh:
        fh.write("# gap_crest mu s_arclength gap_trough\n")
        for r in records:
            fh.write(f"{_fmt(r['gap_crest'])} {_fmt(r['mu'])} "
                     f"{_fmt(r['s_arclength'])} {_fmt(r['gap_trough'])}\n")
    parabola_path = out / "branch_parabola.txt"
    with open(parabola_path, "w", encoding="utf-8") as fh:
        fh.write("# gap_crest mu  (local quadratic model mu* + s^2/2 mu_ddot)\n")
        for st in overlay:
            fh.write(f"{_fmt(st.gap_crest)} {_fmt(st.mu)}\n")

    # crest exponent trend
    trend_path = out / "crest_exponent.txt"
    with open(trend_path, "w", encoding="utf-8") as fh:
        fh.write("# gap_crest crest_exponent\n")
        for r in records:
            e = r["crest_exponent"]
            fh.write(f"{_fmt(r['gap_crest'])} {_fmt(float('nan') if e is None else e)}\n")

    written = profile_paths + [branch_path, parabola_path, trend_path]
    if fmt == "svg":
        written += _export_svg(out, records, states, chosen, overlay)
    for path in written:
        click.echo(str(path))


def _infer_mode(records: list[dict]) -> int:
    # the dominant cosine mode of the smallest-amplitude record
    c = np.abs(np.asarray(records[0]["cosine_coeffs"], dtype=float))
    return max(1, int(np.argmax(c[1:]) + 1))


def _export_svg(out: Path, records, states, chosen, overlay) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for idx in chosen:
        st = states[idx]
        ax.plot(st.grid.nodes, st.phi.values,
                label=f"gap={records[idx]['gap_crest']:.2e}")
    ax.set_xlabel("x")
    ax.set_ylabel("phi")
    ax.legend(fontsize=7)
    ax.set_title("wave profiles along the branch")
    p = out / "profiles.svg"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r["gap_crest"] for r in records], [r["mu"] for r in records],
            "o-", ms=3, label="traced branch")
    ax.plot([st.gap_crest for st in overlay], [st.mu for st in overlay],
            "--", label="local quadratic model")
    ax.set_xlabel("mu - phi(0)")
    ax.set_ylabel("mu")
    ax.invert_xaxis()
    ax.legend()
    ax.set_title("branch diagram")
    p = out / "branch_diagram.svg"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    gs = [r["gap_crest"] for r in records]
    es = [float("nan") if r["crest_exponent"] is None else r["crest_exponent"]
          for r in records]
    ax.semilogx(gs, es, "o-", ms=3)
    ax.set_xlabel("mu - phi(0)")
    ax.set_ylabel("crest exponent")
    ax.invert_xaxis()
    ax.set_title("crest regularity along the branch")
    p = out / "crest_exponent.svg"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# cuspon-demo
# ---------------------------------------------------------------------------

@main.command("cuspon-demo")
@click.option("--half-width", default=12.0, show_default=True,
              help="Half-width of the integration window.")
@click.option("--grid", "n_intervals", default=1 << 20, show_default=True,
              help="Number of quadrature intervals (even).")
@click.option("--tol", default=1e-6, show_default=True,
              help="Acceptable |quadrature - 2 test'(0)|.")
def cmd_cuspon_demo(half_width: float, n_intervals: int, tol: float):
    """Distributional pairing for the cusped profile sqrt(1 - exp(-2|x|)).

    The pairing returns 2 test'(0) instead of 0, showing the cusp hides
    a point mass: the profile is not a weak solution.
    """
    if n_intervals % 2 or n_intervals < 2:
        raise click.UsageError("grid must be a positive even integer")
    worst = 0.0
    click.echo(f"{'test function':>14s} {'quadrature':>24s} {'2 test_prime(0)':>24s} {'error':>10s}")
    for fn in standard_test_functions():
        got = cuspon_pairing_demo(fn, half_width=half_width, n_intervals=n_intervals)
        want = cuspon_expected_value(fn)
        err = abs(got - want)
        worst = max(worst, err)
        click.echo(f"{fn.name:>14s} {_fmt(got):>24s} {_fmt(want):>24s} {err:10.3e}")
    click.echo(f"max error {worst:.3e} (tolerance {tol:g})")
    if worst > tol:
        sys.exit(EXIT_VERIFICATION)


if __name__ == "__main__":
    main()
