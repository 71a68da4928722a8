import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpwaves.bifurcation import BifurcationPoint, bifurcation_mu
from dpwaves.continuation import Branch, ContinuationConfig, continue_branch
from dpwaves.spectral import PeriodicGrid


@dataclass(frozen=True)
class TimedBranch:
    branch: Branch
    elapsed: float
    cfg: ContinuationConfig


@pytest.fixture(scope="session")
def bp_desk() -> BifurcationPoint:
    return bifurcation_mu(1, 1.0, 1.0)


@pytest.fixture(scope="session")
def grid_desk() -> PeriodicGrid:
    return PeriodicGrid(1.0, 512)


@pytest.fixture(scope="session")
def desk_branch(bp_desk) -> TimedBranch:
    """The standard desk-scale trace: P=1, a=1, k=1, stop gap 1e-3."""
    cfg = ContinuationConfig()
    start = time.time()
    branch = continue_branch(bp_desk, cfg)
    return TimedBranch(branch=branch, elapsed=time.time() - start, cfg=cfg)


@pytest.fixture(scope="session")
def desk_branch_halved(bp_desk, desk_branch) -> TimedBranch:
    """Same trace with every step size halved (reproducibility checks)."""
    base = desk_branch.cfg
    cfg = ContinuationConfig(
        initial_step=base.initial_step / 2,
        min_step=base.min_step / 2,
        max_step=base.max_step / 2,
        newton_tol=base.newton_tol,
        stop_gap=base.stop_gap,
        max_points=base.max_points,
    )
    start = time.time()
    branch = continue_branch(bp_desk, cfg)
    return TimedBranch(branch=branch, elapsed=time.time() - start, cfg=cfg)
