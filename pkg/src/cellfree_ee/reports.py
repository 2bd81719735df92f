"""Convergence reports returned by the inner and outer solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max-iter"
STATUS_INFEASIBLE = "infeasible"
STATUS_ASCENT_FLAG = "ascent-flag"


@dataclass(frozen=True)
class KktReport:
    """First-order optimality summary for one inner solve."""

    objective: float
    stationarity: float  # inf-norm of grad f - sum mu_i grad g_i
    max_violation: float  # max(0, max_i g_i) at the returned point
    comp_slackness: float  # duality-gap proxy sum_i mu_i s_i
    iterations: int
    status: str
    multipliers: np.ndarray | None = None


@dataclass
class SolveReport:
    """Trajectory and status of an outer solve (parametric or path-following)."""

    lambdas: list = field(default_factory=list)  # bits/Joule scale; empty for SCA
    ee_trajectory: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # power coefficients per outer step
    outer_iterations: int = 0
    inner_reports: list = field(default_factory=list)
    status: str = STATUS_MAX_ITER
    wall_time_s: float = 0.0
    minorant_violations: int = 0
    ascent_violations: int = 0
