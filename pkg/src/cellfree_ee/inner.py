"""Small dense concave maximization under linear and convex quadratic rows.

A logarithmic-barrier interior method with damped Newton steps: maximize
t*f(x) + sum_i log(-g_i(x)) for an increasing barrier parameter t, where every
constraint row is g_i(x) = q_i . x^2 + a_i . x - b_i <= 0 with q_i >= 0
elementwise. Problem sizes here are tiny (tens of variables), so Hessians are
formed densely and factored directly.

Callers are expected to scale variables and objective to order one; the
tolerances below are absolute in that scaling.
"""

from __future__ import annotations

import numpy as np

from .power import PowerAllocation, PowerParams, QosSpec, equal_power_allocation
from .reports import STATUS_CONVERGED, STATUS_MAX_ITER, KktReport
from .zfstats import ZfStatistics

DEFAULT_TOL = 1e-6
# Entries of the solution this close to zero are reported as exact zeros.
ZERO_CLIP = 1e-8
# Barrier parameter growth per stage.
BARRIER_GROWTH = 10.0
_STAGE_DECREMENT = 1e-4  # Newton decrement^2 / 2 target for interior stages
_MAX_STAGE_ITERS = 200
_MAX_TOTAL_ITERS = 5000
_ARMIJO_SLOPE = 0.25
_BACKTRACK = 0.5


class InfeasibleStartError(ValueError):
    """The supplied start point is not strictly inside the constraint set."""


class NonConcaveObjectiveError(RuntimeError):
    """Positive curvature of the objective detected along a Newton step."""


class ConstraintSet:
    """Rows q.x^2 + a.x <= b over the provided number of variables."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self._quad: list = []
        self._lin: list = []
        self._bound: list = []
        self._stacked = None

    def __len__(self) -> int:
        return len(self._bound)

    def add_quadratic(self, quad, lin, bound: float) -> None:
        quad = np.asarray(quad, dtype=float)
        lin = np.asarray(lin, dtype=float)
        if quad.shape != (self.n_vars,) or lin.shape != (self.n_vars,):
            raise ValueError("row coefficient shapes must match n_vars")
        if np.any(quad < 0):
            raise ValueError(f"row {len(self)}: negative quadratic coefficient makes the row non-convex")
        self._quad.append(quad)
        self._lin.append(lin)
        self._bound.append(float(bound))
        self._stacked = None

    def add_linear(self, lin, bound: float) -> None:
        self.add_quadratic(np.zeros(self.n_vars), lin, bound)

    def add_lower_bounds(self, lower) -> None:
        """One row -x_j <= -lower_j per variable."""
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.n_vars,))
        for j in range(self.n_vars):
            lin = np.zeros(self.n_vars)
            lin[j] = -1.0
            self.add_linear(lin, -lower[j])

    def arrays(self) -> tuple:
        if self._stacked is None:
            self._stacked = (
                np.array(self._quad, dtype=float),
                np.array(self._lin, dtype=float),
                np.array(self._bound, dtype=float),
            )
        return self._stacked

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """g(x) per row; feasible points give nonpositive values."""
        quad, lin, bound = self.arrays()
        return quad @ (x * x) + lin @ x - bound

    def row_grads(self, x: np.ndarray) -> np.ndarray:
        quad, lin, _ = self.arrays()
        return 2.0 * quad * x[None, :] + lin


def solve_inner(
    objective,
    constraints: ConstraintSet,
    start: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> tuple:
    """Maximize a smooth concave objective over the constraint set.

    Parameters
    ----------
    objective : (value, gradient, hessian) callables of x
    constraints : ConstraintSet
    start : strictly feasible point (every row slack positive)
    tol : absolute KKT tolerance on stationarity and the duality-gap proxy

    Returns (x, KktReport). Raises InfeasibleStartError for a bad start and
    NonConcaveObjectiveError if the objective shows positive curvature along
    a step.
    """
    value, gradient, hessian = objective
    x = np.asarray(start, dtype=float).copy()
    m = len(constraints)
    if m == 0:
        raise ValueError("constraint set is empty; the barrier needs at least one row")
    if np.min(-constraints.residuals(x)) <= 0.0:
        worst = float(np.max(constraints.residuals(x)))
        raise InfeasibleStartError(f"start violates a constraint by {worst:.3e}")

    t = 1.0
    t_final = m / tol
    total_iters = 0
    f_start = value(x)

    while True:
        final_stage = t >= t_final
        x, iters = _newton_stage(
            value, gradient, hessian, constraints, x, t,
            tol if final_stage else None,
        )
        total_iters += iters
        if final_stage or total_iters > _MAX_TOTAL_ITERS:
            break
        t = min(t * BARRIER_GROWTH, t_final)

    report = _kkt_report(value, gradient, constraints, x, t, tol, total_iters)
    if report.status == STATUS_CONVERGED and value(x) < f_start - tol * max(1.0, abs(f_start)):
        # A converged barrier path cannot end materially below a feasible start.
        raise NonConcaveObjectiveError("objective decreased along the barrier path; check concavity")
    return _clip_zeros(x, constraints), report


def _newton_stage(value, gradient, hessian, constraints, x, t, stationarity_tol):
    """Damped Newton on the barrier objective at fixed t.

    Interior stages stop in the quadratic-convergence zone; the final stage
    (stationarity_tol set) iterates until the measured KKT stationarity of the
    original problem is within tolerance.
    """
    for it in range(_MAX_STAGE_ITERS):
        s = -constraints.residuals(x)
        inv_s = 1.0 / s
        rows = constraints.row_grads(x)
        grad_phi = t * gradient(x) - rows.T @ inv_s
        if stationarity_tol is not None and np.max(np.abs(grad_phi)) / t <= stationarity_tol:
            return x, it
        quad, _, _ = constraints.arrays()
        hess_obj = hessian(x)
        hess_phi = t * hess_obj
        hess_phi = hess_phi - np.diag(2.0 * (quad.T @ inv_s))
        hess_phi -= (rows * (inv_s**2)[:, None]).T @ rows

        step = _solve_newton(hess_phi, grad_phi)
        curv = float(step @ hess_obj @ step)
        if curv > 1e-8 * float(step @ step) * max(1.0, abs(value(x))):
            raise NonConcaveObjectiveError(
                f"objective curvature {curv:.3e} > 0 along the Newton step"
            )
        decrement = float(grad_phi @ step)
        if stationarity_tol is None and decrement / 2.0 <= _STAGE_DECREMENT:
            return x, it
        if decrement <= 0.0 or not np.isfinite(decrement):
            return x, it

        x_new = _line_search(value, constraints, x, step, t, decrement)
        if x_new is None:
            return x, it + 1
        x = x_new
    return x, _MAX_STAGE_ITERS


def _barrier_value(value, constraints, x, t):
    s = -constraints.residuals(x)
    if np.min(s) <= 0.0:
        return -np.inf
    return t * value(x) + float(np.sum(np.log(s)))


def _line_search(value, constraints, x, step, t, decrement):
    phi0 = _barrier_value(value, constraints, x, t)
    alpha = 1.0
    for _ in range(60):
        x_new = x + alpha * step
        phi = _barrier_value(value, constraints, x_new, t)
        if np.isfinite(phi) and phi >= phi0 + _ARMIJO_SLOPE * alpha * decrement:
            return x_new
        alpha *= _BACKTRACK
    return None


def _solve_newton(hess_phi, grad_phi):
    """Solve (-H) d = grad for the ascent direction, with a ridge fallback."""
    neg_h = -hess_phi
    ridge = 0.0
    scale = max(float(np.trace(neg_h)) / neg_h.shape[0], 1e-12)
    for _ in range(12):
        try:
            chol = np.linalg.cholesky(neg_h + ridge * np.eye(neg_h.shape[0]))
            y = np.linalg.solve(chol, grad_phi)
            return np.linalg.solve(chol.T, y)
        except np.linalg.LinAlgError:
            ridge = max(ridge * 10.0, 1e-14 * scale)
    raise NonConcaveObjectiveError("barrier Hessian could not be factored; constraint rows may be degenerate")


def _kkt_report(value, gradient, constraints, x, t, tol, iterations):
    s = -constraints.residuals(x)
    mu = 1.0 / (t * s)
    stationarity = float(np.max(np.abs(gradient(x) - constraints.row_grads(x).T @ mu)))
    comp = float(np.sum(mu * s))
    status = STATUS_CONVERGED if (stationarity <= tol and comp <= tol * (1 + 1e-12)) else STATUS_MAX_ITER
    return KktReport(
        objective=float(value(x)),
        stationarity=stationarity,
        max_violation=float(max(np.max(constraints.residuals(x)), 0.0)),
        comp_slackness=comp,
        iterations=iterations,
        status=status,
        multipliers=mu,
    )


def _clip_zeros(x, constraints):
    """Report coordinates parked at the interior floor as exact zeros."""
    clipped = np.where((x >= 0.0) & (x < ZERO_CLIP), 0.0, x)
    if np.array_equal(clipped, x):
        return x
    if np.max(constraints.residuals(clipped)) <= 1e-9:
        return clipped
    return x


def maximize_min_slack(constraints: ConstraintSet, x0: np.ndarray, tol: float = DEFAULT_TOL) -> tuple:
    """Phase-1 problem: minimize the worst constraint violation.

    Lifts to (x, v) with every row relaxed to g_i(x) <= v and v capped just
    above its start value, then maximizes -v. Returns (x, v_star, KktReport);
    v_star < 0 means x is strictly feasible with margin |v_star| in every row.
    """
    n = constraints.n_vars
    x0 = np.asarray(x0, dtype=float)
    v0 = float(np.max(constraints.residuals(x0))) + 1.0

    lifted = ConstraintSet(n + 1)
    quad, lin, bound = constraints.arrays()
    for i in range(len(constraints)):
        lifted.add_quadratic(
            np.append(quad[i], 0.0), np.append(lin[i], -1.0), bound[i]
        )
    cap = np.zeros(n + 1)
    cap[-1] = 1.0
    lifted.add_linear(cap, v0 + 1.0)

    def value(z):
        return -z[-1]

    grad_vec = np.zeros(n + 1)
    grad_vec[-1] = -1.0
    hess_mat = np.zeros((n + 1, n + 1))

    z, report = solve_inner(
        (value, lambda z: grad_vec, lambda z: hess_mat),
        lifted,
        np.append(x0, v0),
        tol=tol,
    )
    return z[:n], float(z[-1]), report


def feasible_point(zf: ZfStatistics, params: PowerParams, qos: QosSpec):
    """Strictly feasible power allocation for the QoS-constrained problem.

    The QoS and per-AP rows are linear in the power coefficients, so this is
    a linear feasibility problem solved with the phase-1 barrier; the point
    maximizing the minimum slack is returned. Returns None when infeasible.
    With all-zero floors the (slightly shrunk) equal-power baseline is
    returned without a solve.
    """
    theta = zf.theta
    k = theta.shape[1]
    if np.all(qos.r_bar == 0.0):
        return PowerAllocation(eta=equal_power_allocation(theta).eta * (1.0 - 1e-6))

    eta_scale = float(equal_power_allocation(theta).eta[0])
    rho_hat = params.rho_f * eta_scale
    sinr_floor = qos.sinr_floor

    col_max = theta.max(axis=0)
    if np.any(col_max <= 0.0):
        raise ValueError("theta has an all-zero column; a user consumes no power at any AP")
    # Interference-free screen: even alone, user k cannot beat rho_f / max_m theta_mk.
    if np.any(sinr_floor >= params.rho_f / col_max):
        return None

    cs = ConstraintSet(k)
    for i in range(k):
        # floor_i * (1 + rho_hat * gamma[i] . w) - rho_hat * w_i <= 0
        lin = sinr_floor[i] * rho_hat * zf.gamma[i] - rho_hat * np.eye(k)[i]
        cs.add_linear(lin, -sinr_floor[i])
    for row in theta * eta_scale:
        cs.add_linear(row, 1.0)
    cs.add_lower_bounds(0.0)
    for j in range(k):
        lin = np.zeros(k)
        lin[j] = 1.0
        cs.add_linear(lin, 2.0 / (eta_scale * col_max[j]))

    w, v_star, _ = maximize_min_slack(cs, np.ones(k))
    if v_star > -1e-9:
        return None
    return PowerAllocation(eta=eta_scale * w)
