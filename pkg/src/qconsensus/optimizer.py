"""Rate allocation by generalized geometric programming.

With ``y = ln d`` the program becomes convex::

    minimize    sum_{i,t} max(ln(sigma2_i(e^y, t)) - y_{i,t}, -2 r_c ln 2)
    subject to  ln(sum_j a_j e^{y_j}) <= ln(MSE* - a_0)
                y_j <= ln(d_max * c0_j)

Each ``ln(sigma2)`` term is a log-sum-exp of affine functions of ``y``. The
solver below moves the max terms into epigraph variables and runs a standard
log-barrier interior-point method with damped Newton steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .rate_model import aggregate_rate, schedule_from_distortions
from .state_evolution import DistortionSchedule, GgpProblem

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


class InfeasibleTargetError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class SolverReport:
    status: str
    newton_iterations: int
    outer_iterations: int
    duality_gap: float
    constraint_residual: float
    gradient_residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GgpSolution:
    d_star: DistortionSchedule
    r_star: np.ndarray
    objective_bits: float
    achieved_mse: float
    mse_target: float | np.ndarray
    constraint: str
    report: SolverReport
    saturated: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        target = self.mse_target
        return {
            "mode": self.d_star.mode,
            "constraint": self.constraint,
            "mse_target": target.tolist() if isinstance(target, np.ndarray) else target,
            "objective_bits": self.objective_bits,
            "achieved_mse": self.achieved_mse,
            "d_star": self.d_star.d.tolist(),
            "r_star": self.r_star.tolist(),
            "saturated_slots": [[int(t), int(i)] for t, i in zip(*np.nonzero(self.saturated))],
            "solver_report": self.report.to_dict(),
        }


# log-domain pieces

def _log_coef(A: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(A)


class _LogForms:
    """Cached log-coefficients for the variance terms and MSE constraints."""

    def __init__(self, problem: GgpProblem, con_coef: np.ndarray, con_bound: np.ndarray):
        n = problem.n_vars
        self.n = n
        self.N = problem.T * problem.m
        # rows: variance terms (t, i) flattened; columns: constant, then variables
        self.term_logc = np.concatenate(
            [_log_coef(problem.var_const.reshape(-1, 1)), _log_coef(problem.var_coef.reshape(self.N, n))],
            axis=1,
        )
        self.own = problem.own_index.reshape(-1)
        if np.any(problem.var_const <= 0):
            raise ValueError("lossless marginal variances must be positive")
        self.floor = -2.0 * problem.model.r_c * LN2
        # constraints that no distortion can affect are already known to hold
        live = np.any(con_coef > 0, axis=1)
        self.con_logc = _log_coef(con_coef[live])
        self.con_bound = con_bound[live]
        self.ub = np.log(problem.upper_bounds())

    def terms(self, y):
        """Term values ``f`` and softmax weights ``P`` over the variable columns."""
        z = self.term_logc + np.concatenate([[0.0], y])[None, :]
        lse = logsumexp(z, axis=1)
        P = np.exp(z[:, 1:] - lse[:, None])
        return lse - y[self.own], P

    def constraints(self, y):
        z = self.con_logc + y[None, :]
        lse = logsumexp(z, axis=1)
        Q = np.exp(z - lse[:, None])
        return lse - self.con_bound, Q


def _network_forms(problem: GgpProblem, mse_target: float):
    if not mse_target > problem.mse_const * (1.0 + 1e-12):
        raise InfeasibleTargetError(
            f"target MSE {mse_target:g} is not above the lossless MSE {problem.mse_const:g} "
            f"at T={problem.T}; increase T (see t_min)"
        )
    return problem.mse_coef[None, :], np.array([math.log(mse_target - problem.mse_const)])


def _node_forms(problem: GgpProblem, targets):
    targets = np.broadcast_to(np.asarray(targets, dtype=np.float64), (problem.m,))
    slack = targets - problem.node_mse_const
    bad = np.nonzero(~(targets > problem.node_mse_const * (1.0 + 1e-12)))[0]
    if bad.size:
        raise InfeasibleTargetError(
            f"node targets infeasible at nodes {bad.tolist()}: below lossless node MSE at T={problem.T}"
        )
    return problem.node_mse_coef, np.log(slack)


def log_objective(problem: GgpProblem, y) -> float:
    """Sum of ``max(ln(sigma2/D), -2 r_c ln 2)`` over all nodes and iterations."""
    forms = _LogForms(problem, problem.mse_coef[None, :], np.zeros(1))
    f, _ = forms.terms(np.asarray(y, dtype=np.float64))
    return float(np.maximum(f, forms.floor).sum())


def objective_gradient(problem: GgpProblem, y) -> np.ndarray:
    """Gradient of :func:`log_objective`; saturated terms contribute nothing."""
    y = np.asarray(y, dtype=np.float64)
    forms = _LogForms(problem, problem.mse_coef[None, :], np.zeros(1))
    f, P = forms.terms(y)
    if np.any(np.abs(f - forms.floor) < 1e-12):
        y = y + 1e-12
        f, P = forms.terms(y)
    active = f > forms.floor
    G = P[active].sum(axis=0)
    np.subtract.at(G, forms.own[active], 1.0)
    return G


def log_mse_constraint(problem: GgpProblem, y) -> float:
    """``ln(sum_j a_j e^{y_j})``, the log of the distortion-driven network MSE."""
    z = _log_coef(problem.mse_coef) + np.asarray(y, dtype=np.float64)
    return float(logsumexp(z))


def constraint_gradient(problem: GgpProblem, y) -> np.ndarray:
    z = _log_coef(problem.mse_coef) + np.asarray(y, dtype=np.float64)
    return np.exp(z - logsumexp(z))


# barrier method

def _epigraph_gap(tau, delta):
    """Distance ``p = s - f`` of the barrier-optimal epigraph value above a term.

    For fixed ``y`` each term contributes ``tau*s - ln(s - f) - ln(s - floor)``
    with ``delta = f - floor``; its minimizer solves
    ``tau = 1/p + 1/(p + delta)``.
    """
    B = tau * delta - 2.0
    root = np.sqrt(tau * tau * delta * delta + 4.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = 2.0 * delta / (B + root)
    return np.where(B > 0, big, (root - B) / (2.0 * tau))


class _Barrier:
    """Log-barrier for the epigraph form with the epigraph variables minimized out."""

    def __init__(self, forms: _LogForms):
        self.f = forms

    def _parts(self, y, tau):
        f = self.f
        terms, P = f.terms(y)
        cons, Q = f.constraints(y)
        p = _epigraph_gap(tau, terms - f.floor)
        s = terms + p
        return terms, P, cons, Q, p, s - f.floor, s, -cons, f.ub - y

    def value(self, y, tau):
        *_, p, v, s, w, b = self._parts(y, tau)
        if w.size and w.min() <= 0 or b.min() <= 0:
            return math.inf
        return tau * s.sum() - np.log(p).sum() - np.log(v).sum() - np.log(w).sum() - np.log(b).sum()

    def objective(self, y):
        terms, _ = self.f.terms(y)
        return float(np.maximum(terms, self.f.floor).sum())

    def newton_step(self, y, tau):
        f = self.f
        terms, P, cons, Q, u, v, s, w, b = self._parts(y, tau)
        G = P.copy()
        G[np.arange(f.N), f.own] -= 1.0

        gy = G.T @ (1.0 / u) + Q.T @ (1.0 / w) + 1.0 / b

        Hyy = (G.T * (1.0 / u**2)) @ G
        Hyy += np.diag(P.T @ (1.0 / u)) - (P.T * (1.0 / u)) @ P
        Hyy += (Q.T * (1.0 / w**2)) @ Q
        Hyy += np.diag(Q.T @ (1.0 / w)) - (Q.T * (1.0 / w)) @ Q
        Hyy += np.diag(1.0 / b**2)
        # Schur complement of the diagonal epigraph block
        Hss = 1.0 / u**2 + 1.0 / v**2
        Gu = G.T * (1.0 / u**2)
        H = Hyy - (Gu / Hss) @ Gu.T
        try:
            dy = np.linalg.solve(H, -gy)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(H, -gy, rcond=None)[0]
        return dy, gy


def _initial_point(forms: _LogForms) -> np.ndarray:
    y = forms.ub + math.log(1e-3)
    for _ in range(200):
        cons, _ = forms.constraints(y)
        if np.all(cons < 0):
            return y
        y = y - math.log(10.0)
    raise SolverError("could not find a strictly feasible starting point")


def _prefer_bounds(forms: _LogForms, y, report: SolverReport):
    """Return the upper bounds when they are feasible and no worse than ``y``.

    Once every term is saturated the objective is flat, so the barrier
    method lands on an arbitrary interior point; the bounds are the
    deterministic choice with the fewest bits spent on precision.
    """
    ub = forms.ub
    cons, _ = forms.constraints(ub)
    if cons.size and cons.max() > 0:
        return y, report
    barrier = _Barrier(forms)
    if barrier.objective(ub) <= barrier.objective(y) + 1e-12 * max(1.0, abs(barrier.objective(y))):
        report.status = "optimal_at_bounds"
        return ub.copy(), report
    return y, report


def _barrier_solve(forms: _LogForms, gap_tol: float, max_newton: int = 5000, mu: float = 10.0):
    barrier = _Barrier(forms)
    y = _initial_point(forms)
    n_ineq = 2 * forms.N + forms.con_bound.size + forms.n
    tau = 1.0
    newton_total = 0
    outer = 0
    dec = math.inf
    while True:
        outer += 1
        for _ in range(200):
            dy, grad = barrier.newton_step(y, tau)
            dec = float(-grad @ dy)
            # objective suboptimality of the centering step is about dec / tau
            if dec / 2.0 <= 1e-8 or dec / (2.0 * tau) <= 1e-14:
                break
            phi = barrier.value(y, tau)
            step = 1.0
            while barrier.value(y + step * dy, tau) > phi - 0.01 * step * dec:
                step *= 0.5
                if step < 1e-10:
                    break
            if step < 1e-10:
                # no representable descent left at this barrier weight
                break
            y = y + step * dy
            newton_total += 1
            if newton_total > max_newton:
                raise SolverError(f"barrier method did not converge within {max_newton} Newton steps")
        gap = n_ineq / tau
        if gap < gap_tol:
            break
        tau *= mu
    return y, SolverReport(
        status="optimal",
        newton_iterations=newton_total,
        outer_iterations=outer,
        duality_gap=gap,
        constraint_residual=0.0,
        gradient_residual=math.sqrt(max(dec, 0.0)),
    )


def _finish(problem: GgpProblem, y, report: SolverReport, target, constraint: str, achieved, limits) -> GgpSolution:
    d = np.exp(y)
    sched = problem.schedule(d)
    rates = schedule_from_distortions(problem.model, problem, sched)
    var = problem.variances(sched)
    D = sched.as_matrix(problem.m)
    saturated = var / D <= 2.0 ** (-2.0 * problem.model.r_c)
    report.constraint_residual = float(np.max(np.maximum(achieved / limits - 1.0, 0.0)))
    return GgpSolution(
        d_star=sched,
        r_star=rates,
        objective_bits=aggregate_rate(rates),
        achieved_mse=problem.mse(sched),
        mse_target=target,
        constraint=constraint,
        report=report,
        saturated=saturated,
    )


def _gap_tol(problem: GgpProblem, tol: float) -> float:
    # certified duality gap in nats, far below tol relative to any objective
    # worth solving (one unsaturated term is already ~1 nat)
    return max(1e-9, min(1e-7, tol * 1e-3))


def solve_variable_distortion(problem: GgpProblem, mse_target: float, tol: float = 1e-4) -> GgpSolution:
    """Minimum aggregate rate with per-node, per-iteration distortions."""
    if problem.mode != "per_node":
        raise ValueError("variable-distortion solve needs a per_node problem")
    return _solve_network(problem, mse_target, tol)


def solve_constant_distortion(problem: GgpProblem, mse_target: float, tol: float = 1e-4) -> GgpSolution:
    """Minimum aggregate rate with one distortion shared by all nodes per iteration."""
    return _solve_network(problem.tied(), mse_target, tol)


def _solve_network(problem: GgpProblem, mse_target: float, tol: float) -> GgpSolution:
    coef, bound = _network_forms(problem, mse_target)
    forms = _LogForms(problem, coef, bound)
    y, report = _prefer_bounds(forms, *_barrier_solve(forms, _gap_tol(problem, tol)))
    sol_mse = problem.mse(np.exp(y))
    return _finish(problem, y, report, float(mse_target), "network", np.array([sol_mse]), np.array([mse_target]))


def solve_with_node_constraints(problem: GgpProblem, targets, tol: float = 1e-4) -> GgpSolution:
    """Minimum aggregate rate subject to MSE limits at every node.

    A scalar ``targets`` bounds the maximum node MSE; an array gives one
    limit per node.
    """
    scalar = np.ndim(targets) == 0
    coef, bound = _node_forms(problem, targets)
    forms = _LogForms(problem, coef, bound)
    y, report = _prefer_bounds(forms, *_barrier_solve(forms, _gap_tol(problem, tol)))
    limits = np.broadcast_to(np.asarray(targets, dtype=np.float64), (problem.m,))
    achieved = problem.node_mses(np.exp(y))
    return _finish(
        problem,
        y,
        report,
        float(targets) if scalar else limits.copy(),
        "max-node" if scalar else "per-node",
        achieved,
        limits,
    )


def solve(problem: GgpProblem, mse_target, mode: str = "variable", constraint: str = "network", tol: float = 1e-4) -> GgpSolution:
    """Dispatch on ``mode`` (variable/constant) and ``constraint`` (network/max-node/per-node)."""
    if mode == "constant":
        problem = problem.tied()
    elif mode != "variable":
        raise ValueError(f"unknown mode {mode!r}")
    if constraint == "network":
        return _solve_network(problem, float(mse_target), tol)
    if constraint == "max-node":
        return solve_with_node_constraints(problem, float(mse_target), tol)
    if constraint == "per-node":
        return solve_with_node_constraints(problem, np.asarray(mse_target, dtype=np.float64), tol)
    raise ValueError(f"unknown constraint {constraint!r}")


def saturation_mse(problem: GgpProblem) -> float:
    """Network MSE with every distortion at its upper bound."""
    return problem.mse(problem.upper_bounds())
