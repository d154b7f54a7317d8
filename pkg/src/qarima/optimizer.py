"""Derivative-free constrained minimization.

Wraps scipy's trust-region derivative-free solvers (COBYQA by default,
COBYLA as an option) behind a small problem/result contract: inequality
constraints g_i(x) >= 0, an evaluation budget, deterministic behavior for a
fixed (problem, seed), a monotone best-so-far trace, and a NaN abort path
that returns the best feasible point seen so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import NonlinearConstraint, minimize as _scipy_minimize


class OptimizerError(ValueError):
    pass


@dataclass
class OptProblem:
    objective: object
    x0: np.ndarray
    constraints: list = field(default_factory=list)
    rho_begin: float = 0.5
    rho_end: float = 1e-6
    max_evals: int = 1000
    method: str = "cobyqa"

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.ndim != 1:
            raise OptimizerError("x0 must be a vector")
        if not self.rho_end < self.rho_begin:
            raise OptimizerError("rho_end must be below rho_begin")
        if self.max_evals < self.x0.size + 2:
            raise OptimizerError("max_evals must be at least dim + 2")
        if self.method not in {"cobyqa", "cobyla"}:
            raise OptimizerError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class OptResult:
    x_star: np.ndarray
    f_star: float
    evals_used: int
    status: str  # converged | budget_exhausted | constraint_infeasible | numerical_failure


class _NanAbort(Exception):
    pass


def _feasible(x, constraints, tol):
    return all(g(x) >= -tol for g in constraints)


def minimize(problem: OptProblem, seed: int = 0) -> OptResult:
    """Minimize the problem's objective under its inequality constraints.

    The reported f_star is never above the best objective value actually
    evaluated at a feasible point.  A NaN objective aborts the run and
    returns the best feasible point seen so far with status
    ``numerical_failure``.
    """
    f0 = float(problem.objective(problem.x0))
    if not math.isfinite(f0):
        raise OptimizerError("objective not finite at x0")

    tol = problem.rho_end
    trace = {"best_f": math.inf, "best_x": problem.x0.copy(), "evals": 0}
    if _feasible(problem.x0, problem.constraints, tol):
        trace["best_f"] = f0

    def wrapped(x):
        trace["evals"] += 1
        f = float(problem.objective(x))
        if math.isnan(f):
            raise _NanAbort
        if f < trace["best_f"] and _feasible(x, problem.constraints, tol):
            trace["best_f"] = f
            trace["best_x"] = np.array(x, dtype=float)
        return f

    if problem.method == "cobyla":
        cons = [{"type": "ineq", "fun": g} for g in problem.constraints]
        options = {
            "maxiter": problem.max_evals,
            "rhobeg": problem.rho_begin,
            "tol": problem.rho_end,
        }
        kwargs = {"method": "COBYLA", "constraints": cons, "options": options}
    else:
        cons = [
            NonlinearConstraint(g, 0.0, np.inf) for g in problem.constraints
        ]
        options = {
            "maxfev": problem.max_evals,
            "initial_tr_radius": problem.rho_begin,
            "final_tr_radius": problem.rho_end,
        }
        kwargs = {"method": "COBYQA", "constraints": cons, "options": options}

    aborted = False
    try:
        res = _scipy_minimize(wrapped, problem.x0, **kwargs)
        exhausted = not res.success and trace["evals"] >= problem.max_evals
    except _NanAbort:
        aborted = True
        exhausted = False

    if math.isinf(trace["best_f"]):
        # nothing feasible was ever evaluated
        return OptResult(
            x_star=problem.x0.copy(),
            f_star=f0,
            evals_used=trace["evals"],
            status="constraint_infeasible",
        )
    if aborted:
        status = "numerical_failure"
    elif exhausted:
        status = "budget_exhausted"
    else:
        status = "converged"
    return OptResult(
        x_star=trace["best_x"],
        f_star=trace["best_f"],
        evals_used=trace["evals"],
        status=status,
    )


def norm_ball_constraint(tau: float):
    """g(x) = tau^2 - |x|^2 >= 0, the smooth form of |x| <= tau."""
    t2 = float(tau) ** 2

    def g(x):
        x = np.asarray(x, dtype=float)
        return t2 - float(np.dot(x, x))

    return g
