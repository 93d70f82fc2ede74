"""Semidefinite feasibility backends.

A backend receives an :class:`~rrobserver.synthesis.LMISystem` and returns
numeric values for its variables.  The bundled backend maximizes a common
margin ``t`` subject to ``F_k(v) <= -t I`` for every constraint, with the
normalized variables bounded by ``I`` so the (homogeneous) problem stays
bounded.  The solver's own status is advisory: the verdict is decided by
re-evaluating every constraint on the returned point with numpy.
"""
from dataclasses import dataclass
import logging
import warnings

import numpy as np

from .synthesis import EPS_FEAS, Certificate, constraint_margin

logger = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDECIDED = "undecided"


@dataclass
class BackendResult:
    values: dict | None
    objective: float | None
    status: str  # "solved", "inaccurate", "infeasible", "failed"
    message: str = ""


@dataclass
class FeasibilityResult:
    verdict: str
    certificate: Certificate | None
    margin: float | None
    backend: BackendResult

    @property
    def feasible(self):
        return self.verdict == FEASIBLE


class CvxpyBackend:
    """Max-margin formulation solved through cvxpy (Clarabel interior point by default)."""

    def __init__(self, solver="CLARABEL", max_iters=None, verbose=False, **solver_opts):
        self.solver = solver
        self.max_iters = max_iters
        self.verbose = verbose
        self.solver_opts = solver_opts

    def _options(self):
        opts = dict(self.solver_opts)
        if self.max_iters is not None:
            key = {"CLARABEL": "max_iter", "SCS": "max_iters", "CVXOPT": "max_iters"}.get(
                self.solver, "max_iters"
            )
            opts[key] = self.max_iters
        return opts

    def solve(self, system):
        import cvxpy as cp

        variables = {
            key: cp.Variable(spec.shape, symmetric=spec.symmetric)
            for key, spec in system.variables.items()
        }
        t = cp.Variable()
        cons = [t <= 1.0]
        for con in system.constraints:
            F = con.evaluate(variables, bmat=cp.bmat)
            F = 0.5 * (F + F.T)
            cons.append(F << -t * np.eye(con.size))
        for key in system.normalized:
            n = system.variables[key].shape[0]
            cons.append(variables[key] << np.eye(n))
        problem = cp.Problem(cp.Maximize(t), cons)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                problem.solve(solver=self.solver, verbose=self.verbose, **self._options())
        except cp.error.SolverError as exc:
            logger.warning("solver failure: %s", exc)
            return BackendResult(None, None, "failed", str(exc))
        status = problem.status
        if t.value is None or any(v.value is None for v in variables.values()):
            mapped = "infeasible" if status in (cp.INFEASIBLE,) else "failed"
            return BackendResult(None, None, mapped, status)
        mapped = "solved" if status == cp.OPTIMAL else "inaccurate"
        values = {key: np.asarray(v.value, dtype=float) for key, v in variables.items()}
        return BackendResult(values, float(t.value), mapped, status)


def default_backend():
    return CvxpyBackend()


def solve_feasibility(system, backend=None, eps_feas=EPS_FEAS, lam=None):
    """Return a verdict and, when feasible, a certificate with margin ``>= eps_feas``.

    An "infeasible" verdict only means the backend's best margin fell below
    ``eps_feas``; it is not a proof.  Backend failures and inaccurate
    solutions that do not check out numerically are "undecided".
    """
    backend = backend or default_backend()
    result = backend.solve(system)
    if result.values is None:
        verdict = INFEASIBLE if result.status == "infeasible" else UNDECIDED
        return FeasibilityResult(verdict, None, None, result)
    margin = constraint_margin(system, result.values)
    if margin >= eps_feas:
        cert = Certificate.from_values(result.values, margin, lam)
        return FeasibilityResult(FEASIBLE, cert, margin, result)
    if result.status == "solved" and result.objective is not None and result.objective < eps_feas:
        return FeasibilityResult(INFEASIBLE, None, margin, result)
    return FeasibilityResult(UNDECIDED, None, margin, result)
