"""scikit-learn style front end for observer design.

>>> obs = RoundRobinObserver(sampling_period=0.02, d_bar=4, lam=20.0)
>>> obs.fit(A, C)                                     # doctest: +SKIP
>>> trace = obs.simulate(x0, xhat0, horizon=30.0, seed=1)  # doctest: +SKIP
"""
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .design import design_observer
from .protocol import DropoutPlan, as_mode, generate_dropouts
from .simulation import intersample_bound, simulate
from .solvers import CvxpyBackend
from .synthesis import EPS_FEAS, PlantModel, SynthesisProblem, closed_loop_matrix


class InfeasibleDesignError(NotFittedError):
    """The LMIs could not be solved for the requested parameters."""


class RoundRobinObserver(BaseEstimator):
    """Switched-gain sampled-data observer for round-robin or concentrated sampling.

    Parameters
    ----------
    sampling_period : float
        Common sampler period ``T``.
    d_bar : int
        Bound on successive packet dropouts.
    lam : float
        Nonzero relaxation scalar of the LMIs.
    mode : {"round-robin", "concentrated"}
    eps_feas : float
        Strictness margin for the LMIs.
    lambda_grid : sequence of float, optional
        Fallback values of ``lam`` tried in order if ``lam`` fails.
    solver : str
        cvxpy solver name used by the bundled backend.

    Attributes
    ----------
    gains_ : GainSchedule
    certificate_ : Certificate
    report_ : VerificationReport
    scripts_ : ScriptMatrices
    plant_ : PlantModel
    """

    def __init__(self, sampling_period=0.02, d_bar=0, lam=1.0, mode="round-robin",
                 eps_feas=EPS_FEAS, lambda_grid=None, solver="CLARABEL"):
        self.sampling_period = sampling_period
        self.d_bar = d_bar
        self.lam = lam
        self.mode = mode
        self.eps_feas = eps_feas
        self.lambda_grid = lambda_grid
        self.solver = solver

    def fit(self, A, C, B=None):
        """Design gains for the plant ``(A, B, C)``; raises ``InfeasibleDesignError`` on failure."""
        plant = PlantModel(A, C, B)
        problem = SynthesisProblem(plant, self.sampling_period, self.d_bar, self.lam,
                                   as_mode(self.mode))
        result = design_observer(problem, backend=CvxpyBackend(self.solver),
                                 eps_feas=self.eps_feas, lambda_grid=self.lambda_grid)
        self.verdict_ = result.verdict
        if not (result.feasible and result.verified):
            raise InfeasibleDesignError(
                f"no verified design (verdict: {result.verdict}) {result.message}".strip()
            )
        self.plant_ = plant
        self.scripts_ = result.scripts
        self.certificate_ = result.certificate
        self.gains_ = result.gains
        self.report_ = result.report
        self.lam_ = result.problem.lam
        return self

    def closed_loop(self, i, d):
        check_is_fitted(self, "gains_")
        return closed_loop_matrix(self.scripts_, self.gains_, self.plant_.C, i, d)

    def intersample_bound(self):
        check_is_fitted(self, "gains_")
        return intersample_bound(self.plant_, self.gains_, self.d_bar, self.sampling_period)

    def simulate(self, x0, xhat0, horizon, plan=None, seed=0, output_grid=None, u=None):
        """Simulate with a scripted ``plan`` or seeded uniform dropouts."""
        check_is_fitted(self, "gains_")
        if plan is None:
            count = int(math.floor(horizon / self.sampling_period + 1e-9)) + 1
            plan = generate_dropouts(self.d_bar, count, seed)
        elif not isinstance(plan, DropoutPlan):
            plan = DropoutPlan(tuple(plan), self.d_bar)
        return simulate(self.plant_, self.gains_, self.sampling_period, x0, xhat0, plan,
                        horizon, output_grid, u)

    def predict(self, x0, xhat0, horizon, plan=None, seed=0):
        """State estimates ``x_hat`` on the default output grid."""
        return self.simulate(x0, xhat0, horizon, plan=plan, seed=seed).x_hat

    def score(self, x0, xhat0, horizon, plan=None, seed=0):
        """Log10 reduction of the estimation error norm over the horizon (higher is better)."""
        trace = self.simulate(x0, xhat0, horizon, plan=plan, seed=seed)
        e = trace.eps_norm
        if e[0] == 0:
            return np.inf
        return float(np.log10(e[0] / max(e[-1], np.finfo(float).tiny)))
