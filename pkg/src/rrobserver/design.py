"""End-to-end synthesis: matrices, LMIs, solve, gain recovery, verification."""
from dataclasses import dataclass, replace
import logging

from .exceptions import IllConditionedCertificateError
from .solvers import FEASIBLE, UNDECIDED, solve_feasibility
from .synthesis import (
    EPS_FEAS,
    assemble_lmis,
    build_script_matrices,
    recover_gains,
    verify_certificate,
)

logger = logging.getLogger(__name__)


@dataclass
class DesignResult:
    problem: object
    scripts: object
    verdict: str
    certificate: object = None
    gains: object = None
    report: object = None
    margin: float | None = None
    message: str = ""

    @property
    def feasible(self):
        return self.verdict == FEASIBLE

    @property
    def verified(self):
        return self.report is not None and self.report.passed


def design_observer(problem, backend=None, eps_feas=EPS_FEAS, lambda_grid=None):
    """Synthesize and verify gains for ``problem``.

    With ``lambda_grid`` the given lambda is tried first, then each grid value
    in order; the first verified design wins.
    """
    scripts = build_script_matrices(problem.plant.A, problem.T, problem.d_bar)
    lams = [problem.lam] + [lam for lam in (lambda_grid or []) if lam != problem.lam]
    result = None
    for lam in lams:
        candidate = replace(problem, lam=lam)
        result = _design_once(candidate, scripts, backend, eps_feas)
        logger.info("lambda=%g -> %s", lam, result.verdict)
        if result.feasible and result.verified:
            return result
    return result


def _design_once(problem, scripts, backend, eps_feas):
    system = assemble_lmis(problem, scripts)
    fres = solve_feasibility(system, backend=backend, eps_feas=eps_feas, lam=problem.lam)
    result = DesignResult(problem, scripts, fres.verdict, margin=fres.margin,
                          message=fres.backend.message)
    if not fres.feasible:
        return result
    result.certificate = fres.certificate
    try:
        result.gains = recover_gains(fres.certificate, scripts, problem)
    except IllConditionedCertificateError as exc:
        result.verdict = UNDECIDED
        result.message = str(exc)
        return result
    result.report = verify_certificate(fres.certificate, scripts, result.gains, problem)
    return result
