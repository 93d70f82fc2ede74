"""Observer-gain synthesis for round-robin (and concentrated) sampling.

The constraint blocks are written once, as functions of the decision
variables, and evaluated either on cvxpy expressions (to solve) or on
numpy arrays (to check a returned point).  Every solved certificate is
re-checked independently by :func:`verify_certificate`, which tests the
switched Lyapunov decrease directly on the closed-loop error maps.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_matrix, check_nonnegative_int, check_positive, symmetrize
from .exceptions import (
    DimensionError,
    IllConditionedCertificateError,
    InvalidProblemError,
    MissingGainError,
)
from .matexp import exp_integral, mat_exp, max_eig, min_eig
from .protocol import Mode, as_mode

#: Default strictness margin: ``F < 0`` is enforced as ``F <= -EPS_FEAS * I``.
EPS_FEAS = 1e-7
#: Largest condition number of ``X Gamma`` accepted during gain recovery.
MAX_CONDITION = 1e12
#: Relative tolerance of the identity ``G = X T_d L_stack``.
GAIN_IDENTITY_RTOL = 1e-8


@dataclass(frozen=True)
class PlantModel:
    """Continuous-time LTI plant ``dx/dt = A x + B u``, ``y = C x``."""

    A: np.ndarray
    C: np.ndarray
    B: np.ndarray | None = None

    def __post_init__(self):
        A = check_matrix(self.A, "A", square=True)
        C = check_matrix(self.C, "C")
        if C.shape[1] != A.shape[0]:
            raise DimensionError(f"C must have {A.shape[0]} columns, got {C.shape[1]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        if self.B is not None:
            B = check_matrix(self.B, "B")
            if B.shape[0] != A.shape[0]:
                raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
            object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    def row(self, i):
        """Output row ``c_i`` (1-based) as a ``1 x n`` array."""
        if not 1 <= i <= self.p:
            raise IndexError(f"output channel {i} outside 1..{self.p}")
        return self.C[i - 1 : i, :]


def output_map(C, mode, i):
    """The output map used by channel ``i``: a row of ``C``, or all of ``C`` when concentrated."""
    C = np.asarray(C, dtype=float)
    if as_mode(mode) is Mode.CONCENTRATED:
        return C
    return C[i - 1 : i, :]


def n_channels(C, mode):
    return 1 if as_mode(mode) is Mode.CONCENTRATED else np.asarray(C).shape[0]


def next_channel(i, channels):
    return 1 if i == channels else i + 1


@dataclass(frozen=True)
class SynthesisProblem:
    plant: PlantModel
    T: float
    d_bar: int
    lam: float
    mode: Mode = Mode.ROUND_ROBIN

    def __post_init__(self):
        object.__setattr__(self, "T", check_positive(self.T, "T"))
        object.__setattr__(self, "d_bar", check_nonnegative_int(self.d_bar, "d_bar"))
        object.__setattr__(self, "mode", as_mode(self.mode))
        lam = float(self.lam)
        if lam == 0.0 or not np.isfinite(lam):
            raise InvalidProblemError("the relaxation scalar lambda must be finite and nonzero")
        object.__setattr__(self, "lam", lam)

    @property
    def channels(self):
        return n_channels(self.plant.C, self.mode)

    def output_map(self, i):
        return output_map(self.plant.C, self.mode, i)

    def indices(self):
        return [(i, d) for i in range(1, self.channels + 1) for d in range(self.d_bar + 1)]


@dataclass(frozen=True)
class ScriptMatrices:
    """``A_d = exp(A (1+d) T)``, ``Gamma = int_0^T exp(A s) ds`` and the stacks ``T_d``."""

    A_d: tuple
    Gamma: np.ndarray
    T_d: tuple

    @property
    def n(self):
        return self.Gamma.shape[0]

    @property
    def d_bar(self):
        return len(self.A_d) - 1

    def propagation_stack(self, d):
        """Horizontal stack ``(A_{d-1}, ..., A_0)``; empty for ``d = 0``."""
        if d == 0:
            return np.zeros((self.n, 0))
        return np.hstack([self.A_d[k] for k in range(d - 1, -1, -1)])


def build_script_matrices(A, T, d_bar):
    A = check_matrix(A.A if isinstance(A, PlantModel) else A, "A", square=True)
    T = check_positive(T, "T")
    d_bar = check_nonnegative_int(d_bar, "d_bar")
    n = A.shape[0]
    A_d = tuple(mat_exp(A, (1 + d) * T) for d in range(d_bar + 1))
    Gamma = exp_integral(A, T)
    T_d = []
    for d in range(d_bar + 1):
        blocks = [A_d[k] for k in range(d - 1, -1, -1)] + [np.eye(n)]
        T_d.append(Gamma @ np.hstack(blocks))
    return ScriptMatrices(A_d, Gamma, tuple(T_d))


# -- constraint assembly -------------------------------------------------------


@dataclass(frozen=True)
class VarSpec:
    shape: tuple
    symmetric: bool = False


@dataclass(frozen=True)
class MatrixConstraint:
    """A symmetric affine matrix function that must be negative definite.

    ``fn(values, bmat)`` builds the block from a mapping of variable keys to
    arrays (numpy or cvxpy) using the supplied block-matrix constructor.
    """

    name: str
    kind: str
    index: tuple
    size: int
    fn: object

    def evaluate(self, values, bmat=np.block):
        return self.fn(values, bmat)


@dataclass
class LMISystem:
    variables: dict
    constraints: list
    normalized: list = field(default_factory=list)

    @property
    def decrease_constraints(self):
        return [c for c in self.constraints if c.kind == "decrease"]

    @property
    def positivity_constraints(self):
        return [c for c in self.constraints if c.kind == "positivity"]


def P_key(i, d):
    return ("P", i, d)


def X_key(i, d):
    return ("X", i, d)


def G_key(i, d):
    return ("G", i, d)


def _decrease_block(A_d, c, lam, P_key_, X_key_, G_key_, P_next_key):
    def fn(v, bmat):
        P, X, G, Pn = v[P_key_], v[X_key_], v[G_key_], v[P_next_key]
        Z = X @ A_d - G @ c
        upper_left = -P + Z + Z.T
        lower_left = -X.T + lam * Z
        lower_right = Pn - lam * (X + X.T)
        return bmat([[upper_left, lower_left.T], [lower_left, lower_right]])

    return fn


def _positivity_block(key):
    def fn(v, bmat):
        return -v[key]

    return fn


def assemble_lmis(problem, scripts):
    """Build the decrease LMIs for all ``(i, d, d')`` plus ``P_i^d > 0``."""
    if not isinstance(problem, SynthesisProblem):
        raise InvalidProblemError("expected a SynthesisProblem")
    if problem.lam == 0:
        raise InvalidProblemError("lambda must be nonzero")
    if scripts.d_bar < problem.d_bar:
        raise InvalidProblemError("script matrices do not cover d_bar")
    n, channels, lam = problem.plant.n, problem.channels, problem.lam
    variables = {}
    for i, d in problem.indices():
        rows = problem.output_map(i).shape[0]
        variables[P_key(i, d)] = VarSpec((n, n), symmetric=True)
        variables[X_key(i, d)] = VarSpec((n, n))
        variables[G_key(i, d)] = VarSpec((n, rows))

    constraints = []
    for i in range(1, channels + 1):
        c = problem.output_map(i)
        j = next_channel(i, channels)
        for d in range(problem.d_bar + 1):
            for d_next in range(problem.d_bar + 1):
                constraints.append(
                    MatrixConstraint(
                        name=f"decrease[i={i},d={d},d'={d_next}]",
                        kind="decrease",
                        index=(i, d, d_next),
                        size=2 * n,
                        fn=_decrease_block(
                            scripts.A_d[d], c, lam,
                            P_key(i, d), X_key(i, d), G_key(i, d), P_key(j, d_next),
                        ),
                    )
                )
    for i, d in problem.indices():
        constraints.append(
            MatrixConstraint(
                name=f"positivity[i={i},d={d}]",
                kind="positivity",
                index=(i, d),
                size=n,
                fn=_positivity_block(P_key(i, d)),
            )
        )
    normalized = [P_key(i, d) for i, d in problem.indices()]
    return LMISystem(variables, constraints, normalized)


def constraint_margin(system, values):
    """Smallest ``-lambda_max`` over all constraints at a numeric point."""
    worst = np.inf
    for con in system.constraints:
        worst = min(worst, -max_eig(con.evaluate(values)))
    return float(worst)


# -- certificates and gains ----------------------------------------------------


@dataclass
class Certificate:
    """Solved LMI variables keyed by ``(channel, dropout count)``."""

    P: dict
    X: dict
    G: dict
    feasibility_margin: float
    lam: float | None = None

    @classmethod
    def from_values(cls, values, margin, lam=None):
        P, X, G = {}, {}, {}
        for (name, i, d), val in values.items():
            val = np.asarray(val, dtype=float)
            if name == "P":
                P[(i, d)] = symmetrize(val)
            elif name == "X":
                X[(i, d)] = val
            elif name == "G":
                G[(i, d)] = val
        return cls(P, X, G, float(margin), lam)

    def values(self):
        out = {}
        for (i, d), v in self.P.items():
            out[P_key(i, d)] = v
        for (i, d), v in self.X.items():
            out[X_key(i, d)] = v
        for (i, d), v in self.G.items():
            out[G_key(i, d)] = v
        return out


@dataclass
class GainSchedule:
    """Observer gains ``L[(i, d)]``: ``n x 1`` per channel, or ``n x p`` when concentrated."""

    L: dict
    mode: Mode = Mode.ROUND_ROBIN

    def __post_init__(self):
        self.mode = as_mode(self.mode)
        self.L = {k: np.asarray(v, dtype=float) for k, v in self.L.items()}
        for key, v in self.L.items():
            if not np.all(np.isfinite(v)):
                raise IllConditionedCertificateError(f"gain {key} has non-finite entries")

    @property
    def channels(self):
        return max(i for i, _ in self.L)

    @property
    def d_bar(self):
        return min(max(d for j, d in self.L if j == i) for i in range(1, self.channels + 1))

    @property
    def n(self):
        return next(iter(self.L.values())).shape[0]

    def gain(self, i, d):
        try:
            return self.L[(i, d)]
        except KeyError:
            raise MissingGainError(f"no gain for channel {i} with {d} dropouts") from None

    def stack(self, i, d):
        """Vertical stack ``(L_i^0; ...; L_i^d)``."""
        return np.vstack([self.gain(i, k) for k in range(d + 1)])

    @classmethod
    def zeros(cls, n, C, d_bar, mode=Mode.ROUND_ROBIN):
        channels = n_channels(C, mode)
        L = {}
        for i in range(1, channels + 1):
            rows = output_map(C, mode, i).shape[0]
            for d in range(d_bar + 1):
                L[(i, d)] = np.zeros((n, rows))
        return cls(L, mode)


def recover_gains(certificate, scripts, problem):
    """Invert the change of variables ``G = X T_d L_stack`` recursively in ``d``."""
    L = {}
    for i in range(1, problem.channels + 1):
        for d in range(problem.d_bar + 1):
            XG = certificate.X[(i, d)] @ scripts.Gamma
            cond = np.linalg.cond(XG)
            if not np.isfinite(cond) or cond > MAX_CONDITION:
                raise IllConditionedCertificateError(
                    f"X Gamma for channel {i}, d={d} has condition number {cond:.3e}"
                )
            gain = np.linalg.solve(XG, certificate.G[(i, d)])
            if d > 0:
                prev = np.vstack([L[(i, k)] for k in range(d)])
                gain = gain - scripts.propagation_stack(d) @ prev
            L[(i, d)] = gain
    return GainSchedule(L, problem.mode)


def gain_identity_residual(certificate, scripts, gains):
    """Max relative residual of ``G = X T_d L_stack`` over all entries."""
    worst = 0.0
    for (i, d), G in certificate.G.items():
        rebuilt = certificate.X[(i, d)] @ scripts.T_d[d] @ gains.stack(i, d)
        scale = max(np.linalg.norm(G), np.finfo(float).tiny)
        worst = max(worst, np.linalg.norm(rebuilt - G) / scale)
    return float(worst)


def closed_loop_matrix(scripts, gains, C, i, d):
    """Error map between receptions: ``A_d - T_d L_stack c_i``."""
    c = output_map(C, gains.mode, i)
    return scripts.A_d[d] - scripts.T_d[d] @ gains.stack(i, d) @ c


@dataclass
class VerificationReport:
    passed: bool
    worst_lambda_max: float
    worst_index: tuple | None
    min_P_eig: float
    n_tests: int

    def to_dict(self):
        return {
            "passed": self.passed,
            "worst_lambda_max": self.worst_lambda_max,
            "worst_index": list(self.worst_index) if self.worst_index else None,
            "min_P_eig": self.min_P_eig,
            "n_tests": self.n_tests,
        }


def verify_certificate(certificate, scripts, gains, problem):
    """Check ``M^T P_next M - P < 0`` for every channel and dropout pair.

    Works on the recovered gains only, so it is independent of how the
    certificate was produced.
    """
    C = problem.plant.C
    channels = problem.channels
    worst, worst_index, n_tests = -np.inf, None, 0
    for i in range(1, channels + 1):
        j = next_channel(i, channels)
        for d in range(problem.d_bar + 1):
            M = closed_loop_matrix(scripts, gains, C, i, d)
            P = certificate.P[(i, d)]
            for d_next in range(problem.d_bar + 1):
                lmax = max_eig(M.T @ certificate.P[(j, d_next)] @ M - P)
                n_tests += 1
                if lmax > worst:
                    worst, worst_index = lmax, (i, d, d_next)
    min_p = min(min_eig(P) for P in certificate.P.values())
    return VerificationReport(
        passed=bool(worst < 0 and min_p > 0),
        worst_lambda_max=float(worst),
        worst_index=worst_index,
        min_P_eig=float(min_p),
        n_tests=n_tests,
    )
