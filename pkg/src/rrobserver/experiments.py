"""Configuration, end-to-end pipeline runs and the (T, d_bar) solvability sweep."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .design import design_observer
from .exceptions import ConfigError, RRObserverError
from .protocol import DropoutPlan, Mode, as_mode, generate_dropouts
from .serialization import (
    certificate_to_dict,
    dumps,
    gains_to_dict,
    matrix_from_json,
    write_json,
)
from .simulation import intersample_bound, lyapunov_values, simulate
from .solvers import FEASIBLE
from .synthesis import EPS_FEAS, PlantModel, SynthesisProblem

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_VERIFICATION_FAILED = 3
EXIT_CONFIG_ERROR = 4

VERDICT_CODES = {"feasible": "F", "infeasible": "I", "undecided": "U"}


@dataclass
class ExperimentConfig:
    plant: PlantModel
    T: float
    d_bar: int
    lam: float
    mode: Mode = Mode.ROUND_ROBIN
    lambda_grid: list = field(default_factory=list)
    seed: int | None = None
    plan: DropoutPlan | None = None
    horizon: float | None = None
    x0: np.ndarray | None = None
    xhat0: np.ndarray | None = None
    output_dir: str | None = None
    output_grid: float | None = None
    eps_feas: float = EPS_FEAS
    sweep_T: list | None = None
    sweep_d_bar: list | None = None

    def problem(self):
        return SynthesisProblem(self.plant, self.T, self.d_bar, self.lam, self.mode)

    def dropout_plan(self):
        if self.plan is not None:
            return self.plan
        if self.seed is None:
            raise ConfigError("dropouts: either a seed or a scripted plan is required")
        count = int(math.floor(self.horizon / self.T + 1e-9)) + 1
        return generate_dropouts(self.d_bar, count, self.seed)


def _require(doc, key, path=""):
    if key not in doc:
        raise ConfigError(f"{path}{key}: required field missing")
    return doc[key]


def _number(value, path, kind=float):
    try:
        if isinstance(value, bool):
            raise TypeError
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a {kind.__name__}, got {value!r}") from None
    if kind is int and out != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return out


def parse_config(doc):
    """Validate a config mapping; errors name the offending field path."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected a JSON object")
    plant_doc = _require(doc, "plant")
    A = matrix_from_json(_require(plant_doc, "A", "plant."), "plant.A")
    C = matrix_from_json(_require(plant_doc, "C", "plant."), "plant.C")
    B = matrix_from_json(plant_doc["B"], "plant.B") if "B" in plant_doc else None
    if A.shape[0] != A.shape[1]:
        raise ConfigError(f"plant.A: must be square, got {A.shape[0]}x{A.shape[1]}")
    if C.shape[1] != A.shape[0]:
        raise ConfigError(f"plant.C: must have {A.shape[0]} columns, got {C.shape[1]}")
    if B is not None and B.shape[0] != A.shape[0]:
        raise ConfigError(f"plant.B: must have {A.shape[0]} rows, got {B.shape[0]}")
    plant = PlantModel(A, C, B)

    T = _number(_require(doc, "T"), "T")
    if T <= 0:
        raise ConfigError("T: must be positive")
    d_bar = _number(_require(doc, "d_bar"), "d_bar", int)
    if d_bar < 0:
        raise ConfigError("d_bar: must be nonnegative")
    lam_doc = _require(doc, "lambda")
    lams = lam_doc if isinstance(lam_doc, list) else [lam_doc]
    if not lams:
        raise ConfigError("lambda: empty grid")
    lams = [_number(v, f"lambda[{k}]") for k, v in enumerate(lams)]
    if any(v == 0 for v in lams):
        raise ConfigError("lambda: must be nonzero")
    try:
        mode = as_mode(doc.get("mode", "round-robin"))
    except RRObserverError as exc:
        raise ConfigError(f"mode: {exc}") from None

    cfg = ExperimentConfig(plant=plant, T=T, d_bar=d_bar, lam=lams[0], mode=mode,
                           lambda_grid=lams[1:])
    drop = doc.get("dropouts", {})
    if "plan" in drop:
        plan = drop["plan"]
        if not isinstance(plan, list):
            raise ConfigError("dropouts.plan: expected an array of integers")
        counts = [_number(v, f"dropouts.plan[{k}]", int) for k, v in enumerate(plan)]
        if any(c < 0 or c > d_bar for c in counts):
            raise ConfigError(f"dropouts.plan: entries must lie in 0..{d_bar}")
        cfg.plan = DropoutPlan(tuple(counts), d_bar)
    if "seed" in drop:
        cfg.seed = _number(drop["seed"], "dropouts.seed", int)
    if "horizon" in doc:
        cfg.horizon = _number(doc["horizon"], "horizon")
        if cfg.horizon <= 0:
            raise ConfigError("horizon: must be positive")
    n = plant.n
    for key in ("x0", "xhat0"):
        if key in doc:
            vec = doc[key]
            if not isinstance(vec, list) or len(vec) != n:
                raise ConfigError(f"{key}: expected {n} numbers")
            setattr(cfg, key, np.array([_number(v, f"{key}[{k}]") for k, v in enumerate(vec)]))
    cfg.output_dir = doc.get("output_dir")
    if "output_grid" in doc:
        cfg.output_grid = _number(doc["output_grid"], "output_grid")
    if "eps_feas" in doc:
        cfg.eps_feas = _number(doc["eps_feas"], "eps_feas")
    if "sweep" in doc:
        sweep = doc["sweep"]
        cfg.sweep_T = [_number(v, f"sweep.T[{k}]") for k, v in enumerate(_require(sweep, "T", "sweep."))]
        cfg.sweep_d_bar = [
            _number(v, f"sweep.d_bar[{k}]", int)
            for k, v in enumerate(_require(sweep, "d_bar", "sweep."))
        ]
        if not cfg.sweep_T or not cfg.sweep_d_bar:
            raise ConfigError("sweep: grids must be nonempty")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(doc)


def bundled_config_path(name="paper_sec4.json"):
    return Path(__file__).with_name("data") / name


def _require_simulation_fields(cfg):
    missing = [k for k in ("horizon", "x0", "xhat0") if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"{missing[0]}: required for simulation")


def run_pipeline(cfg, out_dir=None, backend=None):
    """Synthesize, verify, simulate and write artifacts; return ``(exit_code, summary)``."""
    _require_simulation_fields(cfg)
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    result = design_observer(cfg.problem(), backend=backend, eps_feas=cfg.eps_feas,
                             lambda_grid=cfg.lambda_grid)
    summary = {"verdict": result.verdict, "margin": result.margin,
               "lambda": result.problem.lam, "message": result.message}
    if not result.feasible:
        (out / "report.json").write_text(dumps(summary))
        return EXIT_INFEASIBLE, summary

    meta = {"T": cfg.T, "lambda": result.problem.lam}
    write_json(out / "gains.json", gains_to_dict(result.gains, **meta))
    write_json(out / "certificate.json", certificate_to_dict(result.certificate, T=cfg.T))

    plan = cfg.dropout_plan()
    trace = simulate(cfg.plant, result.gains, cfg.T, cfg.x0, cfg.xhat0, plan,
                     cfg.horizon, cfg.output_grid)
    trace.to_csv(out / "trace.csv")
    (out / "dropouts.json").write_text(plan.to_json() + "\n")

    alpha = intersample_bound(cfg.plant, result.gains, cfg.d_bar, cfg.T)
    V = lyapunov_values(trace, result.certificate)
    eps_norm = trace.eps_norm
    summary.update({
        "verification": result.report.to_dict(),
        "intersample_bound": alpha,
        "eps_norm_initial": float(eps_norm[0]),
        "eps_norm_final": float(eps_norm[-1]),
        "lyapunov_strictly_decreasing": bool(np.all(np.diff(V) < 0)) if len(V) > 1 else True,
        "receptions": len(trace.receptions),
    })
    (out / "report.json").write_text(dumps(summary))
    if not result.verified:
        return EXIT_VERIFICATION_FAILED, summary
    return EXIT_OK, summary


@dataclass
class SolvabilityGrid:
    T_values: list
    d_values: list
    verdicts: list  # verdicts[row for d][col for T]

    def __post_init__(self):
        if len(self.verdicts) != len(self.d_values) or any(
            len(row) != len(self.T_values) for row in self.verdicts
        ):
            raise ValueError("verdict matrix does not match the axes")

    def verdict(self, T, d):
        return self.verdicts[self.d_values.index(d)][self.T_values.index(T)]

    def max_feasible_T(self):
        """Largest feasible T per d_bar (``None`` when no point is feasible)."""
        out = {}
        for d, row in zip(self.d_values, self.verdicts):
            feas = [T for T, v in zip(self.T_values, row) if v == FEASIBLE]
            out[d] = max(feas) if feas else None
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["d_bar"] + [repr(float(T)) for T in self.T_values])
            for d, row in zip(self.d_values, self.verdicts):
                writer.writerow([d] + [VERDICT_CODES[v] for v in row])


def _sweep_point(args):
    plant, T, d, lam, lambda_grid, mode, eps_feas = args
    problem = SynthesisProblem(plant, T, d, lam, mode)
    try:
        result = design_observer(problem, eps_feas=eps_feas, lambda_grid=lambda_grid)
    except RRObserverError as exc:
        logger.warning("sweep point T=%g d=%d failed: %s", T, d, exc)
        return "undecided"
    if result.feasible and not result.verified:
        return "undecided"
    return result.verdict


def sweep_solvability(cfg, T_values=None, d_values=None, lambda_grid=None, workers=1):
    """One independent solve per (T, d_bar) point."""
    T_values = list(T_values if T_values is not None else cfg.sweep_T or [])
    d_values = list(d_values if d_values is not None else cfg.sweep_d_bar or [])
    if not T_values or not d_values:
        raise ConfigError("sweep: T and d_bar grids must be nonempty")
    grid_lams = lambda_grid if lambda_grid is not None else cfg.lambda_grid
    jobs = [(cfg.plant, T, d, cfg.lam, grid_lams, cfg.mode, cfg.eps_feas)
            for d in d_values for T in T_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_sweep_point, jobs))
    else:
        flat = [_sweep_point(job) for job in jobs]
    m = len(T_values)
    verdicts = [flat[r * m:(r + 1) * m] for r in range(len(d_values))]
    return SolvabilityGrid(T_values, d_values, verdicts)

