"""Command-line entry point: ``rrobserver {synth,verify,simulate,sweep,pipeline}``."""
import argparse
import logging
from pathlib import Path
import sys

from .design import design_observer
from .exceptions import ConfigError, RRObserverError
from .experiments import (
    EXIT_CONFIG_ERROR,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    load_config,
    run_pipeline,
    sweep_solvability,
)
from .serialization import (
    certificate_from_dict,
    certificate_to_dict,
    dumps,
    gains_from_dict,
    gains_to_dict,
    read_json,
    write_json,
)
from .simulation import simulate
from .synthesis import build_script_matrices, verify_certificate

log = logging.getLogger("rrobserver")


def _lambda_grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda grid {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="rrobserver", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        if out:
            p.add_argument("--out-dir", help="artifact directory (overrides output_dir)")

    p = sub.add_parser("synth", help="solve the LMIs and write gains/certificate JSON")
    common(p)
    p.add_argument("--lambda-grid", type=_lambda_grid, help="comma-separated fallback lambdas")

    p = sub.add_parser("verify", help="re-verify stored gains against a stored certificate")
    common(p, out=False)
    p.add_argument("--gains", required=True)
    p.add_argument("--certificate", required=True)

    p = sub.add_parser("simulate", help="simulate the loop with stored gains")
    common(p)
    p.add_argument("--gains", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("sweep", help="(T, d_bar) solvability grid")
    common(p)
    p.add_argument("--lambda-grid", type=_lambda_grid)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("pipeline", help="synthesize, verify and simulate")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda-grid", type=_lambda_grid)
    return parser


def _out_dir(args, cfg):
    out = Path(args.out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_synth(args, cfg):
    grid = args.lambda_grid if args.lambda_grid is not None else cfg.lambda_grid
    result = design_observer(cfg.problem(), eps_feas=cfg.eps_feas, lambda_grid=grid)
    out = _out_dir(args, cfg)
    summary = {"verdict": result.verdict, "margin": result.margin, "lambda": result.problem.lam}
    if not result.feasible:
        print(f"verdict: {result.verdict}")
        (out / "report.json").write_text(dumps(summary))
        return EXIT_INFEASIBLE
    write_json(out / "gains.json", gains_to_dict(result.gains, T=cfg.T, **{"lambda": result.problem.lam}))
    write_json(out / "certificate.json", certificate_to_dict(result.certificate, T=cfg.T))
    summary["verification"] = result.report.to_dict()
    (out / "report.json").write_text(dumps(summary))
    print(f"verdict: feasible, worst decrease eigenvalue {result.report.worst_lambda_max:.3e}")
    return EXIT_OK if result.verified else EXIT_VERIFICATION_FAILED


def _cmd_verify(args, cfg):
    gains = gains_from_dict(read_json(args.gains))
    cert = certificate_from_dict(read_json(args.certificate))
    scripts = build_script_matrices(cfg.plant.A, cfg.T, cfg.d_bar)
    report = verify_certificate(cert, scripts, gains, cfg.problem())
    print(dumps(report.to_dict()), end="")
    return EXIT_OK if report.passed else EXIT_VERIFICATION_FAILED


def _cmd_simulate(args, cfg):
    if args.seed is not None:
        cfg.seed, cfg.plan = args.seed, None
    for key in ("horizon", "x0", "xhat0"):
        if getattr(cfg, key) is None:
            raise ConfigError(f"{key}: required for simulation")
    gains = gains_from_dict(read_json(args.gains))
    trace = simulate(cfg.plant, gains, cfg.T, cfg.x0, cfg.xhat0, cfg.dropout_plan(),
                     cfg.horizon, cfg.output_grid)
    out = _out_dir(args, cfg)
    trace.to_csv(out / "trace.csv")
    print(f"final |eps| = {trace.eps_norm[-1]:.3e} (initial {trace.eps_norm[0]:.3e})")
    return EXIT_OK


def _cmd_sweep(args, cfg):
    grid = sweep_solvability(cfg, lambda_grid=args.lambda_grid, workers=args.workers)
    out = _out_dir(args, cfg)
    grid.to_csv(out / "solvability.csv")
    for d, T in grid.max_feasible_T().items():
        print(f"d_bar={d}: largest feasible T = {T}")
    return EXIT_OK


def _cmd_pipeline(args, cfg):
    if args.seed is not None:
        cfg.seed, cfg.plan = args.seed, None
    if args.lambda_grid is not None:
        cfg.lambda_grid = args.lambda_grid
    code, summary = run_pipeline(cfg, out_dir=args.out_dir)
    print(f"verdict: {summary['verdict']}")
    if "eps_norm_final" in summary:
        print(f"|eps| {summary['eps_norm_initial']:.3e} -> {summary['eps_norm_final']:.3e}")
    return code


COMMANDS = {
    "synth": _cmd_synth,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "pipeline": _cmd_pipeline,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (RRObserverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
