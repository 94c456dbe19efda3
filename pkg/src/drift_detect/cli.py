"""Command-line front end: solve, value, simulate, verify.

Each command writes its artifacts into an output directory (default: the
current one) and finishes with a ``manifest.json`` describing what ran,
with what parameters, and where the outputs landed.  Exit codes separate
failure modes for scripting:

    0  success
    1  usage or input validation error
    2  solver non-convergence (partial artifact still written) or a failed
       verification criterion
    3  artifact/parameter mismatch (boundaries solved for other parameters)
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import _backend, __version__
from . import acceptance
from .boundaries import (
    FORMAT_VERSION,
    Boundaries,
    SolverConfig,
    _config_doc,
    fixed_point_residuals,
    from_json,
    picard_solve,
    symmetry_residuals,
    to_csv,
    to_json,
)
from .errors import (
    BoundaryMismatch,
    DriftDetectError,
    NonConvergence,
)
from .model import ModelParams, PhiPoint, Prior
from .simulate import (
    Measure,
    SimConfig,
    simulate_risk_ppi,
    simulate_value_p0,
    write_trace_csv,
)
from .transition import QuadratureSpec
from .value import batch_values, value_original, value_report

__all__ = ["main", "build_parser", "cmd_solve", "cmd_value", "cmd_simulate",
           "cmd_verify"]


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad flags; the contract here is 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _version_string() -> str:
    base = f"drift-detect {__version__}"
    try:
        head = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5.0,
            cwd=os.path.dirname(os.path.abspath(__file__)))
        if head.returncode == 0 and head.stdout.strip():
            return f"{base}+g{head.stdout.strip()}"
    except OSError:
        pass
    return base


def _apply_threads(n: Optional[int]) -> None:
    """Cap JIT worker threads; never changes results, only scheduling."""
    if n is None:
        return
    if _backend.USE_NUMBA:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _write_manifest(out_dir: Path, command: str, wall: float,
                    params: Optional[ModelParams] = None,
                    config: Optional[dict] = None,
                    inputs: Sequence[str] = (),
                    outputs: Sequence[str] = (),
                    summary: Optional[dict] = None) -> Path:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "run_manifest",
        "command": command,
        "version": _version_string(),
        "params": None if params is None
        else {"mu": params.mu, "c": params.c},
        "config": config,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "wall_seconds": round(wall, 3),
        "summary": summary,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_solver_config(path: Optional[str]) -> SolverConfig:
    if path is None:
        return SolverConfig()
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise DriftDetectError(f"{path}: solver config must be a JSON object")
    quad = QuadratureSpec(**doc.pop("quad", {}))
    return SolverConfig(quad=quad, **doc)


def _load_bounds(path: str) -> Boundaries:
    return from_json(Path(path).read_text())


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y — got {text!r}")
    return float(parts[0]), float(parts[1])


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected p0,p1,p2 — got {text!r}")
    return float(parts[0]), float(parts[1]), float(parts[2])


def _check_flag_params(bounds: Boundaries, mu: Optional[float],
                       c: Optional[float]) -> None:
    if mu is not None and mu != bounds.params.mu:
        raise BoundaryMismatch(
            f"boundaries were solved for mu={bounds.params.mu}, flags say mu={mu}")
    if c is not None and c != bounds.params.c:
        raise BoundaryMismatch(
            f"boundaries were solved for c={bounds.params.c}, flags say c={c}")


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    params = ModelParams(mu=args.mu, c=args.c)
    cfg = _load_solver_config(args.config)
    _apply_threads(args.threads)
    out = _out_dir(args)
    converged = True
    try:
        bounds = picard_solve(params, cfg)
    except NonConvergence as exc:
        if exc.partial is None:
            raise
        bounds = exc.partial
        converged = False
        print(f"warning: {exc}", file=sys.stderr)
    residuals = fixed_point_residuals(bounds, cfg.quad)
    symmetry = symmetry_residuals(bounds)
    json_path = out / "boundaries.json"
    csv_path = out / "boundaries.csv"
    json_path.write_text(to_json(bounds, cfg, converged, residuals, symmetry))
    csv_path.write_text(to_csv(bounds))
    summary = {
        "converged": converged,
        "sweeps": len(bounds.iteration_log),
        "beta": bounds.beta,
        "gamma": bounds.gamma,
        "residual_b0_sup": residuals.b0_sup,
        "residual_b1_sup": residuals.b1_sup,
        "symmetry_map": symmetry.map_residual,
        "symmetry_slope": symmetry.slope_residual,
    }
    _write_manifest(out, "solve", time.perf_counter() - t0, params,
                    _config_doc(cfg), inputs=[p for p in [args.config] if p],
                    outputs=[str(json_path), str(csv_path)], summary=summary)
    print(f"{'solved' if converged else 'NOT CONVERGED'} mu={params.mu:g} "
          f"c={params.c:g}: beta={bounds.beta:.6f} gamma={bounds.gamma:.6f} "
          f"sweeps={len(bounds.iteration_log)} "
          f"residuals(b0={residuals.b0_sup:.2e}, b1={residuals.b1_sup:.2e}) "
          f"-> {json_path}")
    return 0 if converged else 2


def cmd_value(args) -> int:
    t0 = time.perf_counter()
    bounds = _load_bounds(args.boundaries)
    _check_flag_params(bounds, args.mu, args.c)
    _apply_threads(args.threads)
    out = _out_dir(args)
    csv_path = out / "values.csv"
    if args.points is not None:
        n = batch_values(args.points, str(csv_path), bounds)
        inputs = [args.boundaries, args.points]
        print(f"evaluated {n} points -> {csv_path}")
    elif args.phi is not None:
        rep = value_report(PhiPoint(*args.phi), bounds)
        csv_path.write_text(
            "phi1,phi2,v_hat,m_hat,region\n"
            f"{rep.phi.phi1!r},{rep.phi.phi2!r},{rep.v_hat!r},"
            f"{rep.m_hat!r},{rep.in_region.name}\n")
        inputs = [args.boundaries]
        print(f"phi=({rep.phi.phi1:g}, {rep.phi.phi2:g}): v_hat={rep.v_hat!r} "
              f"m_hat={rep.m_hat!r} region={rep.in_region.name}")
    else:
        prior = Prior(*args.prior)
        v = value_original(prior, bounds.params, bounds)
        csv_path.write_text(
            "pi0,pi1,pi2,value\n"
            f"{prior.pi0!r},{prior.pi1!r},{prior.pi2!r},{v!r}\n")
        inputs = [args.boundaries]
        print(f"prior=({prior.pi0:g}, {prior.pi1:g}, {prior.pi2:g}): "
              f"value={v!r}")
    _write_manifest(out, "value", time.perf_counter() - t0, bounds.params,
                    inputs=inputs, outputs=[str(csv_path)])
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    bounds = _load_bounds(args.boundaries)
    _check_flag_params(bounds, args.mu, args.c)
    _apply_threads(args.threads)
    out = _out_dir(args)
    measure = Measure(args.measure)
    cfg = SimConfig(dt=args.dt, n_paths=args.paths, seed=args.seed,
                    t_cap=args.t_cap, measure=measure)
    if measure == Measure.P_PI:
        if args.prior is None:
            raise DriftDetectError("--measure ppi needs --prior p0,p1,p2")
        start: object = Prior(*args.prior)
        rep = simulate_risk_ppi(start, bounds.params, bounds, cfg)
        start_doc = {"prior": list(args.prior)}
    else:
        if args.phi0 is None:
            raise DriftDetectError("--measure p0 needs --phi0 x,y")
        start = PhiPoint(*args.phi0)
        rep = simulate_value_p0(start, bounds.params, bounds, cfg)
        start_doc = {"phi0": list(args.phi0)}
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "risk_report",
        "measure": measure.value,
        "params": {"mu": bounds.params.mu, "c": bounds.params.c},
        "start": start_doc,
        "dt": cfg.dt,
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "t_cap": cfg.horizon(bounds.params),
        **json.loads(rep.to_json()),
    }
    report_path = out / "risk_report.json"
    report_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    outputs = [str(report_path)]
    if args.trace:
        trace_path = out / "trace.csv"
        wrote = write_trace_csv(str(trace_path), start, bounds.params, bounds,
                                cfg, max_paths=min(args.trace, 100))
        outputs.append(str(trace_path))
        print(f"traced {wrote} paths -> {trace_path}")
    _write_manifest(out, "simulate", time.perf_counter() - t0, bounds.params,
                    inputs=[args.boundaries], outputs=outputs,
                    summary=json.loads(rep.to_json()))
    err = ",".join(f"{e:.4f}" for e in rep.error_rate_by_hypothesis)
    print(f"measure={measure.value} paths={cfg.n_paths} dt={cfg.dt:g} "
          f"seed={cfg.seed}: loss={rep.mean_loss:.6f} +- {rep.std_err:.6f} "
          f"tau={rep.mean_tau:.4f} err=[{err}] capped={rep.capped_fraction:.4f} "
          f"-> {report_path}")
    return 0


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    params = ModelParams(mu=args.mu, c=args.c)
    _apply_threads(args.threads)
    out = _out_dir(args)

    def show(r: acceptance.CriterionResult) -> None:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d} "
              f"{r.name:<32s} {r.seconds:7.1f}s  {r.detail}", flush=True)

    results = acceptance.run(params, quick=args.quick, progress=show)
    ok = all(r.passed for r in results)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "verify_report",
        "params": {"mu": params.mu, "c": params.c},
        "quick": bool(args.quick),
        "all_passed": ok,
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed,
             "detail": r.detail, "seconds": round(r.seconds, 3)}
            for r in results
        ],
    }
    verify_path = out / "verify.json"
    verify_path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _write_manifest(out, "verify", time.perf_counter() - t0, params,
                    outputs=[str(verify_path)],
                    summary={"all_passed": ok,
                             "passed": sum(r.passed for r in results),
                             "total": len(results)})
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed "
          f"-> {verify_path}")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# parser


def _add_common(sp: argparse.ArgumentParser) -> None:
    env_threads = os.environ.get("DRIFT_DETECT_THREADS")
    sp.add_argument("-o", "--out", default=".",
                    help="output directory (created if missing; default: .)")
    sp.add_argument("--threads", type=int,
                    default=int(env_threads) if env_threads else None,
                    help="cap worker threads (default: DRIFT_DETECT_THREADS "
                         "env var, else library default); results do not "
                         "depend on this")


def build_parser() -> _Parser:
    parser = _Parser(prog="drift-detect",
                     description="Optimal sequential detection of a drifting "
                                 "coordinate: boundary solver, value "
                                 "function, Monte Carlo.")
    parser.add_argument("--version", action="version",
                        version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the stopping boundaries")
    p.add_argument("--mu", type=float, required=True, help="drift size (nonzero)")
    p.add_argument("--c", type=float, required=True, help="cost of a wrong decision (> 0)")
    p.add_argument("--config", help="JSON file overriding solver defaults")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("value", help="evaluate the value function")
    p.add_argument("-b", "--boundaries", required=True,
                   help="boundaries JSON from a solve run")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--phi", type=_pair, metavar="X,Y",
                   help="ratio-chart point")
    g.add_argument("--prior", type=_triple, metavar="P0,P1,P2",
                   help="prior over the three hypotheses")
    g.add_argument("--points", help="CSV of phi1,phi2 rows to evaluate")
    p.add_argument("--mu", type=float, help="expected mu (mismatch check)")
    p.add_argument("--c", type=float, help="expected c (mismatch check)")
    _add_common(p)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("simulate", help="Monte Carlo risk estimate")
    p.add_argument("-b", "--boundaries", required=True,
                   help="boundaries JSON from a solve run")
    p.add_argument("--measure", choices=[m.value for m in Measure],
                   default=Measure.P_PI.value,
                   help="sampling measure (default: ppi)")
    p.add_argument("--prior", type=_triple, metavar="P0,P1,P2",
                   help="prior over hypotheses (measure ppi)")
    p.add_argument("--phi0", type=_pair, metavar="X,Y",
                   help="starting ratio point (measure p0)")
    p.add_argument("--paths", type=int, required=True, help="number of paths")
    p.add_argument("--dt", type=float, required=True, help="time step")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--t-cap", type=float, default=None,
                   help="hard horizon (default 50/mu^2)")
    p.add_argument("--trace", type=int, default=0, metavar="N",
                   help="also write a per-path trace CSV (at most 100 paths)")
    p.add_argument("--mu", type=float, help="expected mu (mismatch check)")
    p.add_argument("--c", type=float, help="expected c (mismatch check)")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--mu", type=float, required=True, help="drift size (nonzero)")
    p.add_argument("--c", type=float, required=True, help="cost of a wrong decision (> 0)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--quick", action="store_true",
                   help="closed-form and density checks only (about a minute)")
    g.add_argument("--full", dest="quick", action="store_false",
                   help="all twelve criteria (solver + Monte Carlo; minutes)")
    _add_common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BoundaryMismatch as exc:
        print(f"drift-detect: {exc}", file=sys.stderr)
        return 3
    except NonConvergence as exc:
        print(f"drift-detect: {exc}", file=sys.stderr)
        return 2
    except (DriftDetectError, OSError, ValueError) as exc:
        print(f"drift-detect: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
