"""
``edident`` command line.

Exit codes: 0 success, 2 validation error (config, spec, panel file,
procedure assumptions), 3 numerical degeneracy (unidentified within
tolerance, ill-conditioned cf point, singular probe system, rank-deficient
equivalence system). On a nonzero exit a one-line JSON diagnostic is written
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cf import AnalyticCF, EmpiricalCF, IllConditionedPoint
from .config import ConfigError, load_config
from .families import FamilyError
from .identify import (
    DegenerateDirection,
    GaussianParamsQ1,
    PreconditionError,
    SingularProbeSystem,
    lemma1_estimate,
    lemma1_points,
    theorem1_estimate,
    theorem2_equivalent_model,
)
from .identify.common import _jsonable
from .identify.theorem1 import _points as _t1_points
from .io import (
    PanelFormatError,
    manifest,
    read_panel_csv,
    write_conditioning_csv,
    write_curve_csv,
    write_json,
    write_manifest_sidecar,
    write_matrix_csv,
    write_panel_csv,
    write_tensor_csv,
)
from .model import SpecError, validate_identification_preconditions
from .moments import empirical_covariance, empirical_third_cumulants, implied_covariance, implied_third_cumulants
from .montecarlo import ExperimentConfig, ExperimentValidationError, run_experiment
from .simulate import Panel, generate_panel

EXIT_OK, EXIT_VALIDATION, EXIT_DEGENERATE = 0, 2, 3


class Degenerate(Exception):
    """A command finished but its result is numerically degenerate."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


def _spec(cfg):
    return cfg.model.to_spec()


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.simulate is None:
        raise ConfigError("config has no 'simulate' section")
    sim = cfg.simulate
    n = args.n or sim.n
    seed = sim.seed if args.seed is None else args.seed
    panel = generate_panel(_spec(cfg), n, seed, keep_components=sim.keep_components)
    write_panel_csv(args.out, panel.y)
    outputs = [args.out]
    if sim.keep_components:
        for name, arr in (("v", panel.v), ("w", panel.w)):
            path = f"{args.out}.{name}.csv"
            write_matrix_csv(path, arr, prefix=name)
            outputs.append(path)
    write_manifest_sidecar(args.out, manifest("simulate", args.config, [], outputs, seed))
    return EXIT_OK


def _engine(cfg, args):
    est = cfg.estimate
    spec = _spec(cfg)
    if est.backend == "analytic" and not args.panel:
        return AnalyticCF(spec), spec, []
    if not args.panel:
        raise ConfigError("the empirical backend needs --panel")
    y = read_panel_csv(args.panel, T=spec.T)
    panel = Panel(y)
    if est.demean:
        panel = panel.demeaned()
    return EmpiricalCF(panel, eps_cf=est.eps_cf), spec, [args.panel]


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    est = cfg.estimate
    method = args.method or est.method
    engine, spec, inputs = _engine(cfg, args)
    u = est.grid()
    common = dict(flat_tol=est.flat_tol, null_replications=est.null_replications, null_factor=est.null_factor, seed=est.seed)
    if method == "lemma1":
        res = lemma1_estimate(engine, spec.q, spec.T, u, est.search_interval, est.grid_step, **common)
        report = validate_identification_preconditions(spec, "L1")
    else:
        res = theorem1_estimate(engine, spec.q, spec.T, u, est.search_box, est.grid_step, part=est.part, **common)
        report = validate_identification_preconditions(spec, "T1")
    outputs = [args.out]
    if args.curve_csv:
        write_curve_csv(args.curve_csv, res)
        outputs.append(args.curve_csv)
    if args.conditioning_csv:
        pts = _conditioning_points(method, res, u, spec)
        write_conditioning_csv(args.conditioning_csv, pts, _modulus(engine, pts))
        outputs.append(args.conditioning_csv)
    man = manifest("estimate", args.config, inputs, outputs, est.seed)
    payload = {"backend": engine.backend, "result": res.to_dict(), "preconditions": report.to_dict()}
    write_json(args.out, payload, man)
    for extra in outputs[1:]:
        write_manifest_sidecar(extra, man)
    if not res.identified:
        raise Degenerate("coefficients unidentified within tolerance", {"a_hat": res.a_hat, "method": method})
    return EXIT_OK


def _conditioning_points(method, res, u, spec):
    """Evaluation points used at the (scan) argmin, for each coefficient index."""
    rows = []
    for j in range(1, spec.q + 1):
        if method == "lemma1":
            rows.append(lemma1_points(res.diagnostics["per_j"][j]["scan_argmin"], j, u, spec.q, spec.T))
        else:
            c = np.asarray(res.diagnostics["scan_argmin"], dtype=float)
            star, p4 = _t1_points(c[None, :], j, u, spec.q, spec.T)
            rows += [star[0], p4[0]] if j == 1 else [star[0]]
    return np.concatenate(rows)


def _modulus(engine, pts):
    return engine.derivatives(pts, (), strict=False)[1]


def cmd_equivalence(args) -> int:
    cfg = load_config(args.config)
    spec = _spec(cfg)
    report = validate_identification_preconditions(spec, "T2")
    if not report.ok:
        raise ExperimentValidationError(
            "equivalence needs q = 1 with jointly normal shocks; violated: " + "; ".join(c.name for c in report.failed),
            [c.name for c in report.failed],
        )
    truth = GaussianParamsQ1.from_spec(spec)
    if args.candidate is not None:
        cands = [args.candidate]
    elif cfg.equivalence is not None:
        cands = cfg.equivalence.candidates()
    else:
        raise ConfigError("give --candidate or an 'equivalence' section")
    results = [theorem2_equivalent_model(truth, c) for c in cands]
    write_json(
        args.out,
        {"truth": truth.to_dict(), "results": [r.to_dict() for r in results]},
        manifest("equivalence", args.config, [], [args.out]),
    )
    bad = [r.tilde.a1 for r in results if not r.solved]
    if bad:
        raise Degenerate("covariance system is rank deficient at these candidates", {"candidates": bad})
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = load_config(args.config)
    if cfg.montecarlo is None:
        raise ConfigError("config has no 'montecarlo' section")
    mc, est = cfg.montecarlo, cfg.estimate
    exp = ExperimentConfig(
        spec=_spec(cfg),
        n=mc.n,
        replications=mc.replications,
        base_seed=mc.base_seed,
        procedure=mc.procedure,
        u_grid=est.grid(),
        search_interval=est.search_interval,
        search_box=est.search_box,
        grid_step=est.grid_step,
        eps_cf=est.eps_cf,
        flat_tol=est.flat_tol,
        null_replications=est.null_replications,
        null_factor=est.null_factor,
        part=est.part,
        demean=est.demean,
        candidate_a1=mc.candidate_a1,
        workers=args.workers or mc.workers,
    )
    rep = run_experiment(exp)
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    man = manifest("montecarlo", args.config, [], [args.out, csv_path], mc.base_seed)
    rep.write_json(args.out, man)
    rep.write_csv(csv_path)
    write_manifest_sidecar(csv_path, man)
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = load_config(args.config)
    spec = _spec(cfg)
    if args.panel:
        y = read_panel_csv(args.panel, T=spec.T)
        C, K = empirical_covariance(y).C, empirical_third_cumulants(y).K
    else:
        C, K = implied_covariance(spec).C, implied_third_cumulants(spec).K
    prefix = args.out_prefix
    cov_path, cum_path = f"{prefix}covariance.csv", f"{prefix}third_cumulants.csv"
    write_matrix_csv(cov_path, C, prefix="y")
    write_tensor_csv(cum_path, K)
    man = manifest("moments", args.config, [args.panel] if args.panel else [], [cov_path, cum_path])
    for p in (cov_path, cum_path):
        write_manifest_sidecar(p, man)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edident", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a panel and write it as CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate MA coefficients from a panel or the analytic model")
    e.add_argument("--config", required=True)
    e.add_argument("--panel")
    e.add_argument("--out", required=True)
    e.add_argument("--method", choices=["lemma1", "theorem1"])
    e.add_argument("--curve-csv")
    e.add_argument("--conditioning-csv")
    e.set_defaults(func=cmd_estimate)

    q = sub.add_parser("equivalence", help="build an observationally equivalent Gaussian model (q = 1)")
    q.add_argument("--config", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--candidate", type=float)
    q.set_defaults(func=cmd_equivalence)

    m = sub.add_parser("montecarlo", help="run a seeded Monte Carlo experiment")
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--csv")
    m.add_argument("--workers", type=int)
    m.set_defaults(func=cmd_montecarlo)

    o = sub.add_parser("moments", help="export covariance and third-cumulant tensors as CSV")
    o.add_argument("--config", required=True)
    o.add_argument("--panel")
    o.add_argument("--out-prefix", default="")
    o.set_defaults(func=cmd_moments)
    return p


_VALIDATION = (ConfigError, SpecError, FamilyError, PanelFormatError, ExperimentValidationError, PreconditionError)
_NUMERICAL = (IllConditionedPoint, SingularProbeSystem, DegenerateDirection)


def _diagnose(code: int, kind: str, message: str, details: dict | None = None) -> int:
    payload = {"exit_code": code, "status": kind, "message": message}
    if details:
        payload["details"] = _jsonable(details)
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION as exc:
        return _diagnose(EXIT_VALIDATION, "validation-error", str(exc))
    except _NUMERICAL as exc:
        details = {}
        if isinstance(exc, IllConditionedPoint):
            details = {"s": exc.s, "modulus": exc.modulus}
        return _diagnose(EXIT_DEGENERATE, "numerical-degeneracy", str(exc), details)
    except Degenerate as exc:
        return _diagnose(EXIT_DEGENERATE, "unidentified", str(exc), exc.details)
    except OSError as exc:
        return _diagnose(EXIT_VALIDATION, "io-error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
