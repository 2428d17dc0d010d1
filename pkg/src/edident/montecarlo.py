"""
Seeded Monte Carlo experiments.

Each replication derives its own seed from ``(base_seed, r)`` and runs
serially; replications may run on a thread pool, and the report is the same
whatever the degree of parallelism because records are aggregated in
replication order.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cf import EPS_CF, EmpiricalCF, IllConditionedPoint
from .identify.common import FLAT_TOL, NULL_FACTOR, _jsonable, default_u_grid
from .identify.equivalence import GaussianParamsQ1, theorem2_equivalent_model
from .identify.lemma1 import lemma1_estimate
from .identify.theorem1 import theorem1_estimate
from .model import EDModelSpec, validate_identification_preconditions
from .moments import empirical_covariance, implied_covariance
from .simulate import generate_panel

PROCEDURES = ("lemma1", "theorem1", "theorem2-demo", "covariance-check")

# Assumptions behind each procedure, phrased for error messages.
_ASSUMPTION_TEXT = {
    "eta_1 and xi_1 independent": "eta_1 and xi_1 are independent (required by the lemma1 procedure)",
    "xi_1 nongaussian": "xi_1 is nongaussian",
    "shocks jointly normal": "shocks are jointly normal (required by the equivalence construction)",
}


class ExperimentValidationError(ValueError):
    """The configuration does not satisfy the assumptions of its procedure."""

    def __init__(self, message: str, violated: Sequence[str] = ()):
        super().__init__(message)
        self.violated = list(violated)


def replication_seed(base_seed: int, r: int) -> int:
    """64-bit seed for replication ``r``, derived from ``(base_seed, r)``."""
    return int(np.random.SeedSequence([base_seed, r]).generate_state(2, dtype=np.uint32).view(np.uint64)[0])


@dataclass
class ExperimentConfig:
    spec: EDModelSpec
    n: int
    replications: int
    base_seed: int
    procedure: str
    u_grid: Optional[np.ndarray] = None
    search_interval: tuple = (-2.0, 2.0)
    search_box: Optional[list] = None
    grid_step: float = 0.01
    eps_cf: float = EPS_CF
    flat_tol: float = FLAT_TOL
    null_replications: int = 0
    null_factor: float = NULL_FACTOR
    part: str = "both"
    demean: bool = False
    candidate_a1: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ExperimentValidationError(f"procedure must be one of {PROCEDURES}, got {self.procedure!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ExperimentValidationError(f"replications must be a positive integer, got {self.replications}")
        if int(self.n) != self.n or self.n < 3:
            raise ExperimentValidationError(f"n must be an integer >= 3, got {self.n}")
        if self.workers < 1:
            raise ExperimentValidationError("workers must be >= 1")
        self.u_grid = default_u_grid() if self.u_grid is None else np.asarray(self.u_grid, dtype=float)
        self.validate()

    def validate(self) -> None:
        """Check the spec against the procedure's assumptions; raise listing every violation."""
        theorem = {"lemma1": "L1", "theorem1": "T1", "theorem2-demo": "T2"}.get(self.procedure)
        if theorem is None:
            return
        report = validate_identification_preconditions(self.spec, theorem)
        failed = [_ASSUMPTION_TEXT.get(c.name, c.name) for c in report.failed]
        if theorem == "L1" and self.spec.q + 2 > self.spec.T:
            failed.append(f"q + 2 <= T (the moment evaluates coordinate q + 2 = {self.spec.q + 2})")
        if failed:
            raise ExperimentValidationError(
                f"procedure {self.procedure!r} does not apply to this spec; violated: " + "; ".join(failed), failed
            )
        if self.procedure == "theorem2-demo":
            c = self.spec.a[0] + 0.05 if self.candidate_a1 is None else self.candidate_a1
            if abs(c) <= 1e-12:
                raise ExperimentValidationError("candidate_a1 must be nonzero", ["candidate_a1 != 0"])

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "spec"}
        d["spec"] = self.spec.to_dict()
        return _jsonable(d)


@dataclass
class ExperimentReport:
    """
    Per-replication records plus summary statistics derived from them.

    ``summary`` is a pure function of ``records`` and the truth
    (:func:`summarize`), so it can be recomputed from a saved report.
    """

    config: dict
    records: list
    summary: dict
    wall_clock: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "config": self.config,
                "records": self.records,
                "summary": self.summary,
                "wall_clock_seconds": self.wall_clock,
                **self.extras,
            }
        )

    def write_json(self, path, manifest: Optional[dict] = None) -> None:
        d = self.to_dict()
        if manifest is not None:
            d = {"manifest": manifest, **d}
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2)

    def write_csv(self, path) -> None:
        """One row per replication; list-valued fields are spread over indexed columns."""
        rows = [_flatten(r) for r in self.records]
        cols = []
        for r in rows:
            cols += [c for c in r if c not in cols]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in rows:
                w.writerow(r)


def _flatten(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if isinstance(v, (list, tuple, np.ndarray)):
            for i, x in enumerate(np.asarray(v).reshape(-1), start=1):
                out[f"{k}{i}"] = repr(float(x)) if isinstance(x, (float, np.floating)) else x
        elif isinstance(v, (float, np.floating)):
            out[k] = repr(float(v))
        else:
            out[k] = v
    return out


def _estimate_once(cfg: ExperimentConfig, r: int) -> dict:
    seed = replication_seed(cfg.base_seed, r)
    panel = generate_panel(cfg.spec, cfg.n, seed)
    if cfg.demean:
        panel = panel.demeaned()
    engine = EmpiricalCF(panel, eps_cf=cfg.eps_cf)
    q, T = cfg.spec.q, cfg.spec.T
    rec = {"replication": r, "seed": seed}
    try:
        if cfg.procedure == "lemma1":
            res = lemma1_estimate(
                engine, q, T, cfg.u_grid, cfg.search_interval, cfg.grid_step,
                flat_tol=cfg.flat_tol, null_replications=cfg.null_replications, null_factor=cfg.null_factor, seed=seed,
            )
        else:
            res = theorem1_estimate(
                engine, q, T, cfg.u_grid, cfg.search_box, cfg.grid_step, part=cfg.part,
                flat_tol=cfg.flat_tol, null_replications=cfg.null_replications, null_factor=cfg.null_factor, seed=seed,
            )
    except (IllConditionedPoint, ArithmeticError) as exc:
        rec.update(status="degenerate", message=str(exc), a_hat=[float("nan")] * q, identified=False)
        return rec
    rec.update(status="ok" if res.identified else "unidentified", a_hat=list(res.a_hat), identified=res.identified)
    return rec


def _covariance_once(cfg: ExperimentConfig, r: int) -> dict:
    seed = replication_seed(cfg.base_seed, r)
    y = generate_panel(cfg.spec, cfg.n, seed).y
    emp = empirical_covariance(y).C
    imp = implied_covariance(cfg.spec).C
    d = y - y.mean(axis=0)
    # plug-in standard error of each sample covariance entry
    se = np.sqrt(np.einsum("ir,is->rs", d**2, d**2) / cfg.n - emp**2) / np.sqrt(cfg.n)
    dev = np.abs(emp - imp)
    return {
        "replication": r,
        "seed": seed,
        "status": "ok",
        "max_abs_deviation": float(dev.max()),
        "scaled_deviation": float(dev.max() * np.sqrt(cfg.n)),
        "max_z": float(np.max(dev / np.where(se > 0, se, np.inf))),
    }


def _theorem2_once(cfg: ExperimentConfig, r: int) -> dict:
    truth = GaussianParamsQ1.from_spec(cfg.spec)
    c = cfg.spec.a[0] + 0.05 if cfg.candidate_a1 is None else cfg.candidate_a1
    res = theorem2_equivalent_model(truth, c)
    return {
        "replication": r,
        "status": "ok" if res.solved else "rank-deficient",
        "candidate_a1": c,
        "residual": res.residual,
        "pd_ok": res.pd_ok,
        "failing_blocks": list(res.failing_blocks),
        "tilde": res.tilde.to_dict(),
    }


_RUNNERS = {
    "lemma1": _estimate_once,
    "theorem1": _estimate_once,
    "covariance-check": _covariance_once,
    "theorem2-demo": _theorem2_once,
}


def summarize(procedure: str, records: list, truth: Sequence[float]) -> dict:
    """Summary statistics recomputed from per-replication records."""
    R = len(records)
    statuses = {}
    for rec in records:
        statuses[rec["status"]] = statuses.get(rec["status"], 0) + 1
    out = {"replications": R, "status_counts": statuses}
    if procedure in ("lemma1", "theorem1"):
        A = np.array([rec["a_hat"] for rec in records], dtype=float).reshape(R, -1)
        per = []
        for j in range(A.shape[1]):
            x = A[:, j][np.isfinite(A[:, j])]
            m = x.size
            stats = {"j": j + 1, "truth": truth[j], "n_estimates": int(m)}
            if m:
                sd = float(x.std(ddof=1)) if m > 1 else float("nan")
                stats.update(
                    mean=float(x.mean()),
                    bias=float(x.mean() - truth[j]),
                    sd=sd,
                    mc_se=float(sd / np.sqrt(m)) if m > 1 else float("nan"),
                    rmse=float(np.sqrt(np.mean((x - truth[j]) ** 2))),
                )
            per.append(stats)
        out["coefficients"] = per
    elif procedure == "covariance-check":
        dev = np.array([rec["max_abs_deviation"] for rec in records])
        out.update(
            mean_max_abs_deviation=float(dev.mean()),
            mean_scaled_deviation=float(np.mean([rec["scaled_deviation"] for rec in records])),
            max_z=float(max(rec["max_z"] for rec in records)),
        )
    else:
        out.update(
            max_residual=float(max(rec["residual"] for rec in records)),
            pd_ok=all(rec["pd_ok"] for rec in records),
        )
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all replications and aggregate them in replication order."""
    config.validate()
    runner = _RUNNERS[config.procedure]
    t0 = time.perf_counter()
    if config.workers == 1:
        records = [runner(config, r) for r in range(config.replications)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda r: runner(config, r), range(config.replications)))
    records.sort(key=lambda rec: rec["replication"])
    wall = time.perf_counter() - t0
    summary = summarize(config.procedure, records, config.spec.a)
    extras = {}
    if config.procedure == "theorem2-demo":
        extras["tilde_model"] = records[0]["tilde"]
        extras["truth_model"] = GaussianParamsQ1.from_spec(config.spec).to_dict()
    return ExperimentReport(config.to_dict(), records, summary, wall, extras)
