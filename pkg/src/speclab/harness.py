"""Seeded Monte Carlo campaigns with resumable JSONL output and reports.

A campaign file starts with one header record (config plus the derived
parameters of every grid point) followed by one record per trial, written in
key order by a single appender. Trial seeds are a hash of
``(master_seed, n, p, trial)``, so the body is the same whatever the worker
count or interruption history. Wall times go to a ``.timing`` sidecar so they
cannot break that guarantee.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import dataclasses
import glob
import hashlib
import io
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from scipy.stats import binomtest
from threadpoolctl import threadpool_limits

from . import ensembles as ens
from .params import DEFAULTS, Params, derive_params, validate_regime
from .spectral import (eigen_sym, gap_identity_residual, gap_report,
                       interlacing_check, null_multiplicity)
from .structure import (LCD_BUCKETS, Structure, classify, dist_to_sparse,
                        lcd_bucket, regularized_lcd, sparsest_in_span)

SCHEMA = "speclab.campaign/1"
EXPERIMENTS = ("simple-spectrum", "gap-dist", "zero-rows", "opnorm",
               "eigvec-structure", "interlacing", "identity-check")
P_RULES = ("fixed", "exponent", "threshold", "complement", "inverse")
WORKERS_ENV = "SPECLAB_WORKERS"


@dataclass(frozen=True)
class CampaignConfig:
    experiment: str
    n_grid: tuple[int, ...]
    p_rule: str
    p_value: float
    kind: str = "centered-sparse"
    dist: str = "gaussian"
    trials: int = 100
    master_seed: int = 0
    tol_abs: float = 0.0
    tol_scale: float = 1e-10
    output: str = "campaign.jsonl"
    workers: int = 1
    eigvecs_per_matrix: int = 8
    K_opnorm: float = DEFAULTS["K_opnorm"]
    param_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.p_rule not in P_RULES:
            raise ValueError(f"unknown p rule {self.p_rule!r}")
        if self.kind not in ens.KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.trials < 0 or self.tol_abs < 0 or self.tol_scale < 0:
            raise ValueError("trials and tolerances must be nonnegative")
        ens.EntryDist.parse(self.dist)
        for n in self.n_grid:
            self.p_for(n)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CampaignConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def header_dict(self) -> dict[str, Any]:
        """Config fields that determine the results (not where or how fast)."""
        d = dataclasses.asdict(self)
        d.pop("output")
        d.pop("workers")
        d["n_grid"] = list(self.n_grid)
        return d

    def p_for(self, n: int) -> float:
        v = self.p_value
        p = {
            "fixed": lambda: v,
            "exponent": lambda: n ** (-1.0 + v),
            "threshold": lambda: v * math.log(n) / n,
            "complement": lambda: 1.0 - n ** (-1.0 + v),
            "inverse": lambda: v / n,
        }[self.p_rule]()
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p rule gives p={p} outside [0, 1] at n={n}")
        return float(p)


def trial_seed(master_seed: int, n: int, p: float, trial: int) -> int:
    digest = hashlib.blake2b(f"{master_seed}|{n}|{p!r}|{trial}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _grid_params(config: CampaignConfig) -> list[dict]:
    out = []
    dist = ens.EntryDist.parse(config.dist) if config.kind == "centered-sparse" else None
    for n in config.n_grid:
        p = config.p_for(n)
        entry = {"n": n, "p": p, "params": None, "warnings": [], "error": None}
        try:
            prm = derive_params(n, p, config.param_overrides, dist=dist)
            entry["params"] = prm.to_dict()
            entry["warnings"] = validate_regime(prm)
        except ValueError as exc:
            entry["error"] = str(exc)
        out.append(entry)
    return out


def _header(config: CampaignConfig) -> dict:
    return {"record": "header", "schema": SCHEMA, "config": config.header_dict(),
            "params": _grid_params(config)}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _finite(x: float):
    return x if math.isfinite(x) else None


# -- trial execution ------------------------------------------------------------

def _interior_indices(n: int, count: int, seed: int) -> list[int]:
    """Extremes plus a seeded sample of interior eigenvalue indices."""
    ends = [0, n - 1] if n > 1 else [0]
    pool = np.arange(1, n - 1)
    k = min(max(count - len(ends), 0), pool.size)
    picked = ens.keyed_rng(seed, 41).choice(pool, size=k, replace=False) if k else []
    return sorted(set(ends) | {int(i) for i in picked})


def _eigvec_survey(spectrum, report, prm, count, seed) -> list[dict]:
    out = []
    V = spectrum.eigenvectors
    for i in _interior_indices(V.shape[0], count, seed):
        lo, hi = report.cluster_of(i)
        v = V[:, i]
        d_v = dist_to_sparse(v, prm.M)
        d_span = d_v
        if hi > lo:
            d_span = min(d_v, dist_to_sparse(sparsest_in_span(V[:, lo:hi + 1], prm.M), prm.M))
        entry = {"index": i, "eigenvalue": float(spectrum.eigenvalues[i]),
                 "cluster_size": hi - lo + 1, "dist_to_sparse": d_v,
                 "eigenspace_dist_to_sparse": d_span, "comp": d_span <= prm.rho,
                 "lcd": None, "lcd_exceeds_ceiling": False, "bucket": "comp"}
        if classify(v, prm.M, prm.rho) is Structure.INCOMP:
            D = regularized_lcd(v, prm)
            entry.update(lcd=_finite(D), lcd_exceeds_ceiling=math.isinf(D),
                         bucket=lcd_bucket(D, prm))
        out.append(entry)
    return out


def run_trial(task: tuple) -> tuple[dict, float]:
    """Execute one trial; returns (record, wall seconds)."""
    cfg, n, p, trial, seed, prm_dict = task
    start = time.perf_counter()
    spec = ens.EnsembleSpec(n, p, ens.EntryDist.parse(cfg["dist"]), cfg["kind"])
    M = ens.sample(spec, seed)
    experiment = cfg["experiment"]
    want_vectors = experiment == "eigvec-structure"
    spectrum = eigen_sym(M, want_vectors=want_vectors)
    rep = gap_report(spectrum, cfg["tol_abs"], cfg["tol_scale"])
    opnorm = float(max(abs(spectrum.eigenvalues[0]), abs(spectrum.eigenvalues[-1])))
    scale = math.sqrt(p * n)
    rec = {
        "record": "trial", "schema": SCHEMA, "experiment": experiment,
        "kind": cfg["kind"], "dist": cfg["dist"], "n": n, "p": p, "trial": trial,
        "seed": seed, "simple": rep.simple, "delta_min": _finite(rep.delta_min),
        "cluster_profile": sorted((s for s in rep.cluster_sizes if s > 1), reverse=True),
        "max_cluster": rep.max_cluster, "null_multiplicity": null_multiplicity(rep),
        "opnorm": opnorm, "opnorm_ratio": opnorm / scale if scale > 0 else None,
        "zero_rows": ens.zero_row_count(M),
    }
    if experiment == "interlacing":
        drop = int(ens.keyed_rng(seed, 31).integers(n))
        rec["drop_index"] = drop
        rec["interlacing_violation"] = interlacing_check(M, drop).violation
    elif experiment == "identity-check":
        norm = max(opnorm, np.finfo(float).tiny)
        results = [gap_identity_residual(M, i) for i in range(n - 1)]
        live = [r.residual / norm for r in results if not r.degenerate]
        rec["identity_max_residual_rel"] = max(live, default=0.0)
        rec["identity_degenerate"] = int(sum(bool(r.degenerate) for r in results))
    elif experiment == "eigvec-structure":
        prm = Params.from_dict(prm_dict)
        rec["eigvecs"] = _eigvec_survey(spectrum, rep, prm, cfg["eigvecs_per_matrix"], seed)
    return rec, time.perf_counter() - start


def _init_worker():
    threadpool_limits(limits=1)


def _execute(tasks: list[tuple], workers: int) -> Iterable[tuple[dict, float]]:
    if workers <= 1 or len(tasks) <= 1:
        with threadpool_limits(limits=1):
            for t in tasks:
                yield run_trial(t)
        return
    ctx = multiprocessing.get_context("spawn")
    chunk = max(1, len(tasks) // (8 * workers))
    with cf.ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker) as pool:
        yield from pool.map(run_trial, tasks, chunksize=chunk)


def resolve_workers(config: CampaignConfig, workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else max(1, config.workers)


def _trial_key(rec: dict) -> tuple:
    return rec["n"], rec["p"], rec["trial"]


def _load_existing(path: Path, header: dict) -> set[tuple] | None:
    """Completed trial keys of an existing file, or None if it has no header yet."""
    raw = path.read_bytes()
    cut = raw.rfind(b"\n") + 1
    if cut != len(raw):
        # Drop a line torn by an interrupted write.
        with open(path, "r+b") as fh:
            fh.truncate(cut)
        raw = raw[:cut]
    lines = raw.decode().splitlines()
    if not lines:
        return None
    if json.loads(lines[0]) != json.loads(_dumps(header)):
        raise ValueError(f"{path} holds a different campaign; refusing to resume")
    return {_trial_key(json.loads(line)) for line in lines[1:]}


def run_campaign(config: CampaignConfig, workers: int | None = None) -> Path:
    """Run (or resume) a campaign and return the JSONL path."""
    out = Path(config.output)
    header = _header(config)
    if config.experiment == "eigvec-structure":
        bad = [g for g in header["params"] if g["params"] is None]
        if bad:
            raise ValueError(f"eigvec-structure needs derivable parameters: {bad[0]['error']}")
    out.parent.mkdir(parents=True, exist_ok=True)
    done = _load_existing(out, header) if out.exists() else None
    if done is None:
        out.write_text(_dumps(header) + "\n")
        done = set()

    cfg = config.header_dict()
    prm_by_n = {g["n"]: g["params"] for g in header["params"]}
    tasks = []
    for n in config.n_grid:
        p = config.p_for(n)
        for t in range(config.trials):
            if (n, p, t) not in done:
                tasks.append((cfg, n, p, t, trial_seed(config.master_seed, n, p, t), prm_by_n[n]))
    timing = Path(f"{out}.timing")
    with open(out, "a") as fh, open(timing, "a") as th:
        for rec, wall in _execute(tasks, resolve_workers(config, workers)):
            fh.write(_dumps(rec) + "\n")
            fh.flush()
            th.write(_dumps({"n": rec["n"], "p": rec["p"], "trial": rec["trial"],
                             "wall_time": wall}) + "\n")
    return out


def eigvec_structure_survey(config: CampaignConfig, workers: int | None = None):
    """Run an eigvec-structure campaign; returns (path, aggregate summary)."""
    if config.experiment != "eigvec-structure":
        raise ValueError("eigvec_structure_survey needs experiment = eigvec-structure")
    path = run_campaign(config, workers)
    _, records = load_records([path])
    return path, summarize_eigvecs(records)


# -- reporting ------------------------------------------------------------------

def load_records(paths: Iterable) -> tuple[list[dict], list[dict]]:
    headers, records, seen = [], [], set()
    for path in paths:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if obj.get("schema") != SCHEMA:
                    raise ValueError(f"{path}: schema mismatch ({obj.get('schema')!r})")
                if obj.get("record") == "header":
                    headers.append(obj)
                    continue
                key = (obj["experiment"], obj["kind"], obj["dist"], obj["n"], obj["p"],
                       obj["trial"], obj["seed"])
                if key not in seen:
                    seen.add(key)
                    records.append(obj)
    return headers, records


def summarize_eigvecs(records: list[dict]) -> dict:
    vecs = [e for r in records for e in r.get("eigvecs", [])]
    total = len(vecs)
    hist = {b: sum(e["bucket"] == b for e in vecs) for b in ("comp", *LCD_BUCKETS)}
    return {"eigenvectors": total, "comp": sum(e["comp"] for e in vecs),
            "comp_fraction": sum(e["comp"] for e in vecs) / total if total else None,
            "buckets": hist,
            "high_fraction": hist["high"] / total if total else None}


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


REPORT_COLUMNS = (
    "experiment", "kind", "dist", "n", "p", "trials",
    "simple_freq", "simple_lo", "simple_hi",
    "delta_min_q10", "delta_min_q50", "delta_min_q90",
    "null_mult_ge2_freq", "zero_rows_ge2_freq",
    "opnorm_K", "opnorm_exceed_rate",
    "eigvecs", "comp_fraction", *(f"lcd_{b}" for b in LCD_BUCKETS),
    "max_interlacing_violation", "max_identity_residual_rel",
)


def _aggregate(group: list[dict], K: float) -> dict:
    n_tr = len(group)
    simple = sum(r["simple"] for r in group)
    lo, hi = wilson_interval(simple, n_tr)
    dmins = [r["delta_min"] for r in group if r["delta_min"] is not None]
    q = np.quantile(dmins, [0.1, 0.5, 0.9]) if dmins else [None] * 3
    ratios = [r["opnorm_ratio"] for r in group if r["opnorm_ratio"] is not None]
    row = {
        "trials": n_tr, "simple_freq": simple / n_tr, "simple_lo": lo, "simple_hi": hi,
        "delta_min_q10": q[0], "delta_min_q50": q[1], "delta_min_q90": q[2],
        "null_mult_ge2_freq": sum(r["null_multiplicity"] >= 2 for r in group) / n_tr,
        "zero_rows_ge2_freq": sum(r["zero_rows"] >= 2 for r in group) / n_tr,
        "opnorm_K": K,
        "opnorm_exceed_rate": (sum(x > K for x in ratios) / len(ratios)) if ratios else None,
    }
    ev = summarize_eigvecs(group)
    row["eigvecs"] = ev["eigenvectors"]
    row["comp_fraction"] = ev["comp_fraction"]
    for b in LCD_BUCKETS:
        row[f"lcd_{b}"] = ev["buckets"][b] / ev["eigenvectors"] if ev["eigenvectors"] else None
    viol = [r["interlacing_violation"] for r in group if "interlacing_violation" in r]
    row["max_interlacing_violation"] = max(viol) if viol else None
    resid = [r["identity_max_residual_rel"] for r in group if "identity_max_residual_rel" in r]
    row["max_identity_residual_rel"] = max(resid) if resid else None
    return row


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def report(paths: Iterable, out_dir=None) -> list[dict]:
    """Aggregate result files per (experiment, kind, dist, n, p).

    Writes ``summary.csv`` and ``summary.md`` into ``out_dir`` when given.
    """
    headers, records = load_records(paths)
    Ks = {h["config"]["K_opnorm"] for h in headers}
    if len(Ks) > 1:
        raise ValueError(f"result files disagree on K_opnorm: {sorted(Ks)}")
    K = Ks.pop() if Ks else DEFAULTS["K_opnorm"]
    groups: dict[tuple, list[dict]] = {}
    for r in records:
        groups.setdefault((r["experiment"], r["kind"], r["dist"], r["n"], r["p"]), []).append(r)
    rows = []
    for key in sorted(groups):
        row = dict(zip(("experiment", "kind", "dist", "n", "p"), key))
        row.update(_aggregate(groups[key], K))
        rows.append(row)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(render_csv(rows))
        (out / "summary.md").write_text(render_markdown(rows))
    return rows


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def render_markdown(rows: list[dict]) -> str:
    lines = ["| " + " | ".join(REPORT_COLUMNS) + " |",
             "|" + "---|" * len(REPORT_COLUMNS)]
    lines += ["| " + " | ".join(_fmt(r[c]) for c in REPORT_COLUMNS) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def expand_inputs(patterns: Iterable[str]) -> list[str]:
    """Expand globs, keeping a stable sorted order and skipping timing sidecars."""
    out = []
    for pat in patterns:
        matches = sorted(glob.glob(pat)) or ([pat] if Path(pat).exists() else [])
        out += [m for m in matches if not m.endswith(".timing")]
    return out
