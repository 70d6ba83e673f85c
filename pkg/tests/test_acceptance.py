"""Acceptance criteria, one test each.

Every test prints a PASS/FAIL line (also repeated in the terminal summary)
and asserts both the criterion and its runtime budget.
"""

import math
import time

import numpy as np
import pytest

from speclab import ensembles as ens
from speclab import harness as H
from speclab import nets, smallball, spectral, structure
from speclab.ensembles import EntryDist
from speclab.params import derive_params

from conftest import random_unit, record_criterion

pytestmark = pytest.mark.acceptance

INTERLACING_SLACK = 1e-8
IDENTITY_REL_TOL = 1e-9
SIMPLE_FREQ_MIN = 0.99
NULL_MULT_FREQ_MIN = 0.9
OPNORM_K = 10.0
OPNORM_FREQ_MIN = 0.99
HIGH_BUCKET_MIN = 0.9
LEVY_SIGMAS = 3.0


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start

    @property
    def ok(self):
        return self.elapsed < self.seconds

    def __str__(self):
        return f"{self.elapsed:.1f}s of {self.seconds:g}s"


def _verdict(label, ok, budget, detail):
    passed = bool(ok and budget.ok)
    record_criterion(label, passed, f"{detail}; runtime {budget}")
    assert ok, detail
    assert budget.ok, f"runtime budget exceeded: {budget}"


def _incomp_vectors(rng, prm, count):
    """Gaussian, heavy-tailed and near-boundary unit vectors, all Incomp."""
    n, M = prm.n, prm.M
    out = []
    while len(out) < count:
        kind = len(out) % 3
        if kind == 0:
            x = rng.standard_normal(n)
        elif kind == 1:
            x = rng.standard_cauchy(n)
        else:
            # M-sparse head plus a tail of norm just above rho
            head = np.zeros(n)
            supp = rng.choice(n, M, replace=False)
            head[supp] = rng.standard_normal(M)
            head /= np.linalg.norm(head)
            tail = np.where(head == 0, rng.standard_normal(n), 0.0)
            t = prm.rho * rng.uniform(1.01, 3.0)
            x = math.sqrt(1 - t * t) * head + t * tail / np.linalg.norm(tail)
        x = x / np.linalg.norm(x)
        if structure.classify(x, M, prm.rho) is structure.Structure.INCOMP:
            out.append(x)
    return out


@pytest.fixture(scope="module")
def campaigns(tmp_path_factory):
    """Campaign configs shared by criteria 4, 5, 11 and reused by criterion 13."""
    root = tmp_path_factory.mktemp("campaigns")
    base = dict(master_seed=2024, tol_abs=0.0, tol_scale=1e-10)
    cfgs = {
        "zero-rows-adjacency": dict(experiment="zero-rows", kind="adjacency", n_grid=[500],
                                    p_rule="inverse", p_value=0.2, trials=200),
        "zero-rows-sparse": dict(experiment="zero-rows", kind="centered-sparse", n_grid=[500],
                                 p_rule="inverse", p_value=0.2, trials=200),
        "simple": dict(experiment="simple-spectrum", kind="centered-sparse", dist="gaussian",
                       n_grid=[200], p_rule="exponent", p_value=0.5, trials=200),
        "opnorm": dict(experiment="opnorm", kind="centered-sparse", dist="gaussian",
                       n_grid=[500], p_rule="fixed", p_value=0.1, trials=300, K_opnorm=OPNORM_K),
    }

    def make(name, workers_tag):
        return H.CampaignConfig.from_dict(
            {**base, **cfgs[name], "output": str(root / f"{name}.w{workers_tag}.jsonl")})

    return make


def test_criterion_01_interlacing():
    with Budget(10) as b:
        worst = 0.0
        for seed in range(100):
            M = ens.sample(ens.EnsembleSpec(50, 0.2), seed)
            drop = int(ens.keyed_rng(seed, 31).integers(50))
            worst = max(worst, spectral.interlacing_check(M, drop, INTERLACING_SLACK).violation)
    _verdict("criterion 1", worst <= INTERLACING_SLACK, b,
             f"max interlacing violation {worst:.2e} over 100 matrices (limit {INTERLACING_SLACK:g})")


def test_criterion_02_minor_identity():
    with Budget(5) as b:
        worst, checked, skipped = 0.0, 0, 0
        rng = np.random.default_rng(8)
        for _ in range(20):
            G = rng.standard_normal((8, 8))
            M = (G + G.T) / 2
            nrm = spectral.operator_norm(M)
            for i in range(8):
                r = spectral.gap_identity_residual(M, i, min(i, 6))
                if r.degenerate:
                    skipped += 1
                    continue
                worst = max(worst, r.residual / nrm)
                checked += 1
    _verdict("criterion 2", worst <= IDENTITY_REL_TOL and checked == 160 - skipped, b,
             f"max residual/||M|| {worst:.2e} over {checked} index pairs, {skipped} degenerate")


def test_criterion_03_complete_graph(tmp_path):
    with Budget(5) as b:
        cfg = H.CampaignConfig(experiment="simple-spectrum", kind="adjacency", n_grid=(16, 64),
                               p_rule="fixed", p_value=1.0, trials=10,
                               output=str(tmp_path / "k.jsonl"))
        _, recs = H.load_records([H.run_campaign(cfg, workers=1)])
        good = [not r["simple"] and r["cluster_profile"] == [r["n"] - 1] for r in recs]
    _verdict("criterion 3", all(good) and len(good) == 20, b,
             f"{sum(good)}/{len(good)} trials non-simple with one cluster of size n-1")


def test_criterion_04_subthreshold_multiplicity(campaigns):
    with Budget(300) as b:
        parts = []
        ok = True
        for name in ("zero-rows-adjacency", "zero-rows-sparse"):
            _, recs = H.load_records([H.run_campaign(campaigns(name, 1), workers=1)])
            freq = np.mean([r["null_multiplicity"] >= 2 for r in recs])
            both = np.mean([r["null_multiplicity"] >= 2 and r["zero_rows"] >= 2 for r in recs])
            rows = np.mean([r["zero_rows"] for r in recs])
            ok &= freq >= NULL_MULT_FREQ_MIN and len(recs) == 200
            parts.append(f"{recs[0]['kind']}: null-mult>=2 {freq:.3f}, with >=2 zero rows {both:.3f}, "
                         f"mean zero rows {rows:.0f}")
    oracle = 500 * (1 - 0.2 / 500) ** 500
    _verdict("criterion 4", ok, b, "; ".join(parts) + f" (oracle E[#zero rows] {oracle:.0f})")


def test_criterion_05_simple_spectrum(campaigns):
    with Budget(600) as b:
        _, recs = H.load_records([H.run_campaign(campaigns("simple", 1), workers=1)])
        freq = np.mean([r["simple"] for r in recs])
        lo, hi = H.wilson_interval(int(sum(r["simple"] for r in recs)), len(recs))
    _verdict("criterion 5", freq >= SIMPLE_FREQ_MIN and len(recs) == 200, b,
             f"simple frequency {freq:.3f} (Wilson 95% [{lo:.3f}, {hi:.3f}]) over {len(recs)} trials")


def test_criterion_06_spread_set_size():
    with Budget(60) as b:
        prm = derive_params(2000, 0.05)
        need = prm.M * prm.rho**2 / 2
        vecs = _incomp_vectors(np.random.default_rng(6), prm, 1000)
        sizes = [structure.spread_set(v, prm).size for v in vecs]
        good = sum(s >= need for s in sizes)
    _verdict("criterion 6", good == 1000, b,
             f"{good}/1000 Incomp vectors with |sigma| >= M rho^2/2 = {need:.3g} "
             f"(min |sigma| {min(sizes)})")


def test_criterion_07_lcd_floor():
    with Budget(300) as b:
        rng = np.random.default_rng(7)
        finite, bad = 0, 0
        for k in range(500):
            n = (16, 64, 256)[k % 3]
            prm = derive_params(n, 0.25)
            if k % 5 == 0:
                x = rng.integers(-3, 4, n).astype(float)
                x[0] = x[0] or 1.0
            else:
                x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            floor = 1 / (2 * np.abs(x).max())
            r = structure.lcd(x, prm.delta0, prm.p, max(prm.theta_max, 2 * floor), prm.grid_step)
            if r.finite:
                finite += 1
                bad += r.value < floor - prm.grid_step
    _verdict("criterion 7", bad == 0, b,
             f"{finite} finite LCD values, {bad} below 1/(2||x||_inf) - grid_step")


def test_criterion_08_partition_invariants():
    with Budget(60) as b:
        rng = np.random.default_rng(88)
        failures = []
        clamped = 0
        settings = [derive_params(2000, 0.05), derive_params(1024, 0.25, {"alpha": 0.3})]
        for prm in settings:
            for v in _incomp_vectors(rng, prm, 100):
                part = structure.build_partition(v, prm)
                clamped += part.clamped
                failures += part.violations(v)
    _verdict("criterion 8", not failures, b,
             f"200 partitions, {len(failures)} invariant failures, {clamped} single-block")


def test_criterion_09_oracle_equivalence():
    import itertools

    def dist_brute(x, M):
        return min(float(np.linalg.norm(np.delete(x, list(s))))
                   for s in itertools.combinations(range(x.size), M))

    def levy_brute(s, eps):
        return max(np.count_nonzero((s >= a) & (s <= a + 2 * eps)) for a in s) / s.size

    def net_recount(m, D0):
        R = int(4 * D0)
        dirs = set()
        for z in itertools.product(range(-R, R + 1), repeat=m):
            r = math.sqrt(sum(t * t for t in z))
            if 0 < r <= 4 * D0:
                dirs.add(tuple(round(t / r, 12) + 0.0 for t in z))
        return len(dirs)

    with Budget(120) as b:
        rng = np.random.default_rng(9)
        dist_bad = 0
        for _ in range(100):
            n = int(rng.integers(2, 11))
            M = int(rng.integers(1, min(4, n - 1) + 1))
            x = random_unit(rng, n)
            dist_bad += abs(structure.dist_to_sparse(x, M) - dist_brute(x, M)) > 1e-12
        levy_bad = 0
        for _ in range(50):
            s = np.round(rng.standard_normal(int(rng.integers(1, 1001))), 2)
            eps = float(rng.uniform(0, 0.5))
            levy_bad += smallball.levy_scalar(s, eps).estimate != levy_brute(s, eps)
        cases = [(1, 1.0), (2, 0.5), (2, 2.0), (3, 1.0)]
        sizes = [(nets.integer_net(m, d).size, net_recount(m, d)) for m, d in cases]
        net_bad = sum(a != c for a, c in sizes)
    _verdict("criterion 9", dist_bad == levy_bad == net_bad == 0, b,
             f"dist_to_sparse mismatches {dist_bad}/100, levy mismatches {levy_bad}/50, "
             f"net sizes {[a for a, _ in sizes]} vs recount {[c for _, c in sizes]}")


def test_criterion_10_levy_analytics():
    with Budget(60) as b:
        rad = EntryDist.rademacher()
        z = smallball.sample_sparse_entries(rad, 0.3, 100_000, 10)
        est = smallball.levy_scalar(z, 0.25)
        d0 = smallball.delta0_estimate(rad, 0.5, 0.1, 100_000, 10)
        atom = (1 - max(0.5, 0.25)) / 0.5
        ok_levy = abs(est.estimate - 0.7) <= LEVY_SIGMAS * est.stderr
        ok_d0 = abs(d0.value - atom) <= LEVY_SIGMAS * d0.stderr
    _verdict("criterion 10", ok_levy and ok_d0, b,
             f"L(delta xi, 0.25) = {est.estimate:.4f} +- {est.stderr:.4f} vs 0.7; "
             f"delta0 = {d0.value:.4f} +- {d0.stderr:.4f} vs {atom:.1f}")


def test_criterion_11_operator_norm(campaigns):
    with Budget(600) as b:
        _, recs = H.load_records([H.run_campaign(campaigns("opnorm", 1), workers=1)])
        ratios = np.array([r["opnorm_ratio"] for r in recs])
        freq = np.mean(ratios <= OPNORM_K)
    _verdict("criterion 11", freq >= OPNORM_FREQ_MIN and len(recs) == 300, b,
             f"||M|| <= {OPNORM_K:g} sqrt(pn) in {freq:.3f} of {len(recs)} trials "
             f"(max ratio {ratios.max():.2f})")


def test_criterion_12_eigenvector_structure(tmp_path):
    with Budget(1800) as b:
        cfg = H.CampaignConfig(experiment="eigvec-structure", kind="centered-sparse",
                               dist="gaussian", n_grid=(256,), p_rule="fixed", p_value=0.25,
                               trials=50, eigvecs_per_matrix=8, master_seed=12,
                               output=str(tmp_path / "e.jsonl"))
        _, summary = H.eigvec_structure_survey(cfg)
    ok = (summary["eigenvectors"] == 400 and summary["comp"] == 0
          and summary["high_fraction"] >= HIGH_BUCKET_MIN)
    _verdict("criterion 12", ok, b,
             f"{summary['eigenvectors']} eigenvectors, {summary['comp']} Comp, "
             f"buckets {summary['buckets']}, high fraction {summary['high_fraction']:.3f}")


def test_criterion_13_determinism(campaigns):
    names = ("zero-rows-adjacency", "zero-rows-sparse", "simple", "opnorm")
    with Budget(1200) as b:
        same = {}
        for name in names:
            one = H.run_campaign(campaigns(name, 1), workers=1)
            two = H.run_campaign(campaigns(name, 3), workers=3)
            same[name] = one.read_bytes() == two.read_bytes()
    _verdict("criterion 13", all(same.values()), b,
             "byte-identical JSONL with 1 vs 3 workers: "
             + ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in same.items()))
