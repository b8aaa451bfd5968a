"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in the
terminal summary, in criterion order.
"""

import math
import time

import numpy as np
import pytest

from bispec.cli import main
from bispec.diagnostics import discrepancy_check, run_diagnostics
from bispec.harness import ExperimentConfig, cell_model, phase_sweep
from bispec.model import sample_graph
from bispec.rounding import Partition, kmedians, misclustering_rate
from bispec.spectral import hollowed_gram, top_r_eigs

from conftest import ACCEPTANCE_LINES, dense_hollow_gram, random_graph
from oracles import brute_force_misclustering, exhaustive_kmedians_opt

pytestmark = pytest.mark.slow

LADDER = (50, 100, 200)
LADDER_SEEDS = 20


def report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def ladder():
    """Diagnostics over the size ladder at Cs = 20, keyed by n1."""
    out = {}
    for n1 in LADDER:
        cfg = ExperimentConfig(n1=[n1], Cs=[20.0])
        cell = cfg.cells()[0]
        model = cell_model(cfg, cell)
        reps, grams = [], []
        for s in range(LADDER_SEEDS):
            A = sample_graph(model, s)
            B = hollowed_gram(A)
            reps.append(run_diagnostics(model, A, seed=s, B=B))
            grams.append(B)
        out[n1] = (reps, grams)
    return out


def test_criterion_1_gram_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(100):
        n1, n2 = int(rng.integers(1, 51)), int(rng.integers(1, 200))
        A = random_graph(rng, n1, n2, rng.uniform(0, 0.5))
        mismatches += not np.array_equal(hollowed_gram(A).toarray(), dense_hollow_gram(A))
    dt = time.perf_counter() - t
    report(1, mismatches == 0 and dt < 5, f"{mismatches}/100 mismatches, {dt:.2f}s (limit 5s)")


def test_criterion_2_eigensolver_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_val, worst_sub, checked = 0.0, 0.0, 0
    for _ in range(40):
        n1 = int(rng.integers(10, 101))
        A = random_graph(rng, n1, int(rng.integers(n1, 4 * n1)), rng.uniform(0.02, 0.3))
        B = hollowed_gram(A)
        r = int(rng.integers(1, min(6, n1 - 1) + 1))
        es = top_r_eigs(B, r, method="lanczos", seed=int(rng.integers(1 << 30)))
        vals, vecs = np.linalg.eigh(B.toarray().astype(float))
        vals, vecs = vals[::-1], vecs[:, ::-1]
        worst_val = max(worst_val, np.max(np.abs(es.values - vals[:r])) / (1 + abs(vals[0])))
        if r < n1 and (vals[r - 1] - vals[r]) > 1e-4 * max(1.0, abs(vals[0])):
            V, U = vecs[:, :r], es.vectors
            worst_sub = max(worst_sub, np.linalg.norm(U @ U.T - V @ V.T))
            checked += 1
    dt = time.perf_counter() - t
    ok = worst_val <= 1e-8 and worst_sub <= 1e-6 and dt < 30
    report(2, ok, f"max eigenvalue error {worst_val:.1e} (tol 1e-8), max subspace distance "
                  f"{worst_sub:.1e} over {checked} gapped cases (tol 1e-6), {dt:.1f}s (limit 30s)")


def test_criterion_3_metric_oracles():
    t = time.perf_counter()
    hung_bad = 0
    for seed in range(200):
        r = np.random.default_rng(seed)
        K, n = int(r.integers(2, 5)), int(r.integers(4, 13))
        est, truth = r.integers(1, K + 1, n), r.integers(1, K + 1, n)
        got = misclustering_rate(Partition(est, K, True), Partition(truth, K, True))
        hung_bad += got != brute_force_misclustering(est, truth, K)
    worst = 0.0
    for seed in range(50):
        r = np.random.default_rng(1000 + seed)
        n = int(r.integers(6, 9))
        X = r.random((n, 2))
        opt = exhaustive_kmedians_opt(X, 2)
        worst = max(worst, kmedians(X, 2, seed=seed).cost / opt)
    dt = time.perf_counter() - t
    ok = hung_bad == 0 and worst <= 1 + 2 / math.e + 0.05 and dt < 60
    report(3, ok, f"Hungarian mismatches {hung_bad}/200, worst k-medians cost/OPT {worst:.4f} "
                  f"(limit {1 + 2 / math.e + 0.05:.4f}), {dt:.1f}s (limit 60s)")


def test_criterion_4_recovery_threshold():
    t = time.perf_counter()
    res = phase_sweep(ExperimentConfig(n1=[150], Cs=[0.5, 20.0], trials=30, method="spec"))
    lo, hi = res.summary
    dt = time.perf_counter() - t
    ok = hi["recovery_freq"] >= 0.9 and lo["recovery_freq"] <= 0.3 and dt < 600
    report(4, ok, f"recovery Cs=20: {hi['recovery_freq']:.3f} (need >= 0.9), "
                  f"Cs=0.5: {lo['recovery_freq']:.3f} (need <= 0.3), {dt:.1f}s")


def test_criterion_5_rank_adaptive_recovery():
    t = time.perf_counter()
    deficient = phase_sweep(ExperimentConfig(n1=[150], Cs=[20.0], trials=30, method="adaspec",
                                             family="rank-one", c=0.5))
    full = phase_sweep(ExperimentConfig(n1=[150], Cs=[20.0], trials=30, method="adaspec"))
    dt = time.perf_counter() - t
    r1 = np.mean([r.rhat == 1 for r in deficient.records])
    rec = deficient.summary[0]["recovery_freq"]
    r2 = np.mean([r.rhat == 2 for r in full.records])
    ok = r1 >= 0.9 and rec >= 0.9 and r2 >= 0.9 and dt < 600
    report(5, ok, f"rank-deficient: rhat=1 in {r1:.3f} (need >= 0.9), recovery {rec:.3f} (need >= 0.9); "
                  f"full rank: rhat=2 in {r2:.3f} (need >= 0.9), {dt:.1f}s")


def test_criterion_6_concentration_trend(ladder):
    med = {n1: float(np.median([r.conc_ratio for r in ladder[n1][0]])) for n1 in LADDER}
    growth = med[LADDER[-1]] / med[LADDER[0]]
    report(6, growth <= 1.5, "median conc_ratio " + ", ".join(f"n1={k}: {v:.3f}" for k, v in med.items())
           + f"; growth {growth:.3f} (limit 1.5)")


def test_criterion_7_eigenvector_trend(ladder):
    med = {n1: float(np.median([r.d2inf_scaled for r in ladder[n1][0]])) for n1 in LADDER}
    bound = {n1: ladder[n1][0][0].sep_scaled / (6 * ladder[n1][0][0].alpha) for n1 in LADDER}
    growth = med[LADDER[-1]] / med[LADDER[0]]
    below = all(med[n1] < bound[n1] for n1 in LADDER)
    report(7, growth <= 1.5 and below,
           "median d2inf_scaled " + ", ".join(f"n1={k}: {v:.3f}" for k, v in med.items())
           + f"; growth {growth:.3f} (limit 1.5); sep_scaled/(6 alpha) = "
           + ", ".join(f"{bound[k]:.3f}" for k in LADDER) + f"; below bound: {below}")


def test_criterion_8_invariants(ladder):
    weyl = sym = scores = 0
    total = 0
    for n1 in LADDER:
        for rep, B in zip(*ladder[n1]):
            D = B.toarray()
            weyl += not rep.eig_dev_ratio <= rep.conc_ratio + 1e-8
            sym += not (np.array_equal(D, D.T) and not np.any(np.diag(D)))
            total += 1
    res = phase_sweep(ExperimentConfig(n1=[100], Cs=[0.5, 5.0, 20.0], trials=10, diagnostics=True))
    for rec in res.records:
        d = rec.diagnostics
        weyl += not d.eig_dev_ratio <= d.conc_ratio + 1e-8
        scores += not 0.0 <= rec.misclustering <= 1.0
        total += 1
    ok = weyl == sym == scores == 0
    report(8, ok, f"{total} instances: Weyl violations {weyl}, B asymmetric or non-hollow {sym}, "
                  f"scores outside [0,1] {scores}")


def test_criterion_9_discrepancy_examples():
    t = time.perf_counter()
    a = discrepancy_check(np.zeros((6, 6)), 0.5, 1.0, 0.0)
    b = discrepancy_check(np.ones((6, 6)) - np.eye(6), 1.0, 1.0, 0.0)
    M = np.zeros((6, 6))
    M[0:2, 2:4] = 100
    c = discrepancy_check(M, 0.1, 1.0, 0.1)
    dt = time.perf_counter() - t
    ok = a.holds and b.holds and not c.holds and c.witness == ((0, 1), (2, 3)) and dt < 1
    report(9, ok, f"zero: {a.holds}, hollowed ones: {b.holds}, planted block: {c.holds} "
                  f"witness {c.witness}, {dt * 1e3:.0f}ms (limit 1s)")


def test_criterion_10_reproducibility(tmp_path, capsys):
    d = tmp_path
    cmds = [
        ["sample", "--n1", "60", "--n2", "800", "--K", "2", "--L", "2", "--pi", "0.08,0.01,0.01,0.08",
         "--seed", "3", "-o", str(d / "g.el")],
        ["spec", "-i", str(d / "g.el"), "--K", "2", "--r", "2", "--truth", str(d / "labels.txt"),
         "-o", str(d / "spec.part"), "--summary", str(d / "spec.json")],
        ["adaspec", "-i", str(d / "g.el"), "--K", "2", "--pmax", "0.08", "--truth", str(d / "labels.txt"),
         "-o", str(d / "ada.part"), "--summary", str(d / "ada.json")],
        ["diagnose", "--n1", "60", "--n2", "800", "--K", "2", "--L", "2", "--pi", "0.08,0.01,0.01,0.08",
         "--seed", "3", "-o", str(d / "diag.csv")],
        ["phase", "--n1", "40", "--Cs", "1,10", "--trials", "3", "--diagnostics", "--master-seed", "9",
         "-o", str(d / "trials.csv"), "--summary", str(d / "summary.csv")],
    ]

    def run():
        codes = [main(c) for c in cmds]
        return codes, {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    codes_a, a = run()
    codes_b, b = run()
    capsys.readouterr()
    diff = sorted(k for k in a if a[k] != b.get(k))
    ok = codes_a == codes_b == [0] * 5 and not diff and set(a) == set(b)
    report(10, ok, f"{len(a)} output files from 5 commands, exit codes {codes_a}, differing files {diff}")
