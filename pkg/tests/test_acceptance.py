"""Acceptance checks with pinned tolerances.

Each check prints one ``PASS``/``FAIL`` line. Run the file directly for the
summary (``python3 tests/test_acceptance.py``) or through pytest, where the
lines appear with ``-s``. Two checks measure targets this implementation
does not reach; they are marked as expected failures and the analysis is in
the project notes.
"""

import math
import os
import tempfile
import time
import warnings
from functools import lru_cache

import numpy as np
import pytest

from modfold.encoder import ModuloParams, discrete_fold_indices, encode_and_sample, ideal_modulo
from modfold.encoder import min_fold_separation_bound, residual
from modfold.experiments import preset, run_experiment, simulate
from modfold.io import estimate_params, ingest_trace, write_trace
from modfold.lowrate import reconstruct_lowrate
from modfold.metrics import mse, prop1_bound, thm2_bound, thm2_regime
from modfold.signals import generate_random_sinc, sup_norm
from modfold.threshold import check_conditions, filter_samples, max_order, reconstruct
from modfold.usalg import usalg

SEEDS = range(20)

# pinned tolerances
EXP1_TH3_MEDIAN = 0.1          # percent
EXP1_TH4_MEDIAN = 0.01         # percent
EXP1_US1_MEDIAN = 5.0          # percent, lower limit
EXP1_US2_MEDIAN = 100.0        # percent, lower limit
EXP1_RUNTIME = 30.0            # seconds
RMSE_GAP = 100.0               # T / RMSE of the N = 3 fold times
SUPPORT_ATOL = 1e-9
TRIALS_SUPPORT = 1000
TRIALS_PROP1 = 500
CUBIC_SLOPE = 2.0
EXP4_TH_MEDIAN_14 = 2.0        # percent
EXP4_TH_MEDIAN_16 = 3.0        # percent
EXP4_US_MEDIAN = 50.0          # percent, lower limit
IDEAL_ATOL = 1e-12
USALG_REL = 1e-9
EQUIV_REL = 1e-9
EST_LAMBDA_REL = 0.02
EST_H_REL = 0.05
HARDWARE_ERR = 2.0             # percent


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


# -- synthetic reproduction -----------------------------------------------

@lru_cache(maxsize=None)
def exp1_errors():
    start = time.perf_counter()
    errs = {}
    for key, method, N in (("th3", "threshold", 3), ("th4", "threshold", 4),
                           ("us1", "usalg", 1), ("us2", "usalg", 2)):
        errs[key] = [run_experiment(preset("exp1", seed=s, method=method, N=N))[1].metrics["err"]
                     for s in SEEDS]
    return errs, time.perf_counter() - start


def test_c1_exp1_threshold_medians():
    errs, elapsed = exp1_errors()
    m3, m4 = np.median(errs["th3"]), np.median(errs["th4"])
    ok = report("1 Exp-1 threshold", m3 < EXP1_TH3_MEDIAN and m4 < EXP1_TH4_MEDIAN,
                f"median N=3 {m3:.2e}% (< {EXP1_TH3_MEDIAN}), N=4 {m4:.2e}% (< {EXP1_TH4_MEDIAN})")
    assert ok


def test_c1_exp1_usalg_first_order():
    errs, _ = exp1_errors()
    m = np.median(errs["us1"])
    assert report("1 Exp-1 USAlg N=1", m > EXP1_US1_MEDIAN,
                  f"median {m:.2f}% (> {EXP1_US1_MEDIAN})")


@pytest.mark.xfail(reason="second-order USAlg stays near 5% here; see notes", strict=True)
def test_c1_exp1_usalg_second_order():
    errs, _ = exp1_errors()
    m = np.median(errs["us2"])
    assert report("1 Exp-1 USAlg N=2", m > EXP1_US2_MEDIAN,
                  f"median {m:.2f}% (> {EXP1_US2_MEDIAN}, expected to fail)")


def test_c1_exp1_runtime():
    _, elapsed = exp1_errors()
    assert report("1 Exp-1 runtime", elapsed < EXP1_RUNTIME,
                  f"{elapsed:.1f} s for 80 runs (< {EXP1_RUNTIME} s)")


def test_c2_fold_time_precision():
    worst, viol, n_mid = 0.0, 0, 0
    rmse3 = None
    for N in (3, 4):
        errs = []
        for s in SEEDS:
            cfg = preset("exp1", seed=s, N=N)
            _, tr, _ = simulate(cfg)
            rep = reconstruct(tr, cfg.params, N, offset=tr.ground_truth.offset)
            taus = tr.ground_truth.folds.taus
            assert rep.P == len(taus)
            for f, tau in zip(rep.folds, taus):
                e = abs(f.tau - tau)
                errs.append(e)
                if f.case == "a":
                    n_mid += 1
                    worst = max(worst, e / (cfg.alpha / (4 * N * N)))
                    viol += e >= cfg.alpha / (4 * N * N)
        if N == 3:
            rmse3 = math.sqrt(np.mean(np.square(errs)))
    T = preset("exp1").T
    ok = viol == 0 and rmse3 * RMSE_GAP <= T
    assert report("2 fold-time precision", ok,
                  f"{viol} of {n_mid} full-cluster folds outside alpha/(4N^2) "
                  f"(worst ratio {worst:.2e}); RMSE N=3 {rmse3:.2e} s vs T/{RMSE_GAP:g} = "
                  f"{T / RMSE_GAP:.1e} s")


# -- randomized structural checks -----------------------------------------

def random_instance(rng):
    lam = rng.uniform(0.5, 2)
    h = rng.uniform(0, 1.9 * lam)
    omega = rng.uniform(0.5, 3)
    T = rng.uniform(0.005, 0.05)
    alpha = rng.uniform(0, 1) * T
    g = generate_random_sinc(omega, 8, 0, math.pi / omega, 1, int(rng.integers(1 << 30)))
    g_inf = rng.uniform(1.5, 5) * lam
    g = g.scaled(g_inf / sup_norm(g, 0, 8 * math.pi / omega))
    K = int(8 * math.pi / omega / T)
    return ModuloParams(lam, h, alpha), g, T, K, omega, g_inf


def test_c3_c4_support_and_separation():
    rng = np.random.default_rng(123)
    viol_support = viol_sep = folds = 0
    for _ in range(TRIALS_SUPPORT):
        p, g, T, K, omega, g_inf = random_instance(rng)
        tr = encode_and_sample(g, p, T, K)
        N = int(rng.integers(1, 5))
        F = filter_samples(-residual(tr.times, tr.ground_truth.folds, p), N)
        n = discrete_fold_indices(tr.ground_truth.folds.taus, 0.0, T)
        folds += len(n)
        allowed = np.zeros(K, bool)
        for q in n:
            allowed[max(q - N + 1, 0):min(q + 2, K)] = True
        viol_support += bool(np.any(np.abs(F[~allowed]) > SUPPORT_ATOL))
        if len(n) > 1:
            gaps = np.diff(np.ceil(tr.ground_truth.folds.taus / T))
            viol_sep += bool(np.any(gaps < min_fold_separation_bound(p, omega, g_inf, T)))
    ok3 = report("3 support of filtered residual", viol_support == 0,
                 f"{viol_support} violations over {TRIALS_SUPPORT} instances ({folds} folds)")
    ok4 = report("4 fold separation", viol_sep == 0,
                 f"{viol_sep} violations over {TRIALS_SUPPORT} instances")
    assert ok3 and ok4


def test_c5_mse_bound():
    rng = np.random.default_rng(7)
    trials = viol = 0
    worst = 0.0
    while trials < TRIALS_PROP1:
        p, g, T, K, omega, g_inf = random_instance(rng)
        n_max = max_order(p, T, omega, g_inf)
        if n_max is None:
            continue
        N = int(rng.integers(1, n_max + 1))
        if not all(check_conditions(p, T, omega, g_inf, 0.0, N).values()):
            continue
        if T < p.alpha + p.alpha / (4 * N * N):
            continue
        tr = encode_and_sample(g, p, T, K)
        rep = reconstruct(tr, p, N, offset=tr.ground_truth.offset)
        m = mse(rep.gamma_tilde, tr.ground_truth.gamma)
        b = prop1_bound(p, N, len(tr.ground_truth.folds), K)
        trials += 1
        viol += m > b
        if b > 0:
            worst = max(worst, m / b)
    assert report("5 MSE within known-count bound", viol == 0,
                  f"{viol} violations over {trials} trials, worst MSE/bound {worst:.2e}")


def test_c6_cubic_scaling():
    Ts = np.geomspace(0.0015, 0.015, 6)
    signals = []
    for seed in range(10):
        g = generate_random_sinc(1.0, 12, 0, math.pi, 5, seed)
        signals.append(g.scaled(2.0 / sup_norm(g, 0, 40)))
    means, over = [], 0
    for T in Ts:
        p = ModuloParams(1.0, 1.0, T / 2)
        K = int(40 / T)
        assert all(thm2_regime(p, T, 1.0, 2.0, K).values())
        bound = thm2_bound(p, T, 1.0, 2.0)
        ms = []
        for g in signals:
            tr = encode_and_sample(g, p, T, K)
            rep = reconstruct(tr, p, 1, offset=tr.ground_truth.offset)
            ms.append(mse(rep.gamma_tilde, tr.ground_truth.gamma))
        over += sum(m > bound for m in ms)
        means.append(np.mean(ms))
    slope = np.polyfit(np.log(Ts), np.log(means), 1)[0]
    assert report("6 cubic error scaling", over == 0 and slope >= CUBIC_SLOPE,
                  f"{over} points above C*T^3; log-log slope {slope:.2f} (>= {CUBIC_SLOPE})")


# -- low-rate reproduction --------------------------------------------------

@lru_cache(maxsize=None)
def exp4_errors(g_inf, omega=1.5):
    th, us = [], []
    for s in SEEDS:
        th.append(run_experiment(preset("exp4", seed=s, scale_to=g_inf, omega=omega))[1]
                  .metrics.get("err", np.inf))
        if g_inf == 14.0:
            rep = run_experiment(preset("exp4", seed=s, scale_to=g_inf, omega=omega,
                                        method="usalg", N=1, grid_lo=0.01, grid_hi=2.0))[1]
            us.append(rep.metrics["err"])
    return th, us


def test_c7_low_rate_medians():
    th14, _ = exp4_errors(14.0)
    th16, _ = exp4_errors(16.0)
    m14, m16 = np.median(th14), np.median(th16)
    assert report("7 Exp-4 low-rate", m14 < EXP4_TH_MEDIAN_14 and m16 < EXP4_TH_MEDIAN_16,
                  f"median at 14: {m14:.2e}% (< {EXP4_TH_MEDIAN_14}), at 16: {m16:.2e}% "
                  f"(< {EXP4_TH_MEDIAN_16})")


@pytest.mark.xfail(reason="best-threshold USAlg lands just under 50% here; see notes",
                   strict=True)
def test_c7_low_rate_usalg():
    _, us = exp4_errors(14.0)
    m = np.median(us)
    assert report("7 Exp-4 USAlg", m > EXP4_US_MEDIAN,
                  f"median {m:.2f}% (> {EXP4_US_MEDIAN}, expected to fail)")


def test_c7_faster_input_informational():
    # the faster input is not a pass/fail target, it is printed for the record
    th, us = exp4_errors(14.0, omega=2.25)
    report("7 Exp-4 at omega=2.25 (info)", True,
           f"median low-rate {np.median(th):.2f}%, USAlg {np.median(us):.2f}%")


# -- compatibility, equivalence, ingestion ---------------------------------

def test_c8_ideal_modulo_and_usalg():
    g = generate_random_sinc(2.0, 40, 0, math.pi / 2, 10, 1)
    tr = encode_and_sample(g, ModuloParams(1.0), 6e-4, 100_000)
    dev = float(np.max(np.abs(tr.y - ideal_modulo(tr.ground_truth.gamma, 1.0))))
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        omega, lam = rng.uniform(0.5, 3), rng.uniform(0.5, 2)
        g = generate_random_sinc(omega, 10, 0, math.pi / omega, 1, seed)
        g_inf = rng.uniform(2, 8) * lam
        g = g.scaled(g_inf / sup_norm(g, 0, 10 * math.pi / omega))
        N = int(rng.integers(1, 4))
        T = 0.9 * (lam / g_inf) ** (1 / N) / (omega * math.e)
        K = int(10 * math.pi / omega / T)
        t = encode_and_sample(g, ModuloParams(lam), T, K)
        x = usalg(t.y, lam, N) + t.ground_truth.offset
        ref = t.ground_truth.gamma[:K - N]
        worst = max(worst, float(np.max(np.abs(x - ref)) / np.max(np.abs(ref))))
    assert report("8 ideal-modulo compatibility", dev <= IDEAL_ATOL and worst <= USALG_REL,
                  f"encoder vs ideal modulo {dev:.1e} (<= {IDEAL_ATOL}); USAlg worst relative "
                  f"{worst:.1e} (<= {USALG_REL})")


def test_c9_method_equivalence():
    p = ModuloParams(1.0, 1.0, 0.02)
    T, K = 0.05, 400
    bad = 0
    for seed in range(100):
        g = generate_random_sinc(1.0, 8, 0, math.pi, 5, seed)
        g = g.scaled(5.0 / sup_norm(g, 0, (K - 1) * T))
        assert all(check_conditions(p, T, 1.0, 5.0, 0.0, 2).values())
        tr = encode_and_sample(g, p, T, K)
        a = reconstruct(tr, p, 2, offset=tr.ground_truth.offset)
        b = reconstruct_lowrate(tr, p, 2, offset=tr.ground_truth.offset)
        same = [(f.n, f.s) for f in a.folds] == [(f.n, f.s) for f in b.folds]
        rel = np.max(np.abs(a.gamma_tilde - b.gamma_tilde)) / np.max(np.abs(a.gamma_tilde))
        bad += (not same) or rel > EQUIV_REL
    assert report("9 method equivalence", bad == 0, f"{bad} of 100 traces disagree")


def test_c10_ingestion_round_trip():
    mism = 0
    lam_err, h_err = [], []
    with tempfile.TemporaryDirectory() as d:
        f = os.path.join(d, "t.csv")
        for seed in SEEDS:
            for lam, h, alpha in ((1.5, 1.5, 0.02), (1.0, 0.3, 0.0), (2.0, 1.0, 0.01)):
                p = ModuloParams(lam, h, alpha)
                g = generate_random_sinc(4.4, 10, 0, math.pi / 4.4, 6, seed)
                tr = encode_and_sample(g, p, 0.02, 400)
                write_trace(tr, f)
                back = ingest_trace(f, keep_truth=True)
                a = reconstruct(tr, p, 3, offset=tr.ground_truth.offset)
                b = reconstruct(back, back.params, 3, offset=back.ground_truth.offset)
                mism += not np.array_equal(a.gamma_tilde, b.gamma_tilde)
                if len(tr.ground_truth.folds) >= 2:
                    q = estimate_params(tr.y, 0.02)
                    lam_err.append(abs(q.lam - lam) / lam)
                    h_err.append(abs(q.h - h) / h)
    ok = mism == 0 and max(lam_err) <= EST_LAMBDA_REL and max(h_err) <= EST_H_REL
    assert report("10 ingestion round trip", ok,
                  f"{mism} bit mismatches; lambda error {max(lam_err):.2%} (<= "
                  f"{EST_LAMBDA_REL:.0%}), h error {max(h_err):.2%} (<= {EST_H_REL:.0%})")


# -- hardware configurations on simulated traces ---------------------------

def test_hardware_configurations():
    e2 = [run_experiment(preset("exp2", K=700 + 37 * s))[1].metrics["err"] for s in SEEDS]
    e3 = [run_experiment(preset("exp3", seed=s))[1].metrics["err"] for s in SEEDS]
    ok = max(e2) < HARDWARE_ERR and max(e3) < HARDWARE_ERR
    assert report("Exp-2/Exp-3 simulated", ok,
                  f"worst Exp-2 {max(e2):.2e}%, worst Exp-3 {max(e3):.2e}% (< {HARDWARE_ERR}%)")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
