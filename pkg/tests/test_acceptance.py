"""Acceptance criteria at their stated tolerances.

Each test records a pass/fail line, printed in the terminal summary, before
asserting.
"""

import math
import os
import time

import numpy as np
from scipy.stats import spearmanr

from ksl.experiments import (default_config, records_to_csv, run_experiment, target_function)
from ksl.interpolation import LabeledSet, fit, predict
from ksl.kernels import Kernel, gram
from ksl.operator_diag import estimate_p_fast, estimate_r, estimate_r_dense
from ksl.rng import derive_seed, generator
from ksl.sampling import sample_uniform, separation_prob_bound, separation_radius
from ksl.spectrum import (CALIBRATION_ALPHAS, CALIBRATION_DIMS, CALIBRATION_LAMBDAS, b_m_lambda, clean_eigenvalues,
                          effective_dimension_empirical, effective_dimension_proxy, min_eig_lower_bound,
                          multi_log_integral, multi_log_integral_check)
from ksl.linalg import eigen_sym

from oracles import certified_log_min_eig

THREADS = max(1, min(8, os.cpu_count() or 1))


def _means(records, key, attr):
    keys = sorted({key(r) for r in records})
    return keys, [float(np.mean([getattr(r, attr) for r in records if key(r) == k])) for k in keys]


def test_criterion_1_interpolation_exactness(acceptance):
    t0 = time.perf_counter()
    combos = [(m, d) for m in (50, 200, 500) for d in (20, 50, 100)]
    worst = 0.0
    kernel = Kernel.gaussian(0.025)
    for i in range(100):
        m, d = combos[i % len(combos)]
        seed = derive_seed(1, "exactness", i)
        S = sample_uniform(m, d, (-1.0, 1.0), derive_seed(seed, "points"))
        c = generator(derive_seed(seed, "coef")).uniform(-1.0, 1.0, d)
        y = target_function(c)(S.points)
        model = fit(LabeledSet(S, y), kernel, 0.0)
        res = float(np.max(np.abs(predict(model, S.points) - y)))
        worst = max(worst, res / (1.0 + float(np.max(np.abs(y)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-7 and elapsed < 60
    acceptance.record(1, ok, f"max scaled residual {worst:.3e} (<= 1e-7), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_2_condition_decay(acceptance):
    t0 = time.perf_counter()
    cfg = default_config("fig2", dims=(2, 10, 25, 50, 100), ms=(500,), trials=10)
    recs = [r for r in run_experiment(cfg, THREADS).records if r.trial >= 0]
    elapsed = time.perf_counter() - t0
    dims, q = _means(recs, lambda r: r.d, "q_sep")
    _, cond = _means(recs, lambda r: r.d, "cond")
    ratio = cond[dims.index(100)] / cond[dims.index(10)]
    ok = (bool(np.all(np.diff(q) > 0)) and bool(np.all(np.diff(cond) < 0)) and ratio < 0.01 and elapsed < 600)
    acceptance.record(2, ok, f"q {[round(v, 4) for v in q]}, cond {[f'{v:.3g}' for v in cond]}, "
                             f"cond(100)/cond(10) {ratio:.3g}, {elapsed:.1f} s")
    assert ok


def test_criterion_3_sim1_trends(acceptance):
    t0 = time.perf_counter()
    cfg = default_config("sim1", dims=(8,), ms=tuple(range(500, 1501, 200)), trials=20)
    recs = run_experiment(cfg, THREADS).records
    elapsed = time.perf_counter() - t0
    ms, rm = _means(recs, lambda r: r.m, "RMSE_test")
    _, ae = _means(recs, lambda r: r.m, "AE")
    rho = float(spearmanr(ms, rm)[0])
    dominated = all(a >= b for a, b in zip(ae, rm))
    ok = rho <= -0.9 and dominated and elapsed < 1200
    acceptance.record(3, ok, f"Spearman {rho:.3f} (<= -0.9), mean RMSE {[round(v, 4) for v in rm]}, "
                             f"AE >= RMSE at every m: {dominated}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_sim3_ridgeless(acceptance):
    t0 = time.perf_counter()
    cfg = default_config("sim3", dims=(200,), ms=(500,), trials=20, variants=("noise_free",))
    recs = run_experiment(cfg, THREADS).records
    elapsed = time.perf_counter() - t0
    lams, rm = _means(recs, lambda r: r.lam, "RMSE_test")
    best = int(np.argmin(rm))
    monotone = bool(np.all(np.diff(rm) >= 0))
    ok = best == 0 and monotone and elapsed < 900
    acceptance.record(4, ok, f"argmin lambda {lams[best]} (want 0), nondecreasing {monotone}, "
                             f"mean RMSE {[round(v, 4) for v in rm]}, {elapsed:.1f} s")
    assert ok


def test_criterion_5_separation_probability(acceptance):
    m, d, trials = 10, 3, 2000
    q = np.array([separation_radius(sample_uniform(m, d, (0.0, 1.0), derive_seed(5, "separation", t)))
                  for t in range(trials)])
    lines, ok, used = [], True, 0
    for t in np.linspace(0.02, 0.13, 5):
        bound = separation_prob_bound(m, d, 1.0, float(t)).value
        if bound < 0.5:
            continue
        used += 1
        emp = float(np.mean(q >= t))
        ok &= emp >= bound - 0.02
        # diagnostic only: the same bound read with the full minimal distance 2q
        emp_full = float(np.mean(2 * q >= t))
        lines.append(f"t={t:.4f}: P={emp:.4f} bound={bound:.4f} (P with 2q: {emp_full:.4f})")
    ok &= used > 0
    acceptance.record(5, ok, "; ".join(lines))
    assert ok


def _random_instance(family, i):
    rng = generator(derive_seed(6, family, i))
    m = int(rng.integers(2, 31))
    if family == "gaussian":
        d = int(rng.integers(2, 6))
        kernel = Kernel.gaussian(float(rng.uniform(1.0, 10.0)))
    else:
        d = int(rng.integers(1, 6))
        kernel = Kernel.sobolev(d / 2 + float(rng.uniform(0.25, 3.0)), d)
    X = rng.uniform(0.0, 1.0, (m, d))
    return kernel, X, m, d


def test_criterion_6_min_eig_bound(acceptance):
    counts = {}
    for family in ("gaussian", "sobolev"):
        held = 0
        for i in range(50):
            kernel, X, m, d = _random_instance(family, i)
            q = separation_radius(X)
            log_bound = min_eig_lower_bound(kernel, q, d, log=True)
            held += certified_log_min_eig(kernel, X) - math.log(m) >= log_bound
        counts[family] = held
    ok = all(v == 50 for v in counts.values())
    acceptance.record(6, ok, ", ".join(f"{k} {v}/50" for k, v in counts.items()))
    assert ok


def test_criterion_7_operator_concentration(acceptance):
    m, mr, d, lam, trials = 200, 2000, 30, 0.1, 200
    kernel = Kernel.gaussian(0.025)
    kappa = math.sqrt(kernel.diagonal)
    n_lam = effective_dimension_proxy(kernel, d, lam, box=(-1.0, 1.0), size=2000, seed=7)
    r_bound = 2 * kappa ** 2 / math.sqrt(m) * math.sqrt(math.log(2 / 0.05))
    r_hits = p_hits = 0
    for t in range(trials):
        seed = derive_seed(7, "concentration", t)
        X = sample_uniform(m, d, (-1.0, 1.0), derive_seed(seed, "points")).points
        R = sample_uniform(mr, d, (-1.0, 1.0), derive_seed(seed, "reference")).points
        c = generator(derive_seed(seed, "coef")).uniform(-1.0, 1.0, d)
        f = target_function(c)
        noise = generator(derive_seed(seed, "noise")).uniform(-0.2, 0.2, m)
        y = f(X) + noise
        sup_f = max(abs(float(np.sum(np.maximum(c, c / math.e)))), abs(float(np.sum(np.minimum(c, c / math.e)))))
        M = sup_f + 0.2
        p_bound = 2 * M / kappa * b_m_lambda(m, lam, kappa, n_lam) * math.log(2 / 0.1)
        KRR = gram(kernel, R)
        r_hits += estimate_r(X, R, kernel) <= r_bound
        p_hits += estimate_p_fast(X, R, kernel, lam, f(X) - y, KRR) <= p_bound
    ok = r_hits >= 0.95 * trials and p_hits >= 0.90 * trials
    acceptance.record(7, ok, f"r_hat bound held {r_hits}/{trials} (>= 95%), p_hat bound held {p_hits}/{trials} "
                             f"(>= 90%), N proxy {n_lam:.2f}")
    assert ok


def test_criterion_8_oracle_equivalence(acceptance):
    worst_n = 0.0
    for i in range(100):
        rng = generator(derive_seed(8, "nd", i))
        m, d = int(rng.integers(2, 21)), int(rng.integers(1, 6))
        X = rng.uniform(0.0, 1.0, (m, d))
        kernel = Kernel.gaussian(float(rng.uniform(0.5, 10.0)))
        lam = float(10 ** rng.uniform(-4, 0))
        K = gram(kernel, X)
        via_eig = effective_dimension_empirical(clean_eigenvalues(eigen_sym(K).eigenvalues), m, lam)
        direct = float(np.trace(np.linalg.solve(lam * m * np.eye(m) + K, K)))
        worst_n = max(worst_n, abs(via_eig - direct) / abs(direct))
    worst_r = 0.0
    for i in range(30):
        rng = generator(derive_seed(8, "r", i))
        m = int(rng.integers(1, 15))
        mr = int(rng.integers(1, 31 - m))
        d = int(rng.integers(1, 6))
        X, R = rng.uniform(0.0, 1.0, (m, d)), rng.uniform(0.0, 1.0, (mr, d))
        kernel = Kernel.gaussian(float(rng.uniform(0.5, 10.0)))
        a, b = estimate_r(X, R, kernel), estimate_r_dense(X, R, kernel)
        worst_r = max(worst_r, abs(a - b) / max(abs(b), 1e-300))
    ok = worst_n <= 1e-9 and worst_r <= 1e-8
    acceptance.record(8, ok, f"N_D worst rel {worst_n:.2e} (<= 1e-9), estimate_r worst rel {worst_r:.2e} (<= 1e-8)")
    assert ok


def test_criterion_9_multi_log_integral(acceptance):
    points = [(a, d, lam) for a in CALIBRATION_ALPHAS for d in CALIBRATION_DIMS for lam in CALIBRATION_LAMBDAS]
    rng = generator(derive_seed(9, "fresh"))
    for _ in range(20):
        points.append((float(rng.uniform(0.5, 2.0)), int(rng.integers(1, 4)), float(10 ** rng.uniform(-6, math.log10(0.5)))))
    worst_ratio = max(multi_log_integral_check(*p).ratio for p in points)
    worst_closed = 0.0
    for a, d, lam in points:
        if d == 1:
            exact = math.log1p(1 / lam) / a
            worst_closed = max(worst_closed, abs(multi_log_integral(a, 1, lam) - exact) / exact)
    ok = worst_ratio <= 1.0 and worst_closed <= 1e-7
    acceptance.record(9, ok, f"{len(points)} points, worst integral/bound {worst_ratio:.4f} (<= 1), "
                             f"d=1 closed-form rel err {worst_closed:.2e} (<= 1e-7)")
    assert ok


def test_criterion_10_determinism(acceptance):
    configs = [
        default_config("fig2", dims=(2, 10), ms=(40,), trials=3, master_seed=11),
        default_config("sim1", dims=(4,), ms=(40, 60), trials=3, master_seed=11),
        default_config("sim2", dims=(50,), ms=(40,), trials=3, master_seed=11),
        default_config("sim3", dims=(20,), ms=(40,), trials=2, master_seed=11),
    ]
    same = {}
    for cfg in configs:
        a = records_to_csv(run_experiment(cfg, 1), include_runtime=False)
        b = records_to_csv(run_experiment(cfg, 4), include_runtime=False)
        c = records_to_csv(run_experiment(cfg, 4), include_runtime=False)
        same[cfg.experiment] = a == b == c
    ok = all(same.values())
    acceptance.record(10, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok
