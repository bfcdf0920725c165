"""Acceptance suite: one test per acceptance criterion.

Each test prints a single line of the form "[criterion N] PASS ..." or
"[criterion N] FAIL ..." before asserting, so the verdicts are readable
in the captured output of a verbose pytest run.
"""

import filecmp
import json
import time

import numpy as np
import pandas as pd
from scipy import stats

from simcal import (
    Dataset,
    Family,
    HaltCriterion,
    PValueVariant,
    ScenarioConfig,
    calibrate_linear,
    calibrate_onestep,
    empirical_p_value,
    fit_restricted,
    forwardstop_transform,
    replay_selection,
    run_null_study,
    run_selection_study,
)
from simcal.cli import main as cli_main
from simcal.lasso import EntrySolver
from simcal.restricted import restricted_design


def report(number: int, ok: bool, detail: str) -> str:
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line, flush=True)
    return line


def test_criterion_01_linear_calibration_exactness():
    gen = np.random.default_rng(101)
    n = 50
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        k = int(gen.integers(0, 6))
        X = gen.normal(size=(n, max(k, 1)))
        A = tuple(range(k))
        ds = Dataset(X=X, y=gen.normal(size=n), family=Family.LINEAR)
        XA = restricted_design(ds, A)
        fit_from = fit_restricted(ds, A)
        beta_to = gen.normal(size=k + 1)
        sigma_to = float(gen.uniform(0.5, 2.0))
        y_cal = calibrate_linear(
            ds.y, fit_from.beta_A, fit_from.sigma_A, beta_to, sigma_to, XA
        )
        refit = fit_restricted(ds.with_response(y_cal), A)
        err = max(
            float(np.max(np.abs(refit.beta_A - beta_to))),
            abs(refit.sigma_A - sigma_to),
        )
        worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10.0
    line = report(1, ok, f"1000 instances, max refit error {worst:.2e} "
                  f"(tol 1e-8), {elapsed:.1f} s (limit 10 s)")
    assert ok, line


def test_criterion_02_lasso_kkt_and_null_entry_lambda():
    gen = np.random.default_rng(202)
    n, p = 100, 50
    # warm up the jit kernels outside the timed region
    warm = EntrySolver(gen.normal(size=(20, 4)), Family.LINEAR)
    warm.solve(gen.normal(size=20), 0.1)
    start = time.perf_counter()
    worst_kkt = 0.0
    worst_null = 0.0
    for _ in range(100):
        X = gen.normal(size=(n, p))
        beta_true = np.zeros(p)
        beta_true[:3] = gen.normal(size=3)
        y = X @ beta_true + gen.normal(size=n)
        solver = EntrySolver(X, Family.LINEAR)

        # closed-form entry lambda of the empty model, computed
        # independently of the solver
        mu = X.mean(axis=0)
        sd = np.sqrt(np.mean((X - mu) ** 2, axis=0))
        Xs = (X - mu) / sd
        lam_null_oracle = float(np.max(np.abs(Xs.T @ (y - y.mean()) / n)))
        lam_null = solver.lambda_entry(y, (), need_entering=False).lambda_entry
        worst_null = max(worst_null, abs(lam_null - lam_null_oracle))

        grid = lam_null_oracle * np.logspace(0.0, -3.0, 100)
        beta = np.zeros(p)
        beta0 = float(np.mean(y))
        for lam in grid:
            beta0, beta = solver.solve(y, float(lam), beta, beta0)
            g = solver.Xs.T @ (y - beta0 - solver.Xs @ beta) / n
            active = beta != 0.0
            res = 0.0
            if np.any(active):
                res = float(np.max(np.abs(g[active] - lam * np.sign(beta[active]))))
            if np.any(~active):
                res = max(res, float(np.max(np.abs(g[~active])) - lam))
            worst_kkt = max(worst_kkt, res)
    elapsed = time.perf_counter() - start
    ok = worst_kkt <= 1e-7 and worst_null <= 1e-8 and elapsed < 30.0
    line = report(2, ok, f"100 instances, max KKT residual {worst_kkt:.2e} "
                  f"(tol 1e-7), max null-entry-lambda error {worst_null:.2e} "
                  f"(tol 1e-8), {elapsed:.1f} s (limit 30 s)")
    assert ok, line


def test_criterion_03_exceedance_counts_are_binomial():
    gen = np.random.default_rng(303)
    n, p = 100, 20
    X = gen.normal(size=(n, p))
    y = 1.5 * X[:, 0] - 1.0 * X[:, 1] + gen.normal(size=n)
    ds = Dataset(X=X, y=y, family=Family.LINEAR)
    A = (0, 1)

    p_star = empirical_p_value(ds, A, N=5000, seed=1).value
    counts = np.array([
        empirical_p_value(ds, A, N=20, seed=1000 + r).exceed_count
        for r in range(400)
    ])

    observed = np.bincount(counts, minlength=21).astype(float)
    expected = 400.0 * stats.binom.pmf(np.arange(21), 20, p_star)
    # pool adjacent cells until every expected count reaches 5
    obs_bins, exp_bins = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= 5.0:
            obs_bins.append(o_acc)
            exp_bins.append(e_acc)
            o_acc = e_acc = 0.0
    obs_bins[-1] += o_acc
    exp_bins[-1] += e_acc
    chi2 = float(np.sum((np.array(obs_bins) - np.array(exp_bins)) ** 2
                        / np.array(exp_bins)))
    p_gof = float(stats.chi2.sf(chi2, len(obs_bins) - 1))
    ok = p_gof > 0.01
    line = report(3, ok, f"exceed counts vs Binomial(20, {p_star:.4f}): "
                  f"chi-square p = {p_gof:.4f} over {len(obs_bins)} pooled "
                  f"bins (threshold 0.01)")
    assert ok, line


def test_criterion_04_null_p_value_uniformity():
    details = []
    ok = True
    for family, seed in ((Family.LINEAR, 404), (Family.BINARY, 405)):
        cfg = ScenarioConfig(n=200, p=50, rho=0.0, family=family, n_active=2,
                             snr_target=1.0, N=50, n_replicates=200,
                             master_seed=seed)
        metrics = run_null_study(cfg)
        _, p_ks = metrics.ks_two_sided
        ok = ok and p_ks > 0.01
        details.append(f"{family.value} K-S p = {p_ks:.4f}")
    line = report(4, ok, ", ".join(details) + " (threshold 0.01, "
                  "200 replicates each)")
    assert ok, line


def test_criterion_05_calibration_necessity_under_correlation():
    cfg = ScenarioConfig(n=200, p=50, rho=0.99, family=Family.LINEAR,
                         n_active=2, snr_target=0.1, N=50, n_replicates=200,
                         master_seed=505, compute_naive=True)
    metrics = run_null_study(cfg)
    _, p_cal = metrics.ks_two_sided
    _, p_naive = metrics.naive_ks_two_sided
    min_naive = min(metrics.naive_p_values)
    ok = p_cal > 0.01 and p_naive < 0.01 and min_naive > 0.05
    line = report(5, ok, f"calibrated K-S p = {p_cal:.4f} (> 0.01 required), "
                  f"uncalibrated K-S p = {p_naive:.2e} (< 0.01 required), "
                  f"min uncalibrated p-value = {min_naive:.3f} (> 0.05 required)")
    assert ok, line


def test_criterion_06_family_wise_error_bound():
    alpha, N, m = 0.1, 50, 200
    cfg = ScenarioConfig(n=200, p=50, rho=0.0, family=Family.LINEAR,
                         n_active=5, snr_target=0.3, N=N, n_replicates=m,
                         alpha_grid=(alpha,), master_seed=606,
                         survey_alpha=alpha)
    metrics = run_selection_study(cfg)
    bound = alpha + (1 - alpha) / (N + 1) + 3 * np.sqrt(alpha * (1 - alpha) / m)
    ok = metrics.fwer <= bound
    line = report(6, ok, f"observed FWER {metrics.fwer:.3f} <= bound "
                  f"{bound:.3f} at alpha = {alpha}, N = {N}, {m} replicates")
    assert ok, line


def test_criterion_07_onestep_variance_equality_and_bound():
    n, reps = 500, 100_000
    rng = np.random.default_rng(707)

    y1 = np.zeros(n)
    y1[: n // 2] = 1.0
    e1 = np.full(n, 0.5)
    e2 = np.full(n, 0.3)
    means = np.empty(reps)
    for r in range(reps):
        means[r] = calibrate_onestep(y1, e1, e2, Family.BINARY, rng).mean()
    var_bin = float(means.var(ddof=1))
    target_bin = abs(0.3 - 0.5) / n
    rel_bin = abs(var_bin - target_bin) / target_bin
    ok_bin = rel_bin <= 0.05

    y1p = np.full(n, 2.0)
    e1p = np.full(n, 2.0)
    e2p = np.full(n, 2.6)
    means_p = np.empty(reps)
    for r in range(reps):
        means_p[r] = calibrate_onestep(y1p, e1p, e2p, Family.POISSON, rng).mean()
    var_poi = float(means_p.var(ddof=1))
    bound_poi = abs(2.6 - 2.0) / n
    se_poi = var_poi * np.sqrt(2.0 / (reps - 1))
    ok_poi = var_poi <= bound_poi + 3 * se_poi

    ok = ok_bin and ok_poi
    line = report(
        7, ok,
        f"binary Var = {var_bin:.3e} vs |e2-e1|/n = {target_bin:.3e} "
        f"(rel dev {rel_bin:.1%}, 5% required); "
        f"poisson Var = {var_poi:.3e} <= bound {bound_poi:.3e} "
        f"+ 3 MC se: {'yes' if ok_poi else 'no'}"
    )
    assert ok, line


def test_criterion_08_forwardstop_arithmetic_and_replay_monotonicity():
    out = forwardstop_transform([0.01, 0.05, 0.2])
    worked = float(np.max(np.abs(out - [0.010050, 0.030672, 0.094829])))
    ok_worked = worked <= 1e-5

    gen = np.random.default_rng(808)
    grid = np.linspace(0.01, 0.99, 50)
    ok_mono = True
    for _ in range(1000):
        p_seq = gen.random(int(gen.integers(1, 15)))
        for crit in HaltCriterion:
            halts = replay_selection(p_seq, grid, crit)
            ok_mono = ok_mono and all(a <= b for a, b in zip(halts, halts[1:]))
    ok = ok_worked and ok_mono
    line = report(8, ok, f"worked example max error {worked:.1e} (tol 1e-5); "
                  f"halting step non-decreasing in alpha on 1000 random "
                  f"p-sequences: {'yes' if ok_mono else 'no'}")
    assert ok, line


def test_criterion_09_onestep_conditional_expectation():
    reps = 100_000
    rng = np.random.default_rng(909)
    details = []
    ok = True

    y1 = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    for e2_val in (0.3, 0.7):
        e1 = np.full(6, 0.5)
        e2 = np.full(6, e2_val)
        if e2_val <= 0.5:
            z = (e2_val / 0.5) * y1
        else:
            z = 1.0 - ((1.0 - e2_val) / 0.5) * (1.0 - y1)
        acc = np.zeros(6)
        for _ in range(reps):
            acc += calibrate_onestep(y1, e1, e2, Family.BINARY, rng)
        mean = acc / reps
        se = np.sqrt(z * (1.0 - z) / reps)
        dev = np.abs(mean - z)
        ok = ok and bool(np.all(dev <= np.maximum(3 * se, 1e-12)))
        details.append(f"binary e2={e2_val}: max |mean-Z|/se = "
                       f"{np.max(dev / np.maximum(se, 1e-300)):.2f}")

    y1p = np.array([0.0, 1.0, 2.0, 3.0, 5.0, 8.0])
    e1p = np.full(6, float(y1p.mean()))
    e2p = 1.3 * e1p
    z = 1.3 * y1p
    frac = z - np.floor(z)
    acc = np.zeros(6)
    for _ in range(reps):
        acc += calibrate_onestep(y1p, e1p, e2p, Family.POISSON, rng)
    mean = acc / reps
    se = np.sqrt(frac * (1.0 - frac) / reps)
    dev = np.abs(mean - z)
    ok = ok and bool(np.all(dev <= np.maximum(3 * se, 1e-12)))
    details.append(f"poisson: max |mean-Z|/se = "
                   f"{np.max(dev / np.maximum(se, 1e-300)):.2f}")
    line = report(9, ok, "; ".join(details) + " (3 se limit, 1e5 draws)")
    assert ok, line


def _compare_dirs(a, b) -> list[str]:
    """Names of result files differing between two output directories.

    The manifest records wall-clock timing and is excluded.
    """
    names = sorted(
        f.name for f in a.iterdir() if f.is_file() and f.name != "manifest.json"
    )
    assert names == sorted(
        f.name for f in b.iterdir() if f.is_file() and f.name != "manifest.json"
    )
    return [n for n in names if not filecmp.cmp(a / n, b / n, shallow=False)]


def test_criterion_10_cli_determinism(tmp_path):
    gen = np.random.default_rng(1010)
    n, p = 60, 6
    X = gen.normal(size=(n, p))
    df = pd.DataFrame(X, columns=[f"x{i}" for i in range(p)])
    df["y"] = 2.0 * X[:, 0] + gen.normal(size=n)
    df["yb"] = (gen.random(n) < 1.0 / (1.0 + np.exp(-2.0 * X[:, 0]))).astype(int)
    data = tmp_path / "data.csv"
    df.to_csv(data, index=False)

    vec = tmp_path / "vec.csv"
    vec.write_text("\n".join(str(v) for v in (gen.random(n) < 0.5).astype(float)))

    scen = tmp_path / "scen.json"
    scen.write_text(json.dumps({
        "n": 40, "p": 5, "family": "linear", "n_active": 1, "snr_target": 1.0,
        "N": 8, "n_replicates": 8, "alpha_grid": [0.1, 0.3], "master_seed": 3,
    }))

    runs = {
        "test": ["test", "--data", data, "--response", "y", "--family",
                 "linear", "--restrict", "x0", "--n-sims", 15, "--seed", 5],
        "select": ["select", "--data", data, "--response", "y", "--family",
                   "linear", "--alpha", 0.2, "--n-sims", 10, "--seed", 5,
                   "--survey-alpha", 0.9],
        "path": ["path", "--data", data, "--response", "y", "--family",
                 "linear", "--max-steps", 3, "--seed", 5],
        "calibrate": ["calibrate", "--data", data, "--response", "yb",
                      "--family", "binary", "--restrict", "x0", "--vector",
                      vec, "--seed", 5],
        "simulate": ["simulate", "--config", scen, "--study", "null",
                     "--seed", 3],
    }
    diffs = []
    for name, argv in runs.items():
        for tag, jobs in (("a", 1), ("b", 4)):
            jobflag = [] if name in ("path", "calibrate") else ["--jobs", jobs]
            rc = cli_main([str(v) for v in argv + jobflag
                           + ["--out", tmp_path / name / tag]])
            assert rc == 0, f"{name} exited {rc}"
        diffs += [f"{name}/{f}" for f in
                  _compare_dirs(tmp_path / name / "a", tmp_path / name / "b")]

    for tag in ("a", "b"):
        rc = cli_main(["replay", "--selection",
                       str(tmp_path / "select/a/selection.json"),
                       "--alpha-grid", "0.05,0.1,0.2",
                       "--out", str(tmp_path / "replay" / tag)])
        assert rc == 0
        rc = cli_main(["report", str(tmp_path / "simulate/a"),
                       "--out", str(tmp_path / "report" / tag)])
        assert rc == 0
    for name in ("replay", "report"):
        diffs += [f"{name}/{f}" for f in
                  _compare_dirs(tmp_path / name / "a", tmp_path / name / "b")]

    ok = not diffs
    line = report(10, ok, "all seven subcommands byte-identical across "
                  "repeated seeded runs and --jobs 1 vs 4"
                  + ("" if ok else f"; differing: {', '.join(diffs)}"))
    assert ok, line
