"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``CRITERION k: PASS/FAIL`` line, shown in the
terminal summary. The simulation-study criteria (5-7) take tens of minutes.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mprsel.data import standardize
from mprsel.likelihood import log_likelihood, observed_information, score
from mprsel.penalties import (
    Family,
    PenaltySpec,
    TuningMode,
    assemble_penalty_terms,
    expand_lambda,
    penalty_d1,
    penalty_value,
    smooth_abs,
)
from mprsel.selection import BICObjective, DEConfig, select_and_fit
from mprsel.simulation import (
    SelectionFitter,
    SimScenario,
    calibrate_censoring,
    generate_dataset,
    run_replicate,
    run_scenario,
    summarize,
)
from mprsel.solver import SolverConfig, fit_penalized, fit_unpenalized

from conftest import random_dataset, record_criterion

FIXTURES = Path(__file__).parent / "fixtures"


def _within(value, centre, tol):
    return abs(value - centre) <= tol


# --- 1 ----------------------------------------------------------------------

def test_criterion_1_derivatives():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_g = worst_h = 0.0
    for i in range(100):
        n = (5, 20, 100)[i % 3]
        p = (1, 3, 10)[(i // 3) % 3]
        data, theta = random_dataset(rng, n, p, p)
        k = theta.shape[0]
        g = score(theta, data)
        info = observed_information(theta, data)
        fd_g = np.empty(k)
        fd_h = np.empty((k, k))
        for j in range(k):
            h = 1e-6 * max(1.0, abs(theta[j]))
            e = np.zeros(k)
            e[j] = h
            fd_g[j] = (log_likelihood(theta + e, data) - log_likelihood(theta - e, data)) / (2 * h)
            h2 = 1e-5 * max(1.0, abs(theta[j]))
            e[j] = h2
            fd_h[:, j] = -(score(theta + e, data) - score(theta - e, data)) / (2 * h2)
        worst_g = max(worst_g, np.max(np.abs(g - fd_g)) / max(1.0, np.max(np.abs(g))))
        worst_h = max(worst_h, np.max(np.abs(info - fd_h)) / max(1.0, np.max(np.abs(info))))
    elapsed = time.perf_counter() - start
    ok = worst_g < 1e-5 and worst_h < 1e-4 and elapsed < 10
    record_criterion("CRITERION 1", ok, f"score rel err {worst_g:.2e} (<1e-5), information rel err "
                     f"{worst_h:.2e} (<1e-4), {elapsed:.1f}s (<10s)")
    assert ok


# --- 2 ----------------------------------------------------------------------

def test_criterion_2_lambda_zero_oracle():
    start = time.perf_counter()
    data, _ = random_dataset(np.random.default_rng(2), 300, 4, 4)
    data = standardize(data)[0]
    unpen = fit_unpenalized(data)
    sup = rel_cov = 0.0
    dfs = []
    for family in (Family.LASSO, Family.SCAD, Family.ALASSO):
        spec = PenaltySpec(family)
        if family is Family.ALASSO:
            spec = spec.with_weights(np.ones(5), np.ones(5))
        fit = fit_penalized(data, spec, expand_lambda([0.0], spec, (data.p, data.q)))
        sup = max(sup, np.max(np.abs(fit.theta_hat.flat - unpen.theta_hat.flat)))
        inv = np.linalg.inv(observed_information(fit.theta_hat, data))
        rel_cov = max(rel_cov, np.max(np.abs(fit.covariance - inv)) / np.max(np.abs(inv)))
        dfs.append(fit.effective_df)
    elapsed = time.perf_counter() - start
    k = data.p + data.q + 2
    ok = sup <= 1e-8 and rel_cov <= 1e-8 and all(d == k for d in dfs) and elapsed < 5
    record_criterion("CRITERION 2", ok, f"sup|theta - theta_mle| {sup:.1e} (<=1e-8), covariance rel "
                     f"err {rel_cov:.1e} (<=1e-8), e_lambda {dfs} == {k}, {elapsed:.2f}s (<5s)")
    assert ok


# --- 3 ----------------------------------------------------------------------

def test_criterion_3_penalty_algebra():
    start = time.perf_counter()
    eps = 1e-4
    spec = PenaltySpec(Family.SCAD, TuningMode.SINGLE, epsilon=eps)
    jump = 0.0
    for lam in (0.01, 0.1, 0.5, 2.0):
        for u in (lam, spec.scad_a * lam):
            theta_b = np.sqrt((u + eps) ** 2 - eps ** 2)  # smooth_abs(theta_b) == u
            for sign in (1.0, -1.0):
                lo, hi = sign * theta_b * (1 - 1e-13), sign * theta_b * (1 + 1e-13)
                jump = max(jump, abs(float(penalty_d1(Family.SCAD, lam, hi, spec)
                                           - penalty_d1(Family.SCAD, lam, lo, spec))))
                jump = max(jump, abs(float(penalty_value(Family.SCAD, lam, hi, spec)
                                           - penalty_value(Family.SCAD, lam, lo, spec))))

    rng = np.random.default_rng(3)
    lasso = PenaltySpec(Family.LASSO)
    alasso = PenaltySpec(Family.ALASSO).with_weights(np.ones(6), np.ones(4))
    bitwise = True
    for _ in range(50):
        theta = rng.standard_normal(10) * rng.choice([1e-6, 1e-2, 1.0, 10.0])
        lam = [float(rng.uniform(0, 2))]
        a = assemble_penalty_terms(theta, expand_lambda(lam, lasso, (5, 3)), lasso)
        b = assemble_penalty_terms(theta, expand_lambda(lam, alasso, (5, 3)), alasso)
        bitwise &= (np.array_equal(a.v, b.v) and np.array_equal(a.sigma, b.sigma))

    x = np.concatenate([np.linspace(-10, 10, 1_000_000), [0.0, eps, -eps]])
    dev = float(np.max(np.abs(smooth_abs(x, eps) - np.abs(x))))
    elapsed = time.perf_counter() - start
    ok = jump < 1e-10 and bitwise and dev <= eps and elapsed < 5
    record_criterion("CRITERION 3", ok, f"SCAD boundary jump {jump:.1e} (<1e-10), ALASSO(w=1) == LASSO "
                     f"bitwise: {bitwise}, max|a(x)-|x|| {dev:.3e} (<=1e-4), {elapsed:.2f}s (<5s)")
    assert ok


# --- 4 ----------------------------------------------------------------------

def test_criterion_4_de_versus_grid():
    start = time.perf_counter()
    gaps = []
    for seed in (41, 42, 43):
        sc = SimScenario(n=200, rng_seed=seed)
        raw, _ = generate_dataset(sc, calibrate_censoring(sc), np.random.default_rng(seed))
        std = standardize(raw)[0]
        for mode, grid in ((TuningMode.SINGLE_ADAPTIVE, [[v] for v in np.linspace(0, 1, 50)]),
                           (TuningMode.SEPARATE_ADAPTIVE,
                            [[a, b] for a in np.linspace(0, 1, 30) for b in np.linspace(0, 1, 30)])):
            res = select_and_fit(raw, PenaltySpec(Family.ALASSO, mode),
                                 de_config=DEConfig(rng_seed=seed))
            obj = BICObjective(std, res.penalty, res.unpenalized.theta_hat, SolverConfig())
            grid_min = min(obj(g) for g in grid)
            gaps.append(res.bic_star - grid_min)
    elapsed = time.perf_counter() - start
    ok = max(gaps) <= 0.05 and elapsed < 600
    record_criterion("CRITERION 4", ok, "DE BIC - grid BIC per (dataset, 1-D/2-D): "
                     + ", ".join(f"{g:+.3f}" for g in gaps) + f" (<=0.05), {elapsed:.0f}s (<600s)")
    assert ok


# --- 5 and 6: one 100-replicate study; the 20-replicate smoke run is its prefix

@pytest.fixture(scope="module")
def alasso_n500():
    sc = SimScenario(n=500, family=Family.ALASSO, tuning_mode=TuningMode.SINGLE_ADAPTIVE,
                     target_censoring=0.25, n_replicates=100, rng_seed=2024)
    rate = calibrate_censoring(sc)
    fitter = SelectionFitter()
    start = time.perf_counter()
    outcomes, smoke_seconds = [], None
    for i in range(sc.n_replicates):
        outcomes.append(run_replicate(sc, rate, fitter, i))
        if i == 19:
            smoke_seconds = time.perf_counter() - start
    return sc, rate, outcomes, smoke_seconds


@pytest.mark.slow
def test_criterion_5_selection_table(alasso_n500):
    sc, rate, outcomes, smoke_seconds = alasso_n500
    full = summarize(sc, rate, outcomes)
    smoke = summarize(sc, rate, outcomes[:20])
    targets = (("C(beta)", "scale", "C", 6.79, 0.30, 0.6), ("PT(beta)", "scale", "PT", 0.83, 0.12, 0.25),
               ("C(alpha)", "shape", "C", 6.81, 0.30, 0.6), ("PT(alpha)", "shape", "PT", 0.85, 0.12, 0.25))
    ok_full = ok_smoke = True
    parts, smoke_parts = [], []
    for label, comp, metric, centre, tol, smoke_tol in targets:
        v = getattr(getattr(full, comp), metric)
        s = getattr(getattr(smoke, comp), metric)
        ok_full &= _within(v, centre, tol)
        ok_smoke &= _within(s, centre, smoke_tol)
        parts.append(f"{label}={v:.2f} ({centre}+-{tol})")
        smoke_parts.append(f"{label}={s:.2f} (+-{smoke_tol})")
    ok_smoke &= smoke_seconds < 1800
    record_criterion("CRITERION 5", ok_full, f"100 reps, censoring {full.mean_censoring:.3f}, "
                     f"failed {full.n_failed}: " + ", ".join(parts))
    record_criterion("CRITERION 5 (smoke)", ok_smoke, "20 reps: " + ", ".join(smoke_parts)
                     + f", {smoke_seconds:.0f}s (<1800s)")
    assert ok_full and ok_smoke


@pytest.mark.slow
def test_criterion_6_estimation_table(alasso_n500):
    sc, rate, outcomes, _ = alasso_n500
    b1 = summarize(sc, rate, outcomes).coefficient("scale", 1)
    ok = (_within(b1.mean_estimate, -0.98, 0.03) and _within(b1.SEE, 0.07, 0.02)
          and _within(b1.CP, 0.93, 0.07))
    record_criterion("CRITERION 6", ok, f"beta_1: mean {b1.mean_estimate:.3f} (-0.98+-0.03), "
                     f"SEE {b1.SEE:.3f} (0.07+-0.02), CP {b1.CP:.2f} (0.93+-0.07); SE {b1.SE:.3f}")
    assert ok


# --- 7 ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_7_penalty_orderings():
    C = {}
    for family in (Family.LASSO, Family.SCAD, Family.ALASSO):
        sc = SimScenario(n=1000, family=family, target_censoring=0.25, n_replicates=50,
                         rng_seed=7)
        rep = run_scenario(sc)
        C[family] = (rep.scale.C, rep.shape.C)
    lasso, scad, alasso = C[Family.LASSO], C[Family.SCAD], C[Family.ALASSO]
    ok_beta = lasso[0] < scad[0] <= alasso[0] + 0.2
    ok_alpha = lasso[1] < alasso[1]
    record_criterion("CRITERION 7", ok_beta and ok_alpha,
                     f"C(beta): LASSO {lasso[0]:.2f} < SCAD {scad[0]:.2f} <= ALASSO {alasso[0]:.2f}"
                     f" + 0.2 [{ok_beta}]; C(alpha): LASSO {lasso[1]:.2f} < ALASSO {alasso[1]:.2f}"
                     f" [{ok_alpha}]; SCAD C(alpha) {scad[1]:.2f}")
    assert ok_beta and ok_alpha


# --- 8 ----------------------------------------------------------------------

def test_criterion_8_weibull_check():
    from mprsel.diagnostics import kaplan_meier, weibull_check_points

    start = time.perf_counter()
    rng = np.random.default_rng(8)
    T = 0.8 * rng.weibull(2.0, size=5000)
    C = rng.exponential(1.5, size=5000)
    check = weibull_check_points(kaplan_meier(np.minimum(T, C), (T <= C).astype(float)))
    elapsed = time.perf_counter() - start
    ok = _within(check.slope, 2.0, 0.05) and check.r_squared > 0.99 and elapsed < 60
    record_criterion("CRITERION 8", ok, f"slope {check.slope:.4f} (2+-0.05), R^2 "
                     f"{check.r_squared:.5f} (>0.99), {elapsed:.2f}s (<60s)")
    assert ok


# --- 9 ----------------------------------------------------------------------

def _cli(args, out):
    res = subprocess.run([sys.executable, "-m", "mprsel.cli", *args, "--output", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res


def test_criterion_9_determinism(tmp_path):
    lines = (FIXTURES / "truth_n1000.csv").read_text().splitlines(keepends=True)
    data = tmp_path / "data.csv"
    data.write_text("".join(lines[:251]))
    covs = ",".join(f"x{j}" for j in range(1, 11))
    commands = {
        "fit": (["fit", "--input", str(data), "--scale-covs", covs, "--penalty", "scad",
                 "--lambda", "0.05", "--seed", "4"], ["json"]),
        "fit-csv": (["fit", "--input", str(data), "--scale-covs", covs, "--format", "csv",
                     "--seed", "4"], ["csv"]),
        "select": (["select", "--input", str(data), "--scale-covs", covs, "--penalty", "alasso",
                    "--tuning", "separate-adaptive", "--de-gens", "8", "--seed", "4"], ["json"]),
        "simulate": (["simulate", "--n", "150", "--replicates", "4", "--de-gens", "4",
                      "--seed", "4"], ["json", "csv"]),
        "km-check": (["km-check", "--input", str(data), "--format", "csv", "--seed", "4"],
                     ["csv", "summary.json"]),
    }
    failures = []
    for name, (args, suffixes) in commands.items():
        outputs = []
        for run, threads in enumerate((1, 1, 4)):
            stem = tmp_path / f"{name}_{run}"
            _cli([*args, "--threads", str(threads)], f"{stem}.{suffixes[0]}")
            outputs.append([Path(f"{stem}.{s}").read_bytes() for s in suffixes])
        if not (outputs[0] == outputs[1] == outputs[2]):
            failures.append(name)
    ok = not failures
    record_criterion("CRITERION 9", ok, f"byte-identical across 2 runs and threads 1/4 for "
                     f"{', '.join(commands)}" + (f"; differing: {failures}" if failures else ""))
    assert ok
