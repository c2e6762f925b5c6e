"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s -v` to see the lines live.  The
heavy criteria (6, 9-12) drive the full default study configuration; budget
about 45 minutes on a single core, much less with real worker parallelism.
"""

import math
import time

import numpy as np
import pytest

from fpplab import (
    Exponential,
    ExperimentConfig,
    Gamma,
    GridBox,
    LogNormal,
    QuantileCoupling,
    RngStream,
    Uniform,
    binomial_lower_tail,
    enumerate_paths_pk,
    estimate_delta0,
    exhaustive_passage_time,
    gaussian_coupling,
    mw_gaussian_closed_form,
    passage_time,
    path_count_bound,
    run_experiment,
    run_mw_battery,
    run_profile_study,
    sample_environment,
    tau_schedule,
)
from fpplab.coupling import MEMBERSHIP_TAU_GRID
from fpplab.experiments import mw_default_battery, result_csv_text

FOUR_LAWS = {
    "Exponential(1)": Exponential(1.0),
    "Uniform(1,3)": Uniform(1.0, 3.0),
    "Gamma(2,1)": Gamma(2.0, 1.0),
    "LogNormal(0,0.5)": LogNormal(0.0, 0.5),
}

DEFAULT_CONFIG_8 = ExperimentConfig(
    law={"family": "exponential", "rate": 1.0},
    n_grid=(16, 32, 64, 128),
    samples_per_n=4000,
    window_width=1.0,
    radius_multiplier=4,
    master_seed=20268,
    workers=8,
)


def report(number: int, name: str, ok: bool, detail: str, started: float) -> bool:
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number:2d}] {status} {name}: {detail} "
          f"({time.perf_counter() - started:.1f}s)")
    return ok


@pytest.fixture(scope="module")
def main_study_record():
    """The default study at 8 workers; shared by criteria 9, 10 and 12."""
    return run_experiment(DEFAULT_CONFIG_8)


def test_criterion_01_gaussian_coupling_exactness():
    t0 = time.perf_counter()
    c = gaussian_coupling()
    s = np.linspace(-4.0, 4.0, 64)
    tau = np.linspace(-1.0, 1.0, 64)
    S, T = np.meshgrid(s, tau, indexing="ij")
    err = float(np.abs(c.g(S.ravel(), T.ravel()) - (S.ravel() + T.ravel())).max())
    ok = err <= 1e-9
    assert report(1, "gaussian shift exactness", ok,
                  f"max |g_tau(s)-(s+tau)| = {err:.3e} <= 1e-9", t0)


def test_criterion_02_semigroup_and_monotonicity():
    t0 = time.perf_counter()
    worst_semi = worst_inv = 0.0
    mono_ok = True
    for law in FOUR_LAWS.values():
        c = QuantileCoupling(law)
        s = law.quantile(np.linspace(0.01, 0.99, 64))
        taus = np.linspace(-1.0, 1.0, 17)
        for t1 in taus[::2]:
            for t2 in taus[1::2]:
                lhs = c.g(c.g(s, t2), t1)
                rhs = c.g(s, t1 + t2)
                worst_semi = max(worst_semi, float(
                    (np.abs(lhs - rhs) / (1.0 + np.abs(rhs))).max()))
        for t in taus:
            mono_ok &= bool(np.all(np.diff(c.g(s, t)) > 0))
            back = c.g(c.g(s, t), -t)
            worst_inv = max(worst_inv, float(
                (np.abs(back - s) / (1.0 + np.abs(s))).max()))
        for u in (0.1, 0.5, 0.9):
            vals = c.g(np.full(taus.size, float(law.quantile(u))), taus)
            mono_ok &= bool(np.all(np.diff(vals) > 0))
    ok = worst_semi <= 1e-8 and worst_inv <= 1e-8 and mono_ok
    assert report(2, "semigroup/monotonicity (4 laws)", ok,
                  f"semigroup {worst_semi:.2e}, inverse {worst_inv:.2e}, "
                  f"strict monotone = {mono_ok}", t0)


def test_criterion_03_good_set_inequality():
    t0 = time.perf_counter()
    violations = 0
    details = []
    for name, law in FOUR_LAWS.items():
        c = QuantileCoupling(law)
        cal = estimate_delta0(c, 0.999)
        stream = RngStream(31337, 3, 0)
        members = []
        while sum(m.size for m in members) < 10**4:
            s = law.sample(stream, 12000)
            keep = s[c.min_shift_ratio(s) >= cal.delta0]
            members.append(keep)
        s = np.concatenate(members)[: 10**4]
        gains = c.g(s[:, None], MEMBERSHIP_TAU_GRID[None, :]) - s[:, None]
        bad = gains < cal.delta0 * MEMBERSHIP_TAU_GRID[None, :] - 1e-10
        violations += int(bad.sum())
        details.append(f"{name}: delta0={cal.delta0:g}")
    ok = violations == 0
    assert report(3, "good-set gain inequality", ok,
                  f"violations = {violations} ({'; '.join(details)})", t0)


def test_criterion_04_mw_inequality_battery():
    t0 = time.perf_counter()
    cf = mw_gaussian_closed_form(np.linspace(-5.0, 5.0, 40), np.linspace(0.0, 2.0, 25))
    cf_ok = cf.checked == 1000 and cf.violations == 0
    mc_rows = []
    for law in FOUR_LAWS.values():
        mc_rows += mw_default_battery(law, 777, trials=10**5, dims=(1, 4, 16))
    mc_ok = all(r["pass"] for r in mc_rows)
    decisive = sum(not r["inconclusive"] for r in mc_rows)
    ok = cf_ok and mc_ok
    assert report(4, "coupling inequality battery", ok,
                  f"closed-form violations = {cf.violations}/1000; "
                  f"MC checks passed = {sum(r['pass'] for r in mc_rows)}/"
                  f"{len(mc_rows)} ({decisive} decisive)", t0)


def test_criterion_05_shortest_path_oracle():
    t0 = time.perf_counter()
    law = Exponential(1.0)
    rng = np.random.default_rng(12021)
    mismatches = 0
    for trial in range(100):
        env = sample_environment(law, GridBox(3), 9000 + trial)
        src = tuple(int(v) for v in rng.integers(-3, 4, 2))
        tgt = tuple(int(v) for v in rng.integers(-3, 4, 2))
        fast = passage_time(env, src, tgt, 3)
        oracle = exhaustive_passage_time(env, src, tgt, 3)
        if fast.time != oracle.time or fast.path != oracle.path:
            mismatches += 1
    ok = mismatches == 0
    assert report(5, "oracle equivalence (100 envs, R=3)", ok,
                  f"mismatches = {mismatches}", t0)


def test_criterion_06_monotone_profiles():
    t0 = time.perf_counter()
    n, n_envs = 64, 500
    r_values = np.linspace(-1.0, 1.0, 64)
    times = run_profile_study(DEFAULT_CONFIG_8, n, n_envs, r_values)
    diffs = np.diff(times, axis=1)
    violations = int(np.count_nonzero(diffs < 0))
    ok = times.shape == (n_envs, 64) and violations == 0
    assert report(6, "monotone r-profiles (500 envs, n=64)", ok,
                  f"violations = {violations}, min step = {diffs.min():.3e}", t0)


def test_criterion_07_perturbation_budget_bounded():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(16, 1025):
        worst = max(worst, tau_schedule(n, 1.0).tau_norm_sq)
    ok = worst <= 50.0
    assert report(7, "schedule l2 budget", ok,
                  f"max |tau_r|^2 over r in [-1,1], n in [16,1024] = {worst:.3f} <= 50", t0)


def test_criterion_08_combinatorial_bounds():
    t0 = time.perf_counter()
    binom_ok = True
    for k in range(1, 21):
        m = 2**k
        log_tail = binomial_lower_tail(m, 0.999, m // 2, log=True)
        binom_ok &= log_tail <= -m * math.log(8.0)
    counts = {}
    paths_ok = True
    for k in (0, 1, 2, 3):
        count = enumerate_paths_pk(k, keep_paths=False).count
        counts[k] = count
        paths_ok &= count <= path_count_bound(k)
    ok = binom_ok and paths_ok
    assert report(8, "binomial tails and path counts", ok,
                  f"tail bound holds for k<=20: {binom_ok}; P_k counts {counts} "
                  f"all within start*3^length bounds: {paths_ok}", t0)


def test_criterion_09_anti_concentration_trend(main_study_record):
    t0 = time.perf_counter()
    rows = main_study_record.per_n
    q = [r.q_hat for r in rows]
    se = [r.q_stderr for r in rows]
    monotone_ok = all(
        q[i + 1] <= q[i] + 3.0 * math.hypot(se[i], se[i + 1])
        for i in range(len(rows) - 1)
    )
    strict_ok = q[-1] < q[0]
    ok = monotone_ok and strict_ok
    q_text = ", ".join(f"q({r.n})={r.q_hat:.4f}" for r in rows)
    assert report(9, "window mass decreases in n", ok,
                  f"{q_text}; nonincreasing within 3se = {monotone_ok}, "
                  f"q(128) < q(16) = {strict_ok}", t0)


def test_criterion_10_variance_growth(main_study_record):
    t0 = time.perf_counter()
    rows = main_study_record.per_n
    v = [r.var for r in rows]
    se = [r.var_stderr for r in rows]
    ok = all(
        v[i + 1] >= v[i] - 3.0 * math.hypot(se[i], se[i + 1])
        for i in range(len(rows) - 1)
    )
    v_text = ", ".join(f"var({r.n})={r.var:.3f}" for r in rows)
    assert report(10, "variance increases in n", ok, v_text, t0)


def test_criterion_11_window_inequality_chain():
    t0 = time.perf_counter()
    config = ExperimentConfig(
        law={"family": "exponential", "rate": 1.0},
        n_grid=(64,),
        samples_per_n=100,
        radius_multiplier=4,
        r_grid=tuple(np.linspace(0.125, 1.0, 8)),
        master_seed=20268,
        mw_trials=500,
        mw_event_trials=1000,
        workers=8,
    )
    record = run_mw_battery(config)
    chain_ok = all(row["pass"] for row in record.chain_rows)
    inc_ok = all(row["within_budget"] for row in record.increment_reports
                 if row["s_base"] == 0.0)
    worst = min(row["margin"] / row["stderr"] if row["stderr"] > 0 else math.inf
                for row in record.chain_rows)
    ok = chain_ok and inc_ok and len(record.chain_rows) == 8
    assert report(11, "window-probability chain at n=64", ok,
                  f"8/8 r-points pass = {chain_ok} (worst margin/se = {worst:.2f}); "
                  f"path-gain events within budget = {inc_ok}", t0)


def test_criterion_12_thread_count_reproducibility(main_study_record):
    t0 = time.perf_counter()
    csv8 = result_csv_text(main_study_record)
    config1 = ExperimentConfig(
        law={"family": "exponential", "rate": 1.0},
        n_grid=(16, 32, 64, 128),
        samples_per_n=4000,
        window_width=1.0,
        radius_multiplier=4,
        master_seed=20268,
        workers=1,
    )
    record1 = run_experiment(config1)
    csv1 = result_csv_text(record1)
    ok = csv1 == csv8 and record1.config_hash == main_study_record.config_hash
    assert report(12, "bit-identical CSV across 1 vs 8 workers", ok,
                  f"hashes equal = {record1.config_hash == main_study_record.config_hash}, "
                  f"CSV bytes equal = {csv1 == csv8}", t0)
