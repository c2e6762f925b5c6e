import math

import numpy as np
import pytest

from fpplab import (
    Environment,
    Exponential,
    GridBox,
    QuantileCoupling,
    StandardNormal,
    Uniform,
    exhaustive_passage_time,
    passage_time,
    passage_time_profile,
    perturb_environment,
    sample_environment,
    tau_schedule,
)
from fpplab.fpp_core import path_weight, unit_tau_slots

LAW = Exponential(1.0)


def constant_weight_environment(box: GridBox, value: float = 1.0) -> Environment:
    """Hand-built environment with every edge weight set to `value`."""
    latents = np.zeros(box.n_edge_slots)
    weights = np.full(box.n_edge_slots, float(value))
    return Environment(box=box, law=Uniform(value / 2, value * 2),
                       seed_path=(0,), latents=latents, weights=weights)


class TestEnvironment:
    def test_same_seed_identical(self):
        box = GridBox(8)
        a = sample_environment(LAW, box, 5)
        b = sample_environment(LAW, box, 5)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.latents, b.latents)

    def test_different_seeds_differ(self):
        box = GridBox(8)
        a = sample_environment(LAW, box, 5)
        b = sample_environment(LAW, box, 6)
        assert not np.array_equal(a.weights, b.weights)

    def test_weights_finite_positive(self, fpp_law):
        box = GridBox(8)
        env = sample_environment(fpp_law, box, 7)
        valid = box.edge_arrays["slot"]
        w = env.weights[valid]
        assert np.all(np.isfinite(w)) and np.all(w > 0)

    def test_edge_weight_mean_clt(self):
        box = GridBox(32)
        env = sample_environment(LAW, box, 11)
        w = env.weights[box.edge_arrays["slot"]]
        assert abs(w.mean() - 1.0) < 3.0 / math.sqrt(w.size)

    def test_rejects_signed_law_without_flag(self):
        with pytest.raises(ValueError):
            sample_environment(StandardNormal(), GridBox(4), 1)
        env = sample_environment(StandardNormal(), GridBox(4), 1, coupling_test=True)
        assert env.law == StandardNormal()

    def test_weights_are_transport_of_latents(self):
        box = GridBox(6)
        env = sample_environment(LAW, box, 3)
        c = QuantileCoupling(LAW)
        assert np.array_equal(env.weights, c.h(env.latents))


class TestSchedule:
    def test_zero_r_is_zero_schedule(self):
        sched = tau_schedule(256, 0.0)
        assert sched.tau_norm_sq == 0.0
        box = GridBox(16)
        assert not np.any(sched.tau_slots(box))

    def test_edge_value_matches_formula(self):
        # e in Lambda_4 at n=256: tau = 1/(16 sqrt(ln 256)) (natural log)
        sched = tau_schedule(256, 1.0)
        oracle = 0.026541306259000596
        assert sched.tau_of_edge((20, 0), (21, 0)) == pytest.approx(oracle, rel=1e-14)

    def test_scale_below_k0_gets_zero(self):
        sched = tau_schedule(256, 1.0)  # k0 = 4, so Lambda_3 is out of range
        assert sched.tau_of_edge((9, 0), (10, 0)) == 0.0

    def test_r_out_of_range(self):
        with pytest.raises(ValueError):
            tau_schedule(64, 2.5)

    def test_linear_in_r(self):
        box = GridBox(2 ** (tau_schedule(64, 1.0).k1 + 1))
        t1 = tau_schedule(64, 1.0).tau_slots(box)
        t_half = tau_schedule(64, 0.5).tau_slots(box)
        assert np.allclose(t_half, 0.5 * t1, rtol=0, atol=0)

    def test_norm_closed_form_vs_direct_sum(self):
        for n in (16, 64, 256):
            sched = tau_schedule(n, 0.7)
            box = GridBox(2 ** (sched.k1 + 1))
            assert sched.tau_norm_sq == pytest.approx(
                sched.tau_norm_sq_direct(box), rel=1e-12)

    def test_norm_bounded_over_scales(self):
        worst = max(tau_schedule(n, 1.0).tau_norm_sq
                    for n in (16, 32, 64, 128, 256, 512, 1024))
        assert worst <= 50.0


class TestPerturbation:
    def test_zero_schedule_identity_bits(self):
        box = GridBox(16)
        env = sample_environment(LAW, box, 9)
        out = perturb_environment(env, tau_schedule(16, 0.0))
        assert np.array_equal(out.weights, env.weights)

    def test_gaussian_mode_additive(self):
        box = GridBox(16)
        env = sample_environment(StandardNormal(), box, 9, coupling_test=True)
        sched = tau_schedule(16, 1.0)
        out = perturb_environment(env, sched)
        tau = sched.tau_slots(box)
        valid = box.edge_arrays["slot"]
        assert np.abs(out.weights[valid] - (env.weights + tau)[valid]).max() <= 1e-9

    def test_positive_r_never_decreases_weights(self, fpp_law):
        box = GridBox(16)
        env = sample_environment(fpp_law, box, 10)
        out = perturb_environment(env, tau_schedule(16, 1.0))
        valid = box.edge_arrays["slot"]
        assert np.all(out.weights[valid] >= env.weights[valid])

    def test_box_must_cover_largest_annulus(self):
        env = sample_environment(LAW, GridBox(8), 1)
        with pytest.raises(ValueError):
            perturb_environment(env, tau_schedule(16, 0.5))  # needs radius 16

    def test_mismatched_coupling_rejected(self):
        env = sample_environment(LAW, GridBox(16), 1)
        with pytest.raises(ValueError):
            perturb_environment(env, tau_schedule(16, 0.5),
                                QuantileCoupling(Exponential(2.0)))


class TestPassageTime:
    def test_source_equals_target(self):
        env = sample_environment(LAW, GridBox(4), 1)
        res = passage_time(env, (1, 1), (1, 1), 4)
        assert res.time == 0.0 and res.path == ((1, 1),) and res.edge_count == 0

    def test_matches_manual_two_by_two(self):
        box = GridBox(1)
        env = constant_weight_environment(box)
        w = env.weights.copy()
        # cheapest route 0 -> (1,1) goes up then right: 0.1 + 0.2
        w[box.edge_slot((0, 0), (1, 0))] = 1.0
        w[box.edge_slot((1, 0), (1, 1))] = 1.0
        w[box.edge_slot((0, 0), (0, 1))] = 0.1
        w[box.edge_slot((0, 1), (1, 1))] = 0.2
        env = Environment(box=box, law=env.law, seed_path=(0,),
                          latents=env.latents.copy(), weights=w)
        res = passage_time(env, (0, 0), (1, 1), 1)
        oracle = exhaustive_passage_time(env, (0, 0), (1, 1), 1)
        assert res.time == oracle.time == pytest.approx(0.1 + 0.2)
        assert res.path == ((0, 0), (0, 1), (1, 1))

    def test_unit_weights_give_l1_distance(self):
        box = GridBox(6)
        env = constant_weight_environment(box)
        for tgt in ((3, 2), (-4, 1), (0, -5), (6, 6)):
            res = passage_time(env, (0, 0), tgt, 6)
            assert res.time == pytest.approx(abs(tgt[0]) + abs(tgt[1]))

    def test_exhaustive_oracle_equivalence_small_boxes(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            env = sample_environment(LAW, GridBox(3), 100 + trial)
            pts = rng.integers(-3, 4, size=(2, 2))
            src, tgt = tuple(map(int, pts[0])), tuple(map(int, pts[1]))
            res = passage_time(env, src, tgt, 3)
            oracle = exhaustive_passage_time(env, src, tgt, 3)
            assert res.time == oracle.time
            assert res.path == oracle.path

    def test_backends_and_pruning_agree(self):
        for seed in range(5):
            env = sample_environment(LAW, GridBox(10), 200 + seed)
            a = passage_time(env, (0, 0), (5, 3), 10, prune=True)
            b = passage_time(env, (0, 0), (5, 3), 10, prune=False)
            c = passage_time(env, (0, 0), (5, 3), 10, backend="reference")
            assert a.time == b.time == c.time
            assert a.path == b.path == c.path

    def test_symmetry_exact(self):
        env = sample_environment(LAW, GridBox(8), 31)
        a = passage_time(env, (0, 0), (4, 3), 8)
        b = passage_time(env, (4, 3), (0, 0), 8)
        assert a.time == b.time  # exactly: fsum over the same edge multiset

    def test_triangle_inequality(self):
        env = sample_environment(LAW, GridBox(8), 33)
        rng = np.random.default_rng(1)
        for _ in range(20):
            u, v, w = [tuple(map(int, p)) for p in rng.integers(-8, 9, size=(3, 2))]
            tuw = passage_time(env, u, w, 8).time
            tuv = passage_time(env, u, v, 8).time
            tvw = passage_time(env, v, w, 8).time
            assert tuw <= tuv + tvw + 1e-12

    def test_restriction_monotone_and_stabilizes(self):
        env = sample_environment(LAW, GridBox(48), 37)
        times = []
        stable_at = None
        for R in (12, 16, 24, 32, 48):
            res = passage_time(env, (0, 0), (12, 0), R)
            times.append(res.time)
            if stable_at is None and not res.touched_boundary:
                stable_at = res.time
        assert all(a >= b - 1e-12 for a, b in zip(times, times[1:]))
        if stable_at is not None:
            assert times[-1] == stable_at

    def test_time_is_path_weight(self):
        env = sample_environment(LAW, GridBox(16), 41)
        res = passage_time(env, (0, 0), (9, -4), 16)
        assert res.time == path_weight(env, res.path)
        assert abs(res.time - sum(
            env.weight_of_edge(u, v) for u, v in zip(res.path, res.path[1:])
        )) <= 1e-9 * res.edge_count

    def test_vertices_outside_box_rejected(self):
        env = sample_environment(LAW, GridBox(4), 1)
        with pytest.raises(ValueError):
            passage_time(env, (0, 0), (5, 0), 4)
        with pytest.raises(ValueError):
            passage_time(env, (0, 0), (3, 0), 2)

    def test_signed_weights_rejected(self):
        env = sample_environment(StandardNormal(), GridBox(4), 1, coupling_test=True)
        with pytest.raises(ValueError):
            passage_time(env, (0, 0), (1, 0), 4)

    def test_tie_diagnostic_reported(self):
        env = sample_environment(LAW, GridBox(6), 2)
        res = passage_time(env, (0, 0), (3, 0), 6, compute_ties=True)
        assert isinstance(res.tie_count, int) and res.tie_count >= 0
        res2 = passage_time(env, (0, 0), (3, 0), 6)
        assert res2.tie_count is None


class TestProfile:
    def test_single_zero_matches_passage_time(self):
        n = 16
        box = GridBox(2 * n)
        env = sample_environment(LAW, box, 50)
        prof = passage_time_profile(env, QuantileCoupling(LAW), n, [0.0],
                                    (0, 0), (n, 0), box.radius)
        direct = passage_time(env, (0, 0), (n, 0), box.radius)
        assert prof[0].time == direct.time

    def test_profile_nondecreasing(self):
        n = 16
        box = GridBox(2 * n)
        rs = np.linspace(-1.0, 1.0, 33)
        for seed in range(5):
            env = sample_environment(LAW, box, 60 + seed)
            prof = passage_time_profile(env, QuantileCoupling(LAW), n, rs,
                                        (0, 0), (n, 0), box.radius)
            times = [p.time for p in prof]
            assert all(a <= b for a, b in zip(times, times[1:]))

    def test_profile_matches_pointwise_perturbation(self):
        n = 16
        box = GridBox(2 * n)
        env = sample_environment(LAW, box, 71)
        coupling = QuantileCoupling(LAW)
        rs = [-0.75, 0.0, 0.5]
        prof = passage_time_profile(env, coupling, n, rs, (0, 0), (n, 0), box.radius)
        for r, res in zip(rs, prof):
            pert = perturb_environment(env, tau_schedule(n, r), coupling)
            direct = passage_time(pert, (0, 0), (n, 0), box.radius)
            assert res.time == direct.time

    def test_gaussian_mode_fixed_path_additivity(self):
        n = 16
        box = GridBox(2 * n)
        env = sample_environment(StandardNormal(), box, 81, coupling_test=True)
        path = [(x, 0) for x in range(0, n + 1)]
        sched = tau_schedule(n, 0.8)
        pert = perturb_environment(env, sched)
        shift = math.fsum(sched.tau_of_edge(u, v) for u, v in zip(path, path[1:]))
        assert path_weight(pert, path) - path_weight(env, path) == pytest.approx(
            shift, abs=1e-9)

    def test_unsorted_r_rejected(self):
        env = sample_environment(LAW, GridBox(32), 1)
        with pytest.raises(ValueError):
            passage_time_profile(env, QuantileCoupling(LAW), 16, [0.5, -0.5],
                                 (0, 0), (16, 0), 32)

    def test_unit_tau_slots_match_schedule(self):
        n, box = 16, GridBox(32)
        base = unit_tau_slots(n, box)
        sched = tau_schedule(n, 1.0)
        arr = box.edge_arrays
        for i in range(0, box.n_edges, 97):
            u = (int(arr["ux"][i]), int(arr["uy"][i]))
            v = (int(arr["vx"][i]), int(arr["vy"][i]))
            assert base[arr["slot"][i]] == pytest.approx(sched.tau_of_edge(u, v), abs=0)
