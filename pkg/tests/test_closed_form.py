import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clma.channel import ApvPair, UserPathSet, channel_matrix, single_path_channel
from clma.closed_form import (construct_optimal_apvs, factorization_plan, partition_pairs,
                              prime_factorization, tightness_check, verify_cvo)
from clma.errors import DegenerateAnglesError, InfeasibleError, InvalidInputError
from clma.receiver import (mrc_combiner, per_user_power_lower_bound, rate_weights, sinr,
                           total_power_lower_bound, total_power_zf)

LAM = 1.0
REF_USERS = [(0.1, -0.3), (-0.4, 0.5), (-0.2, 0.7)]


def trial_division(n):
    out, d = [], 2
    while n > 1:
        if n % d == 0:
            out.append(d)
            n //= d
        else:
            d += 1
    return out


def users_from(pairs, coeffs=None):
    coeffs = coeffs or [1.0] * len(pairs)
    return [UserPathSet.single(h, v, b) for (h, v), b in zip(pairs, coeffs)]


class TestFactorization:
    def test_examples(self):
        assert prime_factorization(24) == [2, 2, 2, 3]
        assert prime_factorization(1) == []
        assert prime_factorization(36) == trial_division(36) == [2, 2, 3, 3]
        with pytest.raises(InvalidInputError):
            prime_factorization(0)

    def test_plan_24(self):
        plan = factorization_plan(24)
        np.testing.assert_array_equal(plan.cumprods, [1, 2, 4, 8])
        np.testing.assert_array_equal(plan.coefficients(8), [1, 1, 1, 0])
        np.testing.assert_array_equal(plan.coefficients(23), [0, 1, 1, 2])

    def test_plan_small(self):
        p2 = factorization_plan(2)
        np.testing.assert_array_equal(p2.cumprods, [1])
        np.testing.assert_array_equal(p2.coeff_matrix, [[0, 1]])
        p4 = factorization_plan(4)
        np.testing.assert_array_equal(p4.cumprods, [1, 2])
        np.testing.assert_array_equal(p4.coefficients(3), [0, 1])
        np.testing.assert_array_equal(p4.coefficients(4), [1, 1])
        assert factorization_plan(1).count == 0

    @given(st.integers(1, 400))
    def test_reconstruction(self, n):
        plan = factorization_plan(n)
        assert math.prod(plan.factors) == n
        assert list(plan.factors) == trial_division(n)
        if plan.count:
            idx = plan.coeff_matrix.T @ plan.cumprods + 1
            np.testing.assert_array_equal(idx, np.arange(1, n + 1))
            assert np.all(plan.coeff_matrix < np.asarray(plan.factors)[:, None])
            assert np.all(plan.coeff_matrix >= 0)


class TestPartition:
    def test_tightness(self):
        assert tightness_check(3, 2, 4)
        assert not tightness_check(4, 2, 4)
        assert tightness_check(1, 1, 1)

    def test_reference_partition(self):
        p = partition_pairs(3, 1, 2)
        assert p.horizontal == ((0, 1),) and p.vertical == ((0, 2), (1, 2))

    def test_small(self):
        assert partition_pairs(2, 1, 0).horizontal == ((0, 1),)
        p = partition_pairs(3, 3, 0)
        assert p.horizontal == ((0, 1), (0, 2), (1, 2)) and p.vertical == ()
        with pytest.raises(InfeasibleError):
            partition_pairs(4, 1, 2)

    def test_collision_swaps_axis(self):
        # users 0 and 1 share the horizontal AoA, so (0, 1) must go vertical
        p = partition_pairs(3, 1, 2, aoa_h=[0.2, 0.2, -0.5], aoa_v=[0.1, 0.4, 0.7])
        assert (0, 1) in p.vertical
        assert sorted(p.horizontal + p.vertical) == [(0, 1), (0, 2), (1, 2)]

    def test_double_collision(self):
        with pytest.raises(DegenerateAnglesError):
            partition_pairs(2, 1, 1, aoa_h=[0.2, 0.2], aoa_v=[0.1, 0.1])

    @given(st.integers(1, 8), st.integers(0, 20), st.integers(0, 20))
    def test_partition_invariants(self, K, cx, cy):
        total = K * (K - 1) // 2
        if total > cx + cy:
            with pytest.raises(InfeasibleError):
                partition_pairs(K, cx, cy)
            return
        p = partition_pairs(K, cx, cy)
        assert len(p.horizontal) <= cx and len(p.vertical) <= cy
        assert sorted(p.horizontal + p.vertical) == list(combinations(range(K), 2))


class TestConstruction:
    def test_reference_instance(self):
        sol = construct_optimal_apvs(users_from(REF_USERS), 2, 4, 0.5, 0.5, LAM)
        np.testing.assert_array_equal(sol.apv.x, [0.0, 1.0])
        np.testing.assert_allclose(sol.apv.y, [0.0, 0.5, 2.5, 3.0], rtol=0, atol=1e-15)
        assert sol.region == pytest.approx((1.0, 3.0))
        H = channel_matrix(sol.apv, users_from(REF_USERS))
        assert verify_cvo(H) < 1e-12

    def test_reference_bit_deterministic(self):
        a = construct_optimal_apvs(users_from(REF_USERS), 2, 4, 0.5, 0.5, LAM).apv
        b = construct_optimal_apvs(users_from(REF_USERS), 2, 4, 0.5, 0.5, LAM).apv
        assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()

    def test_single_user_ladder(self):
        sol = construct_optimal_apvs(users_from([(0.3, 0.1)]), 4, 3, 0.5, 0.7, LAM)
        np.testing.assert_allclose(np.diff(sol.apv.x), 0.5)
        np.testing.assert_allclose(np.diff(sol.apv.y), 0.7)

    def test_errors(self):
        with pytest.raises(InfeasibleError):
            construct_optimal_apvs(users_from(REF_USERS + [(0.9, 0.9)]), 2, 4, 0.5, 0.5, LAM)
        with pytest.raises(InvalidInputError):
            construct_optimal_apvs([UserPathSet([0.1, 0.2], [0, 0], [1, 1])], 2, 2, 0.5, 0.5, LAM)
        with pytest.raises(DegenerateAnglesError):
            construct_optimal_apvs(users_from([(0.1, 0.2), (0.1, 0.2)]), 2, 2, 0.5, 0.5, LAM)

    def test_offsets_minimal(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            pts = [tuple(rng.uniform(-1, 1, 2)) for _ in range(3)]
            sol = construct_optimal_apvs(users_from(pts), 2, 4, 0.5, 0.5, LAM)
            for plan, pairs, steps, offs, ax in (
                    (sol.plan_x, sol.partition.horizontal, sol.steps_x, sol.offsets_x, 0),
                    (sol.plan_y, sol.partition.vertical, sol.steps_y, sol.offsets_y, 1)):
                for i, (k, q) in enumerate(pairs):
                    m_i = plan.factors[i]
                    fill = sum((plan.factors[j] - 1) * steps[j] for j in range(i)) + 0.5
                    diff = abs(pts[k][ax] - pts[q][ax])
                    # smallest integer with (rho + 1/m) / diff >= fill
                    rho = max(0, math.ceil(fill * diff - 1 / m_i - 1e-9))
                    assert offs[i] == rho

    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=3),
           st.sampled_from([(2, 4), (4, 2), (8, 1), (2, 2), (6, 6), (12, 1)]))
    def test_random_orthogonality(self, pts, shape):
        M, N = shape
        h = [p[0] for p in pts]
        v = [p[1] for p in pts]
        for k, q in combinations(range(len(pts)), 2):
            if abs(h[k] - h[q]) < 1e-3 or abs(v[k] - v[q]) < 1e-3:
                return
        if not tightness_check(len(pts), M, N):
            with pytest.raises(InfeasibleError):
                construct_optimal_apvs(users_from(pts), M, N, 0.5, 0.5, LAM)
            return
        users = users_from(pts)
        sol = construct_optimal_apvs(users, M, N, 0.5, 0.5, LAM)
        assert sol.apv.satisfies_spacing(0.5, 0.5)
        if len(pts) > 1:
            H = channel_matrix(sol.apv, users)
            assert verify_cvo(H) < 1e-9
        # per-factor sum of the steering phases vanishes for every assigned pair
        for plan, pairs, steps, aoas in ((sol.plan_x, sol.partition.horizontal, sol.steps_x, h),
                                         (sol.plan_y, sol.partition.vertical, sol.steps_y, v)):
            for i, (k, q) in enumerate(pairs):
                u = np.arange(plan.factors[i])
                s = np.exp(2j * np.pi * u * steps[i] * (aoas[k] - aoas[q]))
                assert abs(s.sum()) < 1e-10

    def test_bound_met_and_mrc_rate(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pts = [tuple(rng.uniform(-1, 1, 2)) for _ in range(3)]
            b = list(rng.uniform(0.1, 2, 3) * np.exp(2j * np.pi * rng.uniform(size=3)))
            users = users_from(pts, b)
            sol = construct_optimal_apvs(users, 2, 4, 0.5, 0.5, LAM)
            H = channel_matrix(sol.apv, users)
            rates = rng.uniform(1, 4, 3)
            s2 = 1e-3
            assert total_power_zf(H, rate_weights(s2, rates)) == pytest.approx(
                total_power_lower_bound(users, 8, s2, rates), rel=1e-9)
            p = np.array([per_user_power_lower_bound([b[k]], 8, s2, rates[k]) for k in range(3)])
            W = mrc_combiner(H)
            for k in range(3):
                assert np.log2(1 + sinr(W, H, p, s2, k)) >= rates[k] - 1e-9


class TestCvo:
    def test_identical_columns(self):
        h = np.array([[1, 1], [1j, 1j]])
        assert verify_cvo(h) == pytest.approx(1.0)

    def test_near_collinear_dense(self):
        apv = ApvPair(np.arange(4) * 0.5, np.arange(4) * 0.5, LAM)
        H = np.column_stack([single_path_channel(apv, 0.10, 0.2, 1), single_path_channel(apv, 0.12, 0.2, 1)])
        assert verify_cvo(H) > 0.5

    def test_needs_two_users(self):
        with pytest.raises(InvalidInputError):
            verify_cvo(np.ones((3, 1)))
