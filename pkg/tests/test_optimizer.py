from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clma.baselines import baseline_upa
from clma.channel import ApvPair, UserPathSet, channel_matrix
from clma.closed_form import construct_optimal_apvs, verify_cvo
from clma.errors import InfeasibleError, InvalidInputError, SingularChannelError
from clma.optimizer import (OptimizerConfig, SelectionPair, candidate_channel_matrix,
                            complexity_model, exhaustive_search, grid_from_resolution,
                            incremental_objective, make_candidate_grid, objective,
                            optimize_positions, optimize_selection, selected_channel,
                            sequential_elimination, successive_refinement)
from clma.receiver import rate_weights, total_power_lower_bound, total_power_zf
from clma.scenario import ScenarioConfig, path_sets, sample_users

from conftest import LAM, random_users

HALF = OptimizerConfig(LAM / 2, LAM / 2)


def brute_force(users, grid, M, N, omega, d_min):
    """Independent optimum: direct channel evaluation for every feasible APV pair."""
    best, arg = np.inf, None
    for xs in combinations(range(grid.n_x), M):
        if np.any(np.diff(grid.x[list(xs)]) < d_min - 1e-12):
            continue
        for ys in combinations(range(grid.n_y), N):
            if np.any(np.diff(grid.y[list(ys)]) < d_min - 1e-12):
                continue
            apv = ApvPair(grid.x[list(xs)], grid.y[list(ys)], grid.wavelength)
            try:
                p = total_power_zf(channel_matrix(apv, users), omega)
            except SingularChannelError:
                continue
            if p < best:
                best, arg = p, (xs, ys)
    return best, arg


class TestGrid:
    def test_cell_centres(self):
        g = make_candidate_grid(4 * LAM, 2 * LAM, 4, 1, LAM)
        np.testing.assert_allclose(g.x / LAM, [0.5, 1.5, 2.5, 3.5])
        np.testing.assert_allclose(g.y, [LAM])

    def test_resolution(self):
        g = grid_from_resolution(20 * LAM, 20 * LAM, LAM / 4, LAM)
        assert (g.n_x, g.n_y) == (80, 80)
        assert g.resolution == pytest.approx((LAM / 4, LAM / 4))

    def test_too_small(self):
        with pytest.raises(InfeasibleError):
            make_candidate_grid(LAM, LAM, 2, 2, LAM, M=3, N=1)
        with pytest.raises(InvalidInputError):
            make_candidate_grid(0, LAM, 2, 2, LAM)


class TestSelection:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            SelectionPair((1, 0), (0,))
        with pytest.raises(InvalidInputError):
            SelectionPair((), (0,))

    def test_matrices_kron_rows(self):
        sel = SelectionPair((0, 2), (1,))
        Bx, By = sel.matrices(3, 2)
        rows = np.nonzero(np.kron(Bx, By))[1]
        np.testing.assert_array_equal(rows, sel.flat_rows(2))

    def test_full_selection_identity(self, rng):
        g = make_candidate_grid(3 * LAM, 2 * LAM, 5, 4, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 2))
        np.testing.assert_array_equal(selected_channel(SelectionPair.full(5, 4), Hbar, 4), Hbar)

    def test_gather_equals_direct(self, rng):
        g = make_candidate_grid(5 * LAM, 4 * LAM, 10, 8, LAM)
        users = random_users(rng, 3, L=2)
        Hbar = candidate_channel_matrix(g, users)
        for _ in range(20):
            sel = SelectionPair(tuple(sorted(rng.choice(10, 3, replace=False))),
                                tuple(sorted(rng.choice(8, 2, replace=False))))
            np.testing.assert_allclose(selected_channel(sel, Hbar, 8),
                                       channel_matrix(g.apv(sel), users), rtol=0, atol=1e-13)

    def test_candidate_column_norm(self, rng):
        g = make_candidate_grid(2 * LAM, 2 * LAM, 3, 5, LAM)
        b = 0.3 - 0.2j
        Hbar = candidate_channel_matrix(g, [UserPathSet.single(0.2, -0.4, b)])
        assert np.vdot(Hbar[:, 0], Hbar[:, 0]).real == pytest.approx(15 * abs(b) ** 2, rel=1e-12)

    def test_on_grid_closed_form_apvs_orthogonal(self):
        users = [UserPathSet.single(h, v) for h, v in [(0.1, -0.3), (-0.4, 0.5), (-0.2, 0.7)]]
        sol = construct_optimal_apvs(users, 2, 4, LAM / 2, LAM / 2, LAM)
        # cell centres at 0.25 + 0.25 k wavelengths; shift the APVs onto the grid
        g = make_candidate_grid(2 * LAM, 4 * LAM, 8, 16, LAM)
        xi = tuple(int(i) for i in np.rint((sol.apv.x + 0.125 * LAM) / (0.25 * LAM) - 0.5))
        yi = tuple(int(i) for i in np.rint((sol.apv.y + 0.125 * LAM) / (0.25 * LAM) - 0.5))
        Hbar = candidate_channel_matrix(g, users)
        H = selected_channel(SelectionPair(xi, yi), Hbar, 16)
        assert verify_cvo(H) < 1e-9


class TestObjective:
    def test_full_grid_is_minimum(self, rng):
        g = make_candidate_grid(3 * LAM, 2 * LAM, 5, 3, LAM)
        users = random_users(rng, 2)
        Hbar = candidate_channel_matrix(g, users)
        om = rate_weights(1.0, [1.0, 2.0])
        full = objective(SelectionPair.full(5, 3), Hbar, om, 3)
        best, _ = brute_force(users, g, 3, 2, om, 0.0)
        assert full <= best

    def test_stack_is_mean(self, rng):
        g = make_candidate_grid(2 * LAM, 2 * LAM, 4, 4, LAM)
        om = np.ones(2)
        Hs = [candidate_channel_matrix(g, random_users(rng, 2)) for _ in range(3)]
        sel = SelectionPair((0, 3), (1, 2))
        ref = np.mean([objective(sel, H, om, 4) for H in Hs])
        assert objective(sel, np.stack(Hs), om, 4) == pytest.approx(ref, rel=1e-12)

    def test_incremental_matches_full(self, rng):
        g = make_candidate_grid(4 * LAM, 3 * LAM, 6, 5, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 3))
        om = rng.uniform(0.5, 2, 3)
        X, Y = [0, 2, 3, 5], [1, 2, 4]
        H = selected_channel(SelectionPair(tuple(X), tuple(Y)), Hbar, 5)
        G = H.conj().T @ H
        # remove column position 2
        rows = Hbar.reshape(6, 5, 3)[2, Y]
        got = incremental_objective(G, rows, "remove", om)
        ref = objective(SelectionPair((0, 3, 5), tuple(Y)), Hbar, om, 5)
        assert got == pytest.approx(ref, rel=1e-9)
        # remove then add back
        G2 = G - rows.conj().T @ rows
        assert incremental_objective(G2, rows, "add", om) == pytest.approx(
            total_power_zf(H, om), rel=1e-10)
        assert got > total_power_zf(H, om)

    def test_incremental_errors(self):
        G = np.eye(2, dtype=complex)
        with pytest.raises(InvalidInputError):
            incremental_objective(G, np.ones((1, 2)), "swap", np.ones(2))
        with pytest.raises(SingularChannelError):
            incremental_objective(G, np.array([[1.0, 0.0]]), "remove", np.ones(2))


class TestAlgorithm:
    def test_no_elimination_needed(self, rng):
        g = make_candidate_grid(2 * LAM, 2 * LAM, 2, 3, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 2))
        sel = sequential_elimination(Hbar, g, 2, 3, np.ones(2))
        assert sel == SelectionPair.full(2, 3)

    def test_single_user_tie_break(self):
        g = make_candidate_grid(3 * LAM, LAM, 3, 1, LAM)
        Hbar = candidate_channel_matrix(g, [UserPathSet.single(0.3, 0.2)])
        sel = sequential_elimination(Hbar, g, 1, 1, np.ones(1))
        # all single-column removals leave the same power; the first one wins each time
        assert sel.x_idx == (2,)

    def test_elimination_monotone(self, rng):
        g = make_candidate_grid(4 * LAM, LAM, 4, 1, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 2))
        r = optimize_selection(Hbar, g, 2, 1, np.ones(2), OptimizerConfig(0.5 * LAM, 0.5 * LAM))
        elim = [p.objective for p in r.trajectory if p.phase == "elimination"]
        assert len(elim) == 2 and np.all(np.diff(elim) >= 0)

    def test_refinement_fixes_spacing(self, rng):
        g = make_candidate_grid(4 * LAM, 2 * LAM, 16, 2, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 2))
        bad = SelectionPair((0, 1, 2), (0,))
        cfg = OptimizerConfig(LAM, LAM / 2)
        assert not bad.is_feasible(g, LAM, LAM / 2)
        out = successive_refinement(bad, Hbar, g, np.ones(2), cfg)
        assert out.is_feasible(g, LAM, LAM / 2)

    def test_refinement_fixed_point(self, rng):
        g = make_candidate_grid(3 * LAM, 2 * LAM, 6, 4, LAM)
        users = random_users(rng, 2)
        om = np.ones(2)
        best, (xs, ys) = brute_force(users, g, 2, 2, om, LAM / 2)
        Hbar = candidate_channel_matrix(g, users)
        out = successive_refinement(SelectionPair(xs, ys), Hbar, g, om, HALF)
        assert out == SelectionPair(xs, ys)

    def test_local_optimality(self, rng):
        g = make_candidate_grid(3 * LAM, 3 * LAM, 6, 6, LAM)
        users = random_users(rng, 3)
        om = rng.uniform(0.5, 2, 3)
        Hbar = candidate_channel_matrix(g, users)
        r = optimize_selection(Hbar, g, 2, 3, om, HALF)
        X, Y = list(r.selection.x_idx), list(r.selection.y_idx)
        for axis, slots, n in (("x", X, 6), ("y", Y, 6)):
            for i in range(len(slots)):
                for c in range(n):
                    trial = sorted(slots[:i] + [c] + slots[i + 1:])
                    if len(set(trial)) < len(trial):
                        continue
                    sel = SelectionPair(tuple(trial), tuple(Y)) if axis == "x" else \
                        SelectionPair(tuple(X), tuple(trial))
                    if not sel.is_feasible(g, LAM / 2, LAM / 2):
                        continue
                    apv = g.apv(sel)
                    assert r.objective <= total_power_zf(channel_matrix(apv, users), om) * (1 + 1e-9)

    def test_single_user_meets_bound(self):
        g = make_candidate_grid(2 * LAM, 2 * LAM, 8, 8, LAM)
        u = [UserPathSet.single(0.35, -0.2, 1e-3)]
        om = rate_weights(1e-11, [3.0])
        r = optimize_positions(u, g, 2, 2, om, HALF)
        assert r.objective == pytest.approx(total_power_lower_bound(u, 4, 1e-11, [3.0]), rel=1e-6)

    def test_reference_style_near_bound(self):
        users = [UserPathSet.single(h, v) for h, v in [(0.1, -0.3), (-0.4, 0.5), (-0.2, 0.7)]]
        g = grid_from_resolution(2 * LAM, 4 * LAM, LAM / 4, LAM)
        om = rate_weights(1e-11, [3.0] * 3)
        r = optimize_positions(users, g, 2, 4, om, HALF)
        bound = total_power_lower_bound(users, 8, 1e-11, [3.0] * 3)
        assert r.objective <= 1.05 * bound
        assert r.apv.satisfies_spacing(LAM / 2, LAM / 2)

    def test_desk_beats_dense(self):
        cfg = ScenarioConfig(n_users=8)
        lam = cfg.wavelength
        users = path_sets(sample_users(cfg, np.random.default_rng(3)))
        g = grid_from_resolution(10 * lam, 10 * lam, lam / 2, lam)
        om = rate_weights(cfg.noise_power, cfg.rates)
        r = optimize_positions(users, g, 4, 4, om, OptimizerConfig(lam / 2, lam / 2))
        dense = total_power_zf(channel_matrix(baseline_upa("dense_upa", 4, 4, lam), users), om)
        assert r.objective < dense
        assert r.apv.satisfies_spacing(lam / 2, lam / 2)
        assert len(r.trajectory) == r.iterations
        assert r.sweeps <= 50

    def test_deterministic(self, rng):
        g = make_candidate_grid(4 * LAM, 3 * LAM, 8, 6, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 3))
        a = optimize_selection(Hbar, g, 3, 2, np.ones(3), HALF)
        b = optimize_selection(Hbar, g, 3, 2, np.ones(3), HALF)
        assert a.selection == b.selection and a.objective == b.objective

    def test_too_coarse_grid(self, rng):
        g = make_candidate_grid(LAM, LAM, 4, 4, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 2))
        with pytest.raises(InfeasibleError):
            optimize_selection(Hbar, g, 3, 2, np.ones(2), OptimizerConfig(LAM / 2, LAM / 2, max_sweeps=3))

    def test_complexity_accounting(self, rng):
        g = make_candidate_grid(5 * LAM, 5 * LAM, 12, 10, LAM)
        Hbar = candidate_channel_matrix(g, random_users(rng, 3))
        r = optimize_selection(Hbar, g, 3, 3, np.ones(3), HALF)
        model = complexity_model(g, 3, 3, r.sweeps)
        assert model / 4 <= r.evaluations <= 4 * model


class TestExhaustive:
    def test_unique_selection(self, rng):
        g = make_candidate_grid(2 * LAM, 2 * LAM, 2, 2, LAM)
        sel, _ = exhaustive_search(random_users(rng, 2), g, 2, 2, np.ones(2), HALF)
        assert sel == SelectionPair.full(2, 2)

    def test_refuses_large(self, rng):
        g = make_candidate_grid(10 * LAM, 10 * LAM, 40, 40, LAM)
        with pytest.raises(InvalidInputError):
            exhaustive_search(random_users(rng, 1), g, 6, 6, np.ones(1), HALF)

    def test_matches_brute_force(self, rng):
        g = make_candidate_grid(3 * LAM, 2 * LAM, 6, 4, LAM)
        for _ in range(5):
            users = random_users(rng, 3)
            om = rng.uniform(0.5, 2, 3)
            sel, val = exhaustive_search(users, g, 2, 2, om, HALF)
            ref, _ = brute_force(users, g, 2, 2, om, LAM / 2)
            assert val == pytest.approx(ref, rel=1e-10)

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
    def test_greedy_not_below_optimum(self, seed, K):
        rng = np.random.default_rng(seed)
        g = make_candidate_grid(3 * LAM, 2 * LAM, 6, 4, LAM)
        users = random_users(rng, K)
        om = rng.uniform(0.5, 2, K)
        _, opt = exhaustive_search(users, g, 2, 2, om, HALF)
        r = optimize_positions(users, g, 2, 2, om, HALF)
        assert r.objective >= opt * (1 - 1e-12)
        if K == 1:
            assert r.objective == pytest.approx(opt, rel=1e-12)

    def test_one_dimensional(self, rng):
        g = make_candidate_grid(3 * LAM, LAM, 6, 1, LAM)
        users = random_users(rng, 2)
        _, opt = exhaustive_search(users, g, 2, 1, np.ones(2), HALF)
        r = optimize_positions(users, g, 2, 1, np.ones(2), HALF)
        assert r.objective >= opt * (1 - 1e-12)
