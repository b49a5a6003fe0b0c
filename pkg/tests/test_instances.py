import numpy as np
import pytest

from mgx import (build_agnostic_pair, build_tree_pair, ne_backward_induction, occupancy_measure,
                 one_hot_featurize, random_linear, random_tabular, subopt_gap)
from mgx.coverage import behavior_occupancy
from mgx.errors import InvalidShape
from mgx.instances import tree_depth_bound


class TestTreePair:
    @pytest.mark.parametrize("S,A,B,H,alpha,q_expected", [(3, 2, 2, 4, 0.1, 1),
                                                          (7, 2, 2, 6, 0.05, 2)])
    def test_equilibrium_values(self, S, A, B, H, alpha, q_expected):
        pair = build_tree_pair(S, A, B, H, alpha)
        assert pair.q == q_expected == tree_depth_bound(S, A, B)
        _, Vg = ne_backward_induction(pair.g)
        _, Vp = ne_backward_induction(pair.g_prime)
        assert Vg[0, 0] == pytest.approx(H * alpha, abs=1e-9)
        assert Vp[0, 0] == pytest.approx((2 * H - pair.q) * alpha, abs=1e-9)

    def test_cross_equilibrium_gap(self):
        pair = build_tree_pair(3, 2, 2, 4, 0.1)
        ne_prime, _ = ne_backward_induction(pair.g_prime)
        assert subopt_gap(pair.g, ne_prime) >= (4 - pair.q) * 0.1 - 1e-9

    def test_reward_tables_differ_only_at_target(self):
        pair = build_tree_pair(7, 2, 2, 6, 0.05)
        diff = np.asarray(pair.g.r_mean) != np.asarray(pair.g_prime.r_mean)
        ts, ta, tb = pair.target
        expected = np.zeros_like(diff)
        expected[:, ts, ta, tb] = True
        np.testing.assert_array_equal(diff, expected)
        np.testing.assert_array_equal(pair.g.p, pair.g_prime.p)

    def test_transitions_form_tree_with_absorbing_leaves(self):
        pair = build_tree_pair(7, 2, 2, 6, 0.05)
        p = np.asarray(pair.g.p[0])  # same kernel at every step
        # deterministic: every row is one-hot
        assert np.all(p.max(axis=-1) == 1.0)
        succ = p.argmax(axis=-1)
        # the deepest starred node self-absorbs
        ts = pair.target[0]
        assert np.all(succ[ts] == ts)
        # starred chain: every (a, b1) edge of s*_i leads to s*_{i+1}
        for i in range(pair.q):
            assert np.all(succ[pair.ne_path[i], :, 0] == pair.ne_path[i + 1])
        # no state other than s*_{i-1} reaches s*_i (self-absorption aside)
        for i in range(1, pair.q + 1):
            reaches = {int(s) for s in np.argwhere(succ == pair.ne_path[i])[:, 0]
                       if s != pair.ne_path[i]}
            assert reaches == {pair.ne_path[i - 1]}

    def test_scaling_with_alpha(self):
        values = []
        for alpha in (0.2, 0.02, 0.002):
            pair = build_tree_pair(3, 2, 2, 4, alpha)
            _, V = ne_backward_induction(pair.g)
            values.append(V[0, 0])
        np.testing.assert_allclose(values, [0.8, 0.08, 0.008], atol=1e-12)

    def test_depth_within_logarithmic_bound(self):
        # Starred nodes fan out to fewer distinct children (their b1 edges
        # collapse), so the constructed depth can exceed the full-branching
        # bound by a constant factor but stays logarithmic in S.
        for S in (2, 3, 4, 5, 6, 7, 9, 12, 15):
            pair = build_tree_pair(S, 2, 2, 10, 0.05)
            bound = tree_depth_bound(S, 2, 2)
            assert bound <= pair.q <= 2 * bound + 1

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            build_tree_pair(3, 2, 2, 4, alpha=0.5)
        with pytest.raises(InvalidShape):
            build_tree_pair(100, 2, 2, 4, alpha=0.1)  # S > (AB)^(H/2)
        with pytest.raises(InvalidShape):
            build_tree_pair(3, 2, 1, 4, alpha=0.1)  # needs B >= 2

    def test_target_is_least_represented(self):
        for S, A, B, H in ((3, 2, 2, 4), (7, 2, 2, 6), (5, 2, 2, 5)):
            pair = build_tree_pair(S, A, B, H, 0.1)
            occ = behavior_occupancy(pair.g, pair.rho)
            ts, ta, tb = pair.target
            for h in range(pair.q, H):
                target_mass = occ[h, ts, ta, tb]
                assert target_mass > 0
                others = occ[h].copy()
                others[ts, ta, tb] = np.inf
                assert target_mass < others[others > 0].min()

    def test_coupled_sampling_differs_only_at_fired_target(self):
        pair = build_tree_pair(3, 2, 2, 4, 0.1)
        Dg = pair.sample("g", K=300, seed=5)
        Dp = pair.sample("g_prime", K=300, seed=5)
        np.testing.assert_array_equal(Dg.s, Dp.s)
        np.testing.assert_array_equal(Dg.s_next, Dp.s_next)
        diff = Dg.r != Dp.r
        ts, ta, tb = pair.target
        at_target = (Dg.s == ts) & (Dg.a == ta) & (Dg.b == tb)
        assert np.all(at_target[diff])
        np.testing.assert_array_equal(Dp.r[diff], Dg.r[diff] + 1.0)
        # increment rate near 2 * alpha among target visits
        n = at_target.sum()
        rate = diff.sum() / n
        assert abs(rate - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / n)


class TestAgnosticPair:
    def test_epsilon_zero_games_coincide(self):
        pair = build_agnostic_pair(p=0.5, epsilon=0.0, N=100)
        np.testing.assert_array_equal(pair.g1.r_mean, pair.g2.r_mean)

    def test_reward_means_match_construction(self):
        p, eps, N = 0.4, 0.3, 50
        pair = build_agnostic_pair(p=p, epsilon=eps, N=N)
        e = eps / (4 * p * N)
        np.testing.assert_allclose(pair.g1.r_mean[0, 0], [[0.5 + e, 0.0], [0.5, 0.0]])
        np.testing.assert_allclose(pair.g2.r_mean[0, 0], [[0.5 - e, 0.0], [0.5, 0.0]])
        np.testing.assert_allclose(pair.rho.rho[0, 0],
                                   [[p / 2, p / 2], [(1 - p) / 2, (1 - p) / 2]])

    def test_coupling_law_closed_form(self):
        pair = build_agnostic_pair(p=0.5, epsilon=0.4, N=20)
        law = pair.coupling_law()
        e = 0.4 / (4 * 0.5 * 20)
        assert law[(0, 0)] == pytest.approx(0.5 - e)
        assert law[(0, 1)] == 0.0
        assert law[(1, 0)] == pytest.approx(2 * e)
        assert law[(1, 1)] == pytest.approx(0.5 - e)
        assert sum(law.values()) == pytest.approx(1.0)

    def test_coupling_marginal_monte_carlo(self):
        # P(X != Y) = eps / (2 p N), estimated over a million coupled draws.
        p, eps, N = 0.5, 0.5, 10
        pair = build_agnostic_pair(p=p, epsilon=eps, N=N)
        q = eps / (2 * p * N)
        rng = np.random.default_rng(0)
        u = rng.random(1_000_000)
        x = u > 1.0 - (0.5 + pair.mean_shift)
        y = u > 1.0 - (0.5 - pair.mean_shift)
        freq = (x != y).mean()
        assert abs(freq - q) <= 3 * np.sqrt(q * (1 - q) / 1_000_000)

    def test_indistinguishability_event_frequency(self):
        # Zero reward mismatches at (a1, b1) across coupled dataset pairs
        # happens well above the 1/4 floor.
        pair = build_agnostic_pair(p=0.5, epsilon=0.5, N=50)
        hits = 0
        trials = 300
        for seed in range(trials):
            d1, d2 = pair.coupled_sample(seed)
            hits += int(np.array_equal(d1.r, d2.r))
        assert hits / trials >= 0.25 - 0.05


class TestRandomGames:
    def test_tabular_trivial_sizes(self):
        mg = random_tabular(1, 1, 1, 1, seed=0)
        assert mg.p.shape == (1, 1, 1, 1, 1) and mg.p[0, 0, 0, 0, 0] == 1.0

    def test_tabular_determinism(self):
        a = random_tabular(3, 2, 2, 2, gamma=0.5, seed=9)
        b = random_tabular(3, 2, 2, 2, gamma=0.5, seed=9)
        np.testing.assert_array_equal(a.p, b.p)
        np.testing.assert_array_equal(a.r_mean, b.r_mean)

    def test_tabular_rows_are_simplex(self):
        mg = random_tabular(4, 2, 3, 3, seed=10)
        np.testing.assert_allclose(mg.p.sum(axis=-1), 1.0, atol=1e-12)

    def test_linear_invariants_over_seeds(self):
        for seed in range(100):
            mg = random_linear(3, 2, 2, 2, d=4, seed=seed)
            norms = np.linalg.norm(np.asarray(mg.phi), axis=-1)
            assert norms.max() <= 1 + 1e-12
            assert norms.min() >= mg.c2 - 1e-12
            for h in range(2):
                np.testing.assert_allclose(mg.transition_table(h).sum(axis=-1), 1.0, atol=1e-9)

    def test_linear_full_dim_equals_one_hot(self):
        lin = random_linear(2, 2, 2, 2, d=8, gamma=0.3, seed=12)
        tab = random_tabular(2, 2, 2, 2, gamma=0.3, seed=12)
        ref = one_hot_featurize(tab)
        np.testing.assert_array_equal(lin.phi, ref.phi)
        np.testing.assert_array_equal(lin.theta, ref.theta)
        np.testing.assert_array_equal(lin.mu, ref.mu)

    def test_linear_rejects_oversized_dim(self):
        with pytest.raises(InvalidShape):
            random_linear(2, 2, 2, 2, d=9, seed=0)
