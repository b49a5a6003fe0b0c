import numpy as np
import pytest

from mgx import (BonusSpec, CorruptionSpec, GameShape, RandomReplace, RewardFlip,
                 bellman_error_diagnostics, best_response_value, compute_bonus, corrupt, f_pmvi,
                 ne_backward_induction, occupancy_measure, random_tabular, robust_pmvi,
                 sample_dataset, scram_error_bound, slice_per_timestep, solve_matrix_game,
                 subopt_gap, tabular_pmvi, uniform_behavior, StrategyPair)
from mgx.errors import EmptySlice, SingularCovariance
from mgx.pmvi import compute_bonus_table


class TestComputeBonus:
    def test_zero_kind(self):
        b = BonusSpec(kind="zero")
        assert compute_bonus(b, np.eye(3), np.array([1.0, 0, 0])) == 0.0

    def test_scram_lru_identity_arithmetic(self):
        # E = 0, H = 2, d = 4, Lambda = I, phi = e1: 2 * H * sqrt(d) = 8.
        b = BonusSpec(kind="scram-lru", epsilon=0.0, K=100, H=2, d=4, E_hat=0.0)
        phi = np.zeros(4)
        phi[0] = 1.0
        assert compute_bonus(b, np.eye(4), phi) == pytest.approx(8.0)

    def test_filter_tabular_arithmetic(self):
        b = BonusSpec(kind="filter-tabular", epsilon=0.04, gamma=1.0, H=3, S=4, c_bonus=1.0)
        assert compute_bonus(b, np.eye(2), np.ones(2)) == pytest.approx(1.4)

    def test_clean_cov_formulas(self):
        e, K, H, d = 0.5, 100, 2, 4
        b = BonusSpec(kind="clean-cov", epsilon=0.04, K=K, H=H, d=d, E_hat=e)
        expected = (np.sqrt(0.96 * K) * e + (np.sqrt(0.04 * K) + 2) * H * np.sqrt(d))
        phi = np.array([1.0, 0, 0, 0])
        assert compute_bonus(b, np.eye(4), phi) == pytest.approx(expected)
        b2 = BonusSpec(kind="clean-cov-improved", epsilon=0.04, K=K, H=H, d=d, E_hat=e)
        expected2 = (2 * 0.96 * K * e + 0.04 * K * H * np.sqrt(d) + H * np.sqrt(K * d))
        assert compute_bonus(b2, np.eye(4), phi) == pytest.approx(expected2)

    def test_singular_covariance_rejected(self):
        b = BonusSpec(kind="scram-lru", epsilon=0.0, K=10, H=1, d=2, E_hat=0.0)
        with pytest.raises(SingularCovariance):
            compute_bonus(b, np.zeros((2, 2)), np.ones(2))

    def test_error_bound_shrinks_with_k(self):
        small = scram_error_bound(0.1, 100, 2, 4, 1.0)
        large = scram_error_bound(0.1, 100_000, 2, 4, 1.0)
        assert large < small
        assert scram_error_bound(0.0, 100, 2, 4, 1.0) < small


@pytest.fixture(scope="module")
def fixed_game():
    return random_tabular(3, 2, 2, 3, gamma=0.0, seed=21)


class TestRobustPmvi:
    def test_clean_data_near_exact(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=6000, seed=0)
        out = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="scram",
                          bonus=BonusSpec(kind="zero"))
        assert subopt_gap(mg, out.pair) <= 0.05

    def test_saturating_bonus_constant_tables(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=200, seed=1)
        H = mg.H
        out = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="ridge",
                          bonus=BonusSpec(kind="filter-tabular", epsilon=1.0,
                                          gamma=0.0, c_bonus=10.0 * H))
        for h in range(H):
            np.testing.assert_array_equal(out.Q_lower[h], np.zeros((3, 2, 2)))
            np.testing.assert_array_equal(out.Q_upper[h], np.full((3, 2, 2), float(H - h)))
        # stage equilibria of constant matrices, deterministic across runs
        zero_sol = solve_matrix_game(np.zeros((2, 2)))
        np.testing.assert_array_equal(out.pair.pi[0, 0], zero_sol.x)

    def test_h1_single_state_reduction(self):
        mg = random_tabular(1, 2, 3, 1, gamma=0.0, seed=5)
        D = sample_dataset(mg, uniform_behavior(mg), K=3000, seed=2)
        out = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="ridge",
                          bonus=BonusSpec(kind="zero"))
        # the learned stage game is the clipped regression estimate of r
        sol = solve_matrix_game(out.Q_lower[0, 0], tol=1e-9)
        np.testing.assert_allclose(out.pair.pi[0, 0], sol.x, atol=1e-12)
        assert out.V_lower[0, 0] == pytest.approx(sol.value, abs=1e-9)
        np.testing.assert_allclose(out.Q_lower[0, 0], mg.r_mean[0, 0], atol=0.1)

    def test_empty_slice_raises(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=0, seed=0)
        with pytest.raises(EmptySlice):
            robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="ridge",
                        bonus=BonusSpec(kind="zero"))

    def test_clipping_invariant(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=500, seed=3)
        spec = CorruptionSpec(epsilon=0.2, adversary=RandomReplace(), seed=0)
        Dc = corrupt(D, spec, mg_dims=(3, 2, 2))
        out = robust_pmvi(Dc.learner_view(), GameShape.from_game(mg), estimator="scram",
                          bonus=BonusSpec(kind="scram-lru", epsilon=0.2, gamma=3.0))
        for h in range(mg.H):
            hi = mg.H - h
            assert out.Q_lower[h].min() >= 0 and out.Q_lower[h].max() <= hi
            assert out.Q_upper[h].min() >= 0 and out.Q_upper[h].max() <= hi

    def test_determinism(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=800, seed=4)
        args = dict(estimator="scram", bonus=BonusSpec(kind="scram-lru", epsilon=0.1, gamma=3.0))
        o1 = robust_pmvi(D.learner_view(), GameShape.from_game(mg), **args)
        o2 = robust_pmvi(D.learner_view(), GameShape.from_game(mg), **args)
        np.testing.assert_array_equal(o1.pair.pi, o2.pair.pi)
        np.testing.assert_array_equal(o1.pair.nu, o2.pair.nu)

    def test_epsilon_zero_reduction_matches_ridge(self, fixed_game):
        # With no corruption assumed, the robust path and the plain ridge
        # path are the same algorithm: identical strategies, bit for bit.
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=1500, seed=6)
        bonus = BonusSpec(kind="scram-lru", epsilon=0.0, gamma=float(mg.H))
        a = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="scram", bonus=bonus)
        b = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="ridge", bonus=bonus)
        np.testing.assert_array_equal(a.pair.pi, b.pair.pi)
        np.testing.assert_array_equal(a.pair.nu, b.pair.nu)
        np.testing.assert_array_equal(a.Q_lower, b.Q_lower)


class TestBellmanDiagnostics:
    def test_exact_model_zero_bonus_zero_error(self, fixed_game):
        mg = fixed_game
        r_hats = [mg.r_mean[h] for h in range(mg.H)]
        p_hats = [mg.p[h] for h in range(mg.H)]
        out = tabular_pmvi(r_hats, p_hats, 3, 2, 2, mg.H, bonus_value=0.0)
        iota_lo, iota_up, _ = bellman_error_diagnostics(out, mg)
        np.testing.assert_allclose(iota_lo, 0.0, atol=1e-8)
        np.testing.assert_allclose(iota_up, 0.0, atol=1e-8)

    def test_saturating_bonus_nonnegative_error(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=300, seed=7)
        out = robust_pmvi(D.learner_view(), GameShape.from_game(mg), estimator="ridge",
                          bonus=BonusSpec(kind="filter-tabular", epsilon=1.0, gamma=0.0,
                                          c_bonus=10.0 * mg.H))
        iota_lo, _, _ = bellman_error_diagnostics(out, mg)
        assert np.all(iota_lo >= -1e-9)  # Q_lower == 0, so iota is a Bellman value

    def test_sandwich_and_pessimism_monte_carlo(self):
        # Observation-only corruption, generous bonus: the exact Bellman
        # errors stay inside [0, 2 Gamma] and the value estimates bracket
        # the best-response values on most seeds.
        mg = random_tabular(2, 2, 2, 2, gamma=0.5, seed=33)
        shape = GameShape.from_game(mg)
        ok = 0
        n_seeds = 20
        for seed in range(n_seeds):
            D = sample_dataset(mg, uniform_behavior(mg), K=1500, seed=seed)
            Dc = corrupt(D, CorruptionSpec(epsilon=0.05, model="observations-only",
                                           adversary=RandomReplace(), seed=seed))
            out = robust_pmvi(Dc.learner_view(), shape, estimator="scram",
                              bonus=BonusSpec(kind="scram-lru", epsilon=0.05,
                                              gamma=mg.H + mg.gamma, delta=0.1))
            iota_lo, iota_up, gam = bellman_error_diagnostics(out, mg)
            sandwich = (np.all(iota_lo >= -1e-8) and np.all(iota_lo <= 2 * gam + 1e-8)
                        and np.all(-iota_up >= -1e-8) and np.all(-iota_up <= 2 * gam + 1e-8))
            lo_ok = out.V_lower[0, mg.s1] <= best_response_value(mg, out.pair.pi, "max") + 1e-8
            hi_ok = best_response_value(mg, out.pair.nu, "min") <= out.V_upper[0, mg.s1] + 1e-8
            ok += bool(sandwich and lo_ok and hi_ok)
        assert ok >= int(0.9 * n_seeds)

    def test_gap_bounded_by_expected_bonuses(self):
        # Whenever the sandwich holds, the suboptimality gap is at most twice
        # the bonus mass along the unilateral comparator occupancies.
        mg = random_tabular(2, 2, 2, 2, gamma=0.3, seed=44)
        shape = GameShape.from_game(mg)
        ne, _ = ne_backward_induction(mg)
        checked = 0
        for seed in range(10):
            D = sample_dataset(mg, uniform_behavior(mg), K=1000, seed=100 + seed)
            out = robust_pmvi(D.learner_view(), shape, estimator="scram",
                              bonus=BonusSpec(kind="scram-lru", epsilon=0.02,
                                              gamma=mg.H + mg.gamma))
            iota_lo, iota_up, gam = bellman_error_diagnostics(out, mg)
            sandwich = (np.all(iota_lo >= -1e-8) and np.all(iota_lo <= 2 * gam + 1e-8)
                        and np.all(-iota_up >= -1e-8) and np.all(-iota_up <= 2 * gam + 1e-8))
            if not sandwich:
                continue
            checked += 1
            occ_star_nup = occupancy_measure(mg, StrategyPair(pi=ne.pi, nu=out.pair_aux.nu))
            occ_pip_star = occupancy_measure(mg, StrategyPair(pi=out.pair_aux.pi, nu=ne.nu))
            bound = 2 * float(np.sum(occ_star_nup * gam) + np.sum(occ_pip_star * gam))
            assert subopt_gap(mg, out.pair) <= bound + 1e-6
        assert checked >= 5


class TestFilteringPmvi:
    def test_exact_means_recover_ne(self, fixed_game):
        mg = fixed_game
        r_hats = [mg.r_mean[h] for h in range(mg.H)]
        p_hats = [mg.p[h] for h in range(mg.H)]
        out = tabular_pmvi(r_hats, p_hats, 3, 2, 2, mg.H, bonus_value=0.0)
        _, V = ne_backward_induction(mg)
        assert subopt_gap(mg, out.pair) <= 1e-8
        np.testing.assert_allclose(out.V_lower[:-1], V[:-1], atol=1e-9)

    def test_unvisited_tuple_fallback(self):
        # Steer the behavior away from (a2, b2): its reward estimate decays
        # to zero, its transition row falls back to uniform, Q stays in range.
        from mgx import BehaviorPolicy
        mg = random_tabular(2, 2, 2, 2, gamma=0.0, seed=55)
        rho_tab = np.full((2, 2, 2, 2), 1.0 / 3.0)
        rho_tab[:, :, 1, 1] = 0.0
        rho = BehaviorPolicy(rho_tab)
        D = sample_dataset(mg, rho, K=400, seed=0)
        assert ((D.a == 1) & (D.b == 1)).sum() == 0
        out = f_pmvi(D.learner_view(), 2, 2, 2, 2, epsilon=0.0, gamma=0.0)
        for h in range(2):
            diag = out.diagnostics[h]
            np.testing.assert_allclose(diag["r_hat"][:, 1, 1], 0.0, atol=1e-12)
            np.testing.assert_allclose(diag["p_hat"][:, 1, 1, :], 0.5, atol=1e-12)
            assert out.Q_lower[h].min() >= 0 and out.Q_lower[h].max() <= 2 - h

    def test_filter_beats_naive_under_targeted_attack(self):
        # Reward-only flips at one NE-support tuple: the filtered learner
        # should win the paired-seed comparison against plain sample means.
        mg = random_tabular(2, 2, 2, 2, gamma=0.5, seed=66)
        eps = 0.05
        wins = 0
        for seed in range(10):
            D = sample_dataset(mg, uniform_behavior(mg), K=3000, seed=seed)
            Dc = corrupt(D, CorruptionSpec(
                epsilon=eps, model="reward-only",
                adversary=RewardFlip(a=0, b=0, new_value=10.0), seed=seed))
            view = Dc.learner_view()
            robust = f_pmvi(view, 2, 2, 2, 2, epsilon=eps, gamma=0.5, c_bonus=0.2, seed=seed)
            naive = f_pmvi(view, 2, 2, 2, 2, epsilon=eps, gamma=0.5, c_bonus=0.2,
                           use_filter=False, seed=seed)
            wins += subopt_gap(mg, robust.pair) <= subopt_gap(mg, naive.pair) + 1e-12
        assert wins >= 8

    def test_linear_game_features(self):
        # Non-one-hot features: the regression happens in the d-dimensional
        # feature space, and the learned pair is near-optimal on clean data.
        from mgx import random_linear
        mg = random_linear(4, 2, 2, 3, d=5, gamma=0.3, seed=3)
        D = sample_dataset(mg, uniform_behavior(mg), K=8000, seed=0)
        shape = GameShape.from_game(mg)
        assert shape.d == 5
        out = robust_pmvi(D.learner_view(), shape, estimator="scram",
                          bonus=BonusSpec(kind="zero"))
        assert subopt_gap(mg, out.pair) <= 0.05

    def test_rls_variant_survives_coherent_arbitrary_attack(self):
        # Covariates and rewards rewritten together: the leverage-filtering
        # variant (zero bonus, per its contract) shrugs it off while the
        # plain ridge learner is dragged far from equilibrium.
        mg = random_tabular(2, 2, 2, 2, gamma=0.3, seed=19)
        shape = GameShape.from_game(mg)
        eps = 0.1
        rls_gaps, ridge_gaps = [], []
        for seed in range(8):
            D = sample_dataset(mg, uniform_behavior(mg), K=4000, seed=seed)
            budget = int(eps * D.K * D.H)
            rng = np.random.default_rng(seed + 5000)
            flat = rng.choice(D.K * D.H, size=budget, replace=False)
            tau, h = np.unravel_index(flat, (D.K, D.H))
            s, a, b, r = D.s.copy(), D.a.copy(), D.b.copy(), D.r.copy()
            s[tau, h], a[tau, h], b[tau, h], r[tau, h] = 0, 0, 0, 10.0
            view = D.with_tuples(s=s, a=a, b=b, r=r).learner_view()
            A = robust_pmvi(view, shape, estimator="rls",
                            bonus=BonusSpec(kind="zero", epsilon=eps))
            B = robust_pmvi(view, shape, estimator="ridge", bonus=BonusSpec(kind="zero"))
            rls_gaps.append(subopt_gap(mg, A.pair))
            ridge_gaps.append(subopt_gap(mg, B.pair))
        assert np.mean(rls_gaps) <= 0.25 * np.mean(ridge_gaps)

    def test_bonus_requires_resolved_constants(self):
        with pytest.raises(ValueError):
            BonusSpec(kind="scram-lru", epsilon=0.1, gamma=1.0).scale()
        with pytest.raises(ValueError):
            BonusSpec(kind="filter-tabular", epsilon=0.1, gamma=1.0).scale()

    def test_estimator_wrapper_conformance(self, fixed_game):
        from mgx import RobustPMVI
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=600, seed=9)
        learner = RobustPMVI(estimator="scram", bonus_kind="scram-lru", epsilon=0.05,
                             gamma=mg.gamma)
        assert learner.get_params()["epsilon"] == 0.05
        learner.set_params(epsilon=0.1).fit(D.learner_view(), GameShape.from_game(mg))
        pi_dist, nu_dist = learner.predict(0, 0)
        assert pi_dist.sum() == pytest.approx(1.0) and nu_dist.sum() == pytest.approx(1.0)
        assert learner.strategy_.pi.shape == (mg.H, mg.S, mg.A)

    def test_random_split_slices_accepted(self, fixed_game):
        mg = fixed_game
        D = sample_dataset(mg, uniform_behavior(mg), K=900, seed=8)
        sliced = slice_per_timestep(D, mode="random-split")
        out = robust_pmvi(sliced, GameShape.from_game(mg), estimator="ridge",
                          bonus=BonusSpec(kind="zero"))
        assert out.pair.pi.shape == (3, 3, 2)
