"""Pessimistic minimax value iteration with pluggable robust estimators.

The engine runs the backward loop: regress lower/upper Bellman targets on
features with a robust oracle, clip the resulting Q estimates shifted by a
pessimism bonus, solve the stage matrix games, and propagate the stage
values.  Stage equilibria are solved lazily per state, so learning touches
only the states the data (and the final read-out) actually needs.

Variants: linear/one-hot games run through :func:`robust_pmvi` with a
regression oracle and a covariance-based bonus; tabular games can instead
use :func:`f_pmvi`, which robustly estimates per-tuple reward and transition
means by spectral filtering and applies a flat bonus.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .data import SlicedDataset, slice_per_timestep
from .errors import EmptySlice, SingularCovariance
from .estimators import (DEFAULT_RIDGE_LAMBDA, RidgeRegressor, RobustLeastSquares,
                         ScramRegressor, filter_mean)
from .games import MAX_ONEHOT_DIM, StrategyPair
from .solve import bellman_apply, solve_matrix_game
from .validation import normalize_rows

BONUS_KINDS = ("zero", "scram-lru", "clean-cov", "clean-cov-improved", "filter-tabular")


@dataclass(frozen=True)
class GameShape:
    """Learner-facing skeleton of a game: index space and features, no dynamics."""

    S: int
    A: int
    B: int
    H: int
    phi: np.ndarray = None  # (S, A, B, d); None means one-hot over S*A*B

    def __post_init__(self):
        if self.phi is None:
            d = self.S * self.A * self.B
            if d > MAX_ONEHOT_DIM:
                raise ValueError(f"one-hot dimension {d} exceeds cap {MAX_ONEHOT_DIM}")
            object.__setattr__(self, "phi", np.eye(d).reshape(self.S, self.A, self.B, d))

    @classmethod
    def from_game(cls, mg):
        phi = getattr(mg, "phi", None)
        return cls(S=mg.S, A=mg.A, B=mg.B, H=mg.H, phi=None if phi is None else np.asarray(phi))

    @property
    def d(self):
        return self.phi.shape[-1]

    def features(self, s, a, b):
        return self.phi[s, a, b]


def scram_error_bound(epsilon, K, H, d, gamma, delta=0.1, c_bonus=1.0):
    """High-probability regression error bound used inside the bonus terms.

    ``gamma * eps * log(1/eps)`` plus the statistical term, scaled by the
    exposed calibration constant (the underlying guarantee hides constants).
    """
    log_term = np.log(8.0 * max(H, 1) / delta)
    corruption = gamma * epsilon * np.log(1.0 / epsilon) if epsilon > 0 else 0.0
    statistical = min(
        gamma * np.sqrt((d + log_term) / K),
        np.sqrt(max(H * gamma, 0.0)) * (d * log_term / K) ** 0.25,
    )
    return c_bonus * (corruption + statistical)


@dataclass(frozen=True)
class BonusSpec:
    """Which pessimism bonus to apply, with the constants entering it.

    ``gamma`` is the noise scale fed to the error-bound formula; callers
    learning Bellman targets should pass the target scale (H + reward gamma),
    not the raw reward gamma.  ``E_hat`` overrides the computed bound.
    ``K``/``H``/``d``/``S`` may be left unset and resolved from the data.
    """

    kind: str
    epsilon: float = 0.0
    gamma: float = 0.0
    K: int = None
    H: int = None
    d: int = None
    S: int = None
    delta: float = 0.1
    c_bonus: float = 1.0
    E_hat: float = None

    def __post_init__(self):
        if self.kind not in BONUS_KINDS:
            raise ValueError(f"bonus kind must be one of {BONUS_KINDS}, got {self.kind!r}")
        for name in ("epsilon", "gamma", "c_bonus", "delta"):
            v = getattr(self, name)
            if v is None or not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def resolved(self, K=None, H=None, d=None, S=None):
        updates = {k: v for k, v in (("K", K), ("H", H), ("d", d), ("S", S))
                   if getattr(self, k) is None and v is not None}
        return replace(self, **updates) if updates else self

    def error_bound(self):
        if self.E_hat is not None:
            return self.E_hat
        return scram_error_bound(self.epsilon, self.K, self.H, self.d, self.gamma,
                                 delta=self.delta, c_bonus=self.c_bonus)

    def _require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"bonus kind {self.kind!r} needs constants {missing}; "
                             "resolve them from the data or pass them explicitly")

    def scale(self):
        """Multiplier in front of the feature-dependent norm, per bonus kind."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "filter-tabular":
            self._require("H", "S")
            return self.c_bonus * (self.H * np.sqrt(self.S) + self.gamma) * np.sqrt(self.epsilon)
        self._require("K", "H", "d")
        E = self.error_bound()
        K, H, d, eps = self.K, self.H, self.d, self.epsilon
        if self.kind == "scram-lru":
            return np.sqrt(K) * E + 2.0 * H * np.sqrt(d)
        if self.kind == "clean-cov":
            return np.sqrt((1.0 - eps) * K) * E + (np.sqrt(eps * K) + 2.0) * H * np.sqrt(d)
        if self.kind == "clean-cov-improved":
            return 2.0 * (1.0 - eps) * K * E + eps * K * H * np.sqrt(d) + H * np.sqrt(K * d)
        raise AssertionError(self.kind)


def _inv_pd(Lambda):
    Lambda = np.asarray(Lambda, dtype=float)
    try:
        np.linalg.cholesky(Lambda)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("Lambda_h is not positive definite") from exc
    return np.linalg.inv(Lambda)


def compute_bonus(bonus: BonusSpec, Lambda_h, phi):
    """Bonus value for one feature vector under the given sample covariance."""
    return float(compute_bonus_table(bonus, Lambda_h, np.asarray(phi, dtype=float)[None, :])[0])


def compute_bonus_table(bonus: BonusSpec, Lambda_h, phis):
    """Vectorized bonus over feature rows ``phis`` of shape (..., d)."""
    if bonus.kind == "zero":
        return np.zeros(phis.shape[:-1])
    if bonus.kind == "filter-tabular":
        return np.full(phis.shape[:-1], bonus.scale())
    inv = _inv_pd(Lambda_h)
    if bonus.kind == "clean-cov-improved":
        norm = np.linalg.norm(phis @ inv, axis=-1)
    else:
        norm = np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", phis, inv, phis), 0.0))
    return bonus.scale() * norm


@dataclass
class PmviOutput:
    """Learned strategies plus the pessimistic/optimistic value estimates.

    ``pair`` holds the announced strategies (max player's from the lower
    solve, min player's from the upper solve); ``pair_aux`` holds the
    companion strategies (nu' from the lower solve, pi' from the upper one).
    ``V_lower``/``V_upper`` have shape (H+1, S) with zero terminal rows.
    """

    pair: StrategyPair
    pair_aux: StrategyPair
    Q_lower: np.ndarray
    Q_upper: np.ndarray
    V_lower: np.ndarray
    V_upper: np.ndarray
    diagnostics: list = field(default_factory=list)


ESTIMATORS = ("scram", "rls", "ridge")


def _make_estimator(name, epsilon, R, lam):
    if name == "scram":
        return ScramRegressor(epsilon=epsilon, R=R, lam=lam)
    if name == "rls":
        return RobustLeastSquares(epsilon=epsilon, R=R, lam=lam)
    if name == "ridge":
        return RidgeRegressor(lam=lam, R=R)
    raise ValueError(f"estimator must be one of {ESTIMATORS}, got {name!r}")


def _stage_tables(shape, omega_lo, omega_up, gamma_tab, hi):
    """Clipped Q tables for one step: (S, A, B) lower and upper."""
    raw = shape.phi @ omega_lo
    q_lo = np.clip(raw - gamma_tab, 0.0, hi)
    q_up = np.clip(shape.phi @ omega_up + gamma_tab, 0.0, hi)
    return q_lo, q_up


def robust_pmvi(D, shape: GameShape, estimator="scram", bonus=None, delta=None,
                seed=0, lam=DEFAULT_RIDGE_LAMBDA, ne_tol=1e-9) -> PmviOutput:
    """Backward pessimistic value iteration with a robust regression oracle.

    ``D`` is a dataset view or an already-sliced dataset; slices are taken
    per timestep by default.  ``bonus`` defaults to the zero bonus.  The
    regressor norm bound is ``H * sqrt(d)`` throughout.
    """
    if bonus is None:
        bonus = BonusSpec(kind="zero")
    slices = D if isinstance(D, SlicedDataset) else slice_per_timestep(D)
    H, S = shape.H, shape.S
    if slices.H != H:
        raise ValueError(f"data has {slices.H} slices, game shape has H={H}")
    R = H * np.sqrt(shape.d)
    if delta is not None:
        bonus = replace(bonus, delta=delta)

    pi_hat = np.zeros((H, S, shape.A))
    nu_hat = np.zeros((H, S, shape.B))
    pi_aux = np.zeros((H, S, shape.A))
    nu_aux = np.zeros((H, S, shape.B))
    Q_lower = np.zeros((H, S, shape.A, shape.B))
    Q_upper = np.zeros((H, S, shape.A, shape.B))
    V_lower = np.zeros((H + 1, S))
    V_upper = np.zeros((H + 1, S))
    diagnostics = [None] * H

    # Per-step stage solutions, filled lazily: state -> (v_lo, v_up).
    stage_cache = [dict() for _ in range(H)]
    stage_tabs = [None] * H

    def solve_state(h, s):
        cached = stage_cache[h].get(s)
        if cached is not None:
            return cached
        q_lo, q_up = stage_tabs[h]
        lo = solve_matrix_game(q_lo[s], tol=ne_tol)
        up = solve_matrix_game(q_up[s], tol=ne_tol)
        pi_hat[h, s], nu_aux[h, s] = lo.x, lo.y
        pi_aux[h, s], nu_hat[h, s] = up.x, up.y
        vals = (lo.value, up.value)
        stage_cache[h][s] = vals
        return vals

    def values_at(h, states, which):
        if h >= H:
            return np.zeros(len(states))
        vals = np.empty(S)
        for s in np.unique(states):
            vals[s] = solve_state(h, int(s))[which]
        return vals[states]

    for h in range(H - 1, -1, -1):
        sl = slices[h]
        if sl.n == 0:
            raise EmptySlice(f"no tuples in slice h={h}")
        X = shape.features(sl.s, sl.a, sl.b)
        y_lo = sl.r + values_at(h + 1, sl.s_next, 0)
        y_up = sl.r + values_at(h + 1, sl.s_next, 1)
        b = bonus.resolved(K=sl.n, H=H, d=shape.d, S=S)
        est_lo = _make_estimator(estimator, b.epsilon, R, lam).fit(X, y_lo)
        est_up = _make_estimator(estimator, b.epsilon, R, lam).fit(X, y_up)
        Lambda = X.T @ X + np.eye(shape.d)
        gamma_tab = compute_bonus_table(b, Lambda, shape.phi)
        stage_tabs[h] = _stage_tables(shape, est_lo.coef_, est_up.coef_, gamma_tab, H - h)
        diagnostics[h] = {
            "omega_lower": est_lo.coef_, "omega_upper": est_up.coef_,
            "bonus": gamma_tab, "Lambda": Lambda, "n": sl.n,
        }

    for h in range(H):
        for s in range(S):
            V_lower[h, s], V_upper[h, s] = solve_state(h, s)
        Q_lower[h], Q_upper[h] = stage_tabs[h]

    return PmviOutput(
        pair=StrategyPair(pi=pi_hat, nu=nu_hat),
        pair_aux=StrategyPair(pi=pi_aux, nu=nu_aux),
        Q_lower=Q_lower, Q_upper=Q_upper, V_lower=V_lower, V_upper=V_upper,
        diagnostics=diagnostics,
    )


def tabular_pmvi(r_hats, p_hats, S, A, B, H, bonus_value=0.0, ne_tol=1e-9) -> PmviOutput:
    """Pessimistic VI from explicit per-step (r_hat, p_hat) estimates.

    ``r_hats[h]`` has shape (S, A, B) and ``p_hats[h]`` shape (S, A, B, S)
    with rows on the simplex.  ``bonus_value`` is the flat bonus subtracted
    from (added to) the lower (upper) Q estimates before clipping.
    """
    pi_hat = np.zeros((H, S, A))
    nu_hat = np.zeros((H, S, B))
    pi_aux = np.zeros((H, S, A))
    nu_aux = np.zeros((H, S, B))
    Q_lower = np.zeros((H, S, A, B))
    Q_upper = np.zeros((H, S, A, B))
    V_lower = np.zeros((H + 1, S))
    V_upper = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        hi = H - h
        Q_lower[h] = np.clip(bellman_apply(r_hats[h], p_hats[h], V_lower[h + 1]) - bonus_value, 0.0, hi)
        Q_upper[h] = np.clip(bellman_apply(r_hats[h], p_hats[h], V_upper[h + 1]) + bonus_value, 0.0, hi)
        for s in range(S):
            lo = solve_matrix_game(Q_lower[h, s], tol=ne_tol)
            up = solve_matrix_game(Q_upper[h, s], tol=ne_tol)
            pi_hat[h, s], nu_aux[h, s] = lo.x, lo.y
            pi_aux[h, s], nu_hat[h, s] = up.x, up.y
            V_lower[h, s], V_upper[h, s] = lo.value, up.value
    return PmviOutput(
        pair=StrategyPair(pi=pi_hat, nu=nu_hat),
        pair_aux=StrategyPair(pi=pi_aux, nu=nu_aux),
        Q_lower=Q_lower, Q_upper=Q_upper, V_lower=V_lower, V_upper=V_upper,
    )


def tabular_mean_estimates(sl, S, A, B, epsilon, gamma, use_filter, seed,
                           sigma_r2=None, sigma_p2=None):
    """Robust (r_hat, p_hat) for one timestep slice via vector filtering.

    Rewards are embedded as S*A*B-dimensional masked vectors and transitions
    as S^2*A*B-dimensional count-normalized vectors; the filtered means are
    de-normalized into per-tuple estimates, with transition rows projected
    back onto the simplex (uniform fallback for unvisited tuples).
    """
    n = sl.n
    d_r = S * A * B
    flat = (sl.s * A + sl.a) * B + sl.b
    counts = np.bincount(flat, minlength=d_r)

    if use_filter and epsilon > 0:
        R_vecs = np.zeros((n, d_r))
        R_vecs[np.arange(n), flat] = sl.r
        n_safe = np.maximum(counts, 1)
        P_vecs = np.zeros((n, d_r * S))
        P_vecs[np.arange(n), flat * S + sl.s_next] = n / n_safe[flat]
        if sigma_r2 is None:
            # gamma^2 from reward noise plus 1/4 slack for the visit masking
            # of a [0, 1]-mean reward.
            sigma_r2 = gamma ** 2 + 0.25
        if sigma_p2 is None:
            visited = counts[counts > 0]
            sigma_p2 = float(n / visited.min()) if visited.size else 1.0
        kept_r = filter_mean(R_vecs, epsilon, sigma_r2, seed=seed).kept
        kept_p = filter_mean(P_vecs, epsilon, sigma_p2, seed=seed + 1).kept
    else:
        kept_r = kept_p = np.ones(n, dtype=bool)

    # De-normalize over the filtered sample: per-tuple sums divided by the
    # surviving visit counts (1 on never-visited tuples keeps division safe).
    counts_r = np.maximum(np.bincount(flat[kept_r], minlength=d_r), 1)
    sums_r = np.bincount(flat[kept_r], weights=sl.r[kept_r], minlength=d_r)
    r_hat = (sums_r / counts_r).reshape(S, A, B)

    joint = np.bincount(flat[kept_p] * S + sl.s_next[kept_p], minlength=d_r * S)
    p_hat = normalize_rows(joint.reshape(d_r, S).astype(float)).reshape(S, A, B, S)
    return r_hat, p_hat


def f_pmvi(D, S, A, B, H, epsilon, gamma=0.0, c_bonus=1.0, use_filter=True,
           seed=0, delta=0.1, ne_tol=1e-9, sigma_r2=None, sigma_p2=None) -> PmviOutput:
    """Filtering-based pessimistic VI for tabular games.

    Estimates per-tuple reward and transition means with the spectral filter
    (or plain sample means when ``use_filter`` is false) and runs the
    pessimistic backward loop with the flat tabular bonus
    ``c_bonus * (H * sqrt(S) + gamma) * sqrt(epsilon)``.
    """
    slices = D if isinstance(D, SlicedDataset) else slice_per_timestep(D)
    if slices.H != H:
        raise ValueError(f"data has {slices.H} slices, expected H={H}")
    r_hats, p_hats = [], []
    for h in range(H):
        sl = slices[h]
        if sl.n == 0:
            raise EmptySlice(f"no tuples in slice h={h}")
        r_hat, p_hat = tabular_mean_estimates(
            sl, S, A, B, epsilon, gamma, use_filter, seed + 1000 * h,
            sigma_r2=sigma_r2, sigma_p2=sigma_p2)
        r_hats.append(r_hat)
        p_hats.append(p_hat)
    bonus_value = BonusSpec(kind="filter-tabular", epsilon=epsilon, gamma=gamma,
                            H=H, S=S, c_bonus=c_bonus, delta=delta).scale()
    out = tabular_pmvi(r_hats, p_hats, S, A, B, H, bonus_value=bonus_value, ne_tol=ne_tol)
    out.diagnostics = [{"r_hat": r_hats[h], "p_hat": p_hats[h], "bonus": bonus_value}
                       for h in range(H)]
    return out


def bellman_error_diagnostics(output: PmviOutput, mg):
    """Exact Bellman errors of a learner output against the true game.

    Returns ``(iota_lower, iota_upper, bonus)`` tensors of shape
    (H, S, A, B): ``iota_lower[h] = B_h V_lower[h+1] - Q_lower[h]`` computed
    with the game's exact reward means and kernel, and symmetrically for the
    upper estimates.  ``bonus`` is the per-tuple bonus actually applied
    (zeros when the run carried no diagnostics).
    """
    H, S, A, B = mg.H, mg.S, mg.A, mg.B
    iota_lower = np.zeros((H, S, A, B))
    iota_upper = np.zeros((H, S, A, B))
    bonus = np.zeros((H, S, A, B))
    for h in range(H):
        iota_lower[h] = bellman_apply(mg.reward_table(h), mg.transition_table(h),
                                      output.V_lower[h + 1]) - output.Q_lower[h]
        iota_upper[h] = bellman_apply(mg.reward_table(h), mg.transition_table(h),
                                      output.V_upper[h + 1]) - output.Q_upper[h]
        if output.diagnostics:
            g = output.diagnostics[h].get("bonus", 0.0)
            bonus[h] = g if np.ndim(g) else np.full((S, A, B), g)
    return iota_lower, iota_upper, bonus


class RobustPMVI(BaseEstimator):
    """Estimator-API wrapper for the robust learners.

    ``fit(D, shape)`` runs the backward loop and stores the learned pair in
    ``strategy_`` (full output in ``output_``); ``predict(h, s)`` returns
    the pair of stage action distributions.  ``estimator="filter"`` selects
    the tabular filtering variant, which ignores features.
    """

    def __init__(self, estimator="scram", bonus_kind="scram-lru", epsilon=0.0,
                 gamma=0.0, delta=0.1, c_bonus=1.0, E_hat=None, lam=DEFAULT_RIDGE_LAMBDA,
                 seed=0, use_filter=True):
        self.estimator = estimator
        self.bonus_kind = bonus_kind
        self.epsilon = epsilon
        self.gamma = gamma
        self.delta = delta
        self.c_bonus = c_bonus
        self.E_hat = E_hat
        self.lam = lam
        self.seed = seed
        self.use_filter = use_filter

    def fit(self, D, shape: GameShape):
        if self.estimator == "filter":
            self.output_ = f_pmvi(D, shape.S, shape.A, shape.B, shape.H,
                                  epsilon=self.epsilon, gamma=self.gamma,
                                  c_bonus=self.c_bonus, use_filter=self.use_filter,
                                  seed=self.seed, delta=self.delta)
        else:
            # Bellman targets carry both reward noise and next-state value
            # spread; H + gamma is the scale their variance is bounded by.
            bonus = BonusSpec(kind=self.bonus_kind, epsilon=self.epsilon,
                              gamma=shape.H + self.gamma, delta=self.delta,
                              c_bonus=self.c_bonus, E_hat=self.E_hat)
            self.output_ = robust_pmvi(D, shape, estimator=self.estimator,
                                       bonus=bonus, seed=self.seed, lam=self.lam)
        self.strategy_ = self.output_.pair
        self.shape_ = shape
        return self

    def predict(self, h, s):
        return self.strategy_.pi[h, s], self.strategy_.nu[h, s]
