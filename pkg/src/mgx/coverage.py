"""Executable coverage diagnostics for offline Markov game data.

Turns the coverage conditions the learning guarantees depend on into
computable quantities: occupancy measures by forward recursion, the
low-relative-uncertainty constant by per-tuple occupancy maximization over
unilateral deviations, and boolean single/unilateral/uniform coverage flags
from either empirical counts or exact behavior occupancies.
"""

from dataclasses import dataclass

import numpy as np

from .data import slice_per_timestep
from .errors import NeRequired, SingularCovariance
from .games import StrategyPair, to_tabular
from .solve import subopt_gap

OCC_TOL = 1e-12


def occupancy_measure(mg, pair: StrategyPair):
    """Exact visit probabilities ``d_h(s, a, b)`` under a strategy pair.

    Forward recursion from the initial distribution; every step's tensor
    sums to one.  Shape (H, S, A, B).
    """
    pair.check_matches(mg)
    tab = to_tabular(mg)
    H, S = tab.H, tab.S
    occ = np.zeros((H, S, tab.A, tab.B))
    state = tab.init_dist.copy()
    for h in range(H):
        occ[h] = state[:, None, None] * pair.pi[h][:, :, None] * pair.nu[h][:, None, :]
        state = np.einsum("sab,sabt->t", occ[h], tab.p[h])
    return occ


def behavior_occupancy(mg, rho):
    """Visit probabilities under a joint behavior policy, shape (H, S, A, B)."""
    rho.check_matches(mg)
    tab = to_tabular(mg)
    occ = np.zeros((tab.H, tab.S, tab.A, tab.B))
    state = tab.init_dist.copy()
    for h in range(tab.H):
        occ[h] = state[:, None, None] * rho.rho[h]
        state = np.einsum("sab,sabt->t", occ[h], tab.p[h])
    return occ


def sample_covariance(sl, phi_table):
    """Regularized design covariance of one slice: sum phi phi^T + I."""
    d = phi_table.shape[-1]
    if sl.n == 0:
        return np.eye(d)
    X = phi_table[sl.s, sl.a, sl.b]
    return X.T @ X + np.eye(d)


def empirical_counts(D, S, A, B):
    """Per-step visit counts of each (s, a, b), shape (H, S, A, B)."""
    slices = slice_per_timestep(D)
    counts = np.zeros((slices.H, S, A, B))
    for h in range(slices.H):
        sl = slices[h]
        flat = (sl.s * A + sl.a) * B + sl.b
        counts[h] = np.bincount(flat, minlength=S * A * B).reshape(S, A, B)
    return counts


def _max_reach(tab, fixed, side, h_target):
    """Max probability of occupying each state at ``h_target`` over the free
    player's Markov policies, with the other side fixed.

    Deterministic policies attain the maximum because the objective is
    linear in each stage's action distribution.  Returns shape (S,): the
    value from each possible initial state at step 0.
    """
    S = tab.S
    g = np.eye(S)  # g[s_target, s] at t = h_target
    for t in range(h_target - 1, -1, -1):
        if side == "max-free":
            # free max player: value = max_a sum_b nu* p g
            stage = np.einsum("sb,sabt,xt->xsa", fixed[t], tab.p[t], g)
            g = stage.max(axis=2)
        else:
            stage = np.einsum("sa,sabt,xt->xsb", fixed[t], tab.p[t], g)
            g = stage.max(axis=2)
    return g @ tab.init_dist


def unilateral_max_occupancy(mg, ne: StrategyPair):
    """Per-tuple sup of occupancy over unilateral deviations from the NE.

    ``m[h, s, a, b] = max( sup_nu d^{pi*,nu}_h, sup_pi d^{pi,nu*}_h )``,
    each sup computed exactly by a reach-maximization DP plus the free
    player's point mass on the target action.
    """
    tab = to_tabular(mg)
    H, S, A, B = tab.H, tab.S, tab.A, tab.B
    m = np.zeros((H, S, A, B))
    for h in range(H):
        reach_nu_free = _max_reach(tab, ne.pi, "min-free", h)  # nu deviates
        reach_pi_free = _max_reach(tab, ne.nu, "max-free", h)  # pi deviates
        d_nu = reach_nu_free[:, None, None] * ne.pi[h][:, :, None] * np.ones((1, 1, B))
        d_pi = reach_pi_free[:, None, None] * np.ones((1, A, 1)) * ne.nu[h][:, None, :]
        m[h] = np.maximum(d_nu, d_pi)
    return m


def _check_ne(mg, ne, tol=1e-6):
    gap = subopt_gap(mg, ne)
    if gap > tol:
        raise NeRequired(f"supplied pair has suboptimality gap {gap:.3e} > {tol:.0e}")


def lru_constant(D, mg, ne: StrategyPair, counts=None):
    """Empirical low-relative-uncertainty constant of a dataset.

    ``c1 = min over covered tuples of count_h(s,a,b) / (K * m_h(s,a,b))``
    clamped to [0, 1], where ``m_h`` is the unilateral max occupancy.  Larger
    is better; the reciprocal convention used in some constructions is just
    ``1 / c1``.
    """
    _check_ne(mg, ne)
    if counts is None:
        counts = empirical_counts(D, mg.S, mg.A, mg.B)
    K = D.K if D is not None else None
    if K is None:
        K = counts[0].sum()
    m = unilateral_max_occupancy(mg, ne)
    needed = m > OCC_TOL
    if not needed.any():
        return 1.0
    ratios = counts[needed] / (K * m[needed])
    return float(np.clip(ratios.min(), 0.0, 1.0))


@dataclass
class CoverageReport:
    """Coverage assumptions evaluated on one (game, data, NE) triple.

    ``kappa_hat`` is the smallest eigenvalue over steps of the empirical
    second-moment matrix of features (unregularized, divided by K);
    ``c1_hat`` the LRU constant; the booleans grade single-policy,
    unilateral, and uniform coverage.
    """

    kappa_hat: float
    c1_hat: float
    single_ok: bool
    unilateral_ok: bool
    uniform_ok: bool
    per_h: list

    @property
    def lru_reciprocal(self):
        return float("inf") if self.c1_hat == 0 else 1.0 / self.c1_hat


def _report_from_weights(mg, ne, weights):
    """Shared flag logic: ``weights[h,s,a,b]`` is count/K or exact d^rho."""
    ne_occ = occupancy_measure(mg, ne)
    m = unilateral_max_occupancy(mg, ne)
    covered = weights > OCC_TOL
    single_ok = bool(np.all(covered[ne_occ > OCC_TOL]))
    unilateral_ok = bool(np.all(covered[m > OCC_TOL]))
    uniform_ok = bool(covered.all())
    # One-hot features make the second moment diagonal with the visit weights.
    kappa_hat = float(weights.reshape(mg.H, -1).min(axis=1).min())
    needed = m > OCC_TOL
    c1_hat = float(np.clip((weights[needed] / m[needed]).min(), 0.0, 1.0)) if needed.any() else 1.0
    per_h = [
        {
            "min_weight": float(weights[h].min()),
            "uncovered_needed": int(np.sum(~covered[h] & (m[h] > OCC_TOL))),
        }
        for h in range(mg.H)
    ]
    return CoverageReport(kappa_hat=kappa_hat, c1_hat=c1_hat, single_ok=single_ok,
                          unilateral_ok=unilateral_ok, uniform_ok=uniform_ok, per_h=per_h)


def check_assumptions(D, mg, ne: StrategyPair) -> CoverageReport:
    """Grade the coverage assumptions from empirical visit counts."""
    _check_ne(mg, ne)
    counts = empirical_counts(D, mg.S, mg.A, mg.B)
    return _report_from_weights(mg, ne, counts / D.K)


def check_assumptions_exact(mg, ne: StrategyPair, rho) -> CoverageReport:
    """Infinite-data variant: behavior occupancies replace counts."""
    _check_ne(mg, ne)
    return _report_from_weights(mg, ne, behavior_occupancy(mg, rho))


def expected_bonus_norm(mg, pair: StrategyPair, Lambdas, phi_table, norm="mahalanobis"):
    """Expected feature norm under a strategy pair's occupancy, per step.

    ``norm="mahalanobis"`` gives ``E[ ||phi||_{Lambda_h^{-1}} ]`` (the scale
    the covariance-weighted bonuses carry); ``norm="inv-l2"`` gives
    ``E[ ||phi^T Lambda_h^{-1}||_2 ]`` (the scale of the squared-inverse
    bonus).  ``Lambdas`` is a length-H list of positive-definite matrices.
    Used to check the trace-style bounds that couple coverage to bonus
    magnitude.
    """
    occ = occupancy_measure(mg, pair)
    out = np.zeros(mg.H)
    for h in range(mg.H):
        Lam = np.asarray(Lambdas[h], dtype=float)
        try:
            np.linalg.cholesky(Lam)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(f"Lambda at h={h} is not positive definite") from exc
        inv = np.linalg.inv(Lam)
        if norm == "mahalanobis":
            norms = np.sqrt(np.maximum(
                np.einsum("sabi,ij,sabj->sab", phi_table, inv, phi_table), 0.0))
        elif norm == "inv-l2":
            norms = np.linalg.norm(np.einsum("sabi,ij->sabj", phi_table, inv), axis=-1)
        else:
            raise ValueError(f"norm must be 'mahalanobis' or 'inv-l2', got {norm!r}")
        out[h] = float((occ[h] * norms).sum())
    return out
