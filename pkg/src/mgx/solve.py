"""Exact solvers for matrix games and finite Markov games.

Everything in this module is an oracle: matrix-game equilibria are computed
by linear programming (HiGHS), game values by backward induction, and best
responses by dynamic programming on the induced single-agent MDP.  Learners
are tested against these routines, so they favor exactness over speed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, SolverFailure
from .games import StrategyPair, to_tabular
from .validation import as_float_array, check_payoff_matrix

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class MatrixGameSolution:
    """Equilibrium of a zero-sum matrix game.

    ``x`` mixes over rows (max player), ``y`` over columns (min player);
    ``duality_gap = max_a (Qy)_a - min_b (x^T Q)_b`` certifies optimality.
    """

    x: np.ndarray
    y: np.ndarray
    value: float
    duality_gap: float


def _duality_gap(Q, x, y):
    return float((Q @ y).max() - (x @ Q).min())


def _lp_max_player(Q):
    """LP for the row player: maximize v s.t. Q^T x >= v 1, x in simplex.

    The column player's equilibrium strategy is read off the duals of the
    inequality block, which keeps the whole solve to a single LP.
    """
    A, B = Q.shape
    c = np.zeros(A + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-Q.T, np.ones((B, 1))])
    A_eq = np.zeros((1, A + 1))
    A_eq[0, :A] = 1.0
    res = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(B), A_eq=A_eq, b_eq=np.ones(1),
        bounds=[(0, None)] * A + [(None, None)], method="highs",
    )
    if not res.success:
        raise SolverFailure(f"zero-sum LP failed: {res.message}")
    x = np.clip(res.x[:A], 0.0, None)
    x /= x.sum()
    y = np.clip(-res.ineqlin.marginals, 0.0, None)
    ysum = y.sum()
    if ysum <= 0:
        raise SolverFailure("LP returned a degenerate dual solution")
    y /= ysum
    return x, y, float(res.x[-1])


def solve_matrix_game(Q, tol=DEFAULT_TOL) -> MatrixGameSolution:
    """Equilibrium of the zero-sum game with payoff matrix ``Q`` (row maximizes).

    Solves the standard LP pair; the solver is deterministic, so repeated
    calls on equal inputs return identical strategies even when the
    equilibrium is not unique.

    Raises
    ------
    NonFinitePayoff
        If ``Q`` contains NaN or infinite entries.
    SolverFailure
        If the LP does not reach an optimum or cannot certify
        ``duality_gap <= tol``.
    """
    Q = check_payoff_matrix(Q)
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, y, value = _lp_max_player(Q)
    gap = _duality_gap(Q, x, y)
    if gap > tol:
        # Degenerate duals: recover y from the min player's own LP instead.
        ymin, xdual, _ = _lp_max_player(-Q.T)
        y = ymin
        gap = _duality_gap(Q, x, y)
        if gap > tol:
            raise SolverFailure(f"duality gap {gap:.3e} exceeds tolerance {tol:.1e}")
    return MatrixGameSolution(x=x, y=y, value=value, duality_gap=gap)


def bellman_apply(r, p, V_next):
    """One-step Bellman backup: ``Q(s,a,b) = r(s,a,b) + sum_s' p(s'|s,a,b) V(s')``.

    ``r`` has shape (S, A, B), ``p`` shape (S, A, B, S), ``V_next`` shape (S,).
    """
    r = as_float_array(r, "r")
    p = as_float_array(p, "p")
    V_next = as_float_array(V_next, "V_next")
    if p.shape != r.shape + (V_next.shape[0],):
        raise DimensionMismatch(f"p shape {p.shape} inconsistent with r {r.shape} and V {V_next.shape}")
    return r + p @ V_next


def ne_backward_induction(mg, tol=DEFAULT_TOL):
    """Exact Nash equilibrium and value tensor via stage-wise LP.

    Returns ``(pair, V)`` where ``V`` has shape (H+1, S) with ``V[H] = 0``,
    so ``V[0][s]`` is the game value from state ``s``.
    """
    tab = to_tabular(mg)
    H, S, A, B = tab.H, tab.S, tab.A, tab.B
    V = np.zeros((H + 1, S))
    pi = np.zeros((H, S, A))
    nu = np.zeros((H, S, B))
    for h in range(H - 1, -1, -1):
        Q = bellman_apply(tab.r_mean[h], tab.p[h], V[h + 1])
        for s in range(S):
            sol = solve_matrix_game(Q[s], tol=tol)
            pi[h, s] = sol.x
            nu[h, s] = sol.y
            V[h, s] = sol.value
    return StrategyPair(pi=pi, nu=nu), V


def best_response(mg, strategy, side):
    """Value of the opponent's exact best response to a fixed strategy.

    ``side`` names the player whose strategy is fixed: with ``side="max"``
    the max player plays ``strategy`` (shape (H, S, A)) and the min player
    best-responds, giving ``V^{pi,*}``; with ``side="min"`` the roles swap,
    giving ``V^{*,nu}``.  Returns ``(V, br)`` where ``V`` has shape
    (H+1, S) and ``br`` is the responder's deterministic policy (H, S).
    """
    tab = to_tabular(mg)
    H, S, A, B = tab.H, tab.S, tab.A, tab.B
    strategy = as_float_array(strategy, "strategy")
    if side == "max":
        expected_shape = (H, S, A)
    elif side == "min":
        expected_shape = (H, S, B)
    else:
        raise ValueError(f"side must be 'max' or 'min', got {side!r}")
    if strategy.shape != expected_shape:
        raise DimensionMismatch(f"fixed strategy has shape {strategy.shape}, expected {expected_shape}")

    V = np.zeros((H + 1, S))
    br = np.zeros((H, S), dtype=int)
    for h in range(H - 1, -1, -1):
        Q = bellman_apply(tab.r_mean[h], tab.p[h], V[h + 1])
        if side == "max":
            # Min player responds: collapse the a-axis under pi, minimize over b.
            qb = np.einsum("sa,sab->sb", strategy[h], Q)
            br[h] = np.argmin(qb, axis=1)
            V[h] = qb.min(axis=1)
        else:
            qa = np.einsum("sb,sab->sa", strategy[h], Q)
            br[h] = np.argmax(qa, axis=1)
            V[h] = qa.max(axis=1)
    return V, br


def best_response_value(mg, strategy, side, s=None):
    """``V^{pi,*}_1(s)`` (side="max") or ``V^{*,nu}_1(s)`` (side="min")."""
    V, _ = best_response(mg, strategy, side)
    return float(V[0, mg.s1 if s is None else s])


def subopt_gap(mg, pair: StrategyPair, s=None):
    """Suboptimality gap ``V^{*,nu}_1(s) - V^{pi,*}_1(s)`` of a strategy pair.

    Nonnegative (up to solver precision) by weak duality; zero exactly at a
    Nash equilibrium.
    """
    pair.check_matches(mg)
    s = mg.s1 if s is None else s
    hi = best_response_value(mg, pair.nu, "min", s)
    lo = best_response_value(mg, pair.pi, "max", s)
    return hi - lo


def policy_value(mg, pair: StrategyPair):
    """Exact ``V^{pi,nu}`` and ``Q^{pi,nu}`` for a fixed strategy pair.

    Returns ``(V, Q)`` with shapes (H+1, S) and (H, S, A, B).
    """
    pair.check_matches(mg)
    tab = to_tabular(mg)
    H, S = tab.H, tab.S
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, tab.A, tab.B))
    for h in range(H - 1, -1, -1):
        Q[h] = bellman_apply(tab.r_mean[h], tab.p[h], V[h + 1])
        V[h] = np.einsum("sa,sab,sb->s", pair.pi[h], Q[h], pair.nu[h])
    return V, Q
