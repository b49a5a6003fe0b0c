import itertools

import numpy as np
import pytest

from mgx import StrategyPair, policy_value, random_tabular


@pytest.fixture
def small_game():
    return random_tabular(3, 2, 2, 3, gamma=0.0, seed=42)


def enumerate_deterministic(H, S, n_actions):
    """All deterministic Markov policies as (H, S) integer tables."""
    for flat in itertools.product(range(n_actions), repeat=H * S):
        yield np.asarray(flat, dtype=int).reshape(H, S)


def point_mass(table, n_actions):
    H, S = table.shape
    out = np.zeros((H, S, n_actions))
    for h in range(H):
        out[h, np.arange(S), table[h]] = 1.0
    return out


def brute_force_best_response_value(mg, strategy, side, s):
    """Exhaustive-maximization oracle for best responses on tiny games.

    Enumerates every deterministic Markov policy of the responder and scores
    the resulting pair exactly; extreme points suffice because the value is
    linear in each stage's action distribution.
    """
    best = None
    if side == "max":
        for table in enumerate_deterministic(mg.H, mg.S, mg.B):
            pair = StrategyPair(pi=strategy, nu=point_mass(table, mg.B))
            v = policy_value(mg, pair)[0][0, s]
            best = v if best is None else min(best, v)
    else:
        for table in enumerate_deterministic(mg.H, mg.S, mg.A):
            pair = StrategyPair(pi=point_mass(table, mg.A), nu=strategy)
            v = policy_value(mg, pair)[0][0, s]
            best = v if best is None else max(best, v)
    return best


def random_pair(mg, rng):
    pi = rng.dirichlet(np.ones(mg.A), size=(mg.H, mg.S))
    nu = rng.dirichlet(np.ones(mg.B), size=(mg.H, mg.S))
    return StrategyPair(pi=pi, nu=nu)
