"""Constructors for adversarial hard instances and random test games.

The tree pair realizes the information-theoretic lower bound: two games on
the same deterministic tree that differ only in the reward law of one
leaf-state action cell, built so the twin's equilibrium is expensive in the
base game.  The bandit pair realizes the agnostic-learning obstruction: two
one-step games whose datasets can be coupled to coincide with constant
probability.  Random tabular/linear generators provide the test corpus.
"""

from dataclasses import dataclass
import math

import numpy as np

from .coverage import behavior_occupancy
from .data import BehaviorPolicy, sample_dataset
from .errors import ConstructionFailed, InvalidShape
from .games import LinearMG, TabularMG, one_hot_featurize


def tree_depth_bound(S, A, B):
    """Depth of the breadth-first tree on S nodes with branching A*B."""
    return max(0, math.ceil(math.log(S * (A * B - 1) + 1, A * B)) - 1)


def _build_tree(S, A, B):
    """Breadth-first tree: children[s][(a, b)] = next state.

    The first child allocated at each level extends the starred path and is
    reached by every (a, b=0) edge of its (starred) parent.  Remaining edges
    pull fresh states while available, then cycle among existing children.
    Nodes without children are leaves and self-absorb.
    """
    children = [dict() for _ in range(S)]
    level = np.zeros(S, dtype=int)
    starred = [0]
    pool = list(range(1, S))
    queue = [0]
    while queue and pool:
        node = queue.pop(0)
        is_starred = node == starred[-1]
        kids = []
        if is_starred and pool:
            nxt = pool.pop(0)
            starred.append(nxt)
            level[nxt] = level[node] + 1
            kids.append(nxt)
            queue.append(nxt)
            for a in range(A):
                children[node][(a, 0)] = nxt
        edges = [(a, b) for a in range(A) for b in range(B)
                 if (a, b) not in children[node]]
        reusable = []
        for a, b in edges:
            if pool:
                kid = pool.pop(0)
                level[kid] = level[node] + 1
                kids.append(kid)
                reusable.append(kid)
                queue.append(kid)
                children[node][(a, b)] = kid
            else:
                # Prefer cycling among non-starred children; fall back to any.
                cycle = reusable or kids
                children[node][(a, b)] = cycle[len(children[node]) % len(cycle)]
    return children, level, starred


@dataclass(frozen=True)
class TreeInstancePair:
    """A base game and its reward-twin on a shared deterministic tree.

    The games differ only in the reward law at ``target``: the twin adds a
    Bernoulli(2*alpha) increment there.  ``rho`` is an explicit behavior
    policy under which the target is the least-represented positive-mass
    tuple at every step it is reachable.
    """

    g: TabularMG
    g_prime: TabularMG
    target: tuple
    alpha: float
    q: int
    ne_path: tuple
    rho: BehaviorPolicy

    def reward_sampler(self, which):
        """Reward sampler for ``which`` in {"g", "g_prime"}.

        Consumes one uniform per tuple, so datasets of the two games drawn
        under the same seed are coupled: they differ exactly at target
        visits where the Bernoulli increment fires.
        """
        ts, ta, tb = self.target
        alpha = self.alpha
        twin = which == "g_prime"
        if which not in ("g", "g_prime"):
            raise ValueError(f"which must be 'g' or 'g_prime', got {which!r}")

        def sampler(rng, h, s, a, b, means):
            u = rng.random(len(s))
            fire = (u > 1.0 - 2.0 * alpha).astype(float)
            r = means.copy()
            at_bonus = (s == ts) & (a == ta) & (b == tb + 1)  # the Ber(2a) cell
            r[at_bonus] = fire[at_bonus]
            at_target = (s == ts) & (a == ta) & (b == tb)
            r[at_target] = alpha + (fire[at_target] if twin else 0.0)
            return r

        return sampler

    def sample(self, which, K, seed):
        mg = self.g if which == "g" else self.g_prime
        return sample_dataset(mg, self.rho, K, seed, reward_sampler=self.reward_sampler(which))


def build_tree_pair(S, A, B, H, alpha, seed=0) -> TreeInstancePair:
    """Construct the lower-bound tree pair.

    Rewards on the starred path are alpha for (a1, b1) and 2*alpha for
    (a1, b != b1); the deepest starred leaf carries the distinguishing cell
    (alpha vs alpha + Ber(2*alpha)) next to a Ber(2*alpha) decoy; every
    off-path state pays 1 for a1.  Equilibrium values are H*alpha in the
    base game and (2H - q)*alpha in the twin.
    """
    if not 0.0 < alpha < 1.0 / 3.0:
        raise ValueError(f"alpha must lie in (0, 1/3), got {alpha}")
    if B < 2:
        raise InvalidShape("the distinguishing cell needs B >= 2")
    if S > (A * B) ** (H / 2):
        raise InvalidShape(f"S={S} exceeds (A*B)^(H/2) = {(A * B) ** (H / 2):.1f}")

    children, level, starred = _build_tree(S, A, B)
    q = len(starred) - 1
    if q >= H:
        raise InvalidShape(f"tree depth {q} must be < H={H}")
    sq = starred[-1]
    target = (sq, 0, 0)

    p = np.zeros((H, S, A, B, S))
    for s in range(S):
        for a in range(A):
            for b in range(B):
                nxt = children[s].get((a, b), s)  # leaves self-absorb
                p[:, s, a, b, nxt] = 1.0

    r = np.zeros((H, S, A, B))
    on_path = set(starred)
    for s in range(S):
        if s == sq:
            r[:, s, 0, 0] = alpha
            r[:, s, 0, 1] = 2 * alpha  # Ber(2*alpha) decoy, mean stored
            if B > 2:
                r[:, s, 0, 2:] = 3 * alpha
        elif s in on_path:
            r[:, s, 0, 0] = alpha
            r[:, s, 0, 1:] = 2 * alpha
        else:
            r[:, s, 0, :] = 1.0

    g = TabularMG(S=S, A=A, B=B, H=H, p=p, r_mean=r, gamma=0.0, s1=0)
    r_prime = r.copy()
    r_prime[:, sq, 0, 0] = 3 * alpha  # mean of alpha + Ber(2*alpha)
    g_prime = TabularMG(S=S, A=A, B=B, H=H, p=p, r_mean=r_prime, gamma=0.0, s1=0)

    rho = _least_covered_behavior(g, sq, target, A, B)
    return TreeInstancePair(g=g, g_prime=g_prime, target=target, alpha=alpha,
                            q=q, ne_path=tuple(starred), rho=rho)


def _least_covered_behavior(g, sq, target, A, B):
    """Uniform behavior except at the target's state, where the target cell
    gets mass strictly below every other positively-visited tuple."""
    uniform = np.full((g.H, g.S, A, B), 1.0 / (A * B))
    occ = behavior_occupancy(g, BehaviorPolicy(uniform))
    # The target state is absorbing, so other states' occupancies do not
    # depend on the mass split we choose at sq.
    bound = 1.0 / (A * B)
    for h in range(g.H):
        sq_state = occ[h, sq].sum()
        if sq_state <= 0:
            continue
        others = occ[h].copy()
        others[sq] = np.inf
        pos = others[others > 0]
        if pos.size:
            bound = min(bound, pos.min() / sq_state)
    eta = 0.5 * bound
    rho = uniform.copy()
    rest = (1.0 - eta) / (A * B - 1)
    rho[:, sq, :, :] = rest
    rho[:, sq, target[1], target[2]] = eta
    return BehaviorPolicy(rho)


@dataclass(frozen=True)
class AgnosticBanditPair:
    """Two one-step games whose reward draws admit an explicit coupling."""

    g1: TabularMG
    g2: TabularMG
    p: float
    epsilon: float
    N: int
    rho: BehaviorPolicy

    @property
    def mean_shift(self):
        return self.epsilon / (4.0 * self.p * self.N)

    def coupling_law(self):
        """Joint law of one coupled reward draw at (a1, b1)."""
        e = self.mean_shift
        return {
            (0, 0): 0.5 - e,
            (0, 1): 0.0,
            (1, 0): 2.0 * e,
            (1, 1): 0.5 - e,
        }

    def reward_sampler(self, which):
        mean_11 = 0.5 + self.mean_shift if which == "g1" else 0.5 - self.mean_shift

        def sampler(rng, h, s, a, b, means):
            u = rng.random(len(s))
            r = np.zeros(len(s))
            cell_11 = (a == 0) & (b == 0)
            r[cell_11] = (u[cell_11] > 1.0 - mean_11).astype(float)
            cell_21 = (a == 1) & (b == 0)
            r[cell_21] = (u[cell_21] > 0.5).astype(float)
            return r

        return sampler

    def coupled_sample(self, seed):
        """Matched-seed datasets (D1, D2) of size N from the two games."""
        d1 = sample_dataset(self.g1, self.rho, self.N, seed, reward_sampler=self.reward_sampler("g1"))
        d2 = sample_dataset(self.g2, self.rho, self.N, seed, reward_sampler=self.reward_sampler("g2"))
        return d1, d2


def build_agnostic_pair(p, epsilon, N, seed=0) -> AgnosticBanditPair:
    """Two-action bandit pair with reward means split by eps/(4pN) at (a1, b1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not 0.0 <= epsilon <= 0.5:
        raise ValueError(f"epsilon must lie in [0, 1/2], got {epsilon}")
    e = epsilon / (4.0 * p * N)
    if e > 0.5:
        raise ValueError("mean shift eps/(4pN) exceeds 1/2; increase p or N")

    def game(shift):
        r = np.array([[[0.5 + shift, 0.0], [0.5, 0.0]]])[None, :, :, :]
        pmat = np.ones((1, 1, 2, 2, 1))
        return TabularMG(S=1, A=2, B=2, H=1, p=pmat, r_mean=r, gamma=0.5, s1=0)

    rho = BehaviorPolicy(np.array([[[[p / 2, p / 2], [(1 - p) / 2, (1 - p) / 2]]]]))
    return AgnosticBanditPair(g1=game(e), g2=game(-e), p=p, epsilon=epsilon, N=N, rho=rho)


def random_tabular(S, A, B, H, gamma=0.0, seed=0) -> TabularMG:
    """Dirichlet(1) transitions, Uniform[0, 1] reward means."""
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(S), size=(H, S, A, B))
    r = rng.uniform(0.0, 1.0, size=(H, S, A, B))
    return TabularMG(S=S, A=A, B=B, H=H, p=p, r_mean=r, gamma=gamma, s1=0)


def random_linear(S, A, B, H, d, gamma=0.0, seed=0, max_tries=100) -> LinearMG:
    """Random linear game via a mixture factorization.

    Features are Dirichlet rows (so ``||phi||_2 <= 1`` with a positive lower
    bound), transition measures are d anchor distributions over states, and
    reward weights are uniform in [0, 1]; induced transitions land on the
    simplex by convexity.  ``d = S*A*B`` returns the one-hot featurization
    of a random tabular game.
    """
    if d > S * A * B:
        raise InvalidShape(f"d={d} must not exceed S*A*B={S * A * B}")
    if d == S * A * B:
        return one_hot_featurize(random_tabular(S, A, B, H, gamma=gamma, seed=seed))
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        phi = rng.dirichlet(np.ones(d), size=(S, A, B))
        theta = rng.uniform(0.0, 1.0, size=(H, d))
        mu = rng.dirichlet(np.ones(S), size=(H, d))
        try:
            return LinearMG(S=S, A=A, B=B, H=H, d=d, phi=phi, theta=theta, mu=mu,
                            gamma=gamma, s1=0, c2=float(np.linalg.norm(phi, axis=-1).min()))
        except ValueError:
            continue
    raise ConstructionFailed(f"no valid linear game after {max_tries} draws")
