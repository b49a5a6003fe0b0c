"""Game representations for finite two-player zero-sum Markov games.

A tabular game stores its transition kernel and mean-reward tensor
explicitly.  A linear game stores a feature table together with per-step
reward weights and transition measures; transitions and rewards are induced
as ``phi(s,a,b) @ mu_h`` and ``phi(s,a,b) @ theta_h``.  Both kinds are
immutable after construction and validated eagerly, so every downstream
consumer can assume well-formed probability tensors.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import DimensionMismatch, InvalidShape
from .validation import as_float_array, check_prob_rows, check_shape

# Exact evaluation enumerates (s, a, b); keep instances at desk scale.
MAX_TUPLE_SPACE = 100_000


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _init_distribution(s1, S):
    """Normalize the initial-state spec to a distribution over states."""
    if np.isscalar(s1):
        idx = int(s1)
        if not 0 <= idx < S:
            raise InvalidShape(f"initial state {idx} out of range for S={S}")
        dist = np.zeros(S)
        dist[idx] = 1.0
        return idx, _freeze(dist)
    dist = check_prob_rows(np.asarray(s1, dtype=float), "initial distribution", tol=1e-10)
    if dist.shape != (S,):
        raise DimensionMismatch(f"initial distribution has shape {dist.shape}, expected ({S},)")
    return int(np.argmax(dist)), _freeze(dist)


@dataclass(frozen=True)
class TabularMG:
    """Finite-horizon zero-sum Markov game with explicit tables.

    Attributes
    ----------
    S, A, B, H : int
        State count, max-player and min-player action counts, horizon.
    p : ndarray of shape (H, S, A, B, S)
        Transition kernel; ``p[h, s, a, b]`` is a distribution over next states.
    r_mean : ndarray of shape (H, S, A, B)
        Mean rewards in [0, 1] for the max player.
    gamma : float
        Sub-Gaussian scale of the reward noise (0 for deterministic rewards).
    s1 : int
        Initial state index (argmax of ``init_dist`` when a distribution is given).
    """

    S: int
    A: int
    B: int
    H: int
    p: np.ndarray
    r_mean: np.ndarray
    gamma: float = 0.0
    s1: int = 0
    init_dist: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("S", "A", "B", "H"):
            if getattr(self, name) < 1:
                raise InvalidShape(f"{name} must be >= 1")
        p = check_shape(as_float_array(self.p, "p"), (self.H, self.S, self.A, self.B, self.S), "p")
        check_prob_rows(p, "transition kernel", tol=1e-12)
        r = check_shape(as_float_array(self.r_mean, "r_mean"), (self.H, self.S, self.A, self.B), "r_mean")
        if r.min() < -1e-12 or r.max() > 1 + 1e-12:
            raise ValueError(f"r_mean entries must lie in [0, 1], got range [{r.min()}, {r.max()}]")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        s1, dist = _init_distribution(self.init_dist if self.init_dist is not None else self.s1, self.S)
        object.__setattr__(self, "p", _freeze(p))
        object.__setattr__(self, "r_mean", _freeze(r))
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "init_dist", dist)

    @property
    def kind(self):
        return "tabular"

    def reward_table(self, h):
        """Mean rewards at step h (0-indexed), shape (S, A, B)."""
        return self.r_mean[h]

    def transition_table(self, h):
        """Transition kernel at step h (0-indexed), shape (S, A, B, S)."""
        return self.p[h]


@dataclass(frozen=True)
class LinearMG:
    """Linear Markov game over a finite, enumerable state space.

    ``phi`` is stored as an explicit per-tuple table of shape (S, A, B, d);
    induced rewards and transitions are ``phi @ theta[h]`` and
    ``phi @ mu[h]``.  Construction validates the feature-norm bounds
    (``||phi|| <= 1``, ``||theta_h|| <= sqrt(d)``, ``||mu_h(S)|| <= sqrt(d)``)
    and that every induced transition row is a probability vector.
    """

    S: int
    A: int
    B: int
    H: int
    d: int
    phi: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    gamma: float = 0.0
    s1: int = 0
    c2: float = None
    init_dist: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("S", "A", "B", "H", "d"):
            if getattr(self, name) < 1:
                raise InvalidShape(f"{name} must be >= 1")
        if self.S * self.A * self.B > MAX_TUPLE_SPACE:
            raise InvalidShape(
                f"S*A*B = {self.S * self.A * self.B} exceeds the exact-evaluation cap {MAX_TUPLE_SPACE}"
            )
        phi = check_shape(as_float_array(self.phi, "phi"), (self.S, self.A, self.B, self.d), "phi")
        theta = check_shape(as_float_array(self.theta, "theta"), (self.H, self.d), "theta")
        mu = check_shape(as_float_array(self.mu, "mu"), (self.H, self.d, self.S), "mu")
        sqd = np.sqrt(self.d)
        norms = np.linalg.norm(phi, axis=-1)
        if norms.max() > 1 + 1e-12:
            raise ValueError(f"||phi|| must be <= 1, got max {norms.max()}")
        if np.linalg.norm(theta, axis=-1).max() > sqd + 1e-9:
            raise ValueError("||theta_h|| exceeds sqrt(d)")
        if np.linalg.norm(mu.sum(axis=-1), axis=-1).max() > sqd + 1e-9:
            raise ValueError("||mu_h(S)|| exceeds sqrt(d)")
        if self.c2 is not None and norms.min() < self.c2 - 1e-12:
            raise ValueError(f"min ||phi|| = {norms.min()} violates the stated lower bound c2={self.c2}")
        # Induced transitions must be probability vectors within 1e-9.
        for h in range(self.H):
            check_prob_rows(np.einsum("sabd,dt->sabt", phi, mu[h]), f"induced transitions at h={h}", tol=1e-9)
        s1, dist = _init_distribution(self.init_dist if self.init_dist is not None else self.s1, self.S)
        object.__setattr__(self, "phi", _freeze(phi))
        object.__setattr__(self, "theta", _freeze(theta))
        object.__setattr__(self, "mu", _freeze(mu))
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "init_dist", dist)

    @property
    def kind(self):
        return "linear"

    def reward_table(self, h):
        return self.phi @ self.theta[h]

    def transition_table(self, h):
        return np.einsum("sabd,dt->sabt", self.phi, self.mu[h])


@dataclass(frozen=True)
class StrategyPair:
    """Per-step, per-state mixed strategies for both players.

    ``pi[h, s]`` is a distribution over the max player's actions,
    ``nu[h, s]`` over the min player's.
    """

    pi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        pi = check_prob_rows(self.pi, "pi", tol=1e-10)
        nu = check_prob_rows(self.nu, "nu", tol=1e-10)
        if pi.ndim != 3 or nu.ndim != 3 or pi.shape[:2] != nu.shape[:2]:
            raise DimensionMismatch(f"strategy shapes {pi.shape} / {nu.shape} are inconsistent")
        object.__setattr__(self, "pi", _freeze(pi))
        object.__setattr__(self, "nu", _freeze(nu))

    @property
    def H(self):
        return self.pi.shape[0]

    @property
    def S(self):
        return self.pi.shape[1]

    def check_matches(self, mg):
        if self.pi.shape != (mg.H, mg.S, mg.A) or self.nu.shape != (mg.H, mg.S, mg.B):
            raise DimensionMismatch(
                f"strategy shapes {self.pi.shape}/{self.nu.shape} do not match game "
                f"(H={mg.H}, S={mg.S}, A={mg.A}, B={mg.B})"
            )
        return self


def uniform_pair(mg):
    """Uniform mixed strategies for both players of ``mg``."""
    pi = np.full((mg.H, mg.S, mg.A), 1.0 / mg.A)
    nu = np.full((mg.H, mg.S, mg.B), 1.0 / mg.B)
    return StrategyPair(pi=pi, nu=nu)


# One-hot featurization materializes a (S*A*B)^2 identity block; keep it small.
MAX_ONEHOT_DIM = 4096


def one_hot_featurize(mg: TabularMG) -> LinearMG:
    """Lift a tabular game to its canonical one-hot linear representation.

    d = S*A*B; the feature of (s, a, b) is the indicator basis vector, the
    reward weights are the flattened mean-reward tables, and the transition
    measures are the flattened kernel slices.  Induced dynamics equal the
    tabular ones exactly.
    """
    d = mg.S * mg.A * mg.B
    if d > MAX_ONEHOT_DIM:
        raise InvalidShape(f"one-hot dimension {d} exceeds cap {MAX_ONEHOT_DIM}")
    phi = np.eye(d).reshape(mg.S, mg.A, mg.B, d)
    theta = mg.r_mean.reshape(mg.H, d).copy()
    mu = mg.p.reshape(mg.H, d, mg.S).copy()
    return LinearMG(
        S=mg.S, A=mg.A, B=mg.B, H=mg.H, d=d,
        phi=phi, theta=theta, mu=mu,
        gamma=mg.gamma, init_dist=mg.init_dist, c2=1.0,
    )


def to_tabular(mg) -> TabularMG:
    """Materialize any game's induced tables as a TabularMG (exact DP input)."""
    if isinstance(mg, TabularMG):
        return mg
    p = np.stack([mg.transition_table(h) for h in range(mg.H)])
    r = np.clip(np.stack([mg.reward_table(h) for h in range(mg.H)]), 0.0, 1.0)
    return TabularMG(S=mg.S, A=mg.A, B=mg.B, H=mg.H, p=p, r_mean=r,
                     gamma=mg.gamma, init_dist=mg.init_dist)


def game_to_dict(mg) -> dict:
    doc = {
        "kind": mg.kind,
        "S": mg.S, "A": mg.A, "B": mg.B, "H": mg.H,
        "gamma": mg.gamma,
        "s1": mg.s1 if float(mg.init_dist[mg.s1]) == 1.0 else mg.init_dist.tolist(),
    }
    if mg.kind == "tabular":
        doc["p"] = mg.p.tolist()
        doc["r"] = mg.r_mean.tolist()
    else:
        doc["phi_table"] = mg.phi.tolist()
        doc["theta"] = mg.theta.tolist()
        doc["mu"] = mg.mu.tolist()
        if mg.c2 is not None:
            doc["c2"] = mg.c2
    return doc


def game_from_dict(doc: dict):
    kind = doc.get("kind")
    common = dict(S=doc["S"], A=doc["A"], B=doc["B"], H=doc["H"], gamma=doc.get("gamma", 0.0))
    s1 = doc.get("s1", 0)
    if isinstance(s1, list):
        common["init_dist"] = np.asarray(s1)
    else:
        common["s1"] = int(s1)
    if kind == "tabular":
        return TabularMG(p=np.asarray(doc["p"]), r_mean=np.asarray(doc["r"]), **common)
    if kind == "linear":
        phi = np.asarray(doc["phi_table"])
        return LinearMG(d=phi.shape[-1], phi=phi, theta=np.asarray(doc["theta"]),
                        mu=np.asarray(doc["mu"]), c2=doc.get("c2"), **common)
    raise ValueError(f"unknown game kind {kind!r}")


def save_game(mg, path):
    with open(path, "w") as fh:
        json.dump(game_to_dict(mg), fh)


def load_game(path):
    with open(path) as fh:
        return game_from_dict(json.load(fh))
