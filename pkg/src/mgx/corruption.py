"""Contamination adversaries for offline Markov game datasets.

The budget is ``floor(epsilon * K * H)`` replacements over all tuples.  The
generic :func:`corrupt` dispatcher enforces the corruption model (arbitrary /
observations-only / reward-only) regardless of which adversary picks the
indices; targeted adversaries may use less than the full budget when fewer
tuples match their target.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .data import Dataset
from .errors import BudgetExceeded

MODELS = ("arbitrary", "observations-only", "reward-only")


@dataclass(frozen=True)
class RandomReplace:
    """Replace uniformly chosen tuples with uniform garbage, r ~ U[0, H]."""


@dataclass(frozen=True)
class RewardFlip:
    """Set the reward of tuples matching an action pair to a new value.

    ``old_value`` (optional) restricts the attack to tuples whose observed
    reward is within ``atol`` of it; ``s`` (optional) restricts the state.
    """

    a: int
    b: int
    new_value: float
    s: int = None
    old_value: float = None
    atol: float = 1e-9


@dataclass(frozen=True)
class LeastCoveredAttack:
    """Bernoulli reward increments on an instance's least-covered tuple."""

    target: tuple
    alpha: float
    mode: str = "add"


@dataclass(frozen=True)
class CorruptionSpec:
    epsilon: float
    model: str = "arbitrary"
    adversary: object = RandomReplace()
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")


def budget_for(epsilon, K, H):
    return int(np.floor(epsilon * K * H))


def _apply_replacements(D, flat_idx, model, rng, mg_dims, new_r=None):
    """Rewrite the tuples at ``flat_idx`` in place of copies, per the model."""
    K, H = D.K, D.H
    S, A, B = mg_dims
    tau, h = np.unravel_index(flat_idx, (K, H))
    s, a, b = D.s.copy(), D.a.copy(), D.b.copy()
    r, s_next = D.r.copy(), D.s_next.copy()
    mask = D.corrupted_mask.copy()

    if model == "arbitrary":
        s[tau, h] = rng.integers(0, S, size=len(flat_idx))
        a[tau, h] = rng.integers(0, A, size=len(flat_idx))
        b[tau, h] = rng.integers(0, B, size=len(flat_idx))
    if model in ("arbitrary", "observations-only"):
        s_next[tau, h] = rng.integers(0, S, size=len(flat_idx))
    r[tau, h] = rng.uniform(0.0, H, size=len(flat_idx)) if new_r is None else new_r
    mask[tau, h] = True
    return D.with_tuples(s=s, a=a, b=b, r=r, s_next=s_next, corrupted_mask=mask)


def corrupt(D: Dataset, spec: CorruptionSpec, mg_dims=None) -> Dataset:
    """Apply an adversary to the dataset within the contamination budget.

    ``mg_dims = (S, A, B)`` bounds the replacement tuple space; it defaults
    to the ranges observed in the data.  Raises :class:`BudgetExceeded` if
    the adversary asks for more than ``floor(epsilon * K * H)`` replacements.
    """
    budget = budget_for(spec.epsilon, D.K, D.H)
    if budget == 0:
        return D
    if mg_dims is None:
        mg_dims = (int(D.s.max()) + 1, int(D.a.max()) + 1, int(D.b.max()) + 1)
    rng = np.random.default_rng(spec.seed)
    adv = spec.adversary

    if isinstance(adv, RandomReplace):
        flat_idx = rng.choice(D.K * D.H, size=budget, replace=False)
        return _apply_replacements(D, np.sort(flat_idx), spec.model, rng, mg_dims)

    if isinstance(adv, RewardFlip):
        match = (D.a == adv.a) & (D.b == adv.b)
        if adv.s is not None:
            match &= D.s == adv.s
        if adv.old_value is not None:
            match &= np.abs(D.r - adv.old_value) <= adv.atol
        flat = np.flatnonzero(match.reshape(-1))
        flat = flat[:budget]
        if len(flat) == 0:
            return D
        tau, h = np.unravel_index(flat, (D.K, D.H))
        r = D.r.copy()
        r[tau, h] = adv.new_value
        mask = D.corrupted_mask.copy()
        mask[tau, h] = True
        return D.with_tuples(r=r, corrupted_mask=mask)

    if isinstance(adv, LeastCoveredAttack):
        return least_covered_attack(D, adv, spec.epsilon, seed=spec.seed, mode=adv.mode)

    raise TypeError(f"unknown adversary {adv!r}")


def least_covered_attack(D: Dataset, instance, epsilon, seed=0, mode="add",
                         coupled_with: Dataset = None) -> Dataset:
    """Spend the whole budget on the instance's least-covered reward cell.

    ``instance`` exposes ``target = (s, a, b)`` and ``alpha``.  In ``"add"``
    mode the attacker adds a Bernoulli(2*alpha) increment to each visit of
    the target tuple (turning a dataset of the base game into one compliant
    with its twin); ``"strip"`` removes realized increments (the reverse
    direction); ``"match"`` copies the target rewards from ``coupled_with``,
    a matched-seed sample of the twin, so a within-budget attack reproduces
    the coupled dataset bitwise.  At most ``floor(epsilon * K * H)`` visits
    are altered; if the realized increments exceed the budget the attack is
    truncated, which is exactly the failure of the coupling event.
    """
    target = tuple(instance.target)
    alpha = float(instance.alpha)
    budget = budget_for(epsilon, D.K, D.H)
    if budget == 0:
        return D
    ts, ta, tb = target
    visits = np.flatnonzero(((D.s == ts) & (D.a == ta) & (D.b == tb)).reshape(-1))
    if len(visits) == 0:
        warnings.warn("least-covered target tuple never visited; nothing to corrupt")
        return D

    rng = np.random.default_rng(seed)
    if mode == "add":
        fires = visits[rng.random(len(visits)) < 2.0 * alpha]
    elif mode == "strip":
        tau, h = np.unravel_index(visits, (D.K, D.H))
        fires = visits[D.r[tau, h] >= alpha + 0.5]
    elif mode == "match":
        if coupled_with is None:
            raise ValueError("mode='match' requires the coupled twin dataset")
        tau, h = np.unravel_index(visits, (D.K, D.H))
        fires = visits[D.r[tau, h] != coupled_with.r[tau, h]]
    else:
        raise ValueError(f"mode must be 'add', 'strip', or 'match', got {mode!r}")
    if len(fires) == 0:
        return D
    fires = fires[:budget]
    tau, h = np.unravel_index(fires, (D.K, D.H))
    r = D.r.copy()
    # Assign the exact post-attack reward instead of adding a delta, so a
    # successful strip or match is bitwise equal to the coupled dataset.
    if mode == "add":
        r[tau, h] = alpha + 1.0
    elif mode == "strip":
        r[tau, h] = alpha
    else:
        r[tau, h] = coupled_with.r[tau, h]
    mask = D.corrupted_mask.copy()
    mask[tau, h] = True
    return D.with_tuples(r=r, corrupted_mask=mask)


def require_budget(requested, epsilon, K, H):
    """Guard for adversaries that must not exceed the contamination budget."""
    budget = budget_for(epsilon, K, H)
    if requested > budget:
        raise BudgetExceeded(f"adversary requested {requested} replacements, budget is {budget}")
    return budget
