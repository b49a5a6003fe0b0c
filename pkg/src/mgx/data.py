"""Offline dataset generation and per-timestep slicing.

Trajectories are sampled in compliance with a game under a behavior policy:
joint actions from ``rho_h(s)``, rewards as mean plus gamma-scaled Gaussian
noise (or a custom reward sampler), next states from the transition kernel.
Sampling is vectorized over trajectories with a fixed per-step draw order
(actions, rewards, next states), so a seed pins the dataset bit-for-bit and
two games with identical dynamics sampled under the same seed share their
trajectory stream: the coupling the hard instances rely on.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch
from .validation import check_prob_rows


@dataclass(frozen=True)
class BehaviorPolicy:
    """Joint behavior policy: ``rho[h, s]`` is a distribution over A x B."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim != 4:
            raise DimensionMismatch(f"rho must have shape (H, S, A, B), got {rho.shape}")
        check_prob_rows(rho.reshape(rho.shape[0], rho.shape[1], -1), "rho", tol=1e-10)
        rho = np.ascontiguousarray(rho)
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @property
    def H(self):
        return self.rho.shape[0]

    @property
    def S(self):
        return self.rho.shape[1]

    def check_matches(self, mg):
        if self.rho.shape != (mg.H, mg.S, mg.A, mg.B):
            raise DimensionMismatch(
                f"rho shape {self.rho.shape} does not match game (H={mg.H}, S={mg.S}, A={mg.A}, B={mg.B})"
            )
        return self


def uniform_behavior(mg) -> BehaviorPolicy:
    return BehaviorPolicy(np.full((mg.H, mg.S, mg.A, mg.B), 1.0 / (mg.A * mg.B)))


def behavior_from_pair(pair) -> BehaviorPolicy:
    """Product behavior policy rho = pi (x) nu."""
    return BehaviorPolicy(np.einsum("hsa,hsb->hsab", pair.pi, pair.nu))


@dataclass(frozen=True)
class DatasetView:
    """Learner-facing dataset: transition tuples only, no corruption ledger."""

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    @property
    def K(self):
        return self.s.shape[0]

    @property
    def H(self):
        return self.s.shape[1]


@dataclass(frozen=True)
class Dataset:
    """K trajectories of H transition tuples plus a corruption ledger.

    ``corrupted_mask`` is diagnostic only: learners must consume the
    :class:`DatasetView` returned by :meth:`learner_view`, which does not
    carry the mask.
    """

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    corrupted_mask: np.ndarray
    seed: int = 0
    mode: str = "timestep"

    @property
    def K(self):
        return self.s.shape[0]

    @property
    def H(self):
        return self.s.shape[1]

    def learner_view(self) -> DatasetView:
        return DatasetView(s=self.s, a=self.a, b=self.b, r=self.r, s_next=self.s_next)

    def with_tuples(self, **arrays):
        """Copy with some tuple arrays replaced (used by adversaries)."""
        return replace(self, **arrays)


def _categorical_rows(rng, table, rows):
    """Vectorized inverse-CDF sampling: one draw per row index in ``rows``.

    ``table`` maps a row index to a distribution; floating cumsums make the
    final bin cover u=1 exactly via clipping.
    """
    cum = np.cumsum(table, axis=-1)
    u = rng.random(rows.shape[0])
    picked = (u[:, None] > cum[rows]).sum(axis=1)
    return np.clip(picked, 0, table.shape[-1] - 1)


def sample_dataset(mg, rho: BehaviorPolicy, K: int, seed: int, reward_sampler=None) -> Dataset:
    """Sample K compliant trajectories of length H under ``rho``.

    ``reward_sampler(rng, h, s, a, b, mean)`` overrides the default
    ``mean + gamma * N(0, 1)`` draw; it must consume a fixed number of RNG
    draws per call so coupled games stay aligned.
    """
    rho.check_matches(mg)
    rng = np.random.default_rng(seed)
    H, S, A, B = mg.H, mg.S, mg.A, mg.B
    joint = rho.rho.reshape(H, S, A * B)

    s = np.zeros((K, H), dtype=np.int64)
    a = np.zeros((K, H), dtype=np.int64)
    b = np.zeros((K, H), dtype=np.int64)
    r = np.zeros((K, H))
    s_next = np.zeros((K, H), dtype=np.int64)

    if float(mg.init_dist[mg.s1]) == 1.0:
        cur = np.full(K, mg.s1, dtype=np.int64)
    else:
        cur = _categorical_rows(rng, mg.init_dist[None, :], np.zeros(K, dtype=np.int64))

    for h in range(H):
        s[:, h] = cur
        ab = _categorical_rows(rng, joint[h], cur)
        a[:, h] = ab // B
        b[:, h] = ab % B
        means = mg.reward_table(h)[cur, a[:, h], b[:, h]]
        if reward_sampler is not None:
            r[:, h] = reward_sampler(rng, h, cur, a[:, h], b[:, h], means)
        else:
            r[:, h] = means + mg.gamma * rng.standard_normal(K)
        flat = mg.transition_table(h).reshape(S * A * B, S)
        s_next[:, h] = _categorical_rows(rng, flat, (cur * A + a[:, h]) * B + b[:, h])
        cur = s_next[:, h]

    return Dataset(s=s, a=a, b=b, r=r, s_next=s_next,
                   corrupted_mask=np.zeros((K, H), dtype=bool), seed=seed)


@dataclass(frozen=True)
class TimestepSlice:
    """All tuples assigned to one backward-induction step."""

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    @property
    def n(self):
        return self.s.shape[0]


@dataclass(frozen=True)
class SlicedDataset:
    slices: tuple
    mode: str

    @property
    def H(self):
        return len(self.slices)

    def __getitem__(self, h):
        return self.slices[h]


def slice_per_timestep(D, mode="timestep", seed=None) -> SlicedDataset:
    """Split a dataset into H per-step regression slices.

    ``"timestep"`` (default) assigns step-h tuples to slice h, which is what
    the Bellman-target regressions need.  ``"random-split"`` partitions all
    K*H tuples into H random groups of size K regardless of their step index;
    it matches the literal splitting step of the learning loops but breaks
    the per-step regression semantics, so it is opt-in.
    """
    K, H = D.K, D.H
    if mode == "timestep":
        slices = tuple(
            TimestepSlice(s=D.s[:, h], a=D.a[:, h], b=D.b[:, h], r=D.r[:, h], s_next=D.s_next[:, h])
            for h in range(H)
        )
        return SlicedDataset(slices=slices, mode=mode)
    if mode == "random-split":
        rng = np.random.default_rng(D.seed if seed is None else seed)
        perm = rng.permutation(K * H)
        flat = [arr.reshape(-1) for arr in (D.s, D.a, D.b, D.r, D.s_next)]
        slices = []
        for h in range(H):
            idx = np.sort(perm[h * K:(h + 1) * K])
            slices.append(TimestepSlice(*(f[idx] for f in flat)))
        return SlicedDataset(slices=tuple(slices), mode=mode)
    raise ValueError(f"unknown slicing mode {mode!r}")


def save_dataset(D: Dataset, path, learner_facing=False):
    """Write the dataset file: header line ``K H seed mode``, then one CSV
    row per tuple ``tau,h,s,a,b,r,s_next,corrupted``; the learner-facing
    export omits the corruption column.  ``tau`` and ``h`` are 1-indexed.
    """
    with open(path, "w") as fh:
        fh.write(f"{D.K} {D.H} {D.seed} {D.mode}\n")
        for tau in range(D.K):
            for h in range(D.H):
                row = (f"{tau + 1},{h + 1},{D.s[tau, h]},{D.a[tau, h]},{D.b[tau, h]},"
                       f"{float(D.r[tau, h])!r},{D.s_next[tau, h]}")
                if not learner_facing:
                    row += f",{int(D.corrupted_mask[tau, h])}"
                fh.write(row + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        K, H, seed, mode = fh.readline().split()
        K, H, seed = int(K), int(H), int(seed)
        s = np.zeros((K, H), dtype=np.int64)
        a = np.zeros((K, H), dtype=np.int64)
        b = np.zeros((K, H), dtype=np.int64)
        r = np.zeros((K, H))
        s_next = np.zeros((K, H), dtype=np.int64)
        mask = np.zeros((K, H), dtype=bool)
        for line in fh:
            parts = line.strip().split(",")
            tau, h = int(parts[0]) - 1, int(parts[1]) - 1
            s[tau, h], a[tau, h], b[tau, h] = int(parts[2]), int(parts[3]), int(parts[4])
            r[tau, h] = float(parts[5])
            s_next[tau, h] = int(parts[6])
            if len(parts) > 7:
                mask[tau, h] = bool(int(parts[7]))
    return Dataset(s=s, a=a, b=b, r=r, s_next=s_next, corrupted_mask=mask, seed=seed, mode=mode)
