"""Config-driven experiment sweeps with crash-safe resume.

A sweep is the full factorial product of (instance, K, epsilon, algorithm,
seed).  Each cell samples a dataset, applies the configured adversary,
runs the configured learner, and scores the learned pair with the exact
suboptimality-gap oracle.  Rows are appended to the output CSV as they
finish and the file is rewritten in sorted cell order at the end, so an
interrupted sweep can be resumed and any worker count yields the same file.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import hashlib
import os
import sys
import time

import numpy as np

from .corruption import CorruptionSpec, RandomReplace, RewardFlip, corrupt, least_covered_attack
from .data import sample_dataset, uniform_behavior
from .errors import ConfigError
from .games import load_game
from .instances import build_tree_pair, random_linear, random_tabular
from .pmvi import GameShape, RobustPMVI
from .solve import subopt_gap

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_HEADER = "v1,instance_id,algorithm,K,epsilon,seed,subopt,runtime_ms,digest"


@dataclass(frozen=True)
class ResultRow:
    instance_id: str
    algorithm: str
    K: int
    epsilon: float
    seed: int
    subopt: float
    runtime_ms: float
    digest: str

    def key(self):
        return (self.instance_id, self.algorithm, self.K, self.epsilon, self.seed)

    def to_csv(self):
        return (f"v1,{self.instance_id},{self.algorithm},{self.K},{self.epsilon!r},"
                f"{self.seed},{self.subopt!r},{self.runtime_ms:.3f},{self.digest}")

    @classmethod
    def from_csv(cls, line):
        v, iid, alg, K, eps, seed, sub, rt, digest = line.rstrip("\n").split(",")
        if v != "v1":
            raise ConfigError(f"unknown result-row version {v!r}")
        return cls(instance_id=iid, algorithm=alg, K=int(K), epsilon=float(eps),
                   seed=int(seed), subopt=float(sub), runtime_ms=float(rt), digest=digest)


@dataclass
class ExperimentConfig:
    """Declarative sweep: instance spec, algorithm list, grids, seeds."""

    instance: dict
    algorithms: list
    k_grid: list
    epsilon_grid: list
    seeds: list
    adversary: dict
    delta: float = 0.1

    def __post_init__(self):
        if not self.k_grid or not self.epsilon_grid or not self.algorithms:
            raise ConfigError("k_grid, epsilon_grid, and algorithms must be nonempty")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be nonempty and distinct")
        for alg in self.algorithms:
            if "name" not in alg or "estimator" not in alg:
                raise ConfigError(f"algorithm entry missing name/estimator: {alg}")

    @classmethod
    def from_toml(cls, path):
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            return cls(
                instance=doc["instance"],
                algorithms=doc["algorithms"],
                k_grid=doc["k_grid"],
                epsilon_grid=doc["epsilon_grid"],
                seeds=doc["seeds"],
                adversary=doc.get("adversary", {"kind": "random-replace", "model": "arbitrary"}),
                delta=doc.get("delta", 0.1),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing required key {exc}") from exc


def _build_instance(spec):
    """Returns (instance_id, game, rho, tree_pair or None)."""
    kind = spec.get("kind")
    if kind == "file":
        mg = load_game(spec["path"])
        return os.path.basename(spec["path"]), mg, uniform_behavior(mg), None
    if kind == "random-tabular":
        mg = random_tabular(spec["S"], spec["A"], spec["B"], spec["H"],
                            gamma=spec.get("gamma", 0.0), seed=spec.get("seed", 0))
        iid = f"tab{spec['S']}x{spec['A']}x{spec['B']}h{spec['H']}s{spec.get('seed', 0)}"
        return iid, mg, uniform_behavior(mg), None
    if kind == "random-linear":
        mg = random_linear(spec["S"], spec["A"], spec["B"], spec["H"], spec["d"],
                           gamma=spec.get("gamma", 0.0), seed=spec.get("seed", 0))
        iid = f"lin{spec['S']}x{spec['A']}x{spec['B']}h{spec['H']}d{spec['d']}s{spec.get('seed', 0)}"
        return iid, mg, uniform_behavior(mg), None
    if kind == "tree":
        pair = build_tree_pair(spec["S"], spec["A"], spec["B"], spec["H"], spec["alpha"],
                               seed=spec.get("seed", 0))
        iid = f"tree{spec['S']}x{spec['A']}x{spec['B']}h{spec['H']}a{spec['alpha']}"
        return iid, pair.g, pair.rho, pair
    raise ConfigError(f"unknown instance kind {kind!r}")


def _sample_cell(mg, rho, pair, adversary, K, epsilon, seed):
    if pair is not None:
        D = pair.sample("g", K, seed)
    else:
        D = sample_dataset(mg, rho, K, seed)
    kind = adversary.get("kind", "random-replace")
    if epsilon == 0.0 or kind == "none":
        return D
    if kind == "least-covered":
        if pair is None:
            raise ConfigError("least-covered adversary requires a tree instance")
        return least_covered_attack(D, pair, epsilon, seed=seed + 7919,
                                    mode=adversary.get("mode", "add"))
    if kind == "random-replace":
        adv = RandomReplace()
    elif kind == "reward-flip":
        adv = RewardFlip(a=adversary["a"], b=adversary["b"],
                         new_value=adversary["new_value"], s=adversary.get("s"),
                         old_value=adversary.get("old_value"))
    else:
        raise ConfigError(f"unknown adversary kind {kind!r}")
    spec = CorruptionSpec(epsilon=epsilon, model=adversary.get("model", "arbitrary"),
                          adversary=adv, seed=seed + 7919)
    return corrupt(D, spec, mg_dims=(mg.S, mg.A, mg.B))


def _run_cell(cfg: ExperimentConfig, alg: dict, K: int, epsilon: float, seed: int):
    iid, mg, rho, pair = _build_instance(cfg.instance)
    name = alg["name"]
    t0 = time.perf_counter()
    try:
        D = _sample_cell(mg, rho, pair, cfg.adversary, K, epsilon, seed)
        learner = RobustPMVI(
            estimator=alg["estimator"],
            bonus_kind=alg.get("bonus", "zero"),
            epsilon=alg.get("epsilon_override", epsilon),
            gamma=mg.gamma,
            delta=cfg.delta,
            c_bonus=alg.get("c_bonus", 1.0),
            seed=seed,
            use_filter=alg.get("use_filter", True),
        ).fit(D.learner_view(), GameShape.from_game(mg))
        gap = subopt_gap(mg, learner.strategy_)
        digest = hashlib.sha1(
            learner.strategy_.pi.tobytes() + learner.strategy_.nu.tobytes()
        ).hexdigest()[:10]
        runtime = (time.perf_counter() - t0) * 1000.0
        return ResultRow(instance_id=iid, algorithm=name, K=K, epsilon=epsilon,
                         seed=seed, subopt=gap, runtime_ms=runtime, digest=digest)
    except Exception as exc:  # per-cell failure: record and continue
        runtime = (time.perf_counter() - t0) * 1000.0
        return ResultRow(instance_id=iid, algorithm=name, K=K, epsilon=epsilon,
                         seed=seed, subopt=float("nan"), runtime_ms=runtime,
                         digest=f"error:{type(exc).__name__}")


def _cells(cfg: ExperimentConfig):
    for alg in sorted(cfg.algorithms, key=lambda a: a["name"]):
        for K in sorted(cfg.k_grid):
            for eps in sorted(cfg.epsilon_grid):
                for seed in sorted(cfg.seeds):
                    yield alg, K, eps, seed


def read_rows(csv_path):
    rows = []
    if not os.path.exists(csv_path):
        return rows
    with open(csv_path) as fh:
        header = fh.readline().rstrip("\n")
        if header and header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {header!r}")
        for line in fh:
            if line.strip():
                rows.append(ResultRow.from_csv(line))
    return rows


def _write_sorted(csv_path, rows):
    tmp = csv_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in sorted(rows, key=ResultRow.key):
            fh.write(row.to_csv() + "\n")
    os.replace(tmp, csv_path)


def run_sweep(cfg: ExperimentConfig, csv_path, workers=1, progress=None):
    """Execute the sweep, resuming past any rows already in ``csv_path``.

    Returns the full sorted list of rows.  Cells that raise are recorded as
    rows with an ``error:`` digest and NaN subopt rather than aborting.
    """
    done = {row.key(): row for row in read_rows(csv_path)}
    iid = _build_instance(cfg.instance)[0]
    pending = [(alg, K, eps, seed) for alg, K, eps, seed in _cells(cfg)
               if (iid, alg["name"], K, eps, seed) not in done]

    if not os.path.exists(csv_path):
        with open(csv_path, "w") as fh:
            fh.write(CSV_HEADER + "\n")

    def record(row):
        done[row.key()] = row
        with open(csv_path, "a") as fh:
            fh.write(row.to_csv() + "\n")
            fh.flush()
        if progress is not None:
            progress(row)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, cfg, alg, K, eps, seed)
                       for alg, K, eps, seed in pending]
            for fut in futures:
                record(fut.result())
    else:
        for alg, K, eps, seed in pending:
            record(_run_cell(cfg, alg, K, eps, seed))

    rows = sorted(done.values(), key=ResultRow.key)
    _write_sorted(csv_path, rows)
    return rows


def has_failures(rows):
    return any(row.digest.startswith("error:") for row in rows)


def aggregate(rows, x_field):
    """Mean subopt with standard error per (algorithm, x) cell.

    Returns ``{algorithm: (xs, means, stderrs)}`` over non-error rows.
    """
    series = {}
    for row in rows:
        if row.digest.startswith("error:") or not np.isfinite(row.subopt):
            continue
        series.setdefault(row.algorithm, {}).setdefault(getattr(row, x_field), []).append(row.subopt)
    out = {}
    for alg, byx in series.items():
        xs = sorted(byx)
        means = np.array([np.mean(byx[x]) for x in xs])
        errs = np.array([np.std(byx[x]) / np.sqrt(len(byx[x])) for x in xs])
        out[alg] = (np.array(xs, dtype=float), means, errs)
    return out
