"""Planted benchmarks for the robust estimators.

Each benchmark plants a known regressor (or mean), corrupts a fraction of
the sample, and reports the robust estimator's error next to the naive
baseline's.  ``magnitude`` controls how far the corrupted points sit from
the clean signal: large values make the attack obvious (breakdown tests),
values near the noise scale make it subtle (rate tests).
"""

from dataclasses import dataclass

import numpy as np

from .estimators import (RegressionProblem, filter_mean, ridge_fit, rls_fit, scram_fit)

BENCH_CSV_HEADER = "estimator,d,n,epsilon,magnitude,seed,err_l2,err_sigma,naive_err"


@dataclass(frozen=True)
class BenchRow:
    estimator: str
    d: int
    n: int
    epsilon: float
    magnitude: float
    seed: int
    err_l2: float
    err_sigma: float
    naive_err: float

    def to_csv(self):
        return (f"{self.estimator},{self.d},{self.n},{self.epsilon!r},{self.magnitude!r},"
                f"{self.seed},{self.err_l2!r},{self.err_sigma!r},{self.naive_err!r}")


def _sphere_covariates(rng, n, d):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.uniform(0.5, 1.0, size=(n, 1))


def plant_scram_problem(d, n, epsilon, magnitude, seed, gamma=1.0, R0=2.0):
    """Clean covariates, corrupted targets shifted by ``magnitude * gamma``.

    The adversary inspects the sample and corrupts the points whose
    covariates align best with a fixed direction, so the shifts push the
    naive fit coherently instead of cancelling out.
    """
    rng = np.random.default_rng(seed)
    X = _sphere_covariates(rng, n, d)
    omega_star = rng.standard_normal(d)
    omega_star *= R0 / np.linalg.norm(omega_star)
    y = X @ omega_star + gamma * rng.standard_normal(n)
    n_bad = int(np.floor(epsilon * n))
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    bad = np.argsort(X @ direction)[::-1][:n_bad]
    y = y.copy()
    y[bad] += magnitude * gamma
    return X, y, omega_star, bad


def bench_scram(d, n, epsilon, magnitude, seed, gamma=1.0) -> BenchRow:
    X, y, omega_star, _ = plant_scram_problem(d, n, epsilon, magnitude, seed, gamma=gamma)
    Sigma = X.T @ X / n
    fit = scram_fit(RegressionProblem(X=X, y=y, epsilon=epsilon, gamma=gamma, R=2 * 2.0))
    naive = ridge_fit(X, y).omega
    def sig_norm(w):
        return float(np.sqrt((w - omega_star) @ Sigma @ (w - omega_star)))
    return BenchRow(estimator="scram", d=d, n=n, epsilon=epsilon, magnitude=magnitude,
                    seed=seed, err_l2=float(np.linalg.norm(fit.omega - omega_star)),
                    err_sigma=sig_norm(fit.omega), naive_err=sig_norm(naive))


def plant_rls_problem(d, n, epsilon, magnitude, seed, sigma=1.0, R0=2.0):
    """One-hot covariates (kappa = 1/d); corrupted points get a fresh random
    one-hot covariate and a one-sided half-normal target shift with scale
    ``magnitude * sigma`` (spread out so trimming degrades smoothly)."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, d, size=n)
    X = np.eye(d)[idx]
    omega_star = rng.standard_normal(d)
    omega_star *= R0 / np.linalg.norm(omega_star)
    y = X @ omega_star + sigma * rng.standard_normal(n)
    n_bad = int(np.floor(epsilon * n))
    bad = rng.choice(n, size=n_bad, replace=False)
    X, y = X.copy(), y.copy()
    new_idx = rng.integers(0, d, size=n_bad)
    X[bad] = np.eye(d)[new_idx]
    y[bad] = X[bad] @ omega_star + np.abs(rng.standard_normal(n_bad)) * magnitude * sigma
    return X, y, omega_star, bad


def bench_rls(d, n, epsilon, magnitude, seed, sigma=1.0) -> BenchRow:
    X, y, omega_star, _ = plant_rls_problem(d, n, epsilon, magnitude, seed, sigma=sigma)
    fit = rls_fit(RegressionProblem(X=X, y=y, epsilon=epsilon, gamma=sigma, R=2 * 2.0),
                  kappa=1.0 / d)
    naive = ridge_fit(X, y).omega
    return BenchRow(estimator="rls", d=d, n=n, epsilon=epsilon, magnitude=magnitude,
                    seed=seed, err_l2=float(np.linalg.norm(fit.omega - omega_star)),
                    err_sigma=float("nan"),
                    naive_err=float(np.linalg.norm(naive - omega_star)))


def plant_filter_problem(d, n, epsilon, magnitude, seed, sigma=1.0):
    """Gaussian sample with an epsilon-mass outlier cluster along e1."""
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal(d)
    X = mu + sigma * rng.standard_normal((n, d))
    n_bad = int(np.floor(epsilon * n))
    bad = rng.choice(n, size=n_bad, replace=False)
    X = X.copy()
    X[bad] = mu
    X[bad, 0] += magnitude * sigma
    return X, mu, bad


def bench_filter(d, n, epsilon, magnitude, seed, sigma=1.0) -> BenchRow:
    X, mu, _ = plant_filter_problem(d, n, epsilon, magnitude, seed, sigma=sigma)
    fit = filter_mean(X, epsilon, sigma ** 2, seed=seed)
    naive = X.mean(axis=0)
    return BenchRow(estimator="filter", d=d, n=n, epsilon=epsilon, magnitude=magnitude,
                    seed=seed, err_l2=float(np.linalg.norm(fit.mu - mu)),
                    err_sigma=float("nan"), naive_err=float(np.linalg.norm(naive - mu)))


BENCHES = {"scram": bench_scram, "rls": bench_rls, "filter": bench_filter}


def run_bench(estimators, d, n, epsilons, magnitudes, seeds, **kwargs):
    rows = []
    for name in estimators:
        fn = BENCHES[name]
        for eps in epsilons:
            for mag in magnitudes:
                for seed in seeds:
                    rows.append(fn(d, n, eps, mag, seed, **kwargs))
    return rows


def write_bench_csv(rows, path):
    with open(path, "w") as fh:
        fh.write(BENCH_CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv() + "\n")
