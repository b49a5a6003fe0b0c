"""Robust estimation oracles and the non-robust ridge baseline.

Three robust estimators, each tied to a different corruption model:

* :class:`ScramRegressor`: alternating minimization with soft trimming for
  regression with clean covariates and corrupted targets.
* :class:`RobustLeastSquares`: leverage filtering for regression where both
  covariates and targets may be corrupted, under a well-conditioned design.
* :func:`filter_mean`: spectral filtering for multivariate mean estimation
  with bounded covariance.

All of them require the assumed contamination level ``epsilon`` as input and
degrade to their non-robust counterparts at ``epsilon = 0``.  Estimators are
deterministic given their inputs and seed.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import CoverageTooWeak, EpsilonTooLarge, TooFewSamples
from .validation import check_regression_data

DEFAULT_RIDGE_LAMBDA = 1e-8
SCRAM_EPS_CAP = 0.499


@dataclass
class RegressionProblem:
    """A contaminated linear-regression instance handed to an oracle.

    ``R`` bounds the norm of the true regressor (estimates are projected onto
    the R-ball when set); ``gamma`` is the noise scale used by downstream
    bonus formulas; ``epsilon`` is the assumed contamination level.
    """

    X: np.ndarray
    y: np.ndarray
    epsilon: float = 0.0
    gamma: float = 1.0
    R: float = None
    delta: float = 0.05

    def __post_init__(self):
        self.X, self.y = check_regression_data(self.X, self.y)
        norms = np.linalg.norm(self.X, axis=1)
        if norms.size and norms.max() > 1 + 1e-12:
            raise ValueError(f"covariate norms must be <= 1, got max {norms.max()}")
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon must be in [0, 0.5), got {self.epsilon}")


@dataclass
class RobustFit:
    """Result of a robust fit: the estimate plus convergence diagnostics.

    ``kept`` (when set) is the boolean mask of samples that survived
    filtering; consumers that re-aggregate per group must normalize by
    surviving counts, not raw ones.
    """

    omega: np.ndarray = None
    mu: np.ndarray = None
    iterations: int = 0
    removed_count: int = 0
    residual_sigma_estimate: float = 0.0
    converged: bool = True
    stalled: bool = False
    kept: np.ndarray = None


def _ridge_solve(X, y, lam, weights=None):
    """Weighted ridge solution of (X^T W X + lam I) w = X^T W y."""
    if weights is None:
        Xw = X
        yw = y
    else:
        Xw = X * weights[:, None]
        yw = y * weights
    A = X.T @ Xw + lam * np.eye(X.shape[1])
    return np.linalg.solve(A, X.T @ yw)


def _project_ball(omega, R):
    if R is None:
        return omega
    norm = np.linalg.norm(omega)
    if norm > R:
        return omega * (R / norm)
    return omega


def _mad_sigma(residuals):
    # 1.4826 * MAD approximates the std of Gaussian residuals.
    return float(1.4826 * np.median(np.abs(residuals - np.median(residuals))))


class RidgeRegressor(BaseEstimator, RegressorMixin):
    """Plain ridge regression, optionally projected onto an R-ball.

    The non-robust baseline: this is the regularized least-squares target the
    pessimistic learners fall back to when no corruption is assumed.
    """

    def __init__(self, lam=DEFAULT_RIDGE_LAMBDA, R=None):
        self.lam = lam
        self.R = R

    def fit(self, X, y):
        X, y = check_regression_data(X, y)
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        self.coef_ = _project_ball(_ridge_solve(X, y, self.lam), self.R)
        self.n_iter_ = 1
        return self

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.coef_


class ScramRegressor(BaseEstimator, RegressorMixin):
    """Robust regression for clean covariates via soft-trimmed alternation.

    Alternates (i) weighted ridge with the solution projected toward the
    R-ball and (ii) a weight update that down-weights the ceil(eps*n) largest
    squared residuals, until the iterate stabilizes.  With ``epsilon = 0``
    this is exactly the projected ridge fit of :class:`RidgeRegressor` (same
    code path), which the learners rely on for their no-corruption reduction.
    """

    def __init__(self, epsilon=0.0, gamma=1.0, R=None, lam=DEFAULT_RIDGE_LAMBDA,
                 max_iter=200, tol=1e-8):
        self.epsilon = epsilon
        self.gamma = gamma
        self.R = R
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_regression_data(X, y)
        if self.epsilon >= SCRAM_EPS_CAP:
            raise EpsilonTooLarge(f"epsilon={self.epsilon} >= {SCRAM_EPS_CAP}")
        n = X.shape[0]
        if self.epsilon == 0.0 or n == 0:
            self.coef_ = _project_ball(_ridge_solve(X, y, self.lam), self.R)
            self.n_iter_ = 1
            self.converged_ = True
            self.weights_ = np.ones(n)
            self.sigma_ = _mad_sigma(y - X @ self.coef_) if n else 0.0
            return self

        n_trim = int(np.ceil(self.epsilon * n))
        w = np.ones(n)
        omega = _project_ball(_ridge_solve(X, y, self.lam, w), self.R)
        self.converged_ = False
        it = 0
        for it in range(1, self.max_iter + 1):
            sq = (y - X @ omega) ** 2
            # Soft trimming: residuals above the (1 - eps) order statistic
            # keep weight threshold / residual^2 < 1, the rest keep 1.
            thresh = np.partition(sq, n - n_trim - 1)[n - n_trim - 1] if n_trim < n else 0.0
            w = np.minimum(1.0, thresh / np.maximum(sq, 1e-300))
            new_omega = _project_ball(_ridge_solve(X, y, self.lam, w), self.R)
            step = np.linalg.norm(new_omega - omega)
            omega = new_omega
            if step <= self.tol * (1.0 + np.linalg.norm(omega)):
                self.converged_ = True
                break
        self.coef_ = omega
        self.n_iter_ = it
        self.weights_ = w
        self.sigma_ = _mad_sigma(y - X @ omega)
        return self

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.coef_


class RobustLeastSquares(BaseEstimator, RegressorMixin):
    """Robust regression under corrupted covariates via leverage filtering.

    Two filtering passes, each dropping the ceil(eps*n) points with the
    largest residual-leverage score under the current ridge fit, followed by
    an unregularized refit on the survivors.  Requires a well-conditioned
    design: if ``kappa`` is given and the empirical second moment has
    ``lambda_min < kappa / 2`` the contract cannot hold and fitting aborts.
    """

    def __init__(self, epsilon=0.0, kappa=None, R=None, lam=DEFAULT_RIDGE_LAMBDA,
                 n_passes=2):
        self.epsilon = epsilon
        self.kappa = kappa
        self.R = R
        self.lam = lam
        self.n_passes = n_passes

    def fit(self, X, y):
        X, y = check_regression_data(X, y)
        n, d = X.shape
        if self.kappa is not None:
            lam_min = np.linalg.eigvalsh(X.T @ X / max(n, 1)).min()
            if lam_min < self.kappa / 2:
                raise CoverageTooWeak(
                    f"empirical min eigenvalue {lam_min:.3e} < kappa/2 = {self.kappa / 2:.3e}"
                )
        keep = np.arange(n)
        n_drop = int(np.ceil(self.epsilon * n))
        if n_drop > 0:
            for _ in range(self.n_passes):
                if len(keep) <= n_drop + d:
                    break
                Xk, yk = X[keep], y[keep]
                omega = _ridge_solve(Xk, yk, self.lam)
                res_sq = (yk - Xk @ omega) ** 2
                cov_inv = np.linalg.inv(Xk.T @ Xk / len(keep) + self.lam * np.eye(d))
                leverage = np.einsum("ij,jk,ik->i", Xk, cov_inv, Xk)
                score = res_sq * (1.0 + leverage)
                keep = keep[np.argsort(score, kind="stable")[: len(keep) - n_drop]]
        Xk, yk = X[keep], y[keep]
        omega, *_ = np.linalg.lstsq(Xk, yk, rcond=None)
        self.coef_ = _project_ball(omega, self.R)
        self.inlier_idx_ = np.sort(keep)
        self.n_removed_ = n - len(keep)
        self.sigma_ = _mad_sigma(yk - Xk @ omega)
        return self

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.coef_


def filter_mean(samples, epsilon, sigma2_bound, seed=0, c_filter=10.0) -> RobustFit:
    """Robust mean of an epsilon-corrupted sample with ``Cov <= sigma2 I``.

    Spectral filtering: while the top eigenvalue of the empirical covariance
    exceeds ``sigma2 * (1 + c_filter * eps * log(1/eps))``, project the
    points on the top eigenvector and remove each one with probability
    proportional to its score, so corrupted points are removed faster than
    clean ones in expectation.  Never removes more than ``2 * eps * n``
    points; stalling past that cap returns the current mean flagged.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"samples must be 2-D, got shape {X.shape}")
    n, d = X.shape
    if n < d + 1:
        raise TooFewSamples(f"need at least d+1 = {d + 1} samples, got {n}")
    if epsilon == 0.0:
        return RobustFit(mu=X.mean(axis=0), iterations=0, removed_count=0,
                         residual_sigma_estimate=float(np.sqrt(sigma2_bound)),
                         kept=np.ones(n, dtype=bool))

    rng = np.random.default_rng(seed)
    threshold = sigma2_bound * (1.0 + c_filter * epsilon * np.log(1.0 / epsilon))
    cap = int(np.floor(2.0 * epsilon * n))
    alive = np.ones(n, dtype=bool)
    removed = 0
    iterations = 0
    stalled = False
    while True:
        iterations += 1
        pts = X[alive]
        mu = pts.mean(axis=0)
        centered = pts - mu
        cov = centered.T @ centered / len(pts)
        eigvals, eigvecs = np.linalg.eigh(cov)
        lam_max = eigvals[-1]
        if lam_max <= threshold:
            break
        if removed >= cap or len(pts) <= d + 1:
            stalled = True
            break
        scores = np.abs(centered @ eigvecs[:, -1])
        top = scores.max()
        if top <= 0:
            break
        drop_local = rng.random(len(pts)) < scores / top
        if not drop_local.any():
            drop_local[np.argmax(scores)] = True
        n_drop = int(drop_local.sum())
        if removed + n_drop > cap:
            # Trim the removal set to the highest scores within the cap.
            allowed = cap - removed
            order = np.argsort(scores[drop_local], kind="stable")[::-1][:allowed]
            idx_local = np.flatnonzero(drop_local)[order]
            drop_local = np.zeros(len(pts), dtype=bool)
            drop_local[idx_local] = True
            n_drop = allowed
        alive_idx = np.flatnonzero(alive)
        alive[alive_idx[drop_local]] = False
        removed += n_drop
    return RobustFit(mu=X[alive].mean(axis=0), iterations=iterations, removed_count=removed,
                     residual_sigma_estimate=float(np.sqrt(max(lam_max, 0.0))), stalled=stalled,
                     kept=alive)


class FilteredMean(BaseEstimator):
    """Estimator-API wrapper around :func:`filter_mean` (fit stores ``location_``)."""

    def __init__(self, epsilon=0.0, sigma2_bound=1.0, seed=0, c_filter=10.0):
        self.epsilon = epsilon
        self.sigma2_bound = sigma2_bound
        self.seed = seed
        self.c_filter = c_filter

    def fit(self, X, y=None):
        res = filter_mean(X, self.epsilon, self.sigma2_bound, seed=self.seed,
                          c_filter=self.c_filter)
        self.location_ = res.mu
        self.n_removed_ = res.removed_count
        self.n_iter_ = res.iterations
        self.stalled_ = res.stalled
        return self


def scram_fit(prob: RegressionProblem) -> RobustFit:
    """Functional surface over :class:`ScramRegressor`."""
    est = ScramRegressor(epsilon=prob.epsilon, gamma=prob.gamma, R=prob.R).fit(prob.X, prob.y)
    n_trim = int(np.ceil(prob.epsilon * len(prob.y))) if prob.epsilon > 0 else 0
    return RobustFit(omega=est.coef_, iterations=est.n_iter_, removed_count=n_trim,
                     residual_sigma_estimate=est.sigma_, converged=est.converged_)


def rls_fit(prob: RegressionProblem, kappa=None) -> RobustFit:
    """Functional surface over :class:`RobustLeastSquares`."""
    est = RobustLeastSquares(epsilon=prob.epsilon, kappa=kappa, R=prob.R).fit(prob.X, prob.y)
    return RobustFit(omega=est.coef_, iterations=est.n_passes, removed_count=est.n_removed_,
                     residual_sigma_estimate=est.sigma_)


def ridge_fit(X, y, lam=DEFAULT_RIDGE_LAMBDA) -> RobustFit:
    """Plain ridge solution (X^T X + lam I)^{-1} X^T y."""
    est = RidgeRegressor(lam=lam).fit(X, y)
    return RobustFit(omega=est.coef_, iterations=1,
                     residual_sigma_estimate=_mad_sigma(y - est.predict(X)))
