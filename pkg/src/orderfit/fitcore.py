"""Parameter estimation: probability-plot regression and maximum likelihood.

The regression puts the expected transformed order statistics on the left,

    mean_r = theta1 + theta2 * t(x_(r)) + u_r,

with ``t = log`` for the log-logistic and Weibull families (theta1 =
-beta log alpha, theta2 = beta) and ``t = identity`` for the logistic
family (theta1 = mu / sigma, theta2 = -1 / sigma).  The data sit in the
design matrix, so textbook regression standard errors do not apply;
:func:`bootstrap_se` is the supported way to get them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .params import DistributionKind, DistributionParams, LocScaleParams
from .resweights import (
    CovarianceEstimate,
    MomentMethod,
    ResidualMomentTable,
    mc_covariance,
    moment_table,
)
from .sampling import make_rng

ML_MAX_ITER = 100
ML_MAX_HALVINGS = 30
ML_SCORE_TOL = 1e-9
GLS_COND_WARN = 1e12
GLS_LOGDET_WARN = math.log(1e-20)


class FitError(ValueError):
    """Base class for estimation failures."""


class DegenerateDesignError(FitError):
    pass


class NonPositiveDataError(FitError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"observation {index + 1} is {value!r}; this family needs data > 0")


class NonPositiveSlopeError(FitError):
    pass


class SingularCovarianceError(FitError):
    pass


class ConvergenceError(FitError):
    pass


class BootstrapError(FitError):
    pass


class FitMethod(str, Enum):
    WLS_EXACT = "wls-exact"
    WLS_ASYMPTOTIC = "wls-asymptotic"
    WLS_MC = "wls-mc"
    GLS_FULL = "gls-full"
    ML = "ml"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown fit method {value!r}") from None


@dataclass
class Diagnostics:
    condition_number: float = math.nan
    iterations: int = 0
    converged: bool = True
    log_likelihood: float | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class FitResult:
    dist: DistributionKind
    method: FitMethod
    params: DistributionParams | LocScaleParams
    theta: tuple[float, float]
    diagnostics: Diagnostics

    @property
    def alpha(self) -> float:
        """Scale for the log families, location for the logistic family."""
        p = self.params
        return p.mu if isinstance(p, LocScaleParams) else p.alpha

    @property
    def beta(self) -> float:
        """Shape for the log families, scale for the logistic family."""
        p = self.params
        return p.sigma if isinstance(p, LocScaleParams) else p.beta

    def to_record(self) -> dict:
        d = self.diagnostics
        return {
            "dist": self.dist.value,
            "method": self.method.value,
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "theta1": float(self.theta[0]),
            "theta2": float(self.theta[1]),
            "converged": bool(d.converged),
            "iterations": int(d.iterations),
            "condition_number": _json_float(d.condition_number),
            "log_likelihood": None if d.log_likelihood is None else float(d.log_likelihood),
            "warnings": list(d.warnings),
        }


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


# --------------------------------------------------------------------------
# parameter maps

def params_from_theta(dist, theta):
    dist = DistributionKind.parse(dist)
    t1, t2 = float(theta[0]), float(theta[1])
    if dist is DistributionKind.LOGISTIC:
        if not t2 < 0:
            raise NonPositiveSlopeError(f"regression slope {t2!r} implies sigma <= 0")
        sigma = -1.0 / t2
        return LocScaleParams(mu=t1 * sigma, sigma=sigma)
    if not t2 > 0:
        raise NonPositiveSlopeError(f"regression slope {t2!r} implies beta <= 0")
    return DistributionParams(alpha=math.exp(-t1 / t2), beta=t2)


def theta_from_params(params):
    if isinstance(params, LocScaleParams):
        return (params.mu / params.sigma, -1.0 / params.sigma)
    return (-params.beta * math.log(params.alpha), params.beta)


def _prepare(dist, data):
    """Sorted regressor values t(x_(r)); validates positivity and spread."""
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateDesignError(f"need at least 2 observations, got {x.size}")
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise FitError(f"observation {bad[0] + 1} is not finite: {x[bad[0]]!r}")
    if dist.log_family:
        bad = np.flatnonzero(x <= 0)
        if bad.size:
            raise NonPositiveDataError(int(bad[0]), float(x[bad[0]]))
        t = np.log(np.sort(x))
    else:
        t = np.sort(x)
    if t[0] == t[-1]:
        raise DegenerateDesignError("all observations are equal")
    return t


# --------------------------------------------------------------------------
# regression fits

def _solve_weighted(t, y, root_w):
    """Least squares on sqrt(W) X theta = sqrt(W) y by QR."""
    X = np.column_stack([np.ones_like(t), t])
    A = root_w @ X if root_w.ndim == 2 else X * root_w[:, None]
    b = root_w @ y if root_w.ndim == 2 else y * root_w
    q, r = np.linalg.qr(A)
    theta = np.linalg.solve(r, q.T @ b)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return theta, cond


_TABLE_METHOD = {
    MomentMethod.EXACT: FitMethod.WLS_EXACT,
    MomentMethod.ASYMPTOTIC: FitMethod.WLS_ASYMPTOTIC,
    MomentMethod.MONTECARLO: FitMethod.WLS_MC,
}


def fit_wls(dist, data, table: ResidualMomentTable | None = None) -> FitResult:
    """Weighted probability-plot regression with diagonal weights from ``table``.

    Without a table the exact weights for ``len(data)`` are used.
    """
    dist = DistributionKind.parse(dist)
    t = _prepare(dist, data)
    n = t.size
    if table is None:
        table = moment_table(dist, n)
    if table.n != n:
        raise FitError(f"weight table is for n={table.n}, data has n={n}")
    theta, cond = _solve_weighted(t, table.means, np.sqrt(table.weights))
    return FitResult(dist=dist, method=_TABLE_METHOD[table.method],
                     params=params_from_theta(dist, theta),
                     theta=(float(theta[0]), float(theta[1])),
                     diagnostics=Diagnostics(condition_number=cond))


def fit_gls_full(dist, data, cov: CovarianceEstimate | np.ndarray, means=None) -> FitResult:
    """Generalised least squares with W = inverse of the full residual covariance.

    ``cov`` is a :class:`CovarianceEstimate` or a plain matrix; ``means``
    defaults to the exact residual means.  Near-singular matrices produce
    warnings in the diagnostics; a matrix that fails Cholesky factorisation
    is rejected.
    """
    dist = DistributionKind.parse(dist)
    t = _prepare(dist, data)
    n = t.size
    matrix = cov.matrix if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    if matrix.shape != (n, n):
        raise FitError(f"covariance is {matrix.shape}, data has n={n}")
    if means is None:
        means = moment_table(dist, n).means
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            "residual covariance is numerically singular; use diagonal weights (wls-exact)"
        ) from None
    warnings = []
    ev = np.linalg.eigvalsh(matrix)
    cov_cond = float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    if cov_cond > GLS_COND_WARN:
        warnings.append(f"covariance condition number {cov_cond:.3g} exceeds {GLS_COND_WARN:.0e}")
    if logdet < GLS_LOGDET_WARN:
        warnings.append(
            f"covariance determinant {math.exp(logdet):.3g} (log {logdet:.4g}) is near zero;"
            " estimates may be unstable"
        )
    # Sigma = L L', so W = L'^-1 L^-1 and sqrt(W) X = L^-1 X
    root_w = np.linalg.inv(chol)
    theta, cond = _solve_weighted(t, np.asarray(means, dtype=float), root_w)
    return FitResult(dist=dist, method=FitMethod.GLS_FULL,
                     params=params_from_theta(dist, theta),
                     theta=(float(theta[0]), float(theta[1])),
                     diagnostics=Diagnostics(condition_number=cond, warnings=warnings))


# --------------------------------------------------------------------------
# maximum likelihood

def _loglik_parts(dist, y, a, b):
    """Log-likelihood, score and Hessian in (a, b).

    With ``y = t(x)`` and ``z = b (y - a)`` every family has the form
    n log b + sum g(z) + const, where g is the standardised log-density
    of y: logistic z - 2 log(1 + e^z), Gumbel-minimum z - e^z.
    """
    n = y.size
    d = y - a
    z = b * d
    if dist is DistributionKind.WEIBULL:
        ez = np.exp(z)
        g = z - ez
        g1 = 1.0 - ez
        g2 = -ez
    else:
        g = z - 2.0 * np.logaddexp(0.0, z)
        s = 0.5 * (1.0 + np.tanh(0.5 * z))
        g1 = 1.0 - 2.0 * s
        g2 = -2.0 * s * (1.0 - s)
    ll = n * math.log(b) + math.fsum(g)
    if dist.log_family:
        ll -= math.fsum(y)
    score = np.array([-b * g1.sum(), n / b + float(np.dot(g1, d))])
    h_aa = b * b * g2.sum()
    h_ab = -g1.sum() - b * float(np.dot(g2, d))
    h_bb = -n / b**2 + float(np.dot(g2, d * d))
    hess = np.array([[h_aa, h_ab], [h_ab, h_bb]])
    return ll, score, hess


def _scaled_score(score, b, n):
    # per-observation score, each component multiplied by its parameter's natural unit
    return max(abs(score[0]) / b, abs(score[1]) * b) / n


def fit_ml(dist, data, init: FitResult | None = None) -> FitResult:
    """Maximum likelihood by damped Newton iteration with step halving.

    Internally the location ``a`` (log alpha or mu) and rate ``b`` (beta or
    1/sigma) are iterated; the starting point is ``init`` or the exact-weight
    regression fit.  Convergence means the per-observation score, scaled to
    parameter units, is below 1e-9.
    """
    dist = DistributionKind.parse(dist)
    t = _prepare(dist, data)
    n = t.size
    if n < 3:
        raise FitError(f"maximum likelihood needs at least 3 observations, got {n}")
    if init is None:
        try:
            init = fit_wls(dist, data)
        except FitError:
            init = None
    if init is not None:
        a, b = _ab_from_params(init.params)
    else:
        sd = float(np.std(t))
        a, b = float(np.mean(t)), 1.0 / sd

    ll, score, hess = _loglik_parts(dist, t, a, b)
    iterations = 0
    for iterations in range(1, ML_MAX_ITER + 1):
        if _scaled_score(score, b, n) < 1e-3 * ML_SCORE_TOL:
            break
        # Newton direction when the Hessian is negative definite, else a scaled ascent step
        try:
            np.linalg.cholesky(-hess)
            step = -np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            step = score / np.maximum(np.abs(np.diag(hess)), 1e-12)
        lam = 1.0
        for _ in range(ML_MAX_HALVINGS + 1):
            na, nb = a + lam * step[0], b + lam * step[1]
            if nb > 0 and math.isfinite(na):
                nll, nscore, nhess = _loglik_parts(dist, t, na, nb)
                if math.isfinite(nll) and nll >= ll - 1e-12 * abs(ll):
                    break
            lam *= 0.5
        else:
            break
        moved = max(abs(na - a) * b, abs(nb - b) / b)
        a, b, ll, score, hess = na, nb, nll, nscore, nhess
        if _scaled_score(score, b, n) < ML_SCORE_TOL and moved < 1e-12:
            break
    if not _scaled_score(score, b, n) < ML_SCORE_TOL:
        raise ConvergenceError(
            f"maximum likelihood did not converge in {iterations} iterations"
            f" (scaled score {_scaled_score(score, b, n):.3g})"
        )
    try:
        np.linalg.cholesky(-hess)
    except np.linalg.LinAlgError:
        raise ConvergenceError("Hessian is not negative definite at the reported optimum") from None
    params = _params_from_ab(dist, a, b)
    ev = np.linalg.eigvalsh(-hess)
    return FitResult(dist=dist, method=FitMethod.ML, params=params,
                     theta=theta_from_params(params),
                     diagnostics=Diagnostics(condition_number=float(ev[-1] / ev[0]),
                                             iterations=iterations, converged=True,
                                             log_likelihood=ll))


def ml_score(dist, data, params) -> np.ndarray:
    """Score of the log-likelihood in (location, rate) coordinates."""
    dist = DistributionKind.parse(dist)
    t = _prepare(dist, data)
    a, b = _ab_from_params(params)
    return _loglik_parts(dist, t, a, b)[1]


def log_likelihood(dist, data, params) -> float:
    dist = DistributionKind.parse(dist)
    t = _prepare(dist, data)
    a, b = _ab_from_params(params)
    return _loglik_parts(dist, t, a, b)[0]


def _ab_from_params(params):
    if isinstance(params, LocScaleParams):
        return params.mu, 1.0 / params.sigma
    return math.log(params.alpha), params.beta


def _params_from_ab(dist, a, b):
    if dist is DistributionKind.LOGISTIC:
        return LocScaleParams(mu=a, sigma=1.0 / b)
    return DistributionParams(alpha=math.exp(a), beta=b)


# --------------------------------------------------------------------------
# asymptotics and efficiency

@dataclass(frozen=True)
class MlAsymptotics:
    dist: DistributionKind
    bias_alpha: float | None
    bias_beta: float | None
    var_alpha: float
    var_beta: float


def ml_asymptotics(dist, params: DistributionParams, n: int) -> MlAsymptotics:
    """Large-sample bias and variance of the ML estimators.

    Log-logistic: Shoukri, Mian and Tracy (1988).  Weibull: Cramer-Rao bounds
    of Cohen (1965) and White (1963); no bias constants are available and
    the biases are ``None``.
    """
    dist = DistributionKind.parse(dist)
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    a, b = params.alpha, params.beta
    if dist is DistributionKind.LOGLOGISTIC:
        return MlAsymptotics(dist=dist, bias_alpha=1.5 * a / (n * b * b), bias_beta=1.2764 * b / n,
                             var_alpha=3.0 * a * a / (n * b * b), var_beta=0.6993 * b * b / n)
    if dist is DistributionKind.WEIBULL:
        return MlAsymptotics(dist=dist, bias_alpha=None, bias_beta=None,
                             var_alpha=1.109 * (a / b) ** 2 / n, var_beta=0.608 * b * b / n)
    raise ValueError("ML asymptotics are not available for the logistic family")


def efficiency(var_ml: float, var_other: float) -> float:
    """Variance of the ML estimator divided by that of a competitor."""
    if not (var_ml > 0 and var_other > 0):
        raise ValueError("variances must be positive")
    return var_ml / var_other


# --------------------------------------------------------------------------
# dispatch and bootstrap

def fit(dist, data, method=FitMethod.WLS_EXACT, *, scheme="standard", mc_m: int = 5000,
        seed: int | None = None, table: ResidualMomentTable | None = None) -> FitResult:
    """Fit by name. Monte-Carlo based methods need ``seed``."""
    dist = DistributionKind.parse(dist)
    method = FitMethod.parse(method)
    if table is not None and method in (FitMethod.WLS_EXACT, FitMethod.WLS_ASYMPTOTIC, FitMethod.WLS_MC):
        return fit_wls(dist, data, table)
    n = np.asarray(data).size
    if method is FitMethod.WLS_EXACT:
        return fit_wls(dist, data, moment_table(dist, n))
    if method is FitMethod.WLS_ASYMPTOTIC:
        return fit_wls(dist, data, moment_table(dist, n, MomentMethod.ASYMPTOTIC, scheme))
    if method in (FitMethod.WLS_MC, FitMethod.GLS_FULL) and seed is None:
        raise ValueError(f"{method.value} needs a seed")
    if method is FitMethod.WLS_MC:
        return fit_wls(dist, data, moment_table(dist, n, MomentMethod.MONTECARLO, mc_m=mc_m, seed=seed))
    if method is FitMethod.GLS_FULL:
        return fit_gls_full(dist, data, _cached_cov(dist, n, mc_m, seed))
    return fit_ml(dist, data)


_COV_CACHE: dict = {}


def _cached_cov(dist, n, m, seed):
    key = (dist, n, m, seed)
    if key not in _COV_CACHE:
        _COV_CACHE[key] = mc_covariance(dist, n, m, seed)
    return _COV_CACHE[key]


@dataclass(frozen=True)
class BootstrapResult:
    se_alpha: float
    se_beta: float
    reps: int
    failures: int


def bootstrap_se(dist, data, method=FitMethod.WLS_EXACT, reps: int = 1000, seed: int = 0,
                 **fit_kwargs) -> BootstrapResult:
    """Nonparametric bootstrap standard errors of (alpha, beta).

    Resamples that cannot be fitted (for instance a single distinct value)
    are dropped and counted; more than 20% failures is an error.
    """
    dist = DistributionKind.parse(dist)
    reps = int(reps)
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    x = np.asarray(data, dtype=float).ravel()
    n = x.size
    if method in (FitMethod.WLS_MC, FitMethod.GLS_FULL, "wls-mc", "gls-full"):
        fit_kwargs.setdefault("seed", seed)
    rng = make_rng(seed)
    idx = rng.integers(0, n, size=(reps, n))
    alphas, betas = [], []
    failures = 0
    for row in idx:
        try:
            res = fit(dist, x[row], method, **fit_kwargs)
        except (FitError, ArithmeticError):
            failures += 1
            continue
        alphas.append(res.alpha)
        betas.append(res.beta)
    if failures > 0.2 * reps:
        raise BootstrapError(f"{failures} of {reps} bootstrap replications failed to fit")
    return BootstrapResult(se_alpha=float(np.std(alphas, ddof=1)), se_beta=float(np.std(betas, ddof=1)),
                           reps=reps, failures=failures)
