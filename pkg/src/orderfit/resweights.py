"""Residual moments and weights for probability-plot regression.

For a sample of size n the transformed order statistic ``g(F(x_(r)))`` has
the law of ``g(Z)`` with ``Z ~ Beta(r, n - r + 1)``, independent of the
distribution parameters.  ``g`` is the logit for the log-logistic and
logistic families and ``log(-log(1 - z))`` for the Weibull family.  This
module provides the exact means and variances of those quantities, the
large-sample approximations, and a Monte-Carlo estimate of the full
covariance matrix.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import mpmath
import numpy as np

from .params import DistributionKind, PlottingScheme
from .sampling import make_rng, open_uniform
from .specfun import EULER_GAMMA, PI_SQ_OVER_6, digamma, log_beta, trigamma

__all__ = [
    "CovarianceEstimate",
    "MomentMethod",
    "NumericalInstabilityError",
    "RankError",
    "ResidualMomentTable",
    "adaptive_gauss_legendre",
    "asymptotic_residual_cov",
    "asymptotic_residual_var",
    "loglogistic_residual_mean",
    "loglogistic_residual_var",
    "mc_covariance",
    "moment_table",
    "plotting_position",
    "read_table_csv",
    "weibull_residual_mean",
    "weibull_residual_second_moment",
    "weibull_residual_var",
    "write_table_csv",
]

# Above this sample size the Weibull moments come from quadrature.
BINOMIAL_MAX_N = 60
DEFAULT_MC_M = 5000


class RankError(ValueError):
    pass


class NumericalInstabilityError(ArithmeticError):
    pass


class MomentMethod(str, Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"
    MONTECARLO = "montecarlo"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        if key == "mc":
            key = "montecarlo"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown moment method {value!r}") from None


def _rank(r, n):
    r, n = int(r), int(n)
    if n < 1 or not 1 <= r <= n:
        raise RankError(f"rank r={r} outside 1..n for n={n}")
    return r, n


# --------------------------------------------------------------------------
# log-logistic / logistic

def loglogistic_residual_mean(r: int, n: int) -> float:
    """psi(r) - psi(n - r + 1): mean of logit(Z), Z ~ Beta(r, n - r + 1)."""
    r, n = _rank(r, n)
    if 2 * r == n + 1:
        return 0.0
    if 2 * r > n + 1:
        return -loglogistic_residual_mean(n + 1 - r, n)
    return digamma(r) - digamma(n - r + 1)


def loglogistic_residual_var(r: int, n: int) -> float:
    """psi'(r) + psi'(n - r + 1): variance of logit(Z)."""
    r, n = _rank(r, n)
    lo, hi = sorted((r, n - r + 1))
    return trigamma(lo) + trigamma(hi)


# --------------------------------------------------------------------------
# Weibull

def _weibull_binomial(r, n):
    """First and second raw moments of log(-log(1 - Z)) by the alternating sum.

    The terms alternate in sign and grow like C(n-1, r-1) C(r-1, j), so the
    sum is evaluated in multiprecision with the working precision sized from
    the magnitude of the terms, then recomputed with extra digits as a check.
    """
    lead = n * math.comb(n - 1, r - 1)  # 1 / B(r, n - r + 1)
    size = 0.0
    for j in range(r):
        k = n - r + 1 + j
        size += lead * math.comb(r - 1, j) * (PI_SQ_OVER_6 + (EULER_GAMMA + math.log(k)) ** 2) / k
    digits = 20 + max(0, math.ceil(math.log10(size)))

    def evaluate(dps):
        with mpmath.workdps(dps):
            c = +mpmath.euler
            z2 = mpmath.pi**2 / 6
            m1 = mpmath.mpf(0)
            m2 = mpmath.mpf(0)
            for j in range(r):
                k = n - r + 1 + j
                coef = mpmath.mpf(lead * math.comb(r - 1, j)) / k
                if j % 2:
                    coef = -coef
                g = c + mpmath.log(k)
                m1 -= coef * g
                m2 += coef * (z2 + g * g)
            return m1, m2, m2 - m1 * m1

    first = evaluate(digits)
    check = evaluate(digits + 15)
    for a, b in zip(first, check):
        if abs(a - b) > 1e-13 * max(1, abs(b)):
            raise NumericalInstabilityError(
                f"Weibull moment sum unstable at r={r}, n={n}: {float(a)!r} vs {float(b)!r}"
            )
    return tuple(float(v) for v in check)


def _gl_rule(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


_GL_LO = _gl_rule(15)
_GL_HI = _gl_rule(31)


def adaptive_gauss_legendre(f, a: float, b: float, tol: float = 1e-13, max_depth: int = 30,
                            noise: float = 1e-12, points=()):
    """Integrate a vectorised ``f`` over [a, b] by adaptive bisection.

    Each panel is accepted when the 15- and 31-point Gauss-Legendre rules
    agree to within the panel's share of ``tol``.  ``f`` may return an array
    of shape (k, len(x)) to integrate k functions on a common panel set, in
    which case an array of k integrals is returned.  ``noise`` is the
    relative accuracy of ``f`` itself; panels are not split below it.
    Interior ``points`` seed the initial panels, which matters when the
    integrand is concentrated on a small part of [a, b].
    """

    def rule(lo, hi, nodes):
        x, w = nodes
        half = 0.5 * (hi - lo)
        fx = np.asarray(f(0.5 * (hi + lo) + half * x))
        return half * (fx @ w), half * (np.abs(fx) @ w)

    edges = [a] + sorted(p for p in points if a < p < b) + [b]
    total = []
    stack = [(lo, hi, 0) for lo, hi in zip(edges, edges[1:])]
    while stack:
        lo, hi, depth = stack.pop()
        coarse, _ = rule(lo, hi, _GL_LO)
        fine, size = rule(lo, hi, _GL_HI)
        share = np.maximum(tol * (hi - lo) / (b - a), noise * size)
        if np.all(np.abs(fine - coarse) <= share) or depth >= max_depth:
            total.append(fine)
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid, depth + 1))
            stack.append((mid, hi, depth + 1))
    parts = np.array(total)
    if parts.ndim == 1:
        return math.fsum(parts)
    return np.array([math.fsum(col) for col in parts.T])


def _weibull_quadrature(r, n):
    """Moments by integrating over w = log(-log(1 - z)).

    In that variable the density of the r-th order statistic is
    exp(w) (1 - exp(-e^w))^(r-1) exp(-(n-r+1) e^w) / B(r, n-r+1), which
    decays like exp(r w) on the left and doubly exponentially on the right.
    """
    lb = log_beta(r, n - r + 1)

    def density(w):
        ew = np.exp(w)
        logd = w - (n - r + 1) * ew - lb
        if r > 1:
            logd = logd + (r - 1) * np.log(-np.expm1(-ew))
        return np.exp(logd)

    # the mode sits near log(-log(1 - r/(n+1))); integrate well past both tails
    p = r / (n + 1.0)
    centre = math.log(-math.log1p(-p))
    lo = centre - 60.0 / r - 10.0
    hi = max(centre, 0.0) + 6.0
    def moments(w):
        d = density(w)
        return np.stack([d, w * d, w * w * d])

    # the order statistic has spread ~sqrt(p / (n (1-p))) / |log(1-p)| around the mode
    spread = math.sqrt(p / (n * (1.0 - p))) / -math.log1p(-p)
    seeds = centre + spread * np.arange(-16, 17, 2)
    m0, m1, m2 = (float(v) for v in adaptive_gauss_legendre(moments, lo, hi, points=seeds))
    if abs(m0 - 1.0) > 1e-10:
        raise NumericalInstabilityError(f"quadrature mass {m0!r} != 1 at r={r}, n={n}")
    return m1, m2, m2 - m1 * m1


@lru_cache(maxsize=None)
def _weibull_moments(r, n, method):
    if r == 1:
        g = EULER_GAMMA + math.log(n)
        return -g, PI_SQ_OVER_6 + g * g, PI_SQ_OVER_6
    if method == "auto":
        method = "binomial" if n <= BINOMIAL_MAX_N else "quadrature"
    if method == "binomial":
        return _weibull_binomial(r, n)
    if method == "quadrature":
        return _weibull_quadrature(r, n)
    raise ValueError(f"unknown Weibull moment method {method!r}")


def weibull_residual_mean(r: int, n: int, method: str = "auto") -> float:
    """E[log(-log(1 - Z))] for Z ~ Beta(r, n - r + 1).

    ``method`` is ``"binomial"`` (closed-form alternating sum),
    ``"quadrature"`` or ``"auto"`` (binomial up to n = 60).
    """
    r, n = _rank(r, n)
    return _weibull_moments(r, n, method)[0]


def weibull_residual_second_moment(r: int, n: int, method: str = "auto") -> float:
    r, n = _rank(r, n)
    return _weibull_moments(r, n, method)[1]


def weibull_residual_var(r: int, n: int, method: str = "auto") -> float:
    r, n = _rank(r, n)
    v = _weibull_moments(r, n, method)[2]
    if not v > 0:
        raise NumericalInstabilityError(f"non-positive Weibull residual variance at r={r}, n={n}")
    return v


# --------------------------------------------------------------------------
# plotting positions and large-sample approximations

def plotting_position(r: int, n: int, scheme=PlottingScheme.STANDARD) -> float:
    r, n = _rank(r, n)
    if PlottingScheme.parse(scheme) is PlottingScheme.BERNARD:
        return (r - 0.3) / (n + 0.4)
    return r / (n + 1.0)


def _link_slope(p, dist):
    """Derivative of the linearising transform at probability p."""
    if dist is DistributionKind.WEIBULL:
        return -1.0 / ((1.0 - p) * math.log1p(-p))
    return 1.0 / (p * (1.0 - p))


def _link(p, dist):
    if dist is DistributionKind.WEIBULL:
        return math.log(-math.log1p(-p))
    lg = math.log(p / (1.0 - p))
    return -lg if dist is DistributionKind.LOGISTIC else lg


def asymptotic_residual_var(r: int, n: int, scheme=PlottingScheme.STANDARD,
                            dist=DistributionKind.LOGLOGISTIC) -> float:
    """Delta-method variance p(1-p) g'(p)^2 / n at the plotting position.

    For the logit link this is 1 / (n p (1 - p)).
    """
    dist = DistributionKind.parse(dist)
    p = plotting_position(r, n, scheme)
    if dist is DistributionKind.WEIBULL:
        return p * (1.0 - p) * _link_slope(p, dist) ** 2 / n
    return 1.0 / (n * p * (1.0 - p))


def asymptotic_residual_cov(r: int, s: int, n: int, scheme=PlottingScheme.STANDARD,
                            dist=DistributionKind.LOGLOGISTIC) -> float:
    """Delta-method covariance for ranks r <= s; 1 / (n p_s (1 - p_r)) for the logit link."""
    r, n = _rank(r, n)
    s, _ = _rank(s, n)
    if r > s:
        raise RankError(f"asymptotic_residual_cov needs r <= s, got r={r}, s={s}")
    dist = DistributionKind.parse(dist)
    pr = plotting_position(r, n, scheme)
    ps = plotting_position(s, n, scheme)
    if dist is DistributionKind.WEIBULL:
        return pr * (1.0 - ps) * _link_slope(pr, dist) * _link_slope(ps, dist) / n
    return 1.0 / (n * ps * (1.0 - pr))


# --------------------------------------------------------------------------
# Monte-Carlo covariance

@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    dist: DistributionKind
    n: int
    m: int
    matrix: np.ndarray
    seed: int

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def log_det(self) -> float:
        """Natural log of det(matrix) through a Cholesky factor."""
        try:
            c = np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError:
            sign, ld = np.linalg.slogdet(self.matrix)
            return ld if sign > 0 else -math.inf
        return 2.0 * float(np.sum(np.log(np.diag(c))))

    def det(self) -> float:
        return math.exp(self.log_det())

    def condition_number(self) -> float:
        ev = self.eigenvalues()
        return float(ev[-1] / ev[0]) if ev[0] > 0 else math.inf


def _transform(u, dist):
    if dist is DistributionKind.WEIBULL:
        return np.log(-np.log1p(-u))
    return np.log(u / (1.0 - u))


def mc_covariance(dist, n: int, m: int, seed: int, chunk: int = 20000) -> CovarianceEstimate:
    """Sample covariance of m sorted, transformed uniform samples of size n."""
    dist = DistributionKind.parse(dist)
    n, m = int(n), int(m)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if m < 100:
        raise ValueError(f"m must be >= 100, got {m}")
    rng = make_rng(seed)
    count = 0
    mean = np.zeros(n)
    scatter = np.zeros((n, n))
    done = 0
    while done < m:
        k = min(chunk, m - done)
        z = _transform(np.sort(open_uniform(rng, (k, n)), axis=1), dist)
        cm = z.mean(axis=0)
        d = z - cm
        cs = d.T @ d
        # Chan et al. pairwise merge of (count, mean, scatter)
        delta = cm - mean
        tot = count + k
        scatter += cs + np.outer(delta, delta) * (count * k / tot)
        mean += delta * (k / tot)
        count = tot
        done += k
    cov = scatter / (m - 1)
    cov = 0.5 * (cov + cov.T)
    cov.setflags(write=False)
    return CovarianceEstimate(dist=dist, n=n, m=m, matrix=cov, seed=int(seed))


# --------------------------------------------------------------------------
# tables

@dataclass(frozen=True, eq=False)
class ResidualMomentTable:
    dist: DistributionKind
    n: int
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    method: MomentMethod

    def __post_init__(self):
        for name in ("means", "variances", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.n,):
                raise ValueError(f"{name} must have length n={self.n}, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.all(self.variances > 0):
            raise ValueError("residual variances must be strictly positive")

    def same_as(self, other: "ResidualMomentTable") -> bool:
        return (
            self.dist is other.dist
            and self.n == other.n
            and self.method is other.method
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
            and np.array_equal(self.weights, other.weights)
        )


def _exact_columns(dist, n):
    if dist is DistributionKind.WEIBULL:
        means = [weibull_residual_mean(r, n) for r in range(1, n + 1)]
        variances = [weibull_residual_var(r, n) for r in range(1, n + 1)]
    else:
        means = [loglogistic_residual_mean(r, n) for r in range(1, n + 1)]
        variances = [loglogistic_residual_var(r, n) for r in range(1, n + 1)]
        if dist is DistributionKind.LOGISTIC:
            # the logistic response is log((1-F)/F), the negated logit
            means = [-v for v in means]
    return np.array(means), np.array(variances)


@lru_cache(maxsize=256)
def _cached_table(dist, n, method, scheme, mc_m, seed):
    if method is MomentMethod.ASYMPTOTIC:
        ps = [plotting_position(r, n, scheme) for r in range(1, n + 1)]
        means = np.array([_link(p, dist) for p in ps])
        variances = np.array([asymptotic_residual_var(r, n, scheme, dist) for r in range(1, n + 1)])
    else:
        means, variances = _exact_columns(dist, n)
        if method is MomentMethod.MONTECARLO:
            variances = np.diag(mc_covariance(dist, n, mc_m, seed).matrix).copy()
    return ResidualMomentTable(dist=dist, n=n, means=means, variances=variances,
                               weights=1.0 / variances, method=method)


def moment_table(dist, n: int, method=MomentMethod.EXACT, scheme=PlottingScheme.STANDARD,
                 mc_m: int | None = None, seed: int | None = None) -> ResidualMomentTable:
    """Per-rank residual means, variances and weights (reciprocal variances).

    The plotting ``scheme`` only affects the asymptotic method.  The
    Monte-Carlo method keeps the exact means and replaces the variances by
    the diagonal of :func:`mc_covariance`, and needs both ``mc_m`` and
    ``seed``.
    """
    dist = DistributionKind.parse(dist)
    method = MomentMethod.parse(method)
    scheme = PlottingScheme.parse(scheme)
    n = int(n)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if method is MomentMethod.MONTECARLO:
        if mc_m is None or seed is None:
            raise ValueError("the Monte-Carlo method needs both mc_m and seed")
        mc_m, seed = int(mc_m), int(seed)
    elif mc_m is not None:
        raise ValueError("mc_m is only valid with the Monte-Carlo method")
    else:
        seed = None
    if method is not MomentMethod.ASYMPTOTIC:
        scheme = PlottingScheme.STANDARD
    return _cached_table(dist, n, method, scheme, mc_m, seed)


_TABLE_HEADER = ["rank", "mean", "variance", "weight"]


def write_table_csv(table: ResidualMomentTable, stream=None) -> str:
    """Write ``rank,mean,variance,weight`` rows with round-trip float formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_TABLE_HEADER)
    for r in range(table.n):
        w.writerow([r + 1, repr(float(table.means[r])), repr(float(table.variances[r])),
                    repr(float(table.weights[r]))])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_table_csv(text: str, dist=DistributionKind.LOGLOGISTIC,
                   method=MomentMethod.EXACT) -> ResidualMomentTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != _TABLE_HEADER:
        raise ValueError(f"weight table must start with header {','.join(_TABLE_HEADER)}")
    body = [row for row in rows[1:] if row]
    means, variances, weights = [], [], []
    for i, row in enumerate(body, start=1):
        if len(row) != 4:
            raise ValueError(f"row {i + 1}: expected 4 columns, got {len(row)}")
        try:
            rank = int(row[0])
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise ValueError(f"row {i + 1}: non-numeric entry {row!r}") from None
        if rank != i:
            raise ValueError(f"row {i + 1}: expected rank {i}, got {rank}")
        means.append(vals[0])
        variances.append(vals[1])
        weights.append(vals[2])
    return ResidualMomentTable(dist=DistributionKind.parse(dist), n=len(body), means=means,
                               variances=variances, weights=weights,
                               method=MomentMethod.parse(method))
