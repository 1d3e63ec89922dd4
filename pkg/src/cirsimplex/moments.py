"""Closed-form moments, generating functions, and subsampling laws.

Everything here is an executable counterpart of the kernels in
:mod:`cirsimplex.kernels`: given the minibatch law of a_hat (hypergeometric
counts under without-replacement subsampling of one-hot data), these
functions return what the chain's mean and variance *should* be, so
simulations can be checked against formulas rather than against themselves.

Conventions: a = alpha + n_success is the full-data shape, the anchor mode is
a - 1, and b_hat = (a_hat - 1)/(a - 1). "main" and "alt" name the two
control-variate kernel forms (see kernels module docstring).

A note on the reported variances: for a chain driven by random minibatch
noise, `cv_chain_moments` returns the noise-averaged conditional variance
E[Var[theta_M | noise]]. For the main form the missing Var[E[theta_M | noise]]
term is negligible at practical configurations; for the alt form it is not,
and chain-level Monte Carlo totals must add it (see tests).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, ParameterError
from .kernels import cv_step_alt, cv_step_main
from .rng import RngStream

_EXP_OVERFLOW = 700.0
_DEFAULT_MC_SEED = 9118
_ONE_TOL = 1e-12  # a_hat == 1 exclusion tolerance


# --------------------------------------------------------------------------
# fixed-noise law of the chain after M steps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSequence:
    """A frozen minibatch-noise path: per-step (a_hat, b_hat), stepsize, start."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    h: float
    theta0: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a_hat, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_hat, dtype=float))
        if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
            raise ParameterError("a_hat and b_hat must be equal-length vectors")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ParameterError("a_hat entries must be finite and > 0")
        if not np.all(np.isfinite(b)):
            raise ParameterError("b_hat entries must be finite")
        if not np.isfinite(self.h) or self.h <= 0:
            raise ParameterError("h must be > 0")
        if not np.isfinite(self.theta0) or self.theta0 < 0:
            raise ParameterError("theta0 must be >= 0")
        object.__setattr__(self, "a_hat", a)
        object.__setattr__(self, "b_hat", b)

    @property
    def n_steps(self) -> int:
        return len(self.a_hat)


def _step_factors(noise: NoiseSequence, parametrization: str):
    """Per-step decay rho_m = e^-hh and gain f_m = (1 - e^-hh)/b_m > 0."""
    b = noise.b_hat
    if parametrization == "main":
        if np.any(b <= 0):
            raise DomainError("main parametrization needs b_hat > 0")
        hh = np.full_like(b, noise.h)
    elif parametrization == "alt":
        if np.any(b == 0):
            raise DomainError("alt parametrization needs b_hat != 0")
        hh = noise.h * b
        if np.any(np.abs(hh) > _EXP_OVERFLOW):
            raise DomainError("alt parametrization overflows: |h * b_hat| too large")
    else:
        raise ParameterError(f"unknown parametrization {parametrization!r}")
    rho = np.exp(-hh)
    f = -np.expm1(-hh) / b
    return rho, f


def log_chain_mgf(noise: NoiseSequence, s: float, parametrization: str = "main") -> float:
    """log E[exp(s * theta_M)] for the chain driven by the frozen noise path.

    Composed one step at a time: each step contributes a factor
    (1 - x f_m)^(-a_m) and maps x -> x rho_m / (1 - x f_m), starting from
    x = s at the last step. Evaluated with log1p so that near-cancellation
    at small s keeps full relative precision (the cumulant derivatives are
    meaningful). Raises a domain error where the MGF diverges.
    """
    rho, f = _step_factors(noise, parametrization)
    a = noise.a_hat
    M = noise.n_steps
    s = float(s)
    logv = 0.0
    x = s
    for m in range(M - 1, -1, -1):
        arg = -x * f[m]
        if arg <= -1.0:
            raise DomainError(f"mgf diverges at s={s} (step {m + 1})")
        logv += -a[m] * np.log1p(arg)
        x = x * rho[m] / (1.0 + arg)
    return float(logv + noise.theta0 * x)


def chain_mgf(noise: NoiseSequence, s: float, parametrization: str = "main") -> float:
    return math.exp(log_chain_mgf(noise, s, parametrization))


def _mgf_weights(noise: NoiseSequence, parametrization: str):
    """Aggregated weights for the product closed form of the same MGF.

    Returns (w, P): partial sums G_R(s) = 1 - s * sum_{l<=R} w_l and the total
    decay P, with log MGF = theta0 s P / G_M + sum_m -a_m log(G_{M-m+1}/G_{M-m}).
    Kept as an independent route for cross-checking the composition.
    """
    rho, f = _step_factors(noise, parametrization)
    M = noise.n_steps
    w = np.empty(M)
    decay = 1.0  # prod of rho over steps later than M-l+1
    for l in range(1, M + 1):
        w[l - 1] = f[M - l] * decay
        decay *= rho[M - l]
    return w, decay


def log_chain_mgf_product(noise: NoiseSequence, s: float,
                          parametrization: str = "main") -> float:
    """Product closed form of log_chain_mgf (independent evaluation route)."""
    w, P = _mgf_weights(noise, parametrization)
    a = noise.a_hat
    M = noise.n_steps
    cw = np.concatenate([[0.0], np.cumsum(w)])
    arg = -float(s) * cw
    if np.any(arg <= -1.0):
        raise DomainError(f"mgf diverges at s={s}")
    logG = np.log1p(arg)
    logv = noise.theta0 * s * P / (1.0 + arg[M])
    for m in range(1, M + 1):
        logv += -a[m - 1] * (logG[M - m + 1] - logG[M - m])
    return float(logv)


def mgf_in_domain(noise: NoiseSequence, s: float, parametrization: str = "main") -> bool:
    """Whether s lies inside the MGF's domain of finiteness."""
    w, _ = _mgf_weights(noise, parametrization)
    return bool(np.all(1.0 - float(s) * np.cumsum(w) > 0.0))


def conditional_chain_moments(noise: NoiseSequence, parametrization: str = "main"):
    """(mean, variance) of theta_M given the frozen noise path."""
    rho, f = _step_factors(noise, parametrization)
    a = noise.a_hat
    mu, v = noise.theta0, 0.0
    for m in range(noise.n_steps):
        r, fm, am = rho[m], f[m], a[m]
        v = r * r * v + 2.0 * mu * r * fm + am * fm * fm
        mu = r * mu + am * fm
    return float(mu), float(v)


def simulate_fixed_noise(stream: RngStream, noise: NoiseSequence, n_chains: int,
                         parametrization: str = "main") -> np.ndarray:
    """Simulate n_chains through the frozen noise path; returns theta_M draws."""
    if parametrization == "main":
        step = cv_step_main
    elif parametrization == "alt":
        step = cv_step_alt
    else:
        raise ParameterError(f"unknown parametrization {parametrization!r}")
    th = np.full(int(n_chains), noise.theta0)
    for m in range(noise.n_steps):
        th = step(stream, th, noise.a_hat[m], noise.b_hat[m], noise.h)
    return th


# --------------------------------------------------------------------------
# minibatch law of a_hat for one-hot data under without-replacement sampling
# --------------------------------------------------------------------------

def _log_choose(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _log_f21_sum(n, K, N, s):
    """log of C(N-K,n)/C(N,n) * sum_j C(n,j)C(K,j)j! / (N-K-n+1)_j * e^(sj).

    Terminating hypergeometric-series route for E[e^(s * count)]; requires
    N - K - n + 1 > 0, i.e. n <= N - K.
    """
    c = N - K - n + 1
    if c <= 0:
        raise ParameterError("series route needs n <= n_population - n_success")
    j = np.arange(0, min(n, K) + 1)
    logterm = (gammaln(n + 1.0) - gammaln(n - j + 1.0)
               + gammaln(K + 1.0) - gammaln(K - j + 1.0)
               - (gammaln(c + j) - gammaln(c))
               - gammaln(j + 1.0) + j * s)
    return float(logsumexp(logterm)) + _log_choose(N - K, n) - _log_choose(N, n)


@dataclass(frozen=True)
class MinibatchLaw:
    """Law of a_hat = alpha + (N/n) * count for one-hot category data.

    count ~ Hypergeometric(n_population, n_success, n_sub): the number of the
    n_success in-category data points that land in a uniform
    without-replacement subsample of size n_sub.
    """

    n_population: int
    n_success: int
    n_sub: int
    alpha: float

    def __post_init__(self):
        N, K, n = int(self.n_population), int(self.n_success), int(self.n_sub)
        if N < 1:
            raise ParameterError("n_population must be >= 1")
        if not (0 <= K <= N):
            raise ParameterError("need 0 <= n_success <= n_population")
        if not (1 <= n <= N):
            raise ParameterError("need 1 <= n_sub <= n_population")
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ParameterError("alpha must be finite and > 0")
        object.__setattr__(self, "n_population", N)
        object.__setattr__(self, "n_success", K)
        object.__setattr__(self, "n_sub", n)
        object.__setattr__(self, "alpha", float(self.alpha))

    def full_shape(self) -> float:
        """Full-data shape a = alpha + n_success (also E[a_hat])."""
        return self.alpha + self.n_success

    def support(self) -> np.ndarray:
        N, K, n = self.n_population, self.n_success, self.n_sub
        return np.arange(max(0, n - (N - K)), min(n, K) + 1)

    def a_hat_support(self) -> np.ndarray:
        return self.alpha + (self.n_population / self.n_sub) * self.support()

    def pmf(self) -> np.ndarray:
        N, K, n = self.n_population, self.n_success, self.n_sub
        k = self.support()
        logp = _log_choose(K, k) + _log_choose(N - K, n - k) - _log_choose(N, n)
        return np.exp(logp)

    def var_a_hat(self) -> float:
        N, K, n = self.n_population, self.n_success, self.n_sub
        if N == 1 or n == N:
            return 0.0
        p = K / N
        return (N * N / n) * p * (1.0 - p) * (N - n) / (N - 1.0)

    def count_mgf(self, s: float, method: str = "sum") -> float:
        """E[e^(s * count)], by direct support summation or the series route."""
        N, K, n = self.n_population, self.n_success, self.n_sub
        s = float(s)
        if method == "sum":
            k = self.support()
            logp = _log_choose(K, k) + _log_choose(N - K, n - k) - _log_choose(N, n)
            return float(np.exp(logsumexp(logp + s * k)))
        if method != "series":
            raise ParameterError(f"unknown mgf method {method!r}")
        if K == 0:
            return 1.0
        if K == N:
            return math.exp(s * n)
        if n == N:
            return math.exp(s * K)
        if n <= N - K:
            return math.exp(_log_f21_sum(n, K, N, s))
        if n <= K:
            # count = n - miss with miss ~ Hypergeometric(N, N-K, n)
            return math.exp(s * n + _log_f21_sum(n, N - K, N, -s))
        # complement the sample: count = K - V with V ~ Hypergeometric(N, K, N-n)
        return math.exp(s * K + _log_f21_sum(N - n, K, N, -s))

    def a_hat_mgf(self, t: float, method: str = "sum") -> float:
        """E[e^(t * a_hat)] = e^(alpha t) * count_mgf(t N / n_sub)."""
        t = float(t)
        scaled = t * self.n_population / self.n_sub
        return math.exp(self.alpha * t) * self.count_mgf(scaled, method)

    def sample_a_hat(self, stream: RngStream, size=None) -> np.ndarray:
        k = stream.hypergeometric(self.n_population, self.n_success,
                                  self.n_sub, size=size)
        return self.alpha + (self.n_population / self.n_sub) * k


def law_from_fraction(n_population: int, fraction: float, n_sub: int,
                      alpha: float) -> MinibatchLaw:
    """MinibatchLaw from a success fraction; n_population * fraction must be whole."""
    n_success = n_population * fraction
    if abs(n_success - round(n_success)) > 1e-9:
        raise ParameterError(
            f"fraction {fraction} times population {n_population} is not a whole count")
    return MinibatchLaw(n_population, int(round(n_success)), n_sub, alpha)


# --------------------------------------------------------------------------
# chain moments under random minibatch noise
# --------------------------------------------------------------------------

def exact_chain_moments(theta0: float, a: float, h: float, M: int):
    """(mean, variance) of theta_M under the exact full-data kernel.

    mean = theta0 e^-Mh + a (1 - e^-Mh)
    var  = 2 theta0 (e^-Mh - e^-2Mh) + a (1 - e^-Mh)^2
    """
    _validate_chain_args(theta0, h, M)
    if a <= 0:
        raise ParameterError("shape a must be > 0")
    eMh, e2Mh = math.exp(-M * h), math.exp(-2 * M * h)
    mean = theta0 * eMh + a * (1.0 - eMh)
    var = 2.0 * theta0 * (eMh - e2Mh) + a * (1.0 - eMh) ** 2
    return mean, var


def scir_chain_moments(law: MinibatchLaw, theta0: float, h: float, M: int):
    """(mean, variance) of theta_M under the plain subsampled kernel.

    The mean matches the exact kernel; the variance adds the subsampling
    inflation (1 - e^-2Mh)(1 - e^-h)/(1 + e^-h) * Var[a_hat].
    """
    mean, var = exact_chain_moments(theta0, law.full_shape(), h, M)
    eh = math.exp(-h)
    infl = (1.0 - math.exp(-2 * M * h)) * (1.0 - eh) / (1.0 + eh)
    return mean, var + infl * law.var_a_hat()


def approx_chain_moments(theta0: float, a: float, h: float, M: int,
                         sigma2_a: float):
    """Small-noise expansion of the main-form moments.

    Returns (mean, variance, b1, b2) where
        mean = exact mean + (1 - e^-Mh) sigma2_a
        var  = exact var + b1 sigma2_a + b2 sigma2_a^2
    and sigma2_a = Var[a_hat]/(a-1)^2.
    """
    m0, v0 = exact_chain_moments(theta0, a, h, M)
    eh, e2h = math.exp(-h), math.exp(-2 * h)
    eMh, e2Mh = math.exp(-M * h), math.exp(-2 * M * h)
    c2 = (1.0 - eh) ** 2 * (1.0 - e2Mh) / (1.0 - e2h)
    c3 = (eh - eMh) + (e2Mh - e2h) / (1.0 + eh)
    b1 = v0 + (1.0 - eMh) ** 2 + c2
    b2 = 2.0 * c3
    return m0 + (1.0 - eMh) * sigma2_a, v0 + b1 * sigma2_a + b2 * sigma2_a ** 2, b1, b2


def asymptotic_bias(sigma2_a: float, parametrization: str = "main",
                    h: float | None = None) -> float:
    """Small-noise stationary mean bias E[theta_inf] - a of the CV kernels.

    main: sigma2_a, independent of h.
    alt:  (1 - e^-h (1+h)) / (1 - e^-h (1 + h^2 sigma2_a / 2)) * sigma2_a,
          which vanishes as h -> 0 (the main form's does not).
    """
    if sigma2_a < 0:
        raise ParameterError("sigma2_a must be >= 0")
    if parametrization == "main":
        return float(sigma2_a)
    if parametrization != "alt":
        raise ParameterError(f"unknown parametrization {parametrization!r}")
    if h is None or h <= 0:
        raise ParameterError("alt bias needs a stepsize h > 0")
    eh = math.exp(-h)
    return (1.0 - eh * (1.0 + h)) / (1.0 - eh * (1.0 + 0.5 * h * h * sigma2_a)) * sigma2_a


@dataclass(frozen=True)
class MomentReport:
    """Moments of theta_M under random minibatch noise, with diagnostics.

    variance is the noise-averaged conditional variance (see module
    docstring); mean_se/variance_se are the Monte Carlo standard errors an
    mc_draws-sized estimate of the law expectations would carry (delta
    method); n_excluded counts a_hat == 1 support points or draws dropped
    from the expectations.
    """

    mean: float
    variance: float
    c1: float
    c2: float
    c3: float
    approx_mean: float
    approx_variance: float
    b1: float
    b2: float
    sigma2_a: float
    mean_se: float
    variance_se: float
    n_excluded: int
    method: str
    parametrization: str


def _validate_chain_args(theta0, h, M):
    if not np.isfinite(theta0) or theta0 < 0:
        raise ParameterError("theta0 must be >= 0")
    if not np.isfinite(h) or h <= 0:
        raise ParameterError("h must be > 0")
    if int(M) != M or M < 1:
        raise ParameterError("M must be a positive integer")


def cv_chain_moments(law: MinibatchLaw, theta0: float, h: float, M: int,
                     parametrization: str = "main", mc_draws: int = 100_000,
                     stream: RngStream | None = None,
                     support_limit: int = 10_000) -> MomentReport:
    """Mean and conditional variance of theta_M for a CV kernel under `law`.

    Expectations over a_hat are exact support sums when the law's support has
    at most support_limit points, otherwise Monte Carlo with mc_draws draws
    from `stream`. Either way the reported standard errors are scaled to
    mc_draws so tolerance checks mean the same thing in both modes.
    """
    _validate_chain_args(theta0, h, M)
    if parametrization not in ("main", "alt"):
        raise ParameterError(f"unknown parametrization {parametrization!r}")
    if mc_draws < 2:
        raise ParameterError("mc_draws must be >= 2")
    M = int(M)
    a = law.full_shape()
    if a <= 1.0:
        raise DomainError("control-variate moments need full shape a > 1")

    if len(law.support()) <= support_limit:
        vals = law.a_hat_support()
        wts = law.pmf()
        keep = np.abs(vals - 1.0) > _ONE_TOL
        n_excluded = int((~keep).sum())
        vals, wts = vals[keep], wts[keep]
        wts = wts / wts.sum()
        denom = mc_draws
        method = "exact"
    else:
        stream = stream if stream is not None else RngStream(_DEFAULT_MC_SEED)
        draws = law.sample_a_hat(stream, mc_draws)
        keep = np.abs(draws - 1.0) > _ONE_TOL
        n_excluded = int((~keep).sum())
        vals = draws[keep]
        if len(vals) < 2:
            raise DomainError("all Monte Carlo draws were excluded (a_hat == 1)")
        wts = np.full(len(vals), 1.0 / len(vals))
        denom = len(vals)
        method = "mc"

    def cov_of_mean(F):
        centered = F - (F @ wts)[:, None]
        return (centered * wts) @ centered.T / denom

    eh = math.exp(-h)
    if parametrization == "main":
        phis = np.stack([vals / (vals - 1.0), 1.0 / (vals - 1.0),
                         vals / (vals - 1.0) ** 2])
        e1, e2, e3 = (float(x) for x in phis @ wts)
        cov = cov_of_mean(phis)
        e2h, eMh, e2Mh = math.exp(-2 * h), math.exp(-M * h), math.exp(-2 * M * h)
        c1 = eMh - e2Mh
        c2 = (1.0 - eh) ** 2 * (1.0 - e2Mh) / (1.0 - e2h)
        c3 = (1.0 - eh) ** 2 * ((eMh - eh) / ((1.0 - eh) * (eh - 1.0))
                                - (e2Mh - e2h) / ((1.0 - eh) * (e2h - 1.0)))
        mean = theta0 * eMh + (1.0 - eMh) * (a - 1.0) * e1
        var = (2.0 * (a - 1.0) * e2 * (theta0 * c1 + c3 * (a - 1.0) * e1)
               + c2 * (a - 1.0) ** 2 * e3)
        grad = np.array([2.0 * (a - 1.0) ** 2 * e2 * c3,
                         2.0 * (a - 1.0) * (theta0 * c1 + c3 * (a - 1.0) * e1),
                         c2 * (a - 1.0) ** 2])
        mean_se = (1.0 - eMh) * (a - 1.0) * math.sqrt(max(cov[0, 0], 0.0))
    else:
        t = -h / (a - 1.0)
        u = math.exp(-t) * law.a_hat_mgf(t)
        v = math.exp(-2 * t) * law.a_hat_mgf(2 * t)
        bh = (vals - 1.0) / (a - 1.0)
        fb = -np.expm1(-h * bh) / bh
        fns = np.stack([vals * fb, np.exp(-h * bh) * fb, vals * fb ** 2])
        g, w, q = (float(x) for x in fns @ wts)
        cov = cov_of_mean(fns)
        c1 = (u ** M - v ** M) / (u - v)
        c2 = (1.0 - v ** M) / (1.0 - v)
        c3 = (1.0 + u + v
              + (u ** M - u ** 3) / ((u - v) * (u - 1.0))
              - (v ** M - v ** 3) / ((u - v) * (v - 1.0)))
        mean = theta0 * u ** M + (1.0 - u ** M) / (1.0 - u) * g
        var = 2.0 * w * (theta0 * c1 + g * c3) + q * c2
        grad = np.array([2.0 * w * c3,
                         2.0 * (theta0 * c1 + g * c3),
                         c2])
        mean_se = (1.0 - u ** M) / (1.0 - u) * math.sqrt(max(cov[0, 0], 0.0))

    variance_se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    sigma2_a = law.var_a_hat() / (a - 1.0) ** 2
    am, av, b1, b2 = approx_chain_moments(theta0, a, h, M, sigma2_a)
    return MomentReport(mean=float(mean), variance=float(var), c1=float(c1),
                        c2=float(c2), c3=float(c3), approx_mean=float(am),
                        approx_variance=float(av), b1=float(b1), b2=float(b2),
                        sigma2_a=float(sigma2_a), mean_se=float(mean_se),
                        variance_se=variance_se, n_excluded=n_excluded,
                        method=method, parametrization=parametrization)
