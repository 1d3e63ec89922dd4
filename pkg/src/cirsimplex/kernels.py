"""Transition kernels with Gamma(a, 1) stationary laws, and the chain driver.

One step of the basic kernel targeting Gamma(a, 1) over stepsize h:

    theta' = (1 - e^-h)/2 * X,   X ~ ChiSq(2a, 2 theta e^-h / (1 - e^-h))

which is the exact h-step transition of the unit-reversion square-root
diffusion with that stationary law. Subsampled variants replace a by the
minibatch estimate a_hat; the control-variate variants rescale by b_hat:

    main: scale (1-e^-h)/(2 b_hat),  noncentrality 2 theta b_hat e^-h/(1-e^-h)
    alt:  h replaced by b_hat*h inside the exponentials; stays a valid kernel
          for b_hat < 0, where the main form breaks down.

All kernels act coordinate-wise on vectors sharing one stream.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, ParameterError
from .estimators import (CV_DISABLED, CV_OK, FALLBACK_ALT, FALLBACK_NAMES,
                         FALLBACK_SIMPLE, CategoricalData, cv_estimate,
                         mode_snapshot, simple_estimate)
from .rng import RngStream

KERNELS = ("exact", "scir", "cv-main", "cv-alt", "sgrld")

_NAME_TO_CODE = {v: k for k, v in FALLBACK_NAMES.items()}
_EXP_OVERFLOW = 700.0


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise DomainError("theta left the state space (finite, >= 0)")
    return theta


def _check_h(h):
    if not np.isfinite(h) or h <= 0:
        raise ParameterError("stepsize h must be finite and > 0")
    return float(h)


def exact_step(stream: RngStream, theta, a, h):
    """Exact transition targeting Gamma(a, 1); stationary for theta ~ Gamma(a, 1)."""
    theta = _check_theta(theta)
    h = _check_h(h)
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise DomainError("shape a must be > 0")
    f = -np.expm1(-h)                       # 1 - e^-h
    nonc = 2.0 * theta * np.exp(-h) / f
    return (f / 2.0) * stream.noncentral_chisq(2.0 * a, nonc)


def scir_step(stream: RngStream, theta, a_hat, h):
    """Exact transition driven by the subsampled shape a_hat."""
    return exact_step(stream, theta, a_hat, h)


def cv_step_main(stream: RngStream, theta, a_hat, b_hat, h):
    """Control-variate step, main form; requires b_hat > 0."""
    theta = _check_theta(theta)
    h = _check_h(h)
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    if np.any(a_hat <= 0):
        raise DomainError("a_hat must be > 0")
    if np.any(b_hat <= 0):
        raise DomainError("main control-variate step needs b_hat > 0")
    f = -np.expm1(-h)
    nonc = 2.0 * theta * b_hat * np.exp(-h) / f
    return (f / (2.0 * b_hat)) * stream.noncentral_chisq(2.0 * a_hat, nonc)


def cv_step_alt(stream: RngStream, theta, a_hat, b_hat, h):
    """Control-variate step, alternative form; valid for any b_hat != 0."""
    theta = _check_theta(theta)
    h = _check_h(h)
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    if np.any(a_hat <= 0):
        raise DomainError("a_hat must be > 0")
    if np.any(b_hat == 0):
        raise DomainError("alternative control-variate step needs b_hat != 0")
    hb = h * b_hat
    if np.any(hb < -_EXP_OVERFLOW):
        raise DomainError("alternative step overflows: h * b_hat too negative")
    f = -np.expm1(-hb) / b_hat              # (1 - e^-hb)/b > 0 for any b != 0
    nonc = 2.0 * theta * np.exp(-hb) / f
    return (f / 2.0) * stream.noncentral_chisq(2.0 * a_hat, nonc)


def sgrld_step(stream: RngStream, theta, a_hat, h):
    """Mirrored Langevin step: |theta + h/2 (a_hat - theta) + sqrt(h theta) eta|."""
    theta = _check_theta(theta)
    h = _check_h(h)
    a_hat = np.asarray(a_hat, dtype=float)
    eta = stream.normal(size=np.broadcast(theta, a_hat).shape)
    return np.abs(theta + 0.5 * h * (a_hat - theta) + np.sqrt(h * theta) * eta)


def to_simplex(theta):
    """Normalize nonnegative weights to the simplex; zero coordinates allowed."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise DomainError("weights must be finite and >= 0")
    total = theta.sum()
    if total <= 0:
        raise DomainError("cannot normalize an all-zero weight vector")
    return theta / total


def cv_transition(stream: RngStream, theta, estimate, h,
                  parametrization="main", policy="alt"):
    """One control-variate step with per-category fallback dispatch.

    Returns (theta_new, status) where status marks per category which kernel
    actually ran: CV_OK for the requested one, FALLBACK_ALT when the main
    form was invalid (b_hat <= 0) and policy "alt" applied, FALLBACK_SIMPLE
    for the plain subsampled kernel, CV_DISABLED when the estimator had
    already disabled the control variate (nonpositive anchor mode).
    """
    if parametrization not in ("main", "alt"):
        raise ParameterError(f"unknown parametrization {parametrization!r}")
    if policy not in ("alt", "scir"):
        raise ParameterError(f"unknown fallback policy {policy!r}")
    theta = _check_theta(theta)
    if estimate.b_hat is None:
        raise ParameterError("control-variate transition needs b_hat")
    status = estimate.status.astype(np.int8).copy()
    b = estimate.b_hat

    bad = (status == CV_OK) & (b == 0)
    status[bad] = FALLBACK_SIMPLE
    if parametrization == "main":
        bad = (status == CV_OK) & (b < 0)
        status[bad] = FALLBACK_ALT if policy == "alt" else FALLBACK_SIMPLE

    out = np.empty_like(theta)
    main_mask = (status == CV_OK) if parametrization == "main" else \
        np.zeros_like(status, dtype=bool)
    alt_mask = (status == FALLBACK_ALT) if parametrization == "main" else \
        (status == CV_OK)
    simple_mask = ~(main_mask | alt_mask)

    # fixed draw order (main, alt, simple) keeps runs reproducible
    if main_mask.any():
        out[main_mask] = cv_step_main(stream, theta[main_mask],
                                      estimate.a_hat[main_mask],
                                      b[main_mask], h)
    if alt_mask.any():
        out[alt_mask] = cv_step_alt(stream, theta[alt_mask],
                                    estimate.a_hat[alt_mask],
                                    b[alt_mask], h)
    if simple_mask.any():
        out[simple_mask] = scir_step(stream, theta[simple_mask],
                                     estimate.a_hat[simple_mask], h)
    return out, status


@dataclass(frozen=True)
class StepsizeSchedule:
    """h_m = h * (1 + m/tau)^-kappa for iteration m >= 1; constant if kappa == 0."""

    h: float
    tau: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise ParameterError("schedule h must be > 0")
        if self.kappa < 0 or self.tau < 0:
            raise ParameterError("schedule tau and kappa must be >= 0")
        if self.kappa > 0 and self.tau <= 0:
            raise ParameterError("decaying schedule needs tau > 0")

    def at(self, m: int) -> float:
        if self.kappa == 0:
            return self.h
        return self.h * (1.0 + m / self.tau) ** (-self.kappa)


_TRACE_HEADER = "iter,h,category,theta,omega,a_hat,b_hat,fallback"
_TRACE_VERSION = 1


@dataclass
class ChainTrace:
    """Kept post-burn-in states of one chain, one row per (iteration, category)."""

    iters: np.ndarray          # (T,)
    h: np.ndarray              # (T,)
    theta: np.ndarray          # (T, K)
    omega: np.ndarray          # (T, K)
    a_hat: np.ndarray          # (T, K)
    b_hat: np.ndarray          # (T, K); nan where the kernel carries none
    fallback: np.ndarray       # (T, K) int8 status codes

    @property
    def n_kept(self) -> int:
        return len(self.iters)

    @property
    def n_categories(self) -> int:
        return self.theta.shape[1]

    def to_csv(self, path):
        buf = io.StringIO()
        buf.write(_TRACE_HEADER + "\n")
        for t in range(self.n_kept):
            it, h = self.iters[t], self.h[t]
            for k in range(self.n_categories):
                b = self.b_hat[t, k]
                bs = "" if np.isnan(b) else f"{b:.17g}"
                buf.write(f"{it},{h:.17g},{k},{self.theta[t, k]:.17g},"
                          f"{self.omega[t, k]:.17g},{self.a_hat[t, k]:.17g},"
                          f"{bs},{FALLBACK_NAMES[int(self.fallback[t, k])]}\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().rstrip("\n")
            if header != _TRACE_HEADER:
                raise DataError(f"unexpected trace header: {header!r}")
            rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
        if not rows:
            raise DataError("empty trace")
        cats = {int(r[2]) for r in rows}
        n_cat = max(cats) + 1
        if cats != set(range(n_cat)) or len(rows) % n_cat != 0:
            raise DataError("trace rows do not form complete category blocks")
        n_kept = len(rows) // n_cat
        out = cls(iters=np.empty(n_kept, dtype=np.int64),
                  h=np.empty(n_kept),
                  theta=np.empty((n_kept, n_cat)),
                  omega=np.empty((n_kept, n_cat)),
                  a_hat=np.empty((n_kept, n_cat)),
                  b_hat=np.empty((n_kept, n_cat)),
                  fallback=np.empty((n_kept, n_cat), dtype=np.int8))
        for i, r in enumerate(rows):
            t, k = divmod(i, n_cat)
            if int(r[2]) != k:
                raise DataError("trace categories out of order")
            out.iters[t] = int(r[0])
            out.h[t] = float(r[1])
            out.theta[t, k] = float(r[3])
            out.omega[t, k] = float(r[4])
            out.a_hat[t, k] = float(r[5])
            out.b_hat[t, k] = float(r[6]) if r[6] else np.nan
            try:
                out.fallback[t, k] = _NAME_TO_CODE[r[7]]
            except KeyError:
                raise DataError(f"unknown fallback code {r[7]!r}") from None
        return out

    def to_npz(self, path):
        np.savez_compressed(path, trace_version=np.int64(_TRACE_VERSION),
                            iters=self.iters, h=self.h, theta=self.theta,
                            omega=self.omega, a_hat=self.a_hat,
                            b_hat=self.b_hat, fallback=self.fallback)

    @classmethod
    def from_npz(cls, path):
        with np.load(path) as z:
            if "trace_version" not in z or int(z["trace_version"]) != _TRACE_VERSION:
                raise DataError("not a chain trace file (bad or missing version)")
            return cls(iters=z["iters"], h=z["h"], theta=z["theta"],
                       omega=z["omega"], a_hat=z["a_hat"], b_hat=z["b_hat"],
                       fallback=z["fallback"])


def run_chain(stream: RngStream, data: CategoricalData, kernel: str,
              schedule: StepsizeSchedule, n_sub: int, n_iter: int,
              burn_in: int = 1000, thin: int = 1, theta0=None,
              policy: str = "alt", snapshot=None) -> ChainTrace:
    """Run one chain over the category weights with a fresh subsample per step.

    kernel is one of KERNELS; cv-main/cv-alt use the control-variate
    estimator (with per-category fallback per `policy`), scir and sgrld the
    simple one, exact ignores subsampling and uses the full-data shape.
    Iterations 1..burn_in are discarded; of the rest every thin-th is kept.
    """
    if kernel not in KERNELS:
        raise ParameterError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if n_iter <= burn_in:
        raise ParameterError("n_iter must exceed burn_in")
    if thin < 1:
        raise ParameterError("thin must be >= 1")
    if not (0 < n_sub <= data.n_data):
        raise ParameterError("need 0 < n_sub <= n_data")

    K = data.n_categories
    theta = np.ones(K) if theta0 is None else _check_theta(theta0).copy()
    if theta.shape != (K,):
        raise ParameterError("theta0 must have one entry per category")
    a_full = data.full_shape()
    if snapshot is None:
        snapshot = mode_snapshot(data)

    kept = [m for m in range(burn_in + 1, n_iter + 1)
            if (m - burn_in - 1) % thin == 0]
    T = len(kept)
    trace = ChainTrace(iters=np.array(kept, dtype=np.int64), h=np.empty(T),
                       theta=np.empty((T, K)), omega=np.empty((T, K)),
                       a_hat=np.empty((T, K)), b_hat=np.full((T, K), np.nan),
                       fallback=np.zeros((T, K), dtype=np.int8))
    t = 0
    for m in range(1, n_iter + 1):
        h = schedule.at(m)
        if kernel == "exact":
            theta = exact_step(stream, theta, a_full, h)
            a_rec, b_rec = a_full, None
            status = np.zeros(K, dtype=np.int8)
        else:
            sub = stream.without_replacement(data.n_data, n_sub)
            if kernel in ("cv-main", "cv-alt"):
                est = cv_estimate(data, sub, snapshot)
                theta, status = cv_transition(
                    stream, theta, est, h,
                    parametrization=kernel.removeprefix("cv-"), policy=policy)
                a_rec, b_rec = est.a_hat, est.b_hat
            else:
                est = simple_estimate(data, sub)
                step = scir_step if kernel == "scir" else sgrld_step
                theta = step(stream, theta, est.a_hat, h)
                a_rec, b_rec = est.a_hat, None
                status = np.zeros(K, dtype=np.int8)
        if t < T and m == kept[t]:
            trace.h[t] = h
            trace.theta[t] = theta
            trace.omega[t] = to_simplex(theta)
            trace.a_hat[t] = a_rec
            if b_rec is not None:
                trace.b_hat[t] = b_rec
            trace.fallback[t] = status
            t += 1
    return trace
