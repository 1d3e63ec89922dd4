"""Minibatch shape estimators for Gamma posteriors over category weights.

A dataset is an (N, K) nonnegative count matrix plus a (K,) prior
concentration alpha. The full-data posterior shape is a = alpha + column
totals; a uniform subsample S of size n gives the unbiased estimate

    a_hat = alpha + (N/n) * sum_{i in S} z_i.

The control-variate estimator anchors at the full-data mode theta_hat = a - 1
and adds the slope b_hat = (a_hat - 1)/(a - 1), which rescales the kernel so
that its stationary law has the correct mode even under subsampling noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# Per-category status codes carried from estimation into the kernel dispatch
# and the trace `fallback` column.
CV_OK = 0          # control variate active
FALLBACK_ALT = 1   # main kernel invalid (b_hat <= 0); alternative kernel used
FALLBACK_SIMPLE = 2  # degenerate anchor (a == 1) or b_hat == 0; plain kernel
CV_DISABLED = 3    # nonpositive mode (a < 1); simple estimator drives the step

FALLBACK_NAMES = {CV_OK: "", FALLBACK_ALT: "alt", FALLBACK_SIMPLE: "scir",
                  CV_DISABLED: "disabled"}


@dataclass(frozen=True)
class CategoricalData:
    """Per-datum category counts (N, K) with prior concentration alpha (K,)."""

    counts: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if counts.ndim != 2:
            raise ParameterError("counts must be an (N, K) matrix")
        if alpha.shape != (counts.shape[1],):
            raise ParameterError("alpha must have one entry per category")
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise ParameterError("counts must be finite and >= 0")
        if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
            raise ParameterError("alpha must be finite and > 0")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_data(self) -> int:
        return self.counts.shape[0]

    @property
    def n_categories(self) -> int:
        return self.counts.shape[1]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def full_shape(self) -> np.ndarray:
        """Full-data posterior shape a = alpha + column totals."""
        return self.alpha + self.totals()


def one_hot_data(totals, alpha) -> CategoricalData:
    """Dataset of N = sum(totals) one-hot rows with the given column totals."""
    totals = np.asarray(totals, dtype=int)
    if np.any(totals < 0):
        raise ParameterError("totals must be >= 0")
    n = int(totals.sum())
    counts = np.zeros((n, len(totals)))
    row = 0
    for k, t in enumerate(totals):
        counts[row:row + t, k] = 1.0
        row += t
    return CategoricalData(counts, np.asarray(alpha, dtype=float))


@dataclass(frozen=True)
class MinibatchEstimate:
    """Estimated shape (and optional control-variate slope) per category."""

    a_hat: np.ndarray
    b_hat: np.ndarray | None
    status: np.ndarray = field(default=None)
    subsample: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.status is None:
            object.__setattr__(
                self, "status", np.zeros(len(self.a_hat), dtype=np.int8))


def _scaled_shape(data: CategoricalData, subsample) -> np.ndarray:
    subsample = np.asarray(subsample, dtype=np.int64)
    if subsample.size == 0:
        raise ParameterError("subsample must be nonempty")
    if subsample.min() < 0 or subsample.max() >= data.n_data:
        raise ParameterError("subsample index out of range")
    if len(np.unique(subsample)) != len(subsample):
        raise ParameterError("subsample indices must be distinct")
    scale = data.n_data / len(subsample)
    return data.alpha + scale * data.counts[subsample].sum(axis=0)


def simple_estimate(data: CategoricalData, subsample) -> MinibatchEstimate:
    """Unbiased shape estimate with no control variate (b_hat is None)."""
    a_hat = _scaled_shape(data, subsample)
    return MinibatchEstimate(a_hat=a_hat, b_hat=None,
                             status=np.zeros(data.n_categories, dtype=np.int8),
                             subsample=np.asarray(subsample, dtype=np.int64))


def mode_snapshot(data: CategoricalData) -> np.ndarray:
    """Full-data posterior mode a - 1 (the control-variate anchor).

    Nonpositive entries mark categories whose mode sits on the boundary;
    cv_estimate disables the control variate there.
    """
    return data.full_shape() - 1.0


def cv_estimate(data: CategoricalData, subsample,
                snapshot: np.ndarray | None = None) -> MinibatchEstimate:
    """Control-variate estimate (a_hat, b_hat) with per-category status.

    snapshot is the anchor mode a - 1; pass a stale one to mimic infrequent
    refreshes. Categories with snapshot < 0 get the control variate disabled
    (status CV_DISABLED, b_hat forced to 1 so the kernel sees the simple
    estimator); snapshot == 0 is degenerate (status FALLBACK_SIMPLE).
    """
    a_hat = _scaled_shape(data, subsample)
    if snapshot is None:
        snapshot = mode_snapshot(data)
    snapshot = np.asarray(snapshot, dtype=float)
    if snapshot.shape != a_hat.shape:
        raise ParameterError("snapshot must have one entry per category")

    status = np.zeros(data.n_categories, dtype=np.int8)
    status[snapshot < 0] = CV_DISABLED
    status[snapshot == 0] = FALLBACK_SIMPLE
    b_hat = np.ones_like(a_hat)
    active = status == CV_OK
    b_hat[active] = (a_hat[active] - 1.0) / snapshot[active]
    return MinibatchEstimate(a_hat=a_hat, b_hat=b_hat, status=status,
                             subsample=np.asarray(subsample, dtype=np.int64))


def per_datum_gradient(theta, alpha, n_data, z):
    """d/dtheta of the per-datum potential U_i = -(1/N) log p(theta) - log p(z_i|theta).

    Equals -((alpha-1)/N + z)/theta + 1/N; the full-data sum is
    1 - (a-1)/theta, which vanishes at the mode theta = a - 1.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ParameterError("theta must be > 0")
    return -((alpha - 1.0) / n_data + z) / theta + 1.0 / n_data


def cv_gradient(theta, estimate: MinibatchEstimate):
    """Control-variate potential gradient -(a_hat-1)/theta + b_hat.

    Identical to scaling the anchored per-datum differences: with
    theta_hat = a - 1,
        (N/n) sum_{i in S} (U_i'(theta) - U_i'(theta_hat)) + sum_i U_i'(theta_hat)
    collapses to this closed form.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ParameterError("theta must be > 0")
    if estimate.b_hat is None:
        raise ParameterError("estimate carries no control variate")
    return -(estimate.a_hat - 1.0) / theta + estimate.b_hat
