"""Counter-based random streams and the exact samplers built on them.

A stream is numpy's Philox generator keyed by (seed, stream_id), so a pair of
integers names the same sequence everywhere and independent child streams can
be derived without coordination between workers.
"""
from __future__ import annotations

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RngStream:
    """Reproducible random stream addressed by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed <= _MASK64):
            raise ParameterError(f"seed must be a u64, got {seed}")
        if not (0 <= stream_id <= _MASK64):
            raise ParameterError(f"stream_id must be a u64, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def child(self, tag: int) -> "RngStream":
        """Derive an independent stream; same (seed, stream_id, tag) -> same child."""
        mixed = _splitmix64(self.stream_id ^ _splitmix64(int(tag) & _MASK64))
        return RngStream(self.seed, mixed)

    # -- raw draws -----------------------------------------------------------

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def poisson(self, lam, size=None):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ParameterError("poisson rate must be finite and >= 0")
        return self._gen.poisson(lam, size=size)

    def gamma(self, shape, rate=1.0, size=None):
        """Gamma(shape, rate) draws (rate parametrization, mean shape/rate).

        Exact for all shape > 0 including shape < 1.
        """
        shape = np.asarray(shape, dtype=float)
        rate = np.asarray(rate, dtype=float)
        if np.any(shape <= 0) or not np.all(np.isfinite(shape)):
            raise ParameterError("gamma shape must be finite and > 0")
        if np.any(rate <= 0) or not np.all(np.isfinite(rate)):
            raise ParameterError("gamma rate must be finite and > 0")
        return self._gen.standard_gamma(shape, size=size) / rate

    def noncentral_chisq(self, dof, noncentrality, size=None):
        """Noncentral chi-square via the Poisson mixture of central gammas.

        X = 2 * Gamma(dof/2 + J, 1) with J ~ Poisson(noncentrality/2); exact
        for any real dof > 0 (fractional included) and noncentrality >= 0.
        """
        dof = np.asarray(dof, dtype=float)
        nonc = np.asarray(noncentrality, dtype=float)
        if np.any(dof <= 0) or not np.all(np.isfinite(dof)):
            raise ParameterError("dof must be finite and > 0")
        if np.any(nonc < 0) or not np.all(np.isfinite(nonc)):
            raise ParameterError("noncentrality must be finite and >= 0")
        j = self._gen.poisson(nonc / 2.0, size=size)
        return 2.0 * self._gen.standard_gamma(dof / 2.0 + j)

    def hypergeometric(self, n_population, n_success, n_draws, size=None):
        """Number of successes in a without-replacement sample of n_draws."""
        npop = np.asarray(n_population)
        nsucc = np.asarray(n_success)
        ndraw = np.asarray(n_draws)
        if np.any(nsucc < 0) or np.any(nsucc > npop):
            raise ParameterError("need 0 <= n_success <= n_population")
        if np.any(ndraw < 0) or np.any(ndraw > npop):
            raise ParameterError("need 0 <= n_draws <= n_population")
        if np.all(ndraw == 0):
            shape = np.broadcast(npop, nsucc, ndraw).shape if size is None else size
            return np.zeros(shape, dtype=np.int64)
        return self._gen.hypergeometric(nsucc, npop - nsucc, ndraw, size=size)

    def without_replacement(self, n_population, n_sample):
        """Sorted uniform sample of distinct indices from range(n_population)."""
        n_population, n_sample = int(n_population), int(n_sample)
        if not (0 <= n_sample <= n_population):
            raise ParameterError("need 0 <= n_sample <= n_population")
        idx = self._gen.choice(n_population, size=n_sample, replace=False)
        return np.sort(idx.astype(np.int64))

    def permutation(self, n):
        return self._gen.permutation(int(n))

    def categorical(self, p, size=None):
        """Draw indices with probabilities p (1-d) by inverse CDF."""
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ParameterError("p must be a 1-d probability vector")
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        u = self._gen.random(size)
        return np.searchsorted(cdf, u, side="right").astype(np.int64)


def make_stream(seed: int, stream_id: int = 0) -> RngStream:
    return RngStream(seed, stream_id)


def sample_gamma(stream: RngStream, shape, rate=1.0, size=None):
    return stream.gamma(shape, rate, size)


def sample_noncentral_chisq(stream: RngStream, dof, noncentrality, size=None):
    return stream.noncentral_chisq(dof, noncentrality, size)


def sample_hypergeometric(stream: RngStream, n_population, n_success, n_draws,
                          size=None):
    return stream.hypergeometric(n_population, n_success, n_draws, size)


def sample_without_replacement(stream: RngStream, n_population, n_sample):
    return stream.without_replacement(n_population, n_sample)
