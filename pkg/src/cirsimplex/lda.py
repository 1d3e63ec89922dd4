"""Stochastic topic-model training driven by the simplex kernels.

The topic-word weights theta (n_topics, n_words) evolve coordinate-wise under
one of the subsampled kernels. Each iteration draws a minibatch of documents,
runs a per-document collapsed Gibbs sweep over token assignments with

    p(z_i = k | rest)  propto  (alpha + n_dk^{-i}) * theta[k, w_i],

and turns the kept sweeps into centered expected counts

    zbar_dkw = E[n_dkw - omega_kw * n_dk]        (omega = row-normalized theta)

whose scaled sum gives the shape estimate a_hat_kw = beta + (D/|batch|) *
sum_batch zbar. The anchor a_kw = beta + sum_D zbar (refreshed every few
iterations from a document subset) supplies the control-variate slope
b_hat = (a_hat - 1)/(a - 1).

Unlike count data, centered expected counts can be negative, so a_hat can
drop below zero early in training; the chi-square kernels need a_hat > 0 and
get a small floor (counted). The Langevin baseline uses a_hat raw.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .corpus import Corpus, HoldoutSplit
from .errors import ConfigError, DomainError, ParameterError
from .estimators import CV_DISABLED, CV_OK, FALLBACK_SIMPLE, MinibatchEstimate
from .kernels import (StepsizeSchedule, cv_transition, scir_step, sgrld_step,
                      to_simplex)
from .rng import RngStream

# A negative slope makes the alt step expand theta by e^{|h b|} per
# iteration, and only the next anchor refresh can flip such a coordinate back
# to disabled, so the compounded expansion within one refresh window is capped
# at e^1: entries with h * b_hat < -cap/refresh_every take the plain step.
_ALT_LOG_GROWTH_CAP = 1.0

LDA_KERNELS = ("scir", "cv-main", "cv-alt", "sgrld")


@dataclass(frozen=True)
class LdaConfig:
    n_topics: int
    alpha: float = 1.1          # document-topic concentration
    beta: float = 0.1           # topic-word concentration
    h: float = 1.0
    tau: float = 1000.0
    kappa: float = 3.32
    minibatch_docs: int = 50
    refresh_every: int = 5      # iterations between anchor refreshes
    refresh_docs: int = 1000    # documents used per anchor refresh
    gibbs_sweeps: int = 200     # per-document sweeps; first half is burn-in
    eval_gibbs_sweeps: int = 20
    kernel: str = "cv-alt"
    policy: str = "alt"
    ahat_floor: float = 1e-2
    eval_every: int = 5
    n_threads: int = 1

    def __post_init__(self):
        if self.n_topics < 1:
            raise ConfigError("n_topics must be >= 1")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be > 0")
        if self.kernel not in LDA_KERNELS:
            raise ConfigError(
                f"kernel {self.kernel!r} not usable for topic training; "
                f"expected one of {LDA_KERNELS}")
        if self.policy not in ("alt", "scir"):
            raise ConfigError(f"unknown fallback policy {self.policy!r}")
        if self.minibatch_docs < 1 or self.refresh_every < 1 or self.refresh_docs < 1:
            raise ConfigError("minibatch_docs, refresh_every, refresh_docs must be >= 1")
        if self.gibbs_sweeps < 2 or self.eval_gibbs_sweeps < 2:
            raise ConfigError("gibbs sweep counts must be >= 2")
        if self.ahat_floor <= 0:
            raise ConfigError("ahat_floor must be > 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.n_threads < 1:
            raise ConfigError("n_threads must be >= 1")

    def schedule(self) -> StepsizeSchedule:
        return StepsizeSchedule(self.h, self.tau, self.kappa)


@dataclass
class TopicState:
    theta: np.ndarray       # (K, W)
    anchor: np.ndarray      # (K, W) full-corpus shape snapshot
    iteration: int = 0


# --------------------------------------------------------------------------
# collapsed Gibbs over token assignments (numba cores, uniforms pre-drawn)
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _gibbs_counts_core(theta_loc, alpha, tok, u, burn):
    K, U = theta_loc.shape
    L = tok.shape[0]
    sweeps = u.shape[0] - 1
    z = np.zeros(L, np.int64)
    n_k = np.zeros(K, np.float64)
    acc_kw = np.zeros((K, U), np.float64)
    acc_nk = np.zeros(K, np.float64)
    cum = np.empty(K, np.float64)
    for s in range(sweeps + 1):
        for l in range(L):
            if s > 0:
                n_k[z[l]] -= 1.0
            tot = 0.0
            for k in range(K):
                tot += (alpha + n_k[k]) * theta_loc[k, tok[l]]
                cum[k] = tot
            r = u[s, l] * tot
            kk = K - 1
            for k in range(K):
                if r < cum[k]:
                    kk = k
                    break
            z[l] = kk
            n_k[kk] += 1.0
        if s > burn:
            for l in range(L):
                acc_kw[z[l], tok[l]] += 1.0
            for k in range(K):
                acc_nk[k] += n_k[k]
    kept = sweeps - burn
    for k in range(K):
        for w in range(U):
            acc_kw[k, w] /= kept
        acc_nk[k] /= kept
    return acc_kw, acc_nk


@njit(cache=True, nogil=True)
def _gibbs_samples_core(theta_loc, alpha, tok, u, burn, thin, z_out):
    K, _ = theta_loc.shape
    L = tok.shape[0]
    sweeps = u.shape[0] - 1
    z = np.zeros(L, np.int64)
    n_k = np.zeros(K, np.float64)
    cum = np.empty(K, np.float64)
    row = 0
    for s in range(sweeps + 1):
        for l in range(L):
            if s > 0:
                n_k[z[l]] -= 1.0
            tot = 0.0
            for k in range(K):
                tot += (alpha + n_k[k]) * theta_loc[k, tok[l]]
                cum[k] = tot
            r = u[s, l] * tot
            kk = K - 1
            for k in range(K):
                if r < cum[k]:
                    kk = k
                    break
            z[l] = kk
            n_k[kk] += 1.0
        if s > burn and (s - burn - 1) % thin == 0 and row < z_out.shape[0]:
            for l in range(L):
                z_out[row, l] = z[l]
            row += 1
    return row


def _theta_columns(theta, word_ids):
    cols = np.ascontiguousarray(theta[:, word_ids])
    if np.any(cols.sum(axis=0) <= 0.0):
        raise DomainError("a document word has zero weight in every topic")
    return cols


def gibbs_doc_counts(stream: RngStream, theta, alpha, word_ids, counts, sweeps):
    """Mean assignment counts of one document over the kept Gibbs sweeps.

    Returns (acc_kw, acc_nk): acc_kw[k, j] is the mean count of tokens of
    word_ids[j] assigned to topic k; acc_nk[k] the mean topic total. The
    first half of the sweeps is discarded.
    """
    word_ids = np.asarray(word_ids, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    tok = np.repeat(np.arange(len(word_ids)), counts)
    cols = _theta_columns(theta, word_ids)
    u = stream.uniform((int(sweeps) + 1, len(tok)))
    return _gibbs_counts_core(cols, float(alpha), tok, u, int(sweeps) // 2)


def gibbs_assignment_samples(stream: RngStream, theta, alpha, tokens, sweeps,
                             thin: int = 1):
    """Thinned post-burn-in assignment vectors for one token list (for checks)."""
    tokens = np.asarray(tokens, dtype=np.int64)
    word_ids, tok = np.unique(tokens, return_inverse=True)
    cols = _theta_columns(theta, word_ids)
    burn = int(sweeps) // 2
    n_keep = len(range(burn + 1, int(sweeps) + 1, int(thin)))
    z_out = np.zeros((n_keep, len(tok)), dtype=np.int64)
    u = stream.uniform((int(sweeps) + 1, len(tok)))
    rows = _gibbs_samples_core(cols, float(alpha), tok, u, burn, int(thin), z_out)
    return z_out[:rows]


def enumerate_assignment_pmf(theta, alpha, tokens):
    """Exact pmf over all K^L assignment vectors of a short document."""
    from math import lgamma

    tokens = np.asarray(tokens, dtype=np.int64)
    K = theta.shape[0]
    L = len(tokens)
    if K ** L > 2_000_000:
        raise ParameterError("document too long to enumerate")
    logs = []
    for z in itertools.product(range(K), repeat=L):
        n_k = np.bincount(np.array(z, dtype=np.int64), minlength=K)
        lp = sum(lgamma(alpha + n_k[k]) - lgamma(alpha) for k in range(K))
        lp += sum(np.log(theta[z[i], tokens[i]]) for i in range(L))
        logs.append(lp)
    logs = np.array(logs)
    p = np.exp(logs - logs.max())
    return p / p.sum()


# --------------------------------------------------------------------------
# minibatch statistics and the training loop
# --------------------------------------------------------------------------

def _doc_stats_job(args):
    theta, alpha, words, counts, sweeps, stream = args
    return words, *gibbs_doc_counts(stream, theta, alpha, words, counts, sweeps)


def _batch_counts(theta, corpus: Corpus, doc_ids, cfg: LdaConfig,
                  stream: RngStream, tag_base: int):
    """Sum of per-document mean counts over a document batch.

    Returns (S, T): S[k, w] = sum_d mean n_dkw, T[k] = sum_d mean n_dk.
    Per-document child streams make the result independent of thread order.
    """
    K, W = theta.shape
    jobs = [(theta, cfg.alpha, corpus.doc_words[d], corpus.doc_counts[d],
             cfg.gibbs_sweeps, stream.child(tag_base + int(d)))
            for d in doc_ids]
    if cfg.n_threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
            results = list(pool.map(_doc_stats_job, jobs))
    else:
        results = [_doc_stats_job(j) for j in jobs]
    S = np.zeros((K, W))
    T = np.zeros(K)
    for words, acc_kw, acc_nk in results:
        S[:, words] += acc_kw
        T += acc_nk
    return S, T


def _centered_shape(beta, scale, S, T, omega):
    """beta + scale * sum of centered counts (S - omega * T)."""
    return beta + scale * (S - omega * T[:, None])


def topic_simplex(theta) -> np.ndarray:
    """Row-normalize topic weights to distributions over words."""
    return np.vstack([to_simplex(row) for row in theta])


def refresh_anchor(theta, corpus: Corpus, cfg: LdaConfig, stream: RngStream):
    """Recompute the full-corpus anchor shape a_kw from a document subset."""
    D = corpus.n_docs
    if cfg.refresh_docs >= D:
        ids = np.arange(D)
    else:
        ids = stream.without_replacement(D, cfg.refresh_docs)
    S, T = _batch_counts(theta, corpus, ids, cfg, stream, tag_base=1 << 40)
    return _centered_shape(cfg.beta, D / len(ids), S, T, topic_simplex(theta))


def lda_transition(stream: RngStream, theta, a_hat, anchor, h, cfg: LdaConfig):
    """Advance all (topic, word) coordinates one step; returns (theta', counters)."""
    K, W = theta.shape
    flat = theta.ravel()
    a_flat = np.asarray(a_hat, dtype=float).ravel()
    counters = {"floored": 0, "alt_guard": 0}

    if cfg.kernel == "sgrld":
        out = sgrld_step(stream, flat, a_flat, h)
        return out.reshape(K, W), counters

    n_floor = int((a_flat < cfg.ahat_floor).sum())
    counters["floored"] = n_floor
    a_flat = np.maximum(a_flat, cfg.ahat_floor)
    if cfg.kernel == "scir":
        out = scir_step(stream, flat, a_flat, h)
        return out.reshape(K, W), counters

    snapshot = np.asarray(anchor, dtype=float).ravel() - 1.0
    status = np.zeros(K * W, dtype=np.int8)
    status[snapshot < 0] = CV_DISABLED
    status[snapshot == 0] = FALLBACK_SIMPLE
    b_flat = np.ones_like(a_flat)
    active = status == CV_OK
    b_flat[active] = (a_flat[active] - 1.0) / snapshot[active]
    # persistent negative slopes explode e^{-h b}; take the plain step instead
    guard = active & (h * b_flat < -_ALT_LOG_GROWTH_CAP / cfg.refresh_every)
    counters["alt_guard"] = int(guard.sum())
    status[guard] = FALLBACK_SIMPLE
    est = MinibatchEstimate(a_hat=a_flat, b_hat=b_flat, status=status)
    out, status = cv_transition(stream, flat, est, h,
                                parametrization=cfg.kernel.removeprefix("cv-"),
                                policy=cfg.policy)
    for name, code in (("fallback_alt", 1), ("fallback_scir", 2), ("disabled", 3)):
        counters[name] = int((status == code).sum())
    return out.reshape(K, W), counters


# --------------------------------------------------------------------------
# held-out perplexity by document completion
# --------------------------------------------------------------------------

class PerplexityAccumulator:
    """Running predictive probabilities for held-out test tokens.

    Each update contributes one posterior sample of the topic rows: for every
    held-out document, a Gibbs pass over its train tokens gives the mixture
    estimate eta_hat_k = (mean n_dk + alpha)/(L + K alpha), and each test
    token w adds sum_k eta_hat_k omega[k, w] to its running sum. Perplexity
    is exp(-mean log(averaged predictive)) over all test tokens.
    """

    def __init__(self, split: HoldoutSplit, alpha: float):
        self.split = split
        self.alpha = float(alpha)
        self.sums = [np.zeros(len(d.test_tokens)) for d in split.heldout]
        self.n_samples = 0

    def update(self, theta, cfg: LdaConfig, stream: RngStream):
        omega = topic_simplex(theta)
        K = theta.shape[0]
        for i, doc in enumerate(self.split.heldout):
            if len(doc.test_tokens) == 0:
                continue
            words, counts = np.unique(doc.train_tokens, return_counts=True)
            if len(words) == 0:
                eta = np.full(K, 1.0 / K)
            else:
                _, acc_nk = gibbs_doc_counts(stream.child(i), theta, self.alpha,
                                             words, counts,
                                             cfg.eval_gibbs_sweeps)
                eta = (acc_nk + self.alpha) / (acc_nk.sum() + K * self.alpha)
            self.sums[i] += eta @ omega[:, doc.test_tokens]
        self.n_samples += 1

    def perplexity(self) -> float:
        if self.n_samples == 0:
            raise ParameterError("no posterior samples accumulated yet")
        total, logp = 0, 0.0
        for s in self.sums:
            if len(s) == 0:
                continue
            total += len(s)
            with np.errstate(divide="ignore"):
                logp += float(np.sum(np.log(s / self.n_samples)))
        if total == 0:
            raise ParameterError("holdout split has no test tokens")
        return float(np.exp(-logp / total))


@dataclass
class TrainResult:
    state: TopicState
    history: list = field(default_factory=list)  # (iteration, docs_seen, perplexity)
    counters: dict = field(default_factory=dict)


def train_lda(corpus: Corpus, cfg: LdaConfig, stream: RngStream, n_iters: int,
              split: HoldoutSplit | None = None,
              accumulator: PerplexityAccumulator | None = None) -> TrainResult:
    """Run n_iters minibatch iterations; evaluates perplexity if split given."""
    if n_iters < 1:
        raise ParameterError("n_iters must be >= 1")
    if corpus.n_docs < cfg.minibatch_docs:
        raise ParameterError("corpus smaller than one minibatch")
    K, W = cfg.n_topics, corpus.n_words
    schedule = cfg.schedule()
    theta = stream.gamma(1.0, 1.0, size=(K, W))
    state = TopicState(theta=theta, anchor=np.full((K, W), cfg.beta))
    totals = {"floored": 0, "alt_guard": 0, "fallback_alt": 0,
              "fallback_scir": 0, "disabled": 0}
    if split is not None and accumulator is None:
        accumulator = PerplexityAccumulator(split, cfg.alpha)
    result = TrainResult(state=state, counters=totals)

    for m in range(1, n_iters + 1):
        if cfg.kernel in ("cv-main", "cv-alt") and (m - 1) % cfg.refresh_every == 0:
            state.anchor = refresh_anchor(state.theta, corpus, cfg,
                                          stream.child((3 << 60) + m))
        doc_ids = stream.without_replacement(corpus.n_docs, cfg.minibatch_docs)
        S, T = _batch_counts(state.theta, corpus, doc_ids, cfg,
                             stream.child((1 << 60) + m), tag_base=0)
        a_hat = _centered_shape(cfg.beta, corpus.n_docs / len(doc_ids), S, T,
                                topic_simplex(state.theta))
        h = schedule.at(m)
        state.theta, counters = lda_transition(stream, state.theta, a_hat,
                                               state.anchor, h, cfg)
        for k, v in counters.items():
            totals[k] = totals.get(k, 0) + v
        state.iteration = m
        if accumulator is not None and m % cfg.eval_every == 0:
            accumulator.update(state.theta, cfg, stream.child((2 << 60) + m))
            result.history.append(
                (m, m * cfg.minibatch_docs, accumulator.perplexity()))
    return result
