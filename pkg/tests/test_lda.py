import numpy as np
import pytest
import scipy.stats as st

from cirsimplex import (ConfigError, LDA_KERNELS, LdaConfig,
                        PerplexityAccumulator, RngStream,
                        enumerate_assignment_pmf, gibbs_assignment_samples,
                        gibbs_doc_counts, refresh_anchor, split_holdout,
                        synthetic_corpus, topic_simplex, train_lda)
from cirsimplex.lda import lda_transition


THETA2 = np.array([[0.5, 0.3, 0.2],
                   [0.1, 0.2, 0.7]])


def test_gibbs_count_identities():
    words = np.array([0, 1, 2])
    counts = np.array([2, 1, 3])
    acc_kw, acc_nk = gibbs_doc_counts(RngStream(21), THETA2, 1.1, words,
                                      counts, sweeps=40)
    # per-topic word counts sum to the topic totals, which sum to doc length
    assert np.allclose(acc_kw.sum(axis=1), acc_nk)
    assert acc_nk.sum() == pytest.approx(counts.sum())
    assert np.all(acc_kw >= 0)


def test_enumeration_pmf_is_normalized_and_favors_likely_topics():
    tokens = np.array([2, 2, 2])
    p = enumerate_assignment_pmf(THETA2, 1.1, tokens)
    assert len(p) == 2 ** 3
    assert p.sum() == pytest.approx(1.0)
    # all-topic-1 beats all-topic-0 for tokens that topic 1 emits 3.5x more
    assert p[-1] > p[0]


def _assignment_index(z, K):
    idx = 0
    for zi in z:
        idx = idx * K + int(zi)
    return idx


def test_gibbs_sampler_matches_enumeration():
    # chi-square goodness of fit of thinned Gibbs samples against the exact
    # assignment law of one short document
    tokens = np.array([0, 1, 2, 0, 1])
    K, alpha = 2, 1.1
    pmf = enumerate_assignment_pmf(THETA2, alpha, tokens)
    zs = gibbs_assignment_samples(RngStream(22), THETA2, alpha, tokens,
                                  sweeps=40_000, thin=10)
    counts = np.zeros(len(pmf))
    for z in zs:
        counts[_assignment_index(z, K)] += 1
    expected = len(zs) * pmf
    # pool cells with small expectation
    order = np.argsort(-expected)
    exp_p, obs_p = [], []
    acc_e = acc_o = 0.0
    for i in order:
        acc_e += expected[i]
        acc_o += counts[i]
        if acc_e >= 5:
            exp_p.append(acc_e)
            obs_p.append(acc_o)
            acc_e = acc_o = 0.0
    if acc_e > 0:
        exp_p[-1] += acc_e
        obs_p[-1] += acc_o
    exp_p, obs_p = np.array(exp_p), np.array(obs_p)
    chi2 = (((obs_p - exp_p) ** 2) / exp_p).sum()
    pval = st.chi2(len(exp_p) - 1).sf(chi2)
    assert pval > 1e-3, f"gibbs law mismatch: chi2={chi2:.1f} p={pval:.2e}"


def test_gibbs_counts_match_enumeration_expectation():
    tokens = np.array([0, 1, 2, 2])
    pmf = enumerate_assignment_pmf(THETA2, 1.1, tokens)
    # expected count of topic 1 over the exact law
    e_n1 = 0.0
    import itertools
    for p, z in zip(pmf, itertools.product(range(2), repeat=len(tokens))):
        e_n1 += p * sum(z)
    words, counts = np.unique(tokens, return_counts=True)
    _, acc_nk = gibbs_doc_counts(RngStream(23), THETA2, 1.1, words, counts,
                                 sweeps=60_000)
    assert acc_nk[1] == pytest.approx(e_n1, abs=0.03)


def small_corpus(seed=30, n_docs=40):
    return synthetic_corpus(RngStream(seed), n_docs, 25, 3, 18)[0]


def desk_config(kernel, **kw):
    base = dict(n_topics=3, minibatch_docs=8, refresh_docs=30, gibbs_sweeps=16,
                eval_gibbs_sweeps=8, kernel=kernel, eval_every=4)
    base.update(kw)
    return LdaConfig(**base)


@pytest.mark.parametrize("kernel", LDA_KERNELS)
def test_all_kernels_train_finite(kernel):
    corp = small_corpus()
    split = split_holdout(RngStream(31), corp, 6, 0.2)
    res = train_lda(split.train, desk_config(kernel), RngStream(32), 8,
                    split=split)
    assert np.all(np.isfinite(res.state.theta))
    assert np.all(res.state.theta >= 0)
    assert res.history and np.isfinite(res.history[-1][2])
    assert res.history[-1][2] > 0


def test_training_is_deterministic():
    corp = small_corpus()
    r1 = train_lda(corp, desk_config("cv-alt"), RngStream(33), 10)
    r2 = train_lda(corp, desk_config("cv-alt"), RngStream(33), 10)
    assert np.array_equal(r1.state.theta, r2.state.theta)
    assert r1.counters == r2.counters


def test_thread_count_does_not_change_results():
    corp = small_corpus()
    r1 = train_lda(corp, desk_config("cv-main", n_threads=1), RngStream(34), 6)
    r4 = train_lda(corp, desk_config("cv-main", n_threads=4), RngStream(34), 6)
    assert np.array_equal(r1.state.theta, r4.state.theta)


def test_uniform_topics_give_vocabulary_perplexity():
    # omega uniform makes every test token probability exactly 1/W
    corp = small_corpus(seed=35)
    split = split_holdout(RngStream(36), corp, 8, 0.2)
    acc = PerplexityAccumulator(split, alpha=1.1)
    theta = np.full((3, corp.n_words), 2.0)
    acc.update(theta, desk_config("scir"), RngStream(37))
    assert acc.perplexity() == pytest.approx(corp.n_words, rel=1e-12)


def test_perplexity_averages_over_updates():
    corp = small_corpus(seed=38)
    split = split_holdout(RngStream(39), corp, 8, 0.2)
    cfg = desk_config("scir")
    uniform = np.full((3, corp.n_words), 1.0)
    peaked = RngStream(40).gamma(0.2, 1.0, (3, corp.n_words))

    acc = PerplexityAccumulator(split, alpha=1.1)
    acc.update(uniform, cfg, RngStream(41))
    p_uni = acc.perplexity()
    acc.update(peaked, cfg, RngStream(42))
    p_mix = acc.perplexity()
    assert acc.n_samples == 2
    assert p_mix != p_uni and np.isfinite(p_mix) and p_mix > 0


def test_anchor_rows_sum_to_prior_mass():
    # sum_w of centered counts vanishes per topic, leaving beta * n_words
    corp = small_corpus(seed=43)
    cfg = desk_config("cv-alt")
    theta = RngStream(44).gamma(1.0, 1.0, (3, corp.n_words))
    anchor = refresh_anchor(theta, corp, cfg, RngStream(45))
    assert np.allclose(anchor.sum(axis=1), cfg.beta * corp.n_words, atol=1e-8)


def test_transition_floors_and_guards():
    cfg = desk_config("cv-alt", ahat_floor=0.01)
    theta = np.full((1, 3), 1.0)
    a_hat = np.array([[-0.4, 2.0, 0.5]])       # first entry under the floor
    anchor = np.array([[1.001, 3.0, 1.002]])   # tiny positive modes
    out, counters = lda_transition(RngStream(46), theta, a_hat, anchor, 1.0, cfg)
    assert counters["floored"] == 1
    # b_hat = (0.01-1)/0.001 and (0.5-1)/0.002 are far below the -2 guard
    assert counters["alt_guard"] == 2
    assert counters["fallback_scir"] == 2
    assert out.shape == theta.shape and np.all(np.isfinite(out))

    sg = lda_transition(RngStream(46), theta, a_hat, anchor, 1.0,
                        desk_config("sgrld"))[1]
    assert sg["floored"] == 0  # langevin kernel takes a_hat raw


def test_topic_simplex_rows():
    theta = np.array([[2.0, 2.0], [1.0, 3.0]])
    om = topic_simplex(theta)
    assert np.allclose(om, [[0.5, 0.5], [0.25, 0.75]])


def test_config_validation():
    with pytest.raises(ConfigError):
        LdaConfig(n_topics=0)
    with pytest.raises(ConfigError):
        LdaConfig(n_topics=2, kernel="exact")
    with pytest.raises(ConfigError):
        LdaConfig(n_topics=2, alpha=0.0)
    with pytest.raises(ConfigError):
        LdaConfig(n_topics=2, minibatch_docs=0)
    with pytest.raises(ConfigError):
        LdaConfig(n_topics=2, gibbs_sweeps=1)
