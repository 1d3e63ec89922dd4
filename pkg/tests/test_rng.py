import numpy as np
import pytest
import scipy.stats as st
from hypothesis import given, settings
from hypothesis import strategies as hst

from cirsimplex import ParameterError, RngStream


def test_same_key_same_sequence():
    a = RngStream(123, 7).uniform(100)
    b = RngStream(123, 7).uniform(100)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RngStream(123, 0).uniform(100)
    b = RngStream(123, 1).uniform(100)
    c = RngStream(124, 0).uniform(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_child_streams_are_deterministic_and_distinct():
    root = RngStream(5)
    assert root.child(3).stream_id == root.child(3).stream_id
    assert root.child(3).stream_id != root.child(4).stream_id
    # child of child differs from sibling child
    assert root.child(1).child(2).stream_id != root.child(2).child(1).stream_id
    x = root.child(9).normal(50)
    y = RngStream(5).child(9).normal(50)
    assert np.array_equal(x, y)


def test_seed_validation():
    with pytest.raises(ParameterError):
        RngStream(-1)
    with pytest.raises(ParameterError):
        RngStream(1 << 64)
    with pytest.raises(ParameterError):
        RngStream(0, -2)


def test_gamma_moments():
    s = RngStream(77)
    x = s.gamma(3.0, rate=2.0, size=200_000)
    assert x.mean() == pytest.approx(1.5, abs=4 * 1.5 / np.sqrt(3 * 200_000))
    assert x.var() == pytest.approx(0.75, rel=0.05)


def test_gamma_small_shape_matches_reference_law():
    # shape < 1 is the regime that matters for sparse categories
    x = RngStream(78).gamma(0.1, size=100_000)
    assert st.kstest(x, st.gamma(0.1).cdf).pvalue > 1e-3


def test_gamma_validation():
    s = RngStream(0)
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ParameterError):
            s.gamma(bad)
    with pytest.raises(ParameterError):
        s.gamma(1.0, rate=0.0)


def test_noncentral_chisq_moments():
    s = RngStream(81)
    for dof, nonc in ((2.0, 3.0), (0.2, 5.0), (7.5, 0.0)):
        x = s.noncentral_chisq(dof, nonc, size=400_000)
        mean, var = dof + nonc, 2 * (dof + 2 * nonc)
        se_mean = np.sqrt(var / x.size)
        assert abs(x.mean() - mean) < 4 * se_mean
        assert x.var() == pytest.approx(var, rel=0.05)


def test_noncentral_chisq_fractional_dof_law():
    x = RngStream(82).noncentral_chisq(0.2, 1.7, size=100_000)
    assert st.kstest(x, st.ncx2(0.2, 1.7).cdf).pvalue > 1e-3


def test_noncentral_chisq_zero_noncentrality_is_chisq():
    x = RngStream(83).noncentral_chisq(4.0, 0.0, size=100_000)
    assert st.kstest(x, st.chi2(4.0).cdf).pvalue > 1e-3


def test_noncentral_chisq_validation():
    s = RngStream(0)
    with pytest.raises(ParameterError):
        s.noncentral_chisq(0.0, 1.0)
    with pytest.raises(ParameterError):
        s.noncentral_chisq(1.0, -0.5)


def test_hypergeometric_goodness_of_fit():
    npop, nsucc, ndraw = 30, 12, 9
    draws = RngStream(91).hypergeometric(npop, nsucc, ndraw, size=20_000)
    lo, hi = max(0, ndraw - (npop - nsucc)), min(nsucc, ndraw)
    support = np.arange(lo, hi + 1)
    pmf = st.hypergeom(npop, nsucc, ndraw).pmf(support)
    observed = np.array([(draws == k).sum() for k in support])
    chi2 = (((observed - draws.size * pmf) ** 2) / (draws.size * pmf)).sum()
    assert st.chi2(len(support) - 1).sf(chi2) > 1e-3


def test_hypergeometric_edge_cases():
    s = RngStream(92)
    assert np.all(s.hypergeometric(10, 0, 5, size=20) == 0)
    assert np.all(s.hypergeometric(10, 10, 5, size=20) == 5)
    assert np.all(s.hypergeometric(10, 4, 0, size=20) == 0)
    with pytest.raises(ParameterError):
        s.hypergeometric(10, 11, 5)
    with pytest.raises(ParameterError):
        s.hypergeometric(10, 5, 11)


@settings(max_examples=50, deadline=None)
@given(hst.integers(0, 40), hst.data())
def test_without_replacement_is_sorted_unique_in_range(n_pop, data):
    n = data.draw(hst.integers(0, n_pop))
    idx = RngStream(7).child(n_pop * 64 + n).without_replacement(n_pop, n)
    assert len(idx) == n
    assert np.all(np.diff(idx) > 0) if n > 1 else True
    assert np.all((idx >= 0) & (idx < max(n_pop, 1)))


def test_without_replacement_uniform_inclusion():
    # each index should appear with probability n/N
    s, counts = RngStream(93), np.zeros(20)
    reps = 4000
    for _ in range(reps):
        counts[s.without_replacement(20, 5)] += 1
    p = 5 / 20
    se = np.sqrt(p * (1 - p) / reps)
    assert np.all(np.abs(counts / reps - p) < 5 * se)


def test_categorical_frequencies():
    p = np.array([0.5, 0.3, 0.15, 0.05])
    draws = RngStream(94).categorical(p, size=100_000)
    freqs = np.bincount(draws, minlength=4) / draws.size
    assert np.allclose(freqs, p, atol=0.01)
    with pytest.raises(ParameterError):
        RngStream(0).categorical([0.5, 0.6])


def test_poisson_validation():
    with pytest.raises(ParameterError):
        RngStream(0).poisson(-1.0)
