import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jsbbvi.dists import NormalParams, normal_logpdf, normal_score
from jsbbvi.estimators import (
    Estimator,
    clip_factor,
    collect_samples,
    estimate_gradient,
    estimate_sigma2,
    js_plus_gradient,
    js_shrink_factor,
    naive_gradient,
    rb_gradient,
    rb_plus_from_summands,
    rb_plus_gradient,
)
from jsbbvi.model import Dataset, GmmSpec, LatentDraw, VariationalParams, generate_gmm_data, init_params, rb_summands


def toy_problem(K=3, N=20, seed=0):
    data = generate_gmm_data(K, N, sigma2=3.0, seed=seed)
    spec = GmmSpec(K, 1, tau2=10.0, sigma2=3.0)
    lam = init_params(spec, data, np.random.default_rng(seed))
    return data, spec, lam


finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_collect_samples_requires_two():
    data, spec, lam = toy_problem()
    with pytest.raises(ValueError):
        collect_samples(lam, data, spec, 1, np.random.default_rng(0))


def test_collect_samples_deterministic_and_shaped():
    data, spec, lam = toy_problem()
    a = collect_samples(lam, data, spec, 7, np.random.default_rng(3))
    b = collect_samples(lam, data, spec, 7, np.random.default_rng(3))
    assert a.z.shape == (7, lam.p)
    np.testing.assert_array_equal(a.z, b.z)


def test_zero_log_weight_gives_zero_sample():
    data, spec, lam = toy_problem()
    s = collect_samples(lam, data, spec, 4, np.random.default_rng(0))
    s.log_weights[2] = 0.0
    np.testing.assert_array_equal(s.z[2], 0.0)


def test_naive_gradient_examples():
    z = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(naive_gradient(np.tile(z, (5, 1))).g, z)
    np.testing.assert_array_equal(naive_gradient(np.stack([z, -z])).g, 0.0)
    rng = np.random.default_rng(1)
    m = rng.normal(size=(40, 9))
    est = naive_gradient(m)
    np.testing.assert_allclose(est.g, [sum(col) / 40 for col in m.T], atol=1e-12)
    assert est.shrink_factor == 1.0 and est.estimator is Estimator.NAIVE
    with pytest.raises(ValueError):
        naive_gradient(np.zeros((0, 3)))


def test_estimate_sigma2_examples():
    assert estimate_sigma2(np.array([[0.0], [2.0]])) == pytest.approx(1.0)
    assert estimate_sigma2(np.ones((6, 4))) == 0.0
    with pytest.raises(ValueError):
        estimate_sigma2(np.ones((1, 4)))


def test_estimate_sigma2_two_pass_oracle():
    rng = np.random.default_rng(2)
    z = rng.normal(loc=5.0, scale=3.0, size=(31, 6))
    S, p = z.shape
    total = 0.0
    for j in range(p):
        mean = sum(z[:, j]) / S
        total += sum((x - mean) ** 2 for x in z[:, j]) / (S - 1)
    assert estimate_sigma2(z) == pytest.approx(total / p / S, rel=1e-10)


@pytest.mark.parametrize("norm2,p,s2,want", [(4.0, 5, 1.0, 0.5), (1.0, 5, 1.0, 0.0), (7.0, 3, 9.0, 1.0),
                                             (0.0, 3, 1.0, 1.0), (0.0, 8, 1.0, 0.0), (5.0, 8, 0.0, 1.0)])
def test_js_shrink_factor_cases(norm2, p, s2, want):
    assert js_shrink_factor(norm2, p, s2) == pytest.approx(want)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1e6), st.integers(1, 500), st.floats(0, 1e3))
def test_js_shrink_factor_range_and_zero_condition(norm2, p, s2):
    f = js_shrink_factor(norm2, p, s2)
    assert 0.0 <= f <= 1.0
    if p > 3:
        assert (f == 0.0) == (norm2 <= (p - 3) * s2)


def test_js_plus_freezes_when_factor_zero():
    z = np.array([[1.0, -1.0, 1.0, -1.0, 1.0], [-1.0, 1.0, -1.0, 1.0, -0.9]])
    est = js_plus_gradient(z)
    assert est.shrink_factor == 0.0
    np.testing.assert_array_equal(est.g, np.zeros(5))


def test_js_plus_identical_samples_not_shrunk():
    z = np.tile(np.arange(1.0, 8.0), (4, 1))
    est = js_plus_gradient(z)
    assert est.sigma2_hat == 0.0 and est.shrink_factor == 1.0
    np.testing.assert_array_equal(est.g, z[0])


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.tuples(st.integers(2, 12), st.integers(1, 15)), elements=finite))
def test_js_plus_is_shrunk_collinear_copy_of_naive(z):
    naive = naive_gradient(z).g
    est = js_plus_gradient(z)
    assert 0.0 <= est.shrink_factor <= 1.0
    assert est.norm <= np.linalg.norm(naive) * (1 + 1e-12)
    np.testing.assert_array_equal(est.g, est.shrink_factor * naive)


def test_rb_single_component_equals_naive():
    spec = GmmSpec(1, 1, tau2=2.0, sigma2=1.0)
    data = Dataset([[0.7]])
    lam = VariationalParams([[0.4]], [[-0.3]], np.zeros((1, 1)))
    s = collect_samples(lam, data, spec, 50, np.random.default_rng(0))
    rb = rb_gradient(lam, data, spec, s.draws).g
    naive = naive_gradient(s).g
    # the logit score is identically zero for K=1, and mu's blanket differs from
    # the full log-weight only by the constant log q(z)=0 and log p(z)=0
    np.testing.assert_allclose(rb, naive, atol=1e-12)


def test_rb_unassigned_component_uses_prior_minus_q():
    data, spec, lam = toy_problem(K=2, N=6)
    draws = LatentDraw(np.array([[[1.0]], [[-2.0]]]).reshape(1, 2, 1).repeat(3, axis=0), np.zeros((3, 6), dtype=int))
    summ = rb_summands(lam, draws, data, spec)
    mu1 = -2.0
    diff = normal_logpdf(mu1, NormalParams(0.0, spec.tau2)) - normal_logpdf(mu1, NormalParams(lam.m[1, 0], lam.var[1, 0]))
    dm, dls = normal_score(mu1, NormalParams(lam.m[1, 0], lam.var[1, 0]))
    kd = spec.K * spec.d
    np.testing.assert_allclose(summ[:, 1], dm * diff, rtol=1e-12)
    np.testing.assert_allclose(summ[:, kd + 1], dls * diff, rtol=1e-12)


def test_rb_plus_factor_one_equals_rb():
    summands = np.random.default_rng(4).normal(loc=1e4, scale=1.0, size=(20, 10))
    est = rb_plus_from_summands(summands)
    assert est.shrink_factor == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(est.g, summands.mean(axis=0), rtol=1e-8)


def test_rb_plus_no_longer_than_rb():
    data, spec, lam = toy_problem(K=4, N=30)
    rng = np.random.default_rng(5)
    for _ in range(20):
        s = collect_samples(lam, data, spec, 20, rng)
        rb = rb_gradient(lam, data, spec, s.draws)
        rbp = rb_plus_gradient(lam, data, spec, s.draws)
        assert rbp.norm <= rb.norm * (1 + 1e-12)
        np.testing.assert_allclose(rbp.g, rbp.shrink_factor * rb.g, rtol=1e-12, atol=1e-300)


def test_rb_and_naive_agree_in_expectation():
    data, spec, lam = toy_problem(K=2, N=5, seed=3)
    s = collect_samples(lam, data, spec, 40_000, np.random.default_rng(6))
    naive = s.z
    rb = rb_summands(lam, s.draws, data, spec)
    diff = naive - rb
    se = diff.std(axis=0, ddof=1) / np.sqrt(len(diff))
    zscores = diff.mean(axis=0) / np.where(se > 0, se, 1.0)
    assert np.max(np.abs(zscores)) < 4.5


def test_rb_per_block_variance_below_naive_k5():
    data, spec, lam = toy_problem(K=5, N=200, seed=1)
    rng = np.random.default_rng(7)
    s = collect_samples(lam, data, spec, 500, rng)
    rb = rb_summands(lam, s.draws, data, spec)
    idx = rng.integers(0, 500, size=(100, 500))
    v_naive = s.z[idx].mean(axis=1).var(axis=0, ddof=1)
    v_rb = rb[idx].mean(axis=1).var(axis=0, ddof=1)
    kd = spec.K * spec.d
    for block in (slice(0, kd), slice(kd, 2 * kd), slice(2 * kd, None)):
        assert v_rb[block].mean() <= v_naive[block].mean()


@pytest.mark.parametrize("norm,c,squared,want", [(2.0, 2.0, True, 0.5), (1.0, 2.0, True, 1.0), (4.0, 2.0, False, 0.5),
                                                 (1.0, 2.0, False, 1.0), (0.0, 1.0, True, 1.0)])
def test_clip_factor_cases(norm, c, squared, want):
    assert clip_factor(norm, c, squared) == want


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_clip_factor_rejects_bad_radius(c):
    with pytest.raises(ValueError):
        clip_factor(1.0, c)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(4, 200), st.floats(1e-6, 10))
def test_shrink_is_complement_of_squared_clip(norm, p, s2):
    c = (p - 3) * s2
    assert js_shrink_factor(norm * norm, p, s2) == 1.0 - clip_factor(norm, c, squared=True)


@pytest.mark.parametrize("method", list(Estimator))
def test_estimate_gradient_dispatch(method):
    data, spec, lam = toy_problem()
    est, samples = estimate_gradient(method, lam, data, spec, 30, np.random.default_rng(0))
    assert est.estimator is method
    assert est.g.shape == (lam.p,) and np.all(np.isfinite(est.g))
    assert 0.0 <= est.shrink_factor <= 1.0
    if not method.shrinks:
        assert est.shrink_factor == 1.0 and est.sigma2_hat == 0.0


def test_estimator_labels():
    assert [e.label for e in Estimator] == ["Naive", "JS+", "RB", "RB+"]
    assert Estimator("js") is Estimator.JS_PLUS
