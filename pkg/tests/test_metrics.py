import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import linalg, stats

from cdp_twin import imaging, metrics
from cdp_twin.errors import NumericalError, ParameterError
from oracles import otsu_exhaustive, pearson_direct, ssim_pixel_loop

small_images = arrays(np.float64, st.tuples(st.integers(2, 16), st.integers(2, 16)),
                      elements=st.floats(0, 1, allow_nan=False))


def test_mse_basics():
    a = np.random.default_rng(0).random((8, 8))
    assert metrics.mse(a, a) == 0.0
    assert metrics.mse(np.zeros((4, 4)), np.ones((4, 4))) == 1.0
    with pytest.raises(ParameterError):
        metrics.mse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_mse_of_independent_fair_fields_is_one_half():
    # E[(a-b)^2] = P(a != b) = 1/2 for independent fair bits; sd of the mean ~ 0.0022
    a = imaging.generate_template(228, 228, 0.5, seed=1)
    b = imaging.generate_template(228, 228, 0.5, seed=2)
    assert metrics.mse(a, b) == pytest.approx(0.5, abs=0.02)


@given(small_images, small_images)
def test_mse_symmetric_nonnegative(a, b):
    if a.shape != b.shape:
        return
    assert metrics.mse(a, b) == metrics.mse(b, a) >= 0


# --- Otsu --------------------------------------------------------------------------


def test_otsu_symmetric_bimodal():
    img = np.array([0.1] * 8 + [0.9] * 8).reshape(4, 4)
    res = metrics.otsu_threshold(img)
    assert 0.1 < res.threshold < 0.9 and not res.degenerate
    assert np.array_equal(metrics.binarize(img), (img > 0.5).astype(np.uint8))


def test_otsu_fixed_16_value_array_matches_exhaustive_search():
    img = np.array([0.05, 0.12, 0.2, 0.22, 0.31, 0.33, 0.4, 0.47,
                    0.52, 0.58, 0.61, 0.7, 0.74, 0.8, 0.91, 0.99]).reshape(4, 4)
    assert metrics.otsu_threshold(img).level == otsu_exhaustive(img)


@settings(max_examples=60, deadline=None)
@given(small_images)
def test_otsu_equals_exhaustive_oracle(img):
    res = metrics.otsu_threshold(img)
    expected = otsu_exhaustive(img)
    if expected is None:
        assert res.degenerate
    else:
        assert res.level == expected


def test_otsu_constant_image_is_degenerate():
    res = metrics.otsu_threshold(np.full((5, 5), 0.3))
    assert res.degenerate
    assert np.all(metrics.binarize(np.full((5, 5), 0.3)) == 0)
    with pytest.raises(ParameterError):
        metrics.otsu_threshold(np.zeros((0, 3)))


def test_binarize_fixed_mode():
    img = np.array([[0.49, 0.5], [0.51, 1.0]])
    assert np.array_equal(metrics.binarize(img, "fixed"), [[0, 1], [1, 1]])


# --- Hamming ----------------------------------------------------------------------------


def test_hamming_basics():
    z = imaging.generate_template(16, 16, 0.5, seed=4)
    assert metrics.hamming(z, z) == 0.0
    assert metrics.hamming(z, 1 - z) == 1.0
    with pytest.raises(ParameterError):
        metrics.hamming(z, z * 0.5)


def test_hamming_independent_fields_binomial_bound():
    n = 228 * 228
    p_fail = 2 * stats.binom.cdf(int(np.ceil(0.48 * n)) - 1, n, 0.5)
    assert p_fail < 1e-3
    for s in range(3):
        a = imaging.generate_template(228, 228, 0.5, seed=10 + s)
        b = imaging.generate_template(228, 228, 0.5, seed=20 + s)
        assert metrics.hamming(a, b) == pytest.approx(0.5, abs=0.02)


# --- SSIM ----------------------------------------------------------------------------


def test_ssim_self_similarity_is_exactly_one():
    a = np.random.default_rng(1).random((20, 17))
    assert metrics.ssim(a, a) == 1.0


def test_ssim_symmetric():
    rng = np.random.default_rng(2)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert abs(metrics.ssim(a, b) - metrics.ssim(b, a)) <= 1e-12


def test_ssim_matches_pixel_loop_oracle():
    rng = np.random.default_rng(3)
    a = rng.random((16, 16))
    b = np.clip(a + 0.2 * rng.standard_normal((16, 16)), 0, 1)
    assert metrics.ssim(a, b) == pytest.approx(ssim_pixel_loop(a, b), abs=1e-9)


def test_ssim_rejects_small_images():
    with pytest.raises(ParameterError):
        metrics.ssim(np.zeros((10, 10)), np.zeros((10, 10)))


# --- Pearson --------------------------------------------------------------------


def test_pearson_affine():
    u = np.random.default_rng(4).random(30)
    assert metrics.pearson(u, 2 * u + 3) == pytest.approx(1.0, abs=1e-12)
    assert metrics.pearson(u, -u) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_ten_elements_matches_direct_formula():
    u = [0.3, 1.2, -0.7, 2.2, 0.0, 0.9, 1.7, -1.1, 0.4, 0.8]
    v = [1.0, 2.1, 0.2, 2.0, 0.5, 0.7, 2.5, -0.3, 0.1, 1.5]
    assert metrics.pearson(u, v) == pytest.approx(pearson_direct(u, v), abs=1e-12)


def test_pearson_zero_variance():
    with pytest.raises(NumericalError):
        metrics.pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ParameterError):
        metrics.pearson([1], [2])


# --- Gaussian stats and Fréchet distance ----------------------------------------------------


def test_gaussian_stats_hand_case():
    g = metrics.gaussian_stats([(0, 0), (2, 0), (0, 2), (2, 2)])
    assert np.allclose(g.mean, [1, 1])
    assert np.allclose(g.cov, np.diag([4 / 3, 4 / 3]))
    assert g.n == 4


def test_gaussian_stats_degenerate_and_precondition():
    g = metrics.gaussian_stats([(1.0, 2.0)] * 5)
    assert np.all(g.cov == 0)
    with pytest.raises(ParameterError):
        metrics.gaussian_stats([(1.0, 2.0)])


def _g1(mu, var):
    return metrics.GaussianStats(np.array([mu]), np.array([[var]]), 10)


@pytest.mark.parametrize("p, q, expected", [
    ((0, 1), (1, 1), 1.0),
    ((0, 4), (0, 1), 1.0),
    ((2, 9), (2, 9), 0.0),
])
def test_frechet_one_dimensional_cases(p, q, expected):
    assert metrics.frechet_distance(_g1(*p), _g1(*q)) == pytest.approx(expected, abs=1e-12)


@given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(-10, 10), st.floats(0.01, 10))
def test_frechet_one_dimensional_closed_form(m1, s1, m2, s2):
    d = metrics.frechet_distance(_g1(m1, s1 ** 2), _g1(m2, s2 ** 2))
    assert d == pytest.approx((m1 - m2) ** 2 + (s1 - s2) ** 2, abs=1e-9)


def test_frechet_matches_scipy_sqrtm_in_several_dimensions():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((200, 4))
    b = rng.standard_normal((150, 4)) @ rng.standard_normal((4, 4)) + 0.5
    p, q = metrics.gaussian_stats(a), metrics.gaussian_stats(b)
    root = linalg.sqrtm(p.cov @ q.cov).real
    ref = np.sum((p.mean - q.mean) ** 2) + np.trace(p.cov + q.cov - 2 * root)
    assert metrics.frechet_distance(p, q) == pytest.approx(ref, rel=1e-8)
    assert metrics.frechet_distance(p, q) == pytest.approx(metrics.frechet_distance(q, p), rel=1e-9)


def test_frechet_dimension_mismatch_and_non_psd():
    p = metrics.gaussian_stats(np.random.default_rng(0).random((5, 2)))
    with pytest.raises(ParameterError):
        metrics.frechet_distance(p, _g1(0, 1))
    bad = metrics.GaussianStats(np.zeros(2), np.diag([1.0, -1.0]), 5)
    with pytest.raises(NumericalError):
        metrics.frechet_distance(bad, p)


# --- features -----------------------------------------------------------------------------


def test_patch_features_constant_image_one_hot():
    f = metrics.patch_histogram_features(np.full((8, 8), 0.6), patch=4, bins=4)
    assert f.shape == (4, 4)
    assert np.all(f[:, 2] == 1.0) and np.all(f.sum(axis=1) == 1.0)


def test_patch_features_checkerboard():
    cb = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
    f = metrics.patch_histogram_features(cb, patch=8, bins=2)
    assert np.array_equal(f, [[0.5, 0.5]])


@given(arrays(np.float64, (12, 12), elements=st.floats(0, 1, allow_nan=False)), st.integers(1, 12), st.integers(1, 10))
def test_patch_features_normalized(img, patch, bins):
    f = metrics.patch_histogram_features(img, patch, bins)
    assert np.allclose(f.sum(axis=1), 1.0, atol=1e-12, rtol=0)


def test_patch_features_patch_too_large():
    with pytest.raises(ParameterError):
        metrics.patch_histogram_features(np.zeros((4, 4)), patch=5)


def test_report_csv_header_order():
    row = metrics.MetricReport("m", 1.0, 0.1, 2.0, 0.01, 0.9)
    text = metrics.report_csv([row])
    assert text.splitlines()[0] == "model,pfid_x2z,hamming,pfid_z2x,mse,ssim"
    assert text.splitlines()[1] == "m,1.000000,0.100000,2.000000,0.010000,0.900000"
