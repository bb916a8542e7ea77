import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from puncturing.errors import ConfigError, InputError
from puncturing.kernel import build_kernel
from puncturing.masks import MaskConfig, gen_data_mask, gen_kernel_mask
from puncturing.synth import (
    GmmModel,
    GroundTruth,
    SpikedPcaModel,
    class_sizes,
    classify_by_sign,
    draw_class_means,
    sample_gmm,
    sample_spiked_pca,
    two_class_means,
)
from puncturing.theory import SpikeSpectrum


def _population_spectrum(x_minus_noise, n, k):
    """Top ``k`` eigenvalues of (1/n) P^H P straight from the signal matrix."""
    vals = np.linalg.eigvalsh(x_minus_noise.conj().T @ x_minus_noise / n)[::-1]
    return vals[:k]


def test_null_model():
    x, truth = sample_gmm(GmmModel(30, np.zeros((30, 1)), (1.0,), seed=1), 50)
    assert x.shape == (30, 50)
    assert truth.spike_spectrum.values == (0.0,)
    np.testing.assert_allclose(truth.v[:, 0] ** 2, 1 / 50)


def test_symmetric_two_class():
    p, n = 400, 1000
    means = two_class_means(p, 50.0, seed=3)
    assert np.sum(means[:, 0] ** 2) == pytest.approx(50.0)
    x, truth = sample_gmm(GmmModel(p, means, (0.5, 0.5), seed=3), n)
    spectrum = truth.spike_spectrum
    assert spectrum.values[0] == pytest.approx(50.0, rel=1e-12)
    assert spectrum.values[1] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(np.abs(truth.v[:, 0]), 1 / np.sqrt(n), rtol=1e-12)
    signs = np.sign(truth.v[:, 0])
    assert np.all(signs[:500] == signs[0]) and np.all(signs[500:] == -signs[0])
    assert truth.labels.tolist() == [0] * 500 + [1] * 500


def test_gmm_spectrum_equals_signal_gram():
    p, n = 50, 300
    means = draw_class_means(p, [[10, 5.5], [5.5, 15]], seed=4)
    model = GmmModel(p, means, (0.4, 0.6), seed=4)
    x, truth = sample_gmm(model, n)
    signal = means[:, truth.labels]
    np.testing.assert_allclose(truth.spike_spectrum.values, _population_spectrum(signal, n, 2), rtol=1e-10)
    # P = L V^H with V the returned basis
    lmat = signal @ truth.v
    np.testing.assert_allclose(lmat @ truth.v.T, signal, atol=1e-10)


def test_fig1_means_spectrum_large_p():
    cov = np.array([[10, 5.5], [5.5, 15]])
    pi = np.array([0.4, 0.6])
    d = np.diag(np.sqrt(pi))
    expected = np.linalg.eigvalsh(d @ cov @ d)[::-1]
    p = 40000
    got = []
    for seed in range(5):
        means = draw_class_means(p, cov, seed=seed)
        _, truth = sample_gmm(GmmModel(p, means, tuple(pi), seed=seed), 10)
        got.append(truth.spike_spectrum.values)
    np.testing.assert_allclose(np.mean(got, axis=0), expected, rtol=0.02)


def test_class_sizes():
    assert class_sizes(10, (0.4, 0.6)).tolist() == [4, 6]
    assert class_sizes(7, (1 / 3, 1 / 3, 1 / 3)).sum() == 7
    drawn = class_sizes(1000, (0.3, 0.7), multinomial=True, seed=2)
    assert drawn.sum() == 1000 and abs(drawn[0] - 300) < 60


@given(st.integers(1, 500), st.lists(st.floats(0.01, 1), min_size=1, max_size=6))
def test_class_sizes_sum(n, weights):
    pi = np.array(weights) / np.sum(weights)
    sizes = class_sizes(n, pi)
    assert sizes.sum() == n
    assert np.all(np.abs(sizes - n * pi) < 1)


def test_gmm_validation():
    with pytest.raises(ConfigError):
        GmmModel(3, np.zeros((3, 2)), (0.5, 0.6))
    with pytest.raises(ConfigError):
        GmmModel(3, np.zeros((4, 2)), (0.5, 0.5))
    with pytest.raises(ConfigError):
        GmmModel(3, np.full((3, 1), np.inf), (1.0,))
    model = GmmModel(3, np.zeros((3, 2)), (0.5, 0.5))
    with pytest.raises(ConfigError):
        sample_gmm(model, 1)
    with pytest.raises(ConfigError):
        sample_gmm(GmmModel(3, np.zeros((3, 2)), (0.999, 0.001)), 10)


def test_gmm_deterministic():
    model = GmmModel(20, draw_class_means(20, np.eye(2), seed=1), (0.5, 0.5), seed=9)
    a, ta = sample_gmm(model, 40)
    b, tb = sample_gmm(model, 40)
    assert np.array_equal(a, b) and np.array_equal(ta.v, tb.v)


def test_complex_path_gives_hermitian_kernel():
    model = GmmModel(30, draw_class_means(30, np.eye(2), seed=1), (0.5, 0.5), seed=2, complex_data=True)
    x, _ = sample_gmm(model, 40)
    assert np.iscomplexobj(x)
    cfg = MaskConfig(0.5, 0.5, 1, seed=1)
    k = build_kernel(x, gen_data_mask(30, 40, cfg), gen_kernel_mask(40, cfg)).to_dense()
    np.testing.assert_allclose(k, k.conj().T, atol=1e-15)


def test_spiked_null():
    x, truth = sample_spiked_pca(SpikedPcaModel(20, 10, np.zeros((20, 1)), seed=1))
    assert x.shape == (10, 20)
    assert truth.v.shape == (20, 0) and truth.spike_spectrum.k == 0


def test_spiked_single_spike():
    n = p = 2000
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    model = SpikedPcaModel(n, p, np.sqrt(50.0) * v[:, None], seed=5)
    x, truth = sample_spiked_pca(model)
    assert truth.spike_spectrum.values[0] == pytest.approx(50.0, rel=0.1)
    assert abs(abs(truth.v[:, 0] @ v) - 1) <= 1e-12
    assert truth.delocalization <= 4 * np.log(n) / np.sqrt(n)


def test_spiked_spectrum_equals_signal_gram():
    n, p = 300, 120
    rng = np.random.default_rng(1)
    a = rng.standard_normal((n, 3)) * [3.0, 2.0, 1.0]
    model = SpikedPcaModel(n, p, a, seed=2)
    x, truth = sample_spiked_pca(model)
    z = sample_spiked_pca(SpikedPcaModel(n, p, np.zeros((n, 3)), seed=2))[0]
    signal = x - z
    np.testing.assert_allclose(truth.spike_spectrum.values, _population_spectrum(signal, n, 3), rtol=1e-9)


def test_spiked_rank_deficient_warns():
    n = 50
    rng = np.random.default_rng(0)
    col = rng.standard_normal(n)
    a = np.column_stack([col, 2 * col])
    with pytest.warns(RuntimeWarning):
        _, truth = sample_spiked_pca(SpikedPcaModel(n, 20, a, seed=1))
    assert truth.v.shape == (n, 1)


def test_ground_truth_isometry():
    with pytest.raises(InputError):
        GroundTruth(2 * np.eye(3)[:, :1], SpikeSpectrum((1.0,), (1,)))


def test_classify_by_sign():
    labels = np.r_[np.ones(50), -np.ones(50)]
    v = labels / 10
    assert classify_by_sign(v, labels) == 0
    assert classify_by_sign(-v, labels) == 0
    w = v.copy()
    w[:5] *= -1
    assert classify_by_sign(w, labels) == pytest.approx(0.05)
    with pytest.raises(InputError):
        classify_by_sign(v, np.r_[np.ones(50), np.zeros(50)])
    with pytest.raises(InputError):
        classify_by_sign(v[:10], labels)


def test_classify_random_vector_near_half():
    n = 10000
    labels = np.r_[np.ones(n // 2), -np.ones(n // 2)]
    v = np.random.default_rng(3).standard_normal(n)
    err = classify_by_sign(v, labels)
    assert 0.5 - err <= 3 * np.sqrt(0.25 / n)


def test_signal_consistency_over_seeds():
    """(1/n) eigenvalues of P^H P track the generating spectrum at n = 4000."""
    n = p = 4000
    rng = np.random.default_rng(7)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    errs = []
    for seed in range(10):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            _, truth = sample_spiked_pca(SpikedPcaModel(n, p, np.sqrt(50.0) * v[:, None], seed=seed))
        errs.append(truth.spike_spectrum.values[0] / 50.0 - 1)
    assert abs(np.mean(errs)) <= 0.05
