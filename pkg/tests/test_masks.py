import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from puncturing.errors import ConfigError, DimensionError
from puncturing.masks import DataMask, KernelMask, MaskConfig, gen_data_mask, gen_kernel_mask


def test_full_offdiagonal_pattern():
    b = gen_kernel_mask(3, MaskConfig(1.0, 1.0, 0))
    assert b.pairs().tolist() == [[0, 1], [0, 2], [1, 2]]
    assert b.diag == 0
    assert b.stored_entries == 3


def test_single_node_keeps_only_diagonal():
    b = gen_kernel_mask(1, MaskConfig(0.5, 0.3, 1))
    assert b.nnz_pairs == 0 and b.diag == 1
    assert b.to_dense().tolist() == [[True]]


def test_stored_pairs_binomial_band():
    n, eps = 2000, 0.04
    b = gen_kernel_mask(n, MaskConfig(0.5, eps, 1, seed=11))
    total = n * (n - 1) // 2
    sigma = np.sqrt(total * eps * (1 - eps))
    assert abs(b.nnz_pairs - eps * total) <= 3 * sigma
    assert b.stored_entries == b.nnz_pairs + n


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.5, float("nan")])
def test_invalid_probability(eps):
    with pytest.raises(ConfigError):
        MaskConfig(eps, 0.5)
    with pytest.raises(ConfigError):
        MaskConfig(0.5, eps)


def test_invalid_diag_flag():
    with pytest.raises(ConfigError):
        MaskConfig(0.5, 0.5, 2)


def test_bad_dimensions():
    cfg = MaskConfig(0.5, 0.5)
    with pytest.raises(DimensionError):
        gen_data_mask(0, 3, cfg)
    with pytest.raises(DimensionError):
        gen_kernel_mask(0, cfg)


def test_determinism_and_seed_sensitivity():
    cfg = MaskConfig(0.3, 0.2, 1, seed=5)
    assert gen_data_mask(40, 70, cfg) == gen_data_mask(40, 70, cfg)
    assert gen_kernel_mask(70, cfg) == gen_kernel_mask(70, cfg)
    other = MaskConfig(0.3, 0.2, 1, seed=6)
    assert gen_data_mask(40, 70, cfg) != gen_data_mask(40, 70, other)
    assert gen_kernel_mask(70, cfg) != gen_kernel_mask(70, other)


def test_masks_use_independent_streams():
    cfg = MaskConfig(0.5, 0.5, 0, seed=3)
    s = gen_data_mask(1, 45, cfg).to_dense().ravel()
    upper = gen_kernel_mask(10, cfg).to_dense()[np.triu_indices(10, 1)]
    assert not np.array_equal(s, upper)


@pytest.mark.parametrize("seed", range(5))
def test_density_concentration(seed):
    p, n, eps = 300, 400, 0.2
    s = gen_data_mask(p, n, MaskConfig(eps, 0.5, seed=seed))
    assert abs(s.density() - eps) <= 4 * np.sqrt(eps * (1 - eps) / (p * n))


def test_column_words_match_dense():
    s = gen_data_mask(130, 9, MaskConfig(0.4, 1.0, seed=2))
    words = s.column_words()
    dense = s.to_dense()
    assert words.shape == (9, 3)
    for i in range(9):
        bits = [(int(words[i, l // 64]) >> (l % 64)) & 1 for l in range(130)]
        assert bits == dense[:, i].astype(int).tolist()


@given(st.integers(1, 25), st.floats(0.05, 1.0), st.integers(0, 1), st.integers(0, 2**32))
def test_kernel_mask_structure(n, eps, b, seed):
    mask = gen_kernel_mask(n, MaskConfig(0.5, eps, b, seed=seed))
    dense = mask.to_dense()
    assert np.array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == bool(b))
    assert KernelMask.from_dense(dense) == mask
    pr = mask.pairs()
    assert np.all(pr[:, 0] < pr[:, 1])
    # rows sorted, columns sorted within a row
    assert np.all(np.diff(pr[:, 0] * n + pr[:, 1]) > 0)


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32))
def test_data_mask_dense_round_trip(p, n, seed):
    dense = np.random.default_rng(seed).random((p, n)) < 0.5
    assert np.array_equal(DataMask.from_dense(dense).to_dense(), dense)


def test_kernel_mask_rejects_asymmetric():
    with pytest.raises(DimensionError):
        KernelMask.from_dense(np.triu(np.ones((3, 3), bool)))
    with pytest.raises(DimensionError):
        KernelMask.from_pairs(3, [(1, 0)], 1)
