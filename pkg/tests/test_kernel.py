import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from puncturing.errors import ConfigError, DataError, DimensionError, SizeError
from puncturing.kernel import build_kernel, dense_kernel_oracle, matvec
from puncturing.masks import DataMask, KernelMask, MaskConfig, gen_data_mask, gen_kernel_mask


def _instance(p, n, eps_s, eps_b, b, seed, complex_data=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((p, n))
    if complex_data:
        x = x + 1j * rng.standard_normal((p, n))
    cfg = MaskConfig(eps_s, eps_b, b, seed=seed)
    return x, gen_data_mask(p, n, cfg), gen_kernel_mask(n, cfg)


def _brute(x, s, bmask):
    """Triple sum straight from the definition."""
    p, n = x.shape
    sd, bd = s.to_dense(), bmask.to_dense()
    out = np.zeros((n, n), dtype=np.result_type(x, float))
    for i in range(n):
        for j in range(n):
            if bd[i, j]:
                out[i, j] = sum(sd[l, i] * sd[l, j] * np.conj(x[l, i]) * x[l, j] for l in range(p)) / p
    return out


def _abs_scale(x, s, bm):
    """Sum of absolute products per entry: the reference for relative error."""
    a = np.abs(x * s.to_dense())
    return (a.T @ a / x.shape[0]) * bm.to_dense()


def test_hand_example(backend):
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    s = DataMask.from_dense([[1, 0], [1, 1]])
    b = KernelMask.from_dense(np.ones((2, 2), bool))
    k = build_kernel(x, s, b, backend=backend).to_dense()
    assert k.tolist() == [[5.0, 6.0], [6.0, 8.0]]


def test_unpunctured_is_gram(backend):
    x, _, _ = _instance(7, 9, 1.0, 1.0, 1, 0)
    s = DataMask.from_dense(np.ones((7, 9), bool))
    b = KernelMask.from_dense(np.ones((9, 9), bool))
    np.testing.assert_allclose(build_kernel(x, s, b, backend=backend).to_dense(), x.T @ x / 7, rtol=1e-13)


def test_diagonal_only_mask(backend):
    x, s, _ = _instance(11, 6, 0.5, 1.0, 1, 3)
    b = KernelMask.from_pairs(6, [], 1)
    k = build_kernel(x, s, b, backend=backend)
    xs = x * s.to_dense()
    np.testing.assert_allclose(k.to_dense(), np.diag(np.sum(xs**2, axis=0) / 11), rtol=1e-13)
    assert k.nnz_pairs == 0


@pytest.mark.parametrize("complex_data", [False, True])
@pytest.mark.parametrize("b", [0, 1])
def test_matches_brute_force(backend, complex_data, b):
    x, s, bm = _instance(5, 8, 0.6, 0.5, b, 21, complex_data)
    np.testing.assert_allclose(build_kernel(x, s, bm, backend=backend).to_dense(), _brute(x, s, bm), rtol=1e-13, atol=1e-15)


@given(
    st.integers(1, 70), st.integers(1, 40), st.floats(0.05, 1.0), st.floats(0.05, 1.0),
    st.integers(0, 1), st.booleans(), st.integers(0, 2**32),
)
def test_oracle_equivalence(p, n, eps_s, eps_b, b, complex_data, seed):
    x, s, bm = _instance(p, n, eps_s, eps_b, b, seed, complex_data)
    dense = dense_kernel_oracle(x, s, bm)
    for be in ("python", "compiled"):
        try:
            k = build_kernel(x, s, bm, backend=be)
        except ConfigError:
            continue
        got = k.to_dense()
        assert np.all(np.abs(got - dense) <= 1e-12 * _abs_scale(x, s, bm))
        # structure is exactly the mask
        assert k.pattern() == bm
        assert np.array_equal(np.abs(got) > 0, (np.abs(dense) > 0))


def test_stored_zero_entries_kept(backend):
    x = np.zeros((4, 5))
    s = DataMask.from_dense(np.ones((4, 5), bool))
    bm = gen_kernel_mask(5, MaskConfig(1.0, 0.6, 1, seed=2))
    k = build_kernel(x, s, bm, backend=backend)
    assert k.stored_entries == bm.stored_entries
    assert np.all(k.values == 0) and np.all(k.diag == 0)
    assert np.all(dense_kernel_oracle(x, s, bm) == 0)


def test_hermitian_by_matvec(backend, rng):
    x, s, bm = _instance(30, 60, 0.4, 0.3, 0, 9, complex_data=True)
    k = build_kernel(x, s, bm, backend=backend)
    u = rng.standard_normal(60) + 1j * rng.standard_normal(60)
    v = rng.standard_normal(60) + 1j * rng.standard_normal(60)
    assert abs(np.vdot(u, matvec(k, v)) - np.vdot(matvec(k, u), v)) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v) * 60


def test_matvec_examples(backend, rng):
    x, s, bm = _instance(20, 50, 0.5, 0.5, 1, 4)
    k = build_kernel(x, s, bm, backend=backend)
    v = rng.standard_normal(50)
    dense = dense_kernel_oracle(x, s, bm)
    np.testing.assert_allclose(matvec(k, v), dense @ v, rtol=1e-12, atol=1e-12)
    assert np.all(matvec(k, np.zeros(50)) == 0)
    diag_only = build_kernel(x, s, KernelMask.from_pairs(50, [], 1), backend=backend)
    np.testing.assert_allclose(matvec(diag_only, np.ones(50)), diag_only.diag, rtol=1e-15)
    with pytest.raises(DimensionError):
        matvec(k, np.ones(49))


def test_backends_agree(rng):
    x, s, bm = _instance(64, 120, 0.3, 0.4, 1, 8)
    ks = [build_kernel(x, s, bm, backend="python")]
    try:
        ks.append(build_kernel(x, s, bm, backend="compiled"))
    except ConfigError:
        pytest.skip("compiled backend not built")
    a, b = ks
    np.testing.assert_allclose(a.values, b.values, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(a.diag, b.diag, rtol=1e-13)
    assert a.flop_count == b.flop_count
    v = rng.standard_normal(120)
    np.testing.assert_allclose(matvec(a, v), matvec(b, v), rtol=1e-12, atol=1e-13)


def test_flop_count_exact(backend):
    x, s, bm = _instance(40, 30, 0.5, 0.5, 1, 12)
    sd = s.to_dense().astype(int)
    common = sd.T @ sd
    bd = bm.to_dense()
    expected = int(common[bd].sum())  # ordered pairs (i, j) in B, diagonal included
    k = build_kernel(x, s, bm, backend=backend)
    assert k.flop_count == expected
    upper = int(np.triu(common * bd).sum())
    assert k.products_computed == upper


def test_input_validation(backend):
    x, s, bm = _instance(5, 6, 0.5, 0.5, 1, 0)
    with pytest.raises(DimensionError):
        build_kernel(x[:, :5], s, bm, backend=backend)
    with pytest.raises(DimensionError):
        build_kernel(x, s, gen_kernel_mask(5, MaskConfig(0.5, 0.5)), backend=backend)
    bad = x.copy()
    bad[0, 0] = np.nan
    with pytest.raises(DataError):
        build_kernel(bad, s, bm, backend=backend)
    with pytest.raises(ConfigError):
        build_kernel(x, s, bm, backend="gpu")


def test_dense_oracle_guard():
    x = np.zeros((1, 2001))
    cfg = MaskConfig(1.0, 1e-6)
    with pytest.raises(SizeError):
        dense_kernel_oracle(x, gen_data_mask(1, 2001, cfg), gen_kernel_mask(2001, cfg))
