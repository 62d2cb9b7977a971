import numpy as np
import pytest

from wavelab.evolve import fpu_nonlinearity, kg_nonlinearity, nls_nonlinearity, sine_gordon_nonlinearity
from wavelab.spectral import (ChiTensor, Grid, ModalField, SeparableTerm, SpatialField, convolve_scalar,
                              direct_convolution, forward_transform, inverse_transform, l1_norm_k, l2_norm_k,
                              l2_norm_r, linf_norm_r, nonlinear_term, padded_size, read_field_binary,
                              read_field_csv, wrap_torus, write_field_binary, write_field_csv)


def rand_field(rng, g, nc=2, decay=None):
    v = rng.normal(size=(nc,) + g.shape) + 1j * rng.normal(size=(nc,) + g.shape)
    if decay is not None:
        k = g.k_mesh()
        v *= np.exp(-decay * np.sum(k * k, axis=0))
    return ModalField(g, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1, 12)
    with pytest.raises(ValueError):
        Grid(1, 32, "box")
    with pytest.raises(ValueError):
        Grid(1, 32, "torus", 3.0)
    g = Grid(2, 16, "box", 4.0)
    assert g.k_mesh().shape == (2, 16, 16)
    assert g.dk == pytest.approx(0.5)
    assert g.dx * g.dk * g.N == pytest.approx(2 * np.pi)


def test_wrap_torus_range():
    k = np.array([np.pi, -np.pi, 3 * np.pi, 0.1 - 2 * np.pi])
    w = wrap_torus(k)
    assert np.all(w <= np.pi) and np.all(w > -np.pi)
    assert w[1] == pytest.approx(np.pi)
    assert w[3] == pytest.approx(0.1)


def test_transform_round_trip(rng):
    for g in (Grid(1, 64), Grid(2, 16, "box", 3.0)):
        f = rand_field(rng, g)
        back = forward_transform(inverse_transform(f))
        assert np.allclose(back.values, f.values, atol=1e-13)


def test_parseval(rng):
    g = Grid(1, 128, "box", 10.0)
    f = rand_field(rng, g)
    assert l2_norm_k(f) == pytest.approx(l2_norm_r(inverse_transform(f)), rel=1e-12)


def test_plane_wave_transform():
    # a single k-sample of weight 1/dk becomes a plane wave of amplitude 1/(2 pi)
    g = Grid(1, 64)
    v = np.zeros((1, 64), complex)
    j = g.index_of([5 * g.dk])[0]
    v[0, j] = 1 / g.dk
    s = inverse_transform(ModalField(g, v))
    r = g.r_axis
    assert np.allclose(s.values[0], np.exp(1j * 5 * g.dk * r) / (2 * np.pi), atol=1e-13)


def test_linf_l1_inequality(rng):
    for g in (Grid(1, 64), Grid(2, 16, "box", 2.0)):
        for _ in range(20):
            f = rand_field(rng, g)
            assert linf_norm_r(inverse_transform(f)) <= l1_norm_k(f) / (2 * np.pi) ** g.d + 1e-12


def test_young_inequality(rng):
    g = Grid(1, 64)
    for _ in range(50):
        u, v = rand_field(rng, g, 1), rand_field(rng, g, 1)
        lhs = l1_norm_k(convolve_scalar(u, v))
        assert lhs <= l1_norm_k(u) * l1_norm_k(v) / (2 * np.pi) + 1e-12


@pytest.mark.parametrize("domain", ["torus", "box"])
def test_fast_matches_direct(rng, domain):
    g = Grid(1, 32) if domain == "torus" else Grid(1, 32, "box", 4.0)
    cases = fpu_nonlinearity(1.0, 1.0) + kg_nonlinearity() + nls_nonlinearity(1 + 0.5j)
    cases += sine_gordon_nonlinearity(0.3, 5)[:1]
    for m, chi in cases:
        fs = [rand_field(rng, g) for _ in range(m)]
        a = nonlinear_term(chi, fs)
        b = nonlinear_term(chi, fs, method="direct")
        assert np.abs(a.values - b.values).max() <= 1e-12 * max(1.0, np.abs(b.values).max())


def test_fast_matches_direct_2d(rng):
    g = Grid(2, 8, "box", 2.0)
    m, chi = kg_nonlinearity()[0]
    fs = [rand_field(rng, g) for _ in range(3)]
    a = nonlinear_term(chi, fs)
    b = direct_convolution(chi, fs, linear=True)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_dealias_switch_on_torus(rng):
    # forcing linear convolution on the torus equals the direct linear sum
    g = Grid(1, 16)
    m, chi = fpu_nonlinearity(1.0, 0.0)[0]
    fs = [rand_field(rng, g) for _ in range(2)]
    a = nonlinear_term(chi, fs, dealias=True)
    b = direct_convolution(chi, fs, linear=True)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_dense_kernel_direct_only(rng):
    g = Grid(1, 16)

    def dense(k, ks):
        T = np.zeros((1, 1, 1) + k.shape[1:])
        T[0, 0, 0] = 1.0
        return T

    chi_dense = ChiTensor(2, 1, dense=dense)
    chi_sep = ChiTensor(2, 1, [SeparableTerm(np.ones((1, 1, 1)))])
    fs = [rand_field(rng, g, 1) for _ in range(2)]
    assert np.allclose(nonlinear_term(chi_dense, fs).values, nonlinear_term(chi_sep, fs).values, atol=1e-12)


def test_direct_size_guard(rng):
    g = Grid(1, 2 ** 14)
    m, chi = kg_nonlinearity()[0]
    fs = [ModalField.zeros(g, 2) for _ in range(3)]
    with pytest.raises(ValueError):
        direct_convolution(chi, fs)


def test_degree_mismatch(rng):
    g = Grid(1, 16)
    m, chi = kg_nonlinearity()[0]
    with pytest.raises(ValueError):
        nonlinear_term(chi, [rand_field(rng, g)] * 2)


def test_padded_size():
    assert padded_size(64, 3) == 128
    assert padded_size(64, 7) == 256
    assert padded_size(8, 1) == 8


def test_chi_bound_is_upper_bound(rng):
    g = Grid(1, 32)
    m, chi = fpu_nonlinearity(0.0, 1.0)[0]
    k = g.k_mesh()
    ks = [k] * 3
    T = chi.evaluate(k, ks)
    assert np.abs(T).max() <= chi.norm_bound(g) + 1e-12


def test_field_io_round_trip(rng, tmp_path):
    g = Grid(1, 32, "box", 5.0)
    f = rand_field(rng, g)
    f = f.copy(tau=0.25)
    write_field_csv(tmp_path / "f.csv", f)
    back = read_field_csv(tmp_path / "f.csv", g)
    assert np.array_equal(back.values, f.values)
    write_field_binary(tmp_path / "f.wlf", f)
    back = read_field_binary(tmp_path / "f.wlf")
    assert back.grid == g and back.tau == 0.25
    assert np.array_equal(back.values, f.values)
    assert (tmp_path / "f.csv").read_bytes().count(b"\r") == 0


def test_spatialfield_shape_check():
    g = Grid(1, 16)
    with pytest.raises(ValueError):
        ModalField(g, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        ModalField(g, np.full((2, 16), np.nan))
    s = SpatialField(g, np.zeros((2, 16)))
    assert linf_norm_r(s) == 0.0
