import numpy as np
import pytest

from wavelab.dispersion import DegeneratePointError, builtin_model, mode_index
from wavelab.spectral import Grid, ModalField, l1_norm_k
from wavelab.wavepacket import (Component, Envelope, GridTooCoarseError, MultiWavepacket, WavepacketSpec,
                                apply_cutoff, branch_parts, bump, default_pi0, real_packet, required_torus_size,
                                synthesize_modal, verify_wavepacket)

FPU = builtin_model("fpu")
KG = builtin_model("klein_gordon")


def fpu_packet(beta, width=1.0, N=None, k=np.pi / 2):
    g = Grid(1, N or required_torus_size(beta, width))
    spec = real_packet([k], 1.0, Envelope(width=width), beta=beta)
    return spec, g, synthesize_modal(spec, FPU, g)


def test_envelope_transforms():
    for env in (Envelope("gaussian", 1.3), Envelope("sech", 0.7)):
        y = np.linspace(-60, 60, 24001)[None]
        q = np.array([[0.0, 0.4, 1.1]])
        num = np.array([np.trapezoid(env.spatial(y) * np.exp(-1j * qq * y[0]), y[0]) for qq in q[0]])
        assert np.allclose(num, env.fourier(q), atol=1e-8)


def test_envelope_tail_decay():
    env = Envelope()
    tails = [env.tail_mass(R) for R in (5.0, 10.0, 20.0)]
    assert tails[0] < 1e-5 and tails[1] < 1e-20 and tails[2] < tails[1]
    assert Envelope.from_dict(env.as_dict()) == env


def test_peak_modulus():
    beta = 0.1
    spec, g, h = fpu_packet(beta)
    j = g.index_of([np.pi / 2])
    peak = np.linalg.norm(h.values[(slice(None),) + j])
    assert peak == pytest.approx(Envelope().fourier(np.zeros((1, 1)))[0].real / beta, rel=1e-2)


def test_l1_independent_of_beta():
    vals = [l1_norm_k(fpu_packet(b, N=4096)[2]) for b in (0.2, 0.1, 0.05)]
    assert max(vals) - min(vals) <= 1e-6


def test_r_and_k_constructions_agree():
    beta = 0.1
    g = Grid(1, 1024)
    spec = real_packet([np.pi / 2], 1.0, beta=beta)
    a = synthesize_modal(spec, FPU, g, method="k")
    b = synthesize_modal(spec, FPU, g, method="r")
    assert l1_norm_k(a - b) <= 1e-8


def test_branch_projection_exact():
    spec, g, h = fpu_packet(0.1)
    parts = branch_parts(h, FPU)
    P = FPU.projections(g.k_mesh())
    for z, hz in parts.items():
        again = np.einsum("ab...,b...->a...", P[mode_index(1, z)], hz)
        assert np.abs(again - hz).max() <= 1e-10
    assert verify_wavepacket(h, [np.pi / 2], 0.1, model=FPU)["band_leakage"] <= 1e-10


def test_errors():
    with pytest.raises(DegeneratePointError):
        synthesize_modal(real_packet([0.0], beta=0.1), FPU, Grid(1, 512))
    with pytest.raises(GridTooCoarseError):
        synthesize_modal(real_packet([1.0], beta=0.05), FPU, Grid(1, 256))
    with pytest.raises(ValueError):
        WavepacketSpec([1.0], 1, {1: Component(0.0)})
    with pytest.raises(ValueError):
        MultiWavepacket([real_packet([1.0]), real_packet([1.0])])
    with pytest.raises(ValueError):
        verify_wavepacket(fpu_packet(0.1)[2], [1.0], 0.1, 0.6, model=FPU)


def test_spec_round_trip():
    spec = WavepacketSpec([0.5], 1, {1: Component(0.3 + 0.1j, Envelope("sech", 2.0))}, [1.5], 0.2)
    back = WavepacketSpec.from_dict(spec.as_dict())
    assert back.as_dict() == spec.as_dict()


@pytest.mark.xfail(strict=True, reason="unit-width gaussian at beta=0.1: tail radius beta^0.8 is only 1.58 widths, "
                                      "tail_mass/beta = 15.7 (both branches)")
def test_gaussian_tail_unit_width():
    spec, g, h = fpu_packet(0.1)
    rep = verify_wavepacket(h, [np.pi / 2], 0.1, 0.2, model=FPU)
    assert rep["tail_mass"] / 0.1 <= 0.01


def test_gaussian_tail_wide_envelope():
    spec, g, h = fpu_packet(0.1, width=3.0, N=2048)
    rep = verify_wavepacket(h, [np.pi / 2], 0.1, 0.2, model=FPU)
    assert rep["tail_mass"] / 0.1 <= 0.01


def test_constant_field_not_localized():
    g = Grid(1, 512)
    _, G = FPU.eigenvectors(g.k_mesh())
    c = ModalField(g, G[:, 0] + G[:, 1])
    assert verify_wavepacket(c, [np.pi / 2], 0.1, model=FPU)["tail_mass"] > 1.0


def test_gradient_bound_scaling():
    vals = []
    for b in (0.2, 0.1, 0.05):
        spec, g, h = fpu_packet(b, N=4096)
        vals.append(verify_wavepacket(h, [np.pi / 2], b, 0.2, model=FPU)["grad_bound"] * b ** 1.2)
    assert max(vals) / min(vals) < 3.0


def test_bump_properties():
    x = np.linspace(0, 1, 1001)
    eta = np.concatenate([-x[::-1], x])
    psi = bump(np.abs(eta), 0.5)
    assert np.all((psi >= 0) & (psi <= 1))
    assert np.array_equal(psi, psi[::-1])
    assert np.all(psi[np.abs(eta) <= 0.25] == 1.0)
    assert np.all(psi[np.abs(eta) >= 0.5] == 0.0)


def test_cutoff_support_and_identity():
    beta, eps = 0.1, 0.2
    spec, g, h = fpu_packet(beta)
    pi0 = default_pi0(FPU, [np.pi / 2])
    out = apply_cutoff(h, [np.pi / 2], beta, eps, model=FPU)
    k = g.k_mesh()[0]
    for z in (1, -1):
        far = np.abs(FPU.reduce(k - z * np.pi / 2)) >= pi0 * beta ** (1 - eps)
        near_other = np.abs(FPU.reduce(k + z * np.pi / 2)) >= pi0 * beta ** (1 - eps)
        assert np.all(out.values[:, far & near_other] == 0)
    # data already inside the plateau is untouched
    inner = out.copy(np.where(np.abs(FPU.reduce(k - np.pi / 2)) <= 0.4 * pi0 * beta ** (1 - eps), h.values, 0))
    inner = inner.copy(branch_parts(inner, FPU)[1])
    again = apply_cutoff(inner, [np.pi / 2], beta, eps, model=FPU)
    assert np.allclose(again.values, inner.values, atol=1e-14)
    with pytest.raises(ValueError):
        apply_cutoff(h, [np.pi / 2], beta, eps, pi0=2.0, model=FPU)


def test_cutoff_idempotent_off_transition():
    beta = 0.1
    spec, g, h = fpu_packet(beta)
    once = apply_cutoff(h, [np.pi / 2], beta, model=FPU)
    twice = apply_cutoff(once, [np.pi / 2], beta, model=FPU)
    # Psi * Psi differs from Psi only on the transition annulus; elsewhere the branch
    # projections are re-applied, which is exact up to roundoff
    pi0 = default_pi0(FPU, [np.pi / 2])
    k = g.k_mesh()[0]
    rad = np.minimum(np.abs(FPU.reduce(k - np.pi / 2)), np.abs(FPU.reduce(k + np.pi / 2))) / beta ** 0.8
    off = (rad <= pi0 / 2) | (rad >= pi0)
    scale = np.abs(once.values).max()
    assert np.abs(once.values[:, off] - twice.values[:, off]).max() <= 1e-14 * scale
    assert np.array_equal(once.values[:, rad >= pi0], twice.values[:, rad >= pi0])


@pytest.mark.xfail(strict=True, reason="unit-width gaussian: plateau radius 0.25 beta^0.8 is ~0.4 widths, "
                                      "||h - h^Psi||/beta = 66.4 (both branches)")
def test_cutoff_change_unit_width():
    beta = 0.1
    spec, g, h = fpu_packet(beta)
    out = apply_cutoff(h, [np.pi / 2], beta, 0.2, model=FPU)
    assert l1_norm_k(h - out) / beta <= 0.05


def test_cutoff_change_wide_envelope():
    beta = 0.1
    spec, g, h = fpu_packet(beta, width=12.0, N=8192)
    out = apply_cutoff(h, [np.pi / 2], beta, 0.2, model=FPU)
    assert l1_norm_k(h - out) / beta <= 0.05


def test_kg_box_packet():
    g = Grid(1, 2048, "box", 8.0)
    spec = real_packet([1.0], 1.0, beta=0.1)
    h = synthesize_modal(spec, KG, g)
    rep = verify_wavepacket(h, [1.0], 0.1, model=KG)
    assert rep["band_leakage"] <= 1e-10
    assert rep["l1_bound"] == pytest.approx(4 * np.pi, rel=1e-6)
