import math

import pytest

from wavelab.evolve import Integrator
from wavelab.superpose import (RemainderRecord, SuperpositionExperiment, _fit, ci_cross_check, compute_remainder,
                               scaling_sweep, sg_kg_closeness)
from wavelab.wavepacket import real_packet

FAST = dict(grid={"K": 8.0, "N": 512}, integrator=Integrator(min_steps=200, estimate_error=False))


def kg_exp(centers=(1.0, 2.0), amplitude=0.5, betas=(0.5, 0.4, 0.3), **kw):
    opts = dict(FAST)
    opts.update(kw)
    packets = [real_packet([c], amplitude) for c in centers]
    return SuperpositionExperiment("klein_gordon", packets, betas=betas, **opts)


def test_single_packet_remainder_is_zero():
    rec = compute_remainder(kg_exp(centers=(1.0,)), 0.4)
    assert rec.sup_l1 == 0.0 and rec.sup_linf == 0.0


def test_linear_remainder_vanishes():
    rec = compute_remainder(kg_exp(linear=True), 0.4)
    assert rec.sup_l1 <= 1e-10
    nl = compute_remainder(kg_exp(), 0.4)
    assert nl.sup_l1 > 1e-6


def test_packet_permutation_symmetry():
    a = compute_remainder(kg_exp(centers=(1.0, 2.0, 3.0)), 0.4)
    b = compute_remainder(kg_exp(centers=(3.0, 1.0, 2.0)), 0.4)
    assert abs(a.sup_l1 - b.sup_l1) <= 1e-12 * max(a.sup_l1, 1e-300)
    assert a.sup_l1 > 0


def test_remainder_is_cubic_in_amplitude():
    # leading CI terms are trilinear: halving every packet divides D by ~8
    big = compute_remainder(kg_exp(amplitude=0.2), 0.4).sup_l1
    small = compute_remainder(kg_exp(amplitude=0.1), 0.4).sup_l1
    assert big / small == pytest.approx(8.0, rel=0.05)


def test_jobs_do_not_change_results():
    a = compute_remainder(kg_exp(), 0.4)
    b = compute_remainder(kg_exp(jobs=3), 0.4)
    assert a.sup_l1 == b.sup_l1


def test_validation():
    with pytest.raises(ValueError):
        kg_exp(betas=(0.3, 0.4, 0.5))
    with pytest.raises(ValueError):
        kg_exp(betas=(0.6, 0.4, 0.3))
    with pytest.raises(ValueError):
        kg_exp(betas=(0.5, 0.4, 0.3), rho_coeff=0.001)
    with pytest.raises(ValueError):
        kg_exp(centers=(1.0, 1.0))
    with pytest.raises(ValueError):
        scaling_sweep(kg_exp(betas=(0.5, 0.4)))


def test_nongeneric_configuration_refused():
    # with conjugate branches, packets at +-k* share group-velocity pairs
    exp = SuperpositionExperiment("fpu", [real_packet([1.0]), real_packet([-1.0])], betas=(0.2, 0.141, 0.1))
    with pytest.raises(ValueError):
        compute_remainder(exp, 0.2)
    exp.require_generic = False
    assert exp.genericity().applicable_theorem == "none"


def test_rho_rule():
    exp = kg_exp(rho_coeff=2.0, rho_power=1.5)
    assert exp.rho(0.25) == pytest.approx(2.0 * 0.125)
    assert exp.problem(0.25).rho == pytest.approx(0.25)


def test_fit_recovers_power():
    recs = [RemainderRecord(b, b * b, 3 * b ** 1.25, 0.0, [], [], 0.0, 0.0) for b in (0.2, 0.1, 0.05, 0.025)]
    s, w = _fit(recs)
    assert s == pytest.approx(1.25, abs=1e-12) and w == pytest.approx(0.0, abs=1e-6)
    assert math.isnan(_fit(recs[:1])[0])


def test_sweep_report():
    rep = scaling_sweep(kg_exp())
    rows = rep.rows()
    assert [r["beta"] for r in rows] == [0.5, 0.4, 0.3]
    assert math.isnan(rows[0]["slope_so_far"]) and rows[-1]["slope_so_far"] == pytest.approx(rep.slope)
    assert not rep.excluded


def test_ci_cross_check_small_data():
    exp = kg_exp(betas=(0.3, 0.25, 0.2), norm_fraction=0.1)
    out = ci_cross_check(exp, 0.3, 3)
    assert out["norm_gap"] <= out["tolerance"]
    assert out["si_gap"] <= out["tolerance"]
    with pytest.raises(ValueError):
        ci_cross_check(exp, 0.3, 5)
    lin = ci_cross_check(kg_exp(linear=True), 0.4, 3)
    assert lin["passed"]


def test_sg_override_zero_is_identical():
    out = sg_kg_closeness([0.5, 0.4], real_packet([1.0], 0.5), grid={"K": 8.0, "N": 512},
                          integrator=Integrator(min_steps=200, estimate_error=False), sg_beta_override=0.0)
    assert out["difference"] == [0.0, 0.0]
    assert math.isnan(out["exponent"])
