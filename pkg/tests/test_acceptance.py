"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line and then asserts it.

Heavy sweeps are marked ``slow`` but are part of the default run.
"""
import csv
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from wavelab.cli import main
from wavelab.dispersion import builtin_model, check_complete_degeneracy, check_nondegeneracy
from wavelab.evolve import (Integrator, fpu_nonlinearity, kg_nonlinearity, nls_nonlinearity,
                            sine_gordon_nonlinearity, solve, transport_toy_problem)
from wavelab.monomials import (concentration_assignment, count_trees_bruteforce, enumerate_trees,
                               multiplicity_coefficients, phase_gradient, random_fm_decoration,
                               series_reversion_counts)
from wavelab.spectral import (Grid, ModalField, SpatialField, convolve_scalar,
                              forward_transform, inverse_transform, l1_norm_k, linf_norm_r, nonlinear_term)
from wavelab.superpose import SuperpositionExperiment, compute_remainder
from wavelab.wavepacket import real_packet

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# pinned tolerances and budgets
FM_GRAD_TOL = 1e-6
NFM_EXPONENT = (0.8, 1.2)
FM_RATIO = (0.5, 2.0)
SERIES_RATIO = 0.4
SLOPE_WINDOW = (0.6, 1.4)
SG_KG_EXPONENT = (1.6, 2.4)
LINEAR_FLOOR = 1e-10
TOY_TOL = 1e-5
CONV_TOL = 1e-12
LADDER = [0.2, 0.141, 0.1, 0.071]
BUDGET = {1: 1.0, 2: 10.0, 3: 5.0, 4: 120.0, 5: 300.0, 6: 900.0, 7: 900.0, 8: 600.0, 9: 60.0, 10: 30.0}


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run_cli(tmp_path, command, config, edit=None, extra=()):
    cfg = yaml.safe_load((CONFIGS / config).read_text())
    if edit:
        edit(cfg)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(p), "--out", str(out), *extra])
    return code, out


def timing(n, t0):
    dt = time.perf_counter() - t0
    return dt, dt <= BUDGET[n]


# ---------------------------------------------------------------------------

def test_criterion_01_genericity_catalog(criterion):
    t0 = time.perf_counter()
    fpu, kg = builtin_model("fpu"), builtin_model("klein_gordon")
    ok_fpu = all(check_nondegeneracy(fpu, [k]).passed for k in (np.pi / 2, 1.0, 2.0))
    ok_kg = all(check_nondegeneracy(kg, [k]).passed for k in (0.5, 1.0))
    wave = builtin_model("semilinear_wave", {"d": 1})
    ks = (0.3, 1.0, -1.7, 2.5)
    ok_wave = all(not check_nondegeneracy(wave, [k]).passed for k in ks)
    ok_cd = all(check_complete_degeneracy(wave, [([k], 1, 1)])[0].passed for k in ks)
    dt, fast = timing(1, t0)
    ok = ok_fpu and ok_kg and ok_wave and ok_cd and fast
    criterion(1, ok, f"fpu={ok_fpu} kg={ok_kg} wave_fails={ok_wave} wave_complete_degeneracy={ok_cd} "
                     f"({dt:.2f}s)")
    assert ok


def test_criterion_02_tree_coefficients(criterion):
    t0 = time.perf_counter()
    counts_ok = all(len(enumerate_trees(m)) == count_trees_bruteforce(m) == series_reversion_counts(5)[m - 1]
                    for m in range(1, 6))
    worst = 0.0
    for S in (None, [2, 3], [3]):
        for m in range(1, 9):
            total = sum(multiplicity_coefficients(m, S or range(2, m + 1)).values())
            worst = max(worst, total / (8 ** m / 4))
    dt, fast = timing(2, t0)
    ok = counts_ok and worst <= 1.0 and fast
    criterion(2, ok, f"counts m=1..5 agree={counts_ok}; max sum(c_T)/(8^m/4) = {worst:.3g} ({dt:.2f}s)")
    assert ok


def test_criterion_03_fm_phase_criticality(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    catalog = [
        (builtin_model("fpu"), [np.pi / 2], (3,)),
        (builtin_model("klein_gordon"), [1.0], (3,)),
        (builtin_model("sine_gordon", {"order": 7}), [1.0], (3, 5, 7)),
        (builtin_model("nls", {"gamma_matrix": [[1.0]]}), [1.0], (3,)),
        (builtin_model("semilinear_wave", {"d": 1}), [1.0], (3,)),
        (builtin_model("semilinear_wave", {"d": 2}), [1.0, 0.5], (3,)),
    ]
    worst = {}
    for model, kstar, degrees in catalog:
        pool = [t for m in (3, 5, 7) for t in enumerate_trees(m)
                if all(a == 0 or a in degrees for a in t.preorder) and t.rank <= 3]
        g = 0.0
        for _ in range(20):
            tree = pool[rng.integers(len(pool))]
            dec = random_fm_decoration(tree, rng)
            k = concentration_assignment(tree, dec, kstar)
            g = max(g, float(np.linalg.norm(phase_gradient(model, tree, dec, k))))
        worst[f"{model.name}-d{model.d}"] = g
    dt, fast = timing(3, t0)
    top = max(worst.values())
    ok = top <= FM_GRAD_TOL and fast
    criterion(3, ok, f"max |grad Phi| = {top:.2e} over {len(catalog)} models x 20 FM decorations ({dt:.2f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_04_nfm_rho_decay(criterion, tmp_path):
    t0 = time.perf_counter()
    code, out = run_cli(tmp_path, "probe-nfm", "fpu_sweep.yaml")
    r = rows(out / "probe.csv")
    nfm = [x for x in r if x["kind"] == "probe"]
    fm = [x for x in r if x["kind"] == "fm_companion"]
    exp_ = float(nfm[0]["exponent"])
    ratio = float(fm[0]["ratio"])
    dt, fast = timing(4, t0)
    ok = (code == 0 and NFM_EXPONENT[0] <= exp_ <= NFM_EXPONENT[1] and FM_RATIO[0] <= ratio <= FM_RATIO[1]
          and fast)
    criterion(4, ok, f"NFM rho-exponent = {exp_:.3f} (window {NFM_EXPONENT}); FM last/first = {ratio:.4f} "
                     f"({dt:.1f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_05_series_vs_solver(criterion, tmp_path):
    t0 = time.perf_counter()
    code, out = run_cli(tmp_path, "verify-series", "kg_series.yaml")
    r = rows(out / "series.csv")
    gaps = [float(x["gap_l1"]) for x in r]
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    last = r[-1]
    bound = float(last["tail_bound"]) + 10 * float(last["integrator_error"])
    dt, fast = timing(5, t0)
    geometric = all(q <= SERIES_RATIO for q in ratios)
    ok = geometric and gaps[-1] <= bound and fast
    criterion(5, ok, "gaps " + ", ".join(f"{g:.3e}" for g in gaps) + "; ratios "
              + ", ".join(f"{q:.3g}" for q in ratios) + f" (need <= {SERIES_RATIO}); final gap <= "
              f"{bound:.3e}: {gaps[-1] <= bound} ({dt:.1f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_06_fpu_scaling_law(criterion, tmp_path):
    t0 = time.perf_counter()

    def edit(cfg):
        cfg["sweep"]["betas"] = LADDER

    code, out = run_cli(tmp_path, "sweep", "fpu_sweep.yaml", edit)
    r = rows(out / "remainder.csv")
    fit = rows(out / "remainder_fit.csv")[0]
    sup = [float(x["supL1"]) for x in r]
    monotone = all(b < a for a, b in zip(sup, sup[1:]))
    slope = float(fit["slope"])
    dt, fast = timing(6, t0)
    ok = monotone and SLOPE_WINDOW[0] <= slope <= SLOPE_WINDOW[1] and fast
    criterion(6, ok, "supL1 " + ", ".join(f"{v:.3e}" for v in sup) + f"; monotone={monotone}; "
              f"slope = {slope:.3f} (window {SLOPE_WINDOW}); log-corrected slope = "
              f"{float(fit['log_corrected_slope']):.3f} ({dt:.0f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_07_wave_superposition(criterion, tmp_path):
    t0 = time.perf_counter()

    def edit(cfg):
        cfg["sweep"]["betas"] = LADDER

    code, out = run_cli(tmp_path, "sweep", "wave_sweep.yaml", edit)
    sup = [float(x["supL1"]) for x in rows(out / "remainder.csv")]
    monotone = all(b < a for a, b in zip(sup, sup[1:]))
    dt, fast = timing(7, t0)
    ok = code == 0 and monotone and fast
    criterion(7, ok, "supL1 " + ", ".join(f"{v:.3e}" for v in sup) + f"; monotone={monotone} ({dt:.0f}s)")
    assert ok


@pytest.mark.slow
def test_criterion_08_sg_kg_closeness(criterion, tmp_path):
    t0 = time.perf_counter()
    code, out = run_cli(tmp_path, "sweep", "sg_kg.yaml")
    diffs = [float(x["difference"]) for x in rows(out / "sg_kg.csv")]
    exponent = float(rows(out / "sg_kg_summary.csv")[0]["exponent"])
    dt, fast = timing(8, t0)
    ok = code == 0 and SG_KG_EXPONENT[0] <= exponent <= SG_KG_EXPONENT[1] and fast
    criterion(8, ok, "differences " + ", ".join(f"{v:.3e}" for v in diffs)
              + f"; exponent = {exponent:.3f} (window {SG_KG_EXPONENT}) ({dt:.0f}s)")
    assert ok


def test_criterion_09_exactness_floors(criterion):
    t0 = time.perf_counter()
    it = Integrator(min_steps=500, estimate_error=False)
    single = SuperpositionExperiment("fpu", [real_packet([np.pi / 2], 0.2)], betas=(0.1,), grid={"N": 1024},
                                     integrator=it)
    d_single = compute_remainder(single, 0.1).sup_l1
    lin = SuperpositionExperiment("fpu", [real_packet([np.pi / 2], 0.2), real_packet([1.0], 0.2)], betas=(0.1,),
                                  grid={"N": 1024}, integrator=it, linear=True)
    d_lin = compute_remainder(lin, 0.1).sup_l1
    pb = transport_toy_problem()
    x = pb.grid.r_mesh()[0]
    h = np.exp(-x ** 2)
    pb = pb.with_initial(forward_transform(SpatialField(pb.grid, np.array([h, 0 * h]))))
    pb.integrator.estimate_error = False
    y = inverse_transform(solve(pb).final()).values[0]
    hs = np.exp(-(x - pb.tau_star / pb.rho) ** 2)
    toy = float(np.abs(y - hs / (1 - pb.tau_star * hs)).max())
    dt, fast = timing(9, t0)
    ok = d_single == 0.0 and d_lin <= LINEAR_FLOOR and toy <= TOY_TOL and fast
    criterion(9, ok, f"N_h=1 remainder = {d_single:.1e}; linear remainder = {d_lin:.2e}; "
                     f"transport Linf error = {toy:.2e} ({dt:.1f}s)")
    assert ok


def test_criterion_10_spectral_contracts(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)

    def rand(g, nc):
        return ModalField(g, rng.normal(size=(nc,) + g.shape) + 1j * rng.normal(size=(nc,) + g.shape))

    g = Grid(1, 64)
    young = 0.0
    for _ in range(100):
        u, v = rand(g, 1), rand(g, 1)
        young = max(young, l1_norm_k(convolve_scalar(u, v)) / (l1_norm_k(u) * l1_norm_k(v) / (2 * np.pi)))
    linf = 0.0
    for grid in (Grid(1, 64), Grid(2, 16, "box", 2.0)):
        for _ in range(50):
            f = rand(grid, 2)
            linf = max(linf, linf_norm_r(inverse_transform(f)) / (l1_norm_k(f) / (2 * np.pi) ** grid.d))
    conv = 0.0
    for grid in (Grid(1, 32), Grid(1, 32, "box", 4.0)):
        for m, chi in fpu_nonlinearity(1.0, 1.0) + kg_nonlinearity() + nls_nonlinearity(1 - 0.5j) \
                + sine_gordon_nonlinearity(0.3, 5)[:1]:
            fs = [rand(grid, 2) for _ in range(m)]
            a = nonlinear_term(chi, fs).values
            b = nonlinear_term(chi, fs, method="direct").values
            conv = max(conv, float(np.abs(a - b).max() / max(1.0, np.abs(b).max())))
    dt, fast = timing(10, t0)
    ok = young <= 1 + 1e-12 and linf <= 1 + 1e-12 and conv <= CONV_TOL and fast
    criterion(10, ok, f"Young ratio max = {young:.4f}; Linf/L1 ratio max = {linf:.4f}; "
                      f"fast-direct = {conv:.1e} ({dt:.2f}s)")
    assert ok
