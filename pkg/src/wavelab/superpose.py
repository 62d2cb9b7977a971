"""Superposition remainder measurements, beta sweeps and cross-checks.

The remainder of a multi-wavepacket run is

    D(tau) = G(h_1 + ... + h_N)(tau) - (G(h_1)(tau) + ... + G(h_N)(tau)),

where G is the nonlinear flow.  All branches (the sum and every single
packet) are solved on one grid with one step size, so discretization bias
largely cancels in D.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .dispersion import genericity_report
from .evolve import (BlowUpError, EvolutionProblem, Integrator, OscillatoryContext, build_problem,
                     convergence_radius, series_terms, solve, tail_bound)
from .monomials import ci_multiindices, enumerate_trees, evaluate_monomial, fit_power, multiplicity_coefficients
from .spectral import ModalField, inverse_transform, l1_norm_k, linf_norm_r
from .wavepacket import MultiWavepacket, WavepacketSpec, synthesize_modal

log = logging.getLogger(__name__)

DEFAULT_LADDER = (0.2, 0.141, 0.1, 0.071, 0.05)
BETA2_OVER_RHO_MAX = 100.0


@dataclass
class SuperpositionExperiment:
    model: str
    packets: list
    params: dict = field(default_factory=dict)
    betas: tuple = DEFAULT_LADDER
    rho_coeff: float = 1.0        # rho = rho_coeff * beta ** rho_power
    rho_power: float = 2.0
    tau_star: float = 0.5
    eps: float = 0.2
    grid: dict = field(default_factory=dict)
    snapshots: int = 33
    integrator: Integrator = field(default_factory=Integrator)
    norm_fraction: float | None = None   # rescale sum data to this fraction of R_G
    linear: bool = False
    require_generic: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.packets = [p if isinstance(p, WavepacketSpec) else WavepacketSpec.from_dict(p) for p in self.packets]
        b = list(self.betas)
        if any(x > 0.5 or x <= 0 for x in b):
            raise ValueError("beta values must lie in (0, 1/2]")
        if any(b2 >= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("beta ladder must be strictly decreasing")
        for x in b:
            if x ** 2 / self.rho(x) > BETA2_OVER_RHO_MAX:
                raise ValueError(f"rho rule violates beta^2 / rho <= {BETA2_OVER_RHO_MAX} at beta = {x}")
        self.betas = tuple(b)
        MultiWavepacket(self.packets)  # duplicate-center check
        self._report = None

    # -- rules -------------------------------------------------------------
    def rho(self, beta: float) -> float:
        return self.rho_coeff * beta ** self.rho_power

    @property
    def include_conjugates(self) -> bool:
        return all(len(p.components) == 2 for p in self.packets)

    @property
    def kstar_norm(self) -> float:
        return max(float(np.linalg.norm(p.kstar)) for p in self.packets)

    def genericity(self):
        if self._report is None:
            prob = self.problem(self.betas[0])
            centers = [(p.kstar, p.band, p.zeta) for p in self.packets]
            self._report = genericity_report(prob.model, centers, self.include_conjugates)
        return self._report

    def check(self) -> None:
        if self.require_generic and not self.linear and self.genericity().applicable_theorem == "none":
            raise ValueError("genericity conditions fail: no superposition theorem applies")

    def problem(self, beta: float) -> EvolutionProblem:
        it = replace(self.integrator, snapshots=self.snapshots)
        prob = build_problem(self.model, self.params, beta=beta, rho=self.rho(beta), tau_star=self.tau_star,
                             grid=self.grid, kstar_norm=self.kstar_norm, integrator=it)
        return prob.linear() if self.linear else prob

    def data(self, beta: float, prob: EvolutionProblem | None = None) -> list:
        prob = prob or self.problem(beta)
        fields = [synthesize_modal(p.with_beta(beta), prob.model, prob.grid) for p in self.packets]
        if self.norm_fraction is not None and not self.linear:
            R = convergence_radius(prob)[0]
            s = self.norm_fraction * R / l1_norm_k(_ordered_sum(fields))
            fields = [f * s for f in fields]
        return fields

    def as_dict(self) -> dict:
        return {
            "model": self.model, "params": self.params, "packets": [p.as_dict() for p in self.packets],
            "betas": list(self.betas), "rho_coeff": self.rho_coeff, "rho_power": self.rho_power,
            "tau_star": self.tau_star, "eps": self.eps, "grid": self.grid, "snapshots": self.snapshots,
            "integrator": asdict(self.integrator), "norm_fraction": self.norm_fraction,
            "linear": self.linear, "require_generic": self.require_generic,
        }


def _key(f: ModalField):
    return f.values.tobytes()


def _ordered_sum(fields: Sequence[ModalField]) -> ModalField:
    """Sum in a canonical order so relabeling packets leaves the result bitwise unchanged."""
    order = sorted(range(len(fields)), key=lambda i: _key(fields[i]))
    acc = fields[order[0]].copy()
    for i in order[1:]:
        acc = acc + fields[i]
    return acc


def _ordered_sum_arrays(arrs: Sequence[np.ndarray], keys: Sequence[bytes]) -> np.ndarray:
    order = sorted(range(len(arrs)), key=lambda i: keys[i])
    out = arrs[order[0]].copy()
    for i in order[1:]:
        out = out + arrs[i]
    return out


@dataclass
class RemainderRecord:
    beta: float
    rho: float
    sup_l1: float
    sup_linf: float
    single_l1: list
    single_linf: list
    relative: float
    error_estimate: float
    failed: bool = False
    blowup_tau: float | None = None
    runtime: float = 0.0
    final: ModalField | None = None
    info: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"beta": self.beta, "rho": self.rho, "supL1": self.sup_l1, "supLinf": self.sup_linf,
                "relative": self.relative, "failed": self.failed}


def compute_remainder(experiment: SuperpositionExperiment, beta: float, keep_final: bool = False) -> RemainderRecord:
    """Evolve the summed data and every packet separately; measure sup_tau of ||D||."""
    experiment.check()
    t0 = time.perf_counter()
    prob = experiment.problem(beta)
    fields = experiment.data(beta, prob)
    total = _ordered_sum(fields)
    runs = [total] + list(fields)
    keys = [_key(f) for f in fields]

    def run(f):
        return solve(prob.with_initial(f))

    try:
        if experiment.jobs > 1:
            with ThreadPoolExecutor(experiment.jobs) as ex:
                trajs = list(ex.map(run, runs))
        else:
            trajs = [run(f) for f in runs]
    except BlowUpError as exc:
        log.warning("blow-up at beta=%g: %s", beta, exc)
        return RemainderRecord(beta, prob.rho, math.nan, math.nan, [], [], math.nan, math.nan, True, exc.tau,
                               time.perf_counter() - t0)
    whole, singles = trajs[0], trajs[1:]
    sup1 = supi = 0.0
    s_l1 = [0.0] * len(singles)
    s_li = [0.0] * len(singles)
    last = None
    for j, Fw in enumerate(whole.fields):
        parts = [t.fields[j].values for t in singles]
        D = Fw.copy(Fw.values - _ordered_sum_arrays(parts, keys))
        sup1 = max(sup1, l1_norm_k(D))
        supi = max(supi, linf_norm_r(inverse_transform(D)))
        for i, t in enumerate(singles):
            s_l1[i] = max(s_l1[i], l1_norm_k(t.fields[j]))
            s_li[i] = max(s_li[i], linf_norm_r(inverse_transform(t.fields[j])))
        last = D
    err = sum(t.diagnostics["error_estimate"] for t in trajs)
    denom = max(s_li) if s_li else 1.0
    rec = RemainderRecord(beta, prob.rho, sup1, supi, s_l1, s_li, supi / denom if denom else math.nan, err,
                          runtime=time.perf_counter() - t0,
                          info={"N": prob.grid.N, "domain": prob.grid.domain, "steps": whole.diagnostics["steps"]})
    if keep_final:
        rec.final = last
        rec.info["trajectories"] = trajs
    return rec


@dataclass
class RemainderReport:
    records: list
    slope: float
    slope_width: float
    log_corrected_slope: float
    excluded: list
    runtime: float

    @property
    def monotone(self) -> bool:
        v = [r.sup_l1 for r in self.records if not r.failed]
        return all(b < a for a, b in zip(v, v[1:]))

    def rows(self) -> list:
        out = []
        ok = []
        for r in self.records:
            if not r.failed:
                ok.append(r)
            row = r.row()
            row["slope_so_far"] = _fit(ok)[0] if len(ok) >= 2 else math.nan
            out.append(row)
        return out


def _fit(recs) -> tuple:
    b = np.array([r.beta for r in recs])
    v = np.array([r.sup_l1 for r in recs])
    if len(recs) < 2 or np.any(v <= 0):
        return math.nan, math.nan
    A = np.vstack([np.log(b), np.ones_like(b)]).T
    sol, res, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    width = math.nan
    if len(recs) > 2:
        resid = np.log(v) - A @ sol
        s2 = float(resid @ resid) / (len(recs) - 2)
        cov = s2 * np.linalg.inv(A.T @ A)
        width = 2 * math.sqrt(cov[0, 0])
    return float(sol[0]), width


def scaling_sweep(experiment: SuperpositionExperiment) -> RemainderReport:
    """compute_remainder across the beta ladder plus log-log fits of sup ||D||_L1 against beta."""
    if len(experiment.betas) < 3:
        raise ValueError("a scaling sweep needs at least three beta values")
    t0 = time.perf_counter()
    recs = []
    for b in experiment.betas:
        r = compute_remainder(experiment, b)
        log.info("beta=%g supL1=%.4g supLinf=%.4g (%.1fs)", b, r.sup_l1, r.sup_linf, r.runtime)
        recs.append(r)
    ok = [r for r in recs if not r.failed]
    s, w = _fit(ok)
    if len(ok) >= 2:
        b = np.array([r.beta for r in ok])
        v = np.array([r.sup_l1 for r in ok]) / np.abs(np.log(b))
        lc, _ = fit_power(b, v)
    else:
        lc = math.nan
    return RemainderReport(recs, s, w, lc, [r.beta for r in recs if r.failed], time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# CI cross-check
# ---------------------------------------------------------------------------

def ci_sum(ctx: OscillatoryContext, fields: Sequence[ModalField], M: int, degrees: Sequence[int]) -> ModalField:
    """Truncated sum over trees T (m <= M) of c_T times the CI monomials, reduced variables at tau."""
    acc = None
    for m in range(2, M + 1):
        coeffs = multiplicity_coefficients(m, degrees)
        for tree in enumerate_trees(m):
            c = coeffs[tree]
            if not c:
                continue
            for idx in ci_multiindices(m, len(fields)):
                val = evaluate_monomial(ctx, tree, None, [fields[i - 1] for i in idx], limits=(3, 4)) * c
                acc = val if acc is None else acc + val
    if acc is None:
        return fields[0].copy(np.zeros_like(fields[0].values))
    return acc


def ci_cross_check(experiment: SuperpositionExperiment, beta: float, M: int) -> dict:
    """Compare the CI-monomial sum with the measured remainder at tau*, and the SI series with singles."""
    from .evolve import truncation_order

    prob = experiment.problem(beta)
    fields = experiment.data(beta, prob)
    total = _ordered_sum(fields)
    if experiment.linear:
        rec = compute_remainder(experiment, beta, keep_final=True)
        return {"beta": beta, "M": M, "D_l1": l1_norm_k(rec.final), "ci_l1": 0.0,
                "gap": l1_norm_k(rec.final), "tolerance": 1e-10, "si_gap": 0.0, "passed": l1_norm_k(rec.final) <= 1e-10}
    R_G, C_G, _ = convergence_radius(prob)
    hn = l1_norm_k(total)
    if hn >= R_G:
        from .evolve import RadiusError

        raise RadiusError(f"||sum h|| = {hn:.4g} is not below R_G = {R_G:.4g}")
    m_beta, _ = truncation_order(beta, R_G)
    if M > min(m_beta, 4):
        raise ValueError(f"M = {M} exceeds min(m(beta), 4) = {min(m_beta, 4)}")
    rec = compute_remainder(experiment, beta, keep_final=True)
    ctx = OscillatoryContext.build(prob)
    ci = ci_sum(ctx, fields, M, prob.degrees)
    P = ctx.prop
    ci_U = ci.copy(P.apply(ci.values, prob.tau_star))
    D = rec.final
    gap = l1_norm_k(D - ci_U)
    tails = tail_bound(hn, R_G, C_G, M) + sum(tail_bound(l1_norm_k(f), R_G, C_G, M) for f in fields)
    tol = tails + 10 * rec.error_estimate
    # SI side: sum_{m<=M} G^(m)(h_l^m) versus the separate solve of packet l
    si_gaps = []
    trajs = rec.info["trajectories"][1:]
    for f, tr in zip(fields, trajs):
        terms = series_terms(prob.with_initial(f), M, ctx)
        c = sum(end for m, (_, end) in terms.items() if m <= M)
        U = P.apply(P.from_modal(c), prob.tau_star)
        si_gaps.append(l1_norm_k(tr.final().copy(tr.final().values - U)))
    return {"beta": beta, "M": M, "D_l1": l1_norm_k(D), "ci_l1": l1_norm_k(ci_U), "gap": gap,
            "norm_gap": abs(l1_norm_k(D) - l1_norm_k(ci_U)), "tolerance": tol, "tail": tails,
            "integrator_error": rec.error_estimate, "si_gap": max(si_gaps),
            "passed": bool(abs(l1_norm_k(D) - l1_norm_k(ci_U)) <= 3 * tol and max(si_gaps) <= tol),
            "R_G": R_G, "norm_h": hn}


# ---------------------------------------------------------------------------
# sine-Gordon versus cubic Klein-Gordon
# ---------------------------------------------------------------------------

def sg_kg_closeness(betas: Sequence[float], packet: WavepacketSpec, *, tau_star: float = 0.5, order: int = 7,
                    rho_coeff: float = 1.0, grid: dict | None = None, integrator: Integrator | None = None,
                    sg_beta_override: float | None = None) -> dict:
    """sup_tau (||U1 - V1||_Linf + ||U2 - V2||_Linf) for sine-Gordon vs cubic Klein-Gordon from identical data.

    ``sg_beta_override`` replaces the beta inside the sine nonlinearity (0 makes the
    two problems identical); the packet width still follows the ladder value.
    """
    betas = list(betas)
    it = integrator or Integrator(estimate_error=False)
    diffs, runtimes = [], []
    for b in betas:
        t0 = time.perf_counter()
        rho = rho_coeff * b * b
        kg = build_problem("klein_gordon", {}, beta=b, rho=rho, tau_star=tau_star, grid=grid,
                           kstar_norm=float(np.linalg.norm(packet.kstar)), integrator=it)
        from .evolve import sine_gordon_nonlinearity

        sb = b if sg_beta_override is None else sg_beta_override
        nl = kg.nonlinearity if sb == 0 else sine_gordon_nonlinearity(sb, order)
        sg = replace(kg, nonlinearity=nl, info={"builder": "sine_gordon", "order": order})
        h = synthesize_modal(packet.with_beta(b), kg.model, kg.grid)
        A = solve(kg.with_initial(h))
        B = solve(sg.with_initial(h))
        sup = 0.0
        for Fa, Fb in zip(A.fields, B.fields):
            dr = inverse_transform(Fa - Fb).values
            sup = max(sup, float(np.abs(dr[0]).max() + np.abs(dr[1]).max()))
        diffs.append(sup)
        runtimes.append(time.perf_counter() - t0)
    exponent = fit_power(betas, diffs)[0] if len(betas) >= 2 and all(x > 0 for x in diffs) else math.nan
    C = diffs[0] / betas[0] ** 2 if diffs[0] > 0 else math.nan
    return {"beta": betas, "difference": diffs, "exponent": exponent, "C_fit": C, "runtime": runtimes}
