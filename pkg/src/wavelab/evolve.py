"""Time integration of modal evolution equations and the truncated series solver.

The evolution equation is

    dU/dtau = -(i/rho) L(k) U + sum_m F^(m)(U, ..., U),

and with u = exp(i tau L / rho) U (the "interaction picture") the fast linear
flow is applied analytically, leaving u' = P(-tau) F(P(tau) u) with
P(tau) = exp(-i tau L / rho).  ``solve`` integrates that with classical RK4.

``series_solution`` builds the same solution as a sum of homogeneous terms
G^(m)(h^m) from the recursion

    G^(1) = h,   G^(m) = sum_{s} sum_{i_1+..+i_s = m} F^(s)(G^(i_1), ..., G^(i_s)),

where every F^(s) is the oscillatory time integral of the nonlinearity,
evaluated with composite Gauss-Legendre panels (``TimeQuadrature``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .dispersion import DispersionModel, builtin_model, custom_model, xi_bound
from .spectral import ChiTensor, Grid, ModalField, SeparableTerm, apply_chi, l1_norm_k

BLOWUP_FACTOR = 1e6
DEFAULT_SNAPSHOTS = 33
GL_ORDER = 6


class BlowUpError(RuntimeError):
    def __init__(self, tau: float, norm: float):
        super().__init__(f"solution norm {norm:.3e} exceeded the blow-up guard at tau = {tau:.6g}")
        self.tau = tau
        self.norm = norm


class RadiusError(ValueError):
    """Raised when the data norm is outside the guaranteed convergence radius."""


@dataclass
class Integrator:
    rho_fraction: float = 20.0       # dt <= rho / rho_fraction
    min_steps: int = 2000            # dt <= tau* / min_steps
    snapshots: int = DEFAULT_SNAPSHOTS
    estimate_error: bool = True
    blowup_factor: float = BLOWUP_FACTOR


@dataclass
class EvolutionProblem:
    model: DispersionModel
    grid: Grid
    nonlinearity: list
    rho: float
    tau_star: float
    initial: ModalField | None = None
    beta: float | None = None
    integrator: Integrator = field(default_factory=Integrator)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0 < self.tau_star <= 1:
            raise ValueError("tau* must lie in (0, 1]")
        if self.beta is not None:
            self.info.setdefault("beta2_over_rho", self.beta ** 2 / self.rho)
        for m, chi in self.nonlinearity:
            if chi.degree != m or chi.ncomp != self.model.ncomp:
                raise ValueError("nonlinearity term does not match its degree / component count")

    def with_initial(self, initial: ModalField) -> "EvolutionProblem":
        return replace(self, initial=initial)

    def linear(self) -> "EvolutionProblem":
        return replace(self, nonlinearity=[])

    @property
    def degrees(self) -> list:
        return sorted(m for m, _ in self.nonlinearity)

    def dt(self) -> float:
        it = self.integrator
        return min(self.rho / it.rho_fraction, self.tau_star / it.min_steps)


# ---------------------------------------------------------------------------
# linear flow
# ---------------------------------------------------------------------------

class Propagator:
    """exp(-i tau L(k) / rho) on a grid, via eigen-decomposition with expm fallback."""

    def __init__(self, model: DispersionModel, grid: Grid, rho: float):
        self.model, self.grid, self.rho = model, grid, rho
        k = grid.k_mesh()
        w, G = model.eigenvectors(k)
        Gm = np.moveaxis(G, (0, 1), (-2, -1))
        cond = np.linalg.cond(Gm)
        self.bad = ~np.isfinite(cond) | (cond > 1e10)
        safe = np.where(self.bad[..., None, None], np.eye(model.ncomp), Gm)
        Ginv = np.linalg.inv(safe)
        self.w = w
        self.G = np.moveaxis(safe, (-2, -1), (0, 1))
        self.Ginv = np.moveaxis(Ginv, (-2, -1), (0, 1))
        self._Lbad = model.matrix(k[(slice(None),) + np.nonzero(self.bad)]) if self.bad.any() else None

    def to_modal(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("ja...,a...->j...", self.Ginv, u)

    def from_modal(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("aj...,j...->a...", self.G, c)

    def phases(self, tau) -> np.ndarray:
        """exp(-i tau omega_j / rho), shape (2J,)+grid (or (2J,T)+grid for an array of taus)."""
        tau = np.asarray(tau, dtype=float)
        if tau.ndim == 0:
            return np.exp(-1j * tau * self.w / self.rho)
        shp = (1, tau.size) + (1,) * self.grid.d
        return np.exp(-1j * tau.reshape(shp) * self.w[:, None] / self.rho)

    def apply(self, values: np.ndarray, tau: float) -> np.ndarray:
        out = self.from_modal(self.phases(tau) * self.to_modal(values))
        if self._Lbad is not None:
            idx = np.nonzero(self.bad)
            for p in range(len(idx[0])):
                pt = tuple(i[p] for i in idx)
                E = expm(-1j * tau * self._Lbad[..., p] / self.rho)
                out[(slice(None),) + pt] = E @ values[(slice(None),) + pt]
        return out


def linear_propagate(field_: ModalField, dtau: float, rho: float, model: DispersionModel) -> ModalField:
    if dtau < 0:
        raise ValueError("dtau must be nonnegative")
    P = Propagator(model, field_.grid, rho)
    return ModalField(field_.grid, P.apply(field_.values, dtau), field_.tau + dtau, field_.model)


# ---------------------------------------------------------------------------
# RK4 solver
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    fields: list
    diagnostics: dict

    def final(self) -> ModalField:
        return self.fields[-1]


def nonlinear_rhs(problem: EvolutionProblem, U: np.ndarray, cache: dict | None = None) -> np.ndarray:
    out = np.zeros_like(U)
    for i, (m, chi) in enumerate(problem.nonlinearity):
        mult = None if cache is None else cache.setdefault(i, {})
        out = out + apply_chi(chi, problem.grid, [U] * m, multipliers=mult)
    return out


def _integrate(problem: EvolutionProblem, dt_target: float, P: Propagator):
    it = problem.integrator
    nsnap = max(2, it.snapshots)
    per = max(1, math.ceil(problem.tau_star / ((nsnap - 1) * dt_target)))
    nsteps = per * (nsnap - 1)
    dt = problem.tau_star / nsteps
    u = problem.initial.values.copy()
    norm0 = max(l1_norm_k(problem.initial), 1e-300)
    cache: dict = {}
    linear = not problem.nonlinearity

    def f(t, v):
        U = P.apply(v, t)
        return P.apply(nonlinear_rhs(problem, U, cache), -t)

    snaps = [u.copy()]
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):  # overflow surfaces as BlowUpError
        for step in range(1, nsteps + 1):
            if not linear:
                k1 = f(t, u)
                k2 = f(t + dt / 2, u + dt / 2 * k1)
                k3 = f(t + dt / 2, u + dt / 2 * k2)
                k4 = f(t + dt, u + dt * k3)
                u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = step * dt
            if step % per == 0:
                snaps.append(u.copy())
                nrm = float(np.sqrt(np.sum(np.abs(u) ** 2, axis=0)).sum() * problem.grid.cell)
                if not np.isfinite(nrm) or nrm > it.blowup_factor * norm0:
                    raise BlowUpError(t, nrm)
    return snaps, nsteps, dt


def solve(problem: EvolutionProblem, snapshots: int | None = None) -> Trajectory:
    """Interaction-picture RK4; returns U (not u) at equispaced snapshot times."""
    if problem.initial is None:
        raise ValueError("problem has no initial data")
    if snapshots is not None:
        problem = replace(problem, integrator=replace(problem.integrator, snapshots=snapshots))
    P = Propagator(problem.model, problem.grid, problem.rho)
    dt0 = problem.dt()
    snaps, nsteps, dt = _integrate(problem, dt0, P)
    nsnap = len(snaps)
    times = np.linspace(0.0, problem.tau_star, nsnap)
    fields = [ModalField(problem.grid, P.apply(s, t), t, problem.model.name) for s, t in zip(snaps, times)]
    diag = {"steps": nsteps, "dt": dt, "error_estimate": 0.0}
    try:
        R = convergence_radius(problem)[0] if problem.nonlinearity else np.inf
        diag["radius_ok"] = bool(l1_norm_k(problem.initial) < R)
    except Exception:  # pragma: no cover - radius is advisory only
        diag["radius_ok"] = None
    if problem.integrator.estimate_error and problem.nonlinearity:
        fine, _, _ = _integrate(problem, dt / 2, P)
        err = max(float(np.sqrt(np.sum(np.abs(a - b) ** 2, axis=0)).sum() * problem.grid.cell)
                  for a, b in zip(snaps, fine))
        diag["error_estimate"] = err * 16 / 15
    return Trajectory(times, fields, diag)


# ---------------------------------------------------------------------------
# time quadrature and oscillatory operators
# ---------------------------------------------------------------------------

class TimeQuadrature:
    """Composite Gauss-Legendre nodes on [0, tau] with panel width <= width.

    ``antiderivative`` integrates node samples along a time axis and returns
    values of int_0^t at every node plus the full integral over [0, tau]; the
    in-panel part uses the interpolating polynomial through the panel nodes.
    """

    def __init__(self, tau: float, width: float, order: int = GL_ORDER):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self.P = max(1, math.ceil(tau / width - 1e-12))
        self.h = self.tau / self.P
        x, w = np.polynomial.legendre.leggauss(order)
        self.order = order
        self.x, self.w = x, w
        edges = np.arange(self.P) * self.h
        self.nodes = (edges[:, None] + self.h * (x[None, :] + 1) / 2).ravel()
        self.weights = np.tile(w * self.h / 2, self.P)
        # S[i, j] = int_{-1}^{x_i} l_j(s) ds  (Lagrange basis through the nodes)
        V = np.vander(x, order, increasing=True)
        coef = np.linalg.inv(V)  # column j: monomial coefficients of l_j
        powers = np.arange(1, order + 1)
        S = np.zeros((order, order))
        for i, xi in enumerate(x):
            S[i] = ((xi ** powers - (-1.0) ** powers) / powers) @ coef
        self.S = S * self.h / 2

    @property
    def size(self) -> int:
        return self.nodes.size

    def antiderivative(self, f: np.ndarray, axis: int = 1) -> tuple[np.ndarray, np.ndarray]:
        f = np.moveaxis(f, axis, 0)
        rest = f.shape[1:]
        fp = f.reshape((self.P, self.order) + rest)
        panel = np.tensordot(self.w * self.h / 2, fp, axes=([0], [1]))  # (P,)+rest
        before = np.cumsum(panel, axis=0) - panel
        inner = np.einsum("ij,pj...->pi...", self.S, fp)
        out = (inner + before[:, None]).reshape((self.size,) + rest)
        total = panel.sum(axis=0)
        return np.moveaxis(out, 0, axis), total


@dataclass
class OscillatoryContext:
    """Everything needed to evaluate (decorated) oscillatory operators F^(s)."""

    problem: EvolutionProblem
    quad: TimeQuadrature
    prop: Propagator
    chunk: int = 256
    _cache: dict = field(default_factory=dict)

    @classmethod
    def build(cls, problem: EvolutionProblem, tau: float | None = None, panel_fraction: float = 4.0,
              order: int = GL_ORDER) -> "OscillatoryContext":
        tau = problem.tau_star if tau is None else tau
        quad = TimeQuadrature(tau, problem.rho / panel_fraction, order)
        return cls(problem, quad, Propagator(problem.model, problem.grid, problem.rho))

    def chi(self, s: int) -> ChiTensor | None:
        for m, c in self.problem.nonlinearity:
            if m == s:
                return c
        return None

    def operator(self, s: int, inputs: Sequence[np.ndarray], in_masks=None, out_mask=None,
                 chi: ChiTensor | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Decorated F^(s) applied to modal-coordinate inputs.

        ``inputs`` are arrays of shape (2J, T)+grid (or (2J, 1)+grid for
        time-independent data) in modal coordinates c = G^-1 u.  Masks
        (length-2J 0/1 vectors) select modes; None keeps all.  Returns the
        values of int_0^t at every node and the full integral over [0, tau].
        """
        chi = chi or self.chi(s)
        if chi is None:
            raise ValueError(f"no degree-{s} nonlinearity in the problem")
        q, P, g = self.quad, self.prop, self.problem.grid
        nc = P.w.shape[0]
        T = q.size
        integrand = np.zeros((nc, T) + g.shape, dtype=complex)
        cache = self._cache.setdefault(id(chi), {})
        bshape = (nc, 1) + g.shape
        for a in range(0, T, self.chunk):
            b = min(T, a + self.chunk)
            ph = P.phases(q.nodes[a:b])
            args = []
            for j, c in enumerate(inputs):
                cj = c[:, a:b] if c.shape[1] == T else c
                if in_masks is not None and in_masks[j] is not None:
                    cj = cj * np.asarray(in_masks[j]).reshape((nc,) + (1,) * (1 + g.d))
                args.append(P.from_modal(ph * cj))
            Fv = apply_chi(chi, g, args, multipliers=cache)
            out = np.conj(ph) * P.to_modal(Fv)
            if out_mask is not None:
                out = out * np.asarray(out_mask).reshape((nc,) + (1,) * (1 + g.d))
            integrand[:, a:b] = out
        del bshape
        return q.antiderivative(integrand, axis=1)


# ---------------------------------------------------------------------------
# series solution
# ---------------------------------------------------------------------------

def compositions(m: int, s: int):
    """Ordered tuples of s positive integers summing to m."""
    for cuts in itertools.combinations(range(1, m), s - 1):
        parts = np.diff((0,) + cuts + (m,))
        yield tuple(int(p) for p in parts)


def series_terms(problem: EvolutionProblem, M: int, ctx: OscillatoryContext | None = None,
                 h: np.ndarray | None = None) -> dict:
    """Homogeneous terms G^(m)(h^m) for m <= M in modal coordinates.

    Returns {m: (nodes_array, end_value)}; nodes_array has a time axis at 1.
    """
    ctx = ctx or OscillatoryContext.build(problem)
    h = problem.initial.values if h is None else h
    c0 = ctx.prop.to_modal(h)[:, None]
    terms = {1: (c0, c0[:, 0])}
    degs = problem.degrees
    for m in range(2, M + 1):
        acc_nodes, acc_end = None, None
        for s in degs:
            if s > m:
                continue
            for comp in compositions(m, s):
                if any(i not in terms for i in comp):
                    continue
                nodes, end = ctx.operator(s, [terms[i][0] for i in comp])
                acc_nodes = nodes if acc_nodes is None else acc_nodes + nodes
                acc_end = end if acc_end is None else acc_end + end
        if acc_nodes is not None:
            terms[m] = (acc_nodes, acc_end)
    return terms


def picard_iterate(problem: EvolutionProblem, iterations: int, ctx: OscillatoryContext,
                   h: np.ndarray | None = None) -> np.ndarray:
    """u_{j+1} = h + sum_s F^(s)(u_j^s) on the quadrature nodes; returns u at tau (modal coords)."""
    h = problem.initial.values if h is None else h
    c0 = ctx.prop.to_modal(h)[:, None]
    u_nodes, u_end = c0, c0[:, 0]
    for _ in range(iterations):
        nodes = np.broadcast_to(c0, (c0.shape[0], ctx.quad.size) + c0.shape[2:]).copy()
        end = c0[:, 0].copy()
        for s in problem.degrees:
            n_, e_ = ctx.operator(s, [u_nodes] * s)
            nodes += n_
            end += e_
        u_nodes, u_end = nodes, end
    return u_end


def convergence_radius(problem: EvolutionProblem) -> tuple[float, float, float]:
    """(R_G, C_G, tau*_max) from the majorant bound; tau*_max refers to the attached data."""
    if not problem.nonlinearity:
        return float("inf"), 0.0, float("inf")
    mF = max(problem.degrees)
    if mF < 2:
        raise ValueError("m_F must be >= 2")
    C_chi = max(chi.norm_bound(problem.grid) for _, chi in problem.nonlinearity)
    k = problem.grid.k_mesh().reshape(problem.grid.d, -1)
    C_xi = xi_bound(problem.model, k[:, :: max(1, k.shape[1] // 512)])
    return radius_formula(problem.tau_star, C_chi, C_xi, mF, problem.initial)


def radius_formula(tau_star: float, C_chi: float, C_xi: float, mF: int, initial=None):
    if mF < 2:
        raise ValueError("m_F must be >= 2")
    base = tau_star * C_chi * C_xi ** (2 * mF + 1)
    R = base ** (-1.0 / (mF - 1)) / 8
    C = 2 * R
    tmax = float("inf")
    if initial is not None:
        hn = l1_norm_k(initial)
        if hn > 0:
            tmax = (8 * hn) ** (-(mF - 1)) / (C_chi * C_xi ** (2 * mF + 1))
    return float(R), float(C), float(tmax)


def generic_map_constants(R_F: float, C_F: float | None = None) -> tuple[float, float]:
    """(C_G, R_G) for an analytic map with radius R_F and bound C_F (default C_F = R_F)."""
    C_F = R_F if C_F is None else C_F
    return R_F ** 2 / (2 * (C_F + R_F)), R_F ** 2 / (4 * (C_F + R_F))


def tail_bound(norm_h: float, R_G: float, C_G: float, M: int) -> float:
    x = norm_h / R_G
    if x >= 1:
        return float("inf")
    return C_G * x ** (M + 1) / (1 - x)


def series_solution(problem: EvolutionProblem, M: int, ctx: OscillatoryContext | None = None,
                    enforce_radius: bool = True) -> tuple[ModalField, dict]:
    """Partial sum sum_{m<=M} G^(m)(h^m) at tau*, mapped back to U-variables."""
    if M < 1:
        raise ValueError("truncation order must be >= 1")
    R_G, C_G, _ = convergence_radius(problem)
    hn = l1_norm_k(problem.initial)
    if enforce_radius and hn >= R_G:
        raise RadiusError(f"||h|| = {hn:.4g} is not below R_G = {R_G:.4g}")
    ctx = ctx or OscillatoryContext.build(problem)
    terms = series_terms(problem, M, ctx)
    c = sum(end for m, (_, end) in terms.items() if m <= M)
    U = ctx.prop.apply(ctx.prop.from_modal(c), problem.tau_star)
    out = ModalField(problem.grid, U, problem.tau_star, problem.model.name)
    norms = {m: float(np.sqrt(np.sum(np.abs(ctx.prop.from_modal(e)) ** 2, axis=0)).sum() * problem.grid.cell)
             for m, (_, e) in terms.items()}
    diag = {"R_G": R_G, "C_G": C_G, "norm_h": hn, "tail_bound": tail_bound(hn, R_G, C_G, M),
            "term_norms": norms, "nodes": ctx.quad.size}
    return out, diag


def truncation_order(beta: float, R_G: float, q: float = 1.0) -> tuple[int, bool]:
    """m(beta^q) ~ q |ln beta| / |ln R_G| + 1, clamped to [2, 8]; returns (m, clamped)."""
    lnR = abs(math.log(R_G)) if R_G > 0 and R_G != 1 else 0.0
    raw = 2 if lnR == 0 else math.ceil(q * abs(math.log(beta)) / lnR) + 1
    m = min(8, max(2, raw))
    return m, m != raw


# ---------------------------------------------------------------------------
# model problems
# ---------------------------------------------------------------------------

def symmetrized(coeff: np.ndarray) -> np.ndarray:
    """Average an (out, a1..am) coefficient over permutations of the inputs."""
    m = coeff.ndim - 1
    perms = list(itertools.permutations(range(1, m + 1)))
    return sum(np.transpose(coeff, (0,) + p) for p in perms) / len(perms)


def _coeff(m: int, nc: int, entries: dict) -> np.ndarray:
    C = np.zeros((nc,) * (m + 1), dtype=complex)
    for idx, val in entries.items():
        C[idx] = val
    return symmetrized(C)


def default_box(beta: float, kstar_norm: float, tau_star: float, rho: float, vmax: float = 1.0,
                width: float = 1.0, d: int = 1, K: float | None = None, N: int | None = None) -> Grid:
    """Periodized k-box wide enough for harmonics and an r-extent holding the moving packets."""
    if K is None:
        K = max(4 * kstar_norm + 20 * beta, 8.0)
    if N is None:
        extent = 40 * width / beta + 2 * vmax * tau_star / rho
        dk = min(2 * np.pi / extent, beta / (8 * width))
        N = int(2 ** math.ceil(math.log2(2 * K / dk)))
    return Grid(d, N, "box", K)


def fpu_nonlinearity(alpha2: float = 0.0, alpha3: float = 1.0) -> list:
    def diff(k):
        a = np.exp(1j * k[0]) - 1.0
        return np.array([a, np.zeros_like(a)])

    out = []
    if alpha2:
        out.append((2, ChiTensor(2, 2, [SeparableTerm(_coeff(2, 2, {(1, 0, 0): alpha2}), None, [diff] * 2)])))
    if alpha3:
        out.append((3, ChiTensor(3, 2, [SeparableTerm(_coeff(3, 2, {(1, 0, 0, 0): alpha3}), None, [diff] * 3)])))
    return out


def fpu_problem(alpha2: float = 0.0, alpha3: float = 1.0, beta: float = 0.1, rho: float | None = None,
                tau_star: float = 0.5, N: int | None = None, initial: ModalField | None = None,
                integrator: Integrator | None = None) -> EvolutionProblem:
    from .wavepacket import required_torus_size

    model = builtin_model("fpu", {"alpha2": alpha2, "alpha3": alpha3})
    grid = Grid(1, N or required_torus_size(beta), "torus")
    rho = beta ** 2 if rho is None else rho
    return EvolutionProblem(model, grid, fpu_nonlinearity(alpha2, alpha3), rho, tau_star, initial, beta,
                            integrator or Integrator(), {"builder": "fpu"})


def _inv_A(k):
    a = 1.0 / np.sqrt(1.0 + np.sum(k ** 2, axis=0))
    return np.array([np.ones_like(a), a])


def kg_nonlinearity(q: float = 1 / 6) -> list:
    return [(3, ChiTensor(3, 2, [SeparableTerm(_coeff(3, 2, {(1, 0, 0, 0): q}), _inv_A)], bound=abs(q)))]


def sine_gordon_nonlinearity(beta: float, order: int = 7) -> list:
    """Odd Taylor terms of (beta U - sin(beta U)) / beta^3 up to U^order."""
    if order < 3 or order % 2 == 0:
        raise ValueError("sin-truncation order must be odd and >= 3")
    out = []
    for j in range(1, (order - 1) // 2 + 1):
        m = 2 * j + 1
        c = (-1) ** (j + 1) * beta ** (2 * j - 2) / math.factorial(m)
        idx = (1,) + (0,) * m
        out.append((m, ChiTensor(m, 2, [SeparableTerm(_coeff(m, 2, {idx: c}), _inv_A)], bound=abs(c))))
    return out


def klein_gordon_problem(q: float = 1 / 6, beta: float = 0.1, rho: float | None = None, tau_star: float = 0.5,
                         grid: Grid | None = None, kstar_norm: float = 1.0, initial=None,
                         integrator: Integrator | None = None) -> EvolutionProblem:
    rho = beta ** 2 if rho is None else rho
    grid = grid or default_box(beta, kstar_norm, tau_star, rho)
    model = builtin_model("klein_gordon")
    return EvolutionProblem(model, grid, kg_nonlinearity(q), rho, tau_star, initial, beta,
                            integrator or Integrator(), {"builder": "klein_gordon", "q": q})


def sine_gordon_problem(beta: float = 0.1, order: int = 7, rho: float | None = None, tau_star: float = 0.5,
                        grid: Grid | None = None, kstar_norm: float = 1.0, initial=None,
                        integrator: Integrator | None = None) -> EvolutionProblem:
    rho = beta ** 2 if rho is None else rho
    grid = grid or default_box(beta, kstar_norm, tau_star, rho)
    model = builtin_model("sine_gordon", {"order": order})
    return EvolutionProblem(model, grid, sine_gordon_nonlinearity(beta, order), rho, tau_star, initial, beta,
                            integrator or Integrator(),
                            {"builder": "sine_gordon", "order": order,
                             "model_error_order": f"beta^{order - 1}"})


def nls_nonlinearity(alpha: complex = 1.0) -> list:
    a = complex(alpha)
    C = _coeff(3, 2, {(0, 1, 0, 0): a, (1, 0, 1, 1): np.conj(a)})
    return [(3, ChiTensor(3, 2, [SeparableTerm(C)], bound=float(np.linalg.norm(C))))]


def nls_problem(gamma_matrix=((1.0,),), alpha: complex = 1.0, beta: float = 0.1, rho: float | None = None,
                tau_star: float = 0.5, grid: Grid | None = None, kstar_norm: float = 1.0, initial=None,
                gamma0: float = 0.0, integrator: Integrator | None = None) -> EvolutionProblem:
    model = builtin_model("nls", {"gamma_matrix": [list(r) for r in gamma_matrix], "gamma0": gamma0})
    rho = beta ** 2 if rho is None else rho
    vmax = 2 * float(np.abs(np.asarray(gamma_matrix)).max()) * (kstar_norm + 1)
    grid = grid or default_box(beta, kstar_norm, tau_star, rho, vmax=vmax, d=model.d)
    return EvolutionProblem(model, grid, nls_nonlinearity(alpha), rho, tau_star, initial, beta,
                            integrator or Integrator(), {"builder": "nls"})


def wave_nonlinearity(alpha: complex = 1.0) -> list:
    def mu0(k):
        r = np.sqrt(np.sum(k ** 2, axis=0))
        s = np.where(r > 0, 1j * k[0] / np.where(r > 0, r, 1.0), 0.0)
        return np.array([np.ones_like(s), s])

    return [(3, ChiTensor(3, 2, [SeparableTerm(_coeff(3, 2, {(1, 0, 0, 0): alpha}), mu0)], bound=abs(alpha)))]


def semilinear_wave_problem(alpha: complex = 1.0, beta: float = 0.1, d: int = 1, rho: float | None = None,
                            tau_star: float = 0.5, grid: Grid | None = None, kstar_norm: float = 1.0,
                            initial=None, integrator: Integrator | None = None) -> EvolutionProblem:
    rho = beta ** 2 if rho is None else rho
    grid = grid or default_box(beta, kstar_norm, tau_star, rho, d=d)
    model = builtin_model("semilinear_wave", {"d": d})
    return EvolutionProblem(model, grid, wave_nonlinearity(alpha), rho, tau_star, initial, beta,
                            integrator or Integrator(), {"builder": "semilinear_wave"})


def transport_toy_problem(rho: float = 1.0, tau_star: float = 0.3, K: float = 16.0, N: int = 1024,
                          initial=None) -> EvolutionProblem:
    """y' = -(1/rho) dy/dx + y^2 carried in the first slot of a two-component system."""

    def symbol(k):
        z = np.zeros_like(k[0])
        return np.array([[k[0], z], [z, -k[0]]], dtype=complex)

    def omega(n, k):
        return np.abs(k[0])

    def eigvec(k):
        up = (k[0] >= 0).astype(complex)
        return np.array([[up, 1 - up], [1 - up, up]])

    model = custom_model("transport", 1, 1, symbol, domain="euclidean", m_F=2, degrees=(2,))
    model.omega_fn, model.eigvec_fn = omega, eigvec
    C = np.zeros((2, 2, 2), dtype=complex)
    C[0, 0, 0] = 1.0
    chi = ChiTensor(2, 2, [SeparableTerm(C)], bound=1.0)
    return EvolutionProblem(model, Grid(1, N, "box", K), [(2, chi)], rho, tau_star, initial, None,
                            Integrator(), {"builder": "transport"})


BUILDERS = {
    "fpu": fpu_problem,
    "klein_gordon": klein_gordon_problem,
    "sine_gordon": sine_gordon_problem,
    "nls": nls_problem,
    "semilinear_wave": semilinear_wave_problem,
}


def build_problem(name: str, params: dict | None = None, *, beta: float, rho: float, tau_star: float,
                  grid: dict | None = None, kstar_norm: float = 1.0,
                  integrator: Integrator | None = None) -> EvolutionProblem:
    """Catalog problem from a name + parameter table; ``grid`` may carry N (torus) or K / N (box)."""
    p = dict(params or {})
    g = dict(grid or {})
    if name not in BUILDERS:
        raise KeyError(f"unknown model {name!r}; available: {sorted(BUILDERS)}")
    common = dict(beta=beta, rho=rho, tau_star=tau_star, integrator=integrator)
    if name == "fpu":
        return fpu_problem(p.get("alpha2", 0.0), p.get("alpha3", 1.0), N=g.get("N"), **common)
    d = int(p.get("d", 1))
    vmax = 1.0
    if name == "nls":
        vmax = 2 * float(np.abs(np.asarray(p.get("gamma_matrix", [[1.0]]))).max()) * (kstar_norm + 1)
    box = default_box(beta, kstar_norm, tau_star, rho, vmax=vmax, d=d, K=g.get("K"), N=g.get("N"))
    if name == "klein_gordon":
        return klein_gordon_problem(p.get("q", 1 / 6), grid=box, **common)
    if name == "sine_gordon":
        return sine_gordon_problem(order=int(p.get("order", 7)), grid=box, **common)
    if name == "nls":
        return nls_problem(p.get("gamma_matrix", ((1.0,),)), complex(p.get("alpha", 1.0)), grid=box,
                           gamma0=p.get("gamma0", 0.0), **common)
    return semilinear_wave_problem(complex(p.get("alpha", 1.0)), d=d, grid=box, **common)
