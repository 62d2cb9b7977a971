"""Dispersion relations, modal eigen-structure and genericity checks.

Every model is written as

    d/dtau U~(k) = -(i / rho) L(k) U~(k) + F~(U~)(k),

with ``L(k)`` a 2J x 2J matrix whose eigenvalues come in pairs
``omega_{n,+}(k) = omega_n(k) >= 0`` and ``omega_{n,-}(k) = -omega_n(k)``.
Modes are ordered ``(1,+), (1,-), (2,+), (2,-), ...``; mode index
``2*(n-1) + (0 if zeta > 0 else 1)``.

Catalog models carry closed-form frequencies, eigenvectors and group
velocities; anything else falls back on numerical eigen-decomposition and
finite differences.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import wrap_torus

CROSSING_TOL = 1e-9
TOL_ND = 1e-8
TOL_CD = 1e-8
TOL_GV = 1e-8
H_GV = 1e-4
THETA_CAP = 9

CATALOG = ("fpu", "klein_gordon", "sine_gordon", "nls", "semilinear_wave")


class DegeneratePointError(ValueError):
    """Raised when a wavevector sits on (or too close to) the band-crossing set."""


class ConditioningError(RuntimeError):
    """Raised when the numerical eigen-decomposition is unusable."""


def mode_index(n: int, zeta: int) -> int:
    return 2 * (n - 1) + (0 if zeta > 0 else 1)


@dataclass
class DispersionModel:
    """Linear part of a modal evolution equation.

    ``symbol(k)`` takes a k-mesh of shape (d,)+S and returns (2J, 2J)+S.
    Optional closed forms: ``omega_fn(n, k) -> S`` (the nonnegative band),
    ``grad_fn(n, k) -> (d,)+S`` and ``eigvec_fn(k) -> (2J, 2J)+S`` whose
    columns are the modes in standard order.
    """

    name: str
    d: int
    J: int
    domain: str
    symbol: Callable[[np.ndarray], np.ndarray]
    m_F: int | str = 3
    degrees: tuple = (3,)
    crossing_tolerance: float = CROSSING_TOL
    omega_fn: Callable | None = None
    grad_fn: Callable | None = None
    eigvec_fn: Callable | None = None
    sigma_points: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain not in ("torus", "euclidean"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.d < 1 or self.J < 1:
            raise ValueError("d and J must be >= 1")

    @property
    def ncomp(self) -> int:
        return 2 * self.J

    @property
    def max_degree(self) -> int:
        if self.m_F == "entire":
            return THETA_CAP
        return int(self.m_F)

    def _mesh(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if k.ndim == 0 or (k.ndim == 1 and self.d == 1 and k.shape[0] != 1):
            # scalar or list of 1d points -> (1, n)
            k = k.reshape(1, *k.shape) if k.ndim else k.reshape(1)
        return k

    def reduce(self, k):
        """Bring wavevectors into the fundamental domain (torus wrapping)."""
        k = np.asarray(k, dtype=float)
        return wrap_torus(k) if self.domain == "torus" else k

    # -- spectra ---------------------------------------------------------
    def matrix(self, k) -> np.ndarray:
        return self.symbol(self._mesh(k))

    def omega(self, n: int, k) -> np.ndarray:
        """Nonnegative band frequency omega_n(k)."""
        k = self._mesh(k)
        if self.omega_fn is not None:
            return np.asarray(self.omega_fn(n, k), dtype=float)
        w, _ = _numeric_eigen(self.symbol(k), self.J)
        return w[mode_index(n, +1)]

    def omega_signed(self, n: int, zeta: int, k) -> np.ndarray:
        return zeta * self.omega(n, k)

    def bands(self, k) -> np.ndarray:
        """All nonnegative band frequencies, shape (J,)+S."""
        return np.array([self.omega(n, k) for n in range(1, self.J + 1)])

    def eigenvectors(self, k) -> tuple[np.ndarray, np.ndarray]:
        """Return (omega_signed, G) with omega of shape (2J,)+S and G[:, j] the j-th mode."""
        k = self._mesh(k)
        if self.eigvec_fn is not None and self.omega_fn is not None:
            w = np.array([z * np.asarray(self.omega_fn(n, k), float)
                          for n in range(1, self.J + 1) for z in (1, -1)])
            return w, np.asarray(self.eigvec_fn(k), dtype=complex)
        return _numeric_eigen(self.symbol(k), self.J)

    def projections(self, k) -> np.ndarray:
        """Spectral projections Pi_j(k), shape (2J, 2J, 2J)+S, first index = mode."""
        _, G = self.eigenvectors(k)
        Gm = np.moveaxis(G, (0, 1), (-2, -1))
        Ginv = np.linalg.inv(Gm)
        P = np.einsum("...aj,...jb->j...ab", Gm, Ginv)
        return np.moveaxis(P, (-2, -1), (1, 2))

    def group_velocity(self, n: int, zeta: int, k, method: str = "auto") -> np.ndarray:
        """grad omega_{n,zeta}(k), shape (d,)+S."""
        k = self._mesh(k)
        if self.is_band_crossing_any(k):
            raise DegeneratePointError("group velocity requested at a band-crossing point")
        if method == "auto" and self.grad_fn is not None:
            return zeta * np.asarray(self.grad_fn(n, k), dtype=float)
        return zeta * richardson_gradient(lambda q: self.omega(n, q), k, H_GV)

    # -- crossing set ----------------------------------------------------
    def crossing_gap(self, k) -> np.ndarray:
        """min(omega_1, min_n omega_{n+1} - omega_n) pointwise."""
        w = self.bands(k)
        gap = w[0]
        for n in range(self.J - 1):
            gap = np.minimum(gap, w[n + 1] - w[n])
        return gap

    def is_band_crossing_any(self, k, tol: float | None = None) -> bool:
        tol = self.crossing_tolerance if tol is None else tol
        return bool(np.any(self.crossing_gap(k) <= tol))

    def distance_to_sigma(self, k) -> float:
        """Distance from a point to the known crossing set (inf if none is known)."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        best = np.inf
        for s in self.sigma_points:
            diff = k - np.asarray(s, dtype=float)
            if self.domain == "torus":
                diff = wrap_torus(diff)
            best = min(best, float(np.linalg.norm(diff)))
        if self.name == "nls" and self.params.get("indefinite"):
            best = min(best, _nls_null_distance(self.params["gamma_matrix"], k))
        return best


def _nls_null_distance(Gam, k) -> float:
    # distance to the null cone of an indefinite quadratic form, sampled numerically
    from scipy.optimize import minimize

    Gam = np.asarray(Gam, float)

    def obj(z):
        return np.sum((z - k) ** 2) + 1e6 * (z @ Gam @ z) ** 2

    res = minimize(obj, k, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    return float(np.sqrt(np.sum((res.x - k) ** 2)))


def _numeric_eigen(M: np.ndarray, J: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition sorted into (n, zeta) order; M has shape (2J,2J)+S."""
    S = M.shape[2:]
    Mm = np.moveaxis(M, (0, 1), (-2, -1)).reshape(-1, 2 * J, 2 * J)
    ws = np.zeros((Mm.shape[0], 2 * J))
    Gs = np.zeros((Mm.shape[0], 2 * J, 2 * J), dtype=complex)
    for p, A in enumerate(Mm):
        if np.allclose(A, A.conj().T, atol=1e-13):
            w, V = np.linalg.eigh(A)
        else:
            w, V = np.linalg.eig(A)
            if np.max(np.abs(w.imag)) > 1e-9 * max(1.0, np.max(np.abs(w))):
                raise ConditioningError("symbol has non-real eigenvalues")
            w = w.real
            if np.linalg.cond(V) > 1e12:
                raise ConditioningError("symbol is not diagonalizable to working precision")
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        pos = list(range(J, 2 * J))
        neg = list(range(J - 1, -1, -1))
        cols = [c for pair in zip(pos, neg) for c in pair]
        ws[p] = w[cols]
        Gs[p] = V[:, cols] / np.linalg.norm(V[:, cols], axis=0)
    w = np.moveaxis(ws.reshape(S + (2 * J,)), -1, 0)
    G = np.moveaxis(Gs.reshape(S + (2 * J, 2 * J)), (-2, -1), (0, 1))
    return w, G


def richardson_gradient(f: Callable, k: np.ndarray, h: float) -> np.ndarray:
    """Central differences with one Richardson step; k has shape (d,)+S."""
    k = np.asarray(k, dtype=float)
    d = k.shape[0]
    out = np.zeros_like(k)
    for i in range(d):
        e = np.zeros((d,) + (1,) * (k.ndim - 1))
        e[i] = 1.0

        def D(s):
            return (f(k + s * e) - f(k - s * e)) / (2 * s)

        out[i] = (4 * D(h / 2) - D(h)) / 3
    return out


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _norm(k):
    return np.sqrt(np.sum(np.asarray(k) ** 2, axis=0))


def _fpu(params) -> DispersionModel:
    a2 = float(params.get("alpha2", 0.0))

    def symbol(k):
        a = np.exp(1j * k[0]) - 1.0
        z = np.zeros_like(a)
        # -i L = [[0, 1 - e^{-ik}], [e^{ik} - 1, 0]]
        return 1j * np.array([[z, -np.conj(a)], [a, z]])

    def omega(n, k):
        return 2 * np.abs(np.sin(k[0] / 2))

    def grad(n, k):
        kk = wrap_torus(k[0])
        return (np.sign(kk) * np.cos(kk / 2))[None]

    def eigvec(k):
        a = np.exp(1j * k[0]) - 1.0
        ph = a / np.where(np.abs(a) > 0, np.abs(a), 1.0)
        ph = np.where(np.abs(a) > 0, ph, 1.0)
        s = 1 / np.sqrt(2)
        return s * np.array([[-1j * np.ones_like(ph), 1j * np.ones_like(ph)], [ph, ph]])

    degrees = (2, 3) if a2 != 0 else (3,)
    return DispersionModel("fpu", 1, 1, "torus", symbol, m_F=3, degrees=degrees,
                           omega_fn=omega, grad_fn=grad, eigvec_fn=eigvec,
                           sigma_points=((0.0,),), params=dict(params))


def _kg_like(name, params, d=1) -> DispersionModel:
    def A(k):
        return np.sqrt(1.0 + np.sum(k ** 2, axis=0))

    def symbol(k):
        a = A(k)
        z = np.zeros_like(a)
        return np.array([[z, 1j * a], [-1j * a, z]], dtype=complex)

    def omega(n, k):
        return A(k)

    def grad(n, k):
        return k / A(k)

    def eigvec(k):
        o = np.ones(k.shape[1:])
        s = 1 / np.sqrt(2)
        return s * np.array([[1j * o, -1j * o], [o, o]], dtype=complex)

    if name == "sine_gordon":
        order = int(params.get("order", 7))
        degrees = tuple(range(3, order + 1, 2))
        m_F = order
    else:
        degrees, m_F = (3,), 3
    return DispersionModel(name, d, 1, "euclidean", symbol, m_F=m_F, degrees=degrees,
                           omega_fn=omega, grad_fn=grad, eigvec_fn=eigvec, params=dict(params))


def _wave(params) -> DispersionModel:
    d = int(params.get("d", 1))

    def symbol(k):
        a = _norm(k)
        z = np.zeros_like(a)
        return np.array([[z, 1j * a], [-1j * a, z]], dtype=complex)

    def omega(n, k):
        return _norm(k)

    def grad(n, k):
        r = _norm(k)
        return k / np.where(r > 0, r, np.inf)

    def eigvec(k):
        o = np.ones(k.shape[1:])
        s = 1 / np.sqrt(2)
        return s * np.array([[1j * o, -1j * o], [o, o]], dtype=complex)

    return DispersionModel("semilinear_wave", d, 1, "euclidean", symbol, m_F=3, degrees=(3,),
                           omega_fn=omega, grad_fn=grad, eigvec_fn=eigvec,
                           sigma_points=(tuple([0.0] * d),), params=dict(params))


def _nls(params) -> DispersionModel:
    Gam = np.atleast_2d(np.asarray(params.get("gamma_matrix", [[1.0]]), dtype=float))
    g0 = float(params.get("gamma0", 0.0))
    d = Gam.shape[0]
    if Gam.shape != (d, d):
        raise ValueError("gamma_matrix must be square")
    Gam = 0.5 * (Gam + Gam.T)
    if not np.any(Gam) and g0 == 0.0:
        raise ValueError("nls needs a gamma that is not identically zero")
    eig = np.linalg.eigvalsh(Gam)
    indefinite = bool(eig.min() < 0 < eig.max())

    def gamma(k):
        return g0 + np.einsum("i...,ij,j...->...", k, Gam, k)

    def symbol(k):
        gk = gamma(k)
        gm = gamma(-k)
        z = np.zeros_like(gk)
        return np.array([[gk, z], [z, -gm]], dtype=complex)

    def omega(n, k):
        return np.abs(gamma(k))

    def grad(n, k):
        return np.sign(gamma(k)) * 2 * np.einsum("ij,j...->i...", Gam, k)

    def eigvec(k):
        gk = gamma(k)
        up = (gk >= 0).astype(complex)
        dn = 1 - up
        return np.array([[up, dn], [dn, up]])

    sigma = ()
    if g0 == 0.0 and not indefinite:
        sigma = (tuple([0.0] * d),)
    p = dict(params)
    p.update(gamma_matrix=Gam.tolist(), gamma0=g0, indefinite=indefinite)
    return DispersionModel("nls", d, 1, "euclidean", symbol, m_F=3, degrees=(3,),
                           omega_fn=omega, grad_fn=grad, eigvec_fn=eigvec,
                           sigma_points=sigma, params=p)


def builtin_model(name: str, params: dict | None = None) -> DispersionModel:
    """Catalog constructor: fpu, klein_gordon, sine_gordon, nls, semilinear_wave."""
    params = dict(params or {})
    if name == "fpu":
        return _fpu(params)
    if name in ("klein_gordon", "sine_gordon"):
        return _kg_like(name, params)
    if name == "nls":
        return _nls(params)
    if name == "semilinear_wave":
        return _wave(params)
    raise ValueError(f"unknown model {name!r}; choose from {CATALOG}")


def custom_model(name: str, d: int, J: int, symbol: Callable, domain: str = "torus",
                 m_F: int = 3, degrees: Sequence[int] = (3,)) -> DispersionModel:
    """Model defined only through its symbol; spectra are computed numerically."""
    return DispersionModel(name, d, J, domain, symbol, m_F=m_F, degrees=tuple(degrees))


def tabulated_model(name: str, grid, table: np.ndarray, **kw) -> DispersionModel:
    """Model from a symbol sampled on a k-grid (shape (2J,2J)+grid.shape); nearest-point lookup."""
    table = np.asarray(table, dtype=complex)
    J = table.shape[0] // 2

    def symbol(k):
        idx = np.rint(np.asarray(k) / grid.dk).astype(int) % grid.N
        return table[(slice(None), slice(None)) + tuple(idx)]

    dom = "torus" if grid.domain == "torus" else "euclidean"
    return custom_model(name, grid.d, J, symbol, domain=dom, **kw)


# ---------------------------------------------------------------------------
# point operations
# ---------------------------------------------------------------------------

def _point(model, k) -> np.ndarray:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (model.d,):
        raise ValueError(f"wavevector must have {model.d} components")
    return k.reshape(model.d, 1)


def eigen_decompose(model: DispersionModel, k) -> list:
    """[(omega, g, Pi)] in (n, zeta) order at a single wavevector."""
    kp = _point(model, k)
    if model.is_band_crossing_any(kp):
        raise DegeneratePointError(f"k = {np.ravel(k)} is a band-crossing point")
    w, G = model.eigenvectors(kp)
    G = G[..., 0]
    Ginv = np.linalg.inv(G)
    if np.linalg.cond(G) > 1e12:
        raise ConditioningError("eigenvector matrix is ill-conditioned")
    return [(float(w[j, 0]), G[:, j].copy(), np.outer(G[:, j], Ginv[j])) for j in range(model.ncomp)]


def group_velocity(model: DispersionModel, n: int, zeta: int, k, method: str = "auto") -> np.ndarray:
    kp = _point(model, k)
    return model.group_velocity(n, zeta, kp, method=method)[:, 0]


def is_band_crossing(model: DispersionModel, k, tol: float | None = None) -> bool:
    return model.is_band_crossing_any(_point(model, k), tol)


def xi_bound(model: DispersionModel, kpts: np.ndarray) -> float:
    """C_Xi estimate: max of ||Xi|| and ||Xi^-1|| (spectral norms) over sample points (d, n)."""
    _, G = model.eigenvectors(kpts)
    Gm = np.moveaxis(G, (0, 1), (-2, -1))
    s = np.linalg.svd(Gm, compute_uv=False)
    return float(max(s.max(), (1 / s.min(axis=-1)).max()))


# ---------------------------------------------------------------------------
# genericity
# ---------------------------------------------------------------------------

def admissible_thetas(model: DispersionModel, m_F=None) -> list:
    cap = model.max_degree if m_F is None else (THETA_CAP if m_F == "entire" else int(m_F))
    cap = min(cap, THETA_CAP)
    out = set()
    for m in model.degrees:
        if m <= cap:
            out.update(range(-m, m + 1, 2))
    return sorted(out)


@dataclass
class NondegeneracyResult:
    passed: bool
    margin: float
    resonance_margin: float
    frequency_margin: float
    violations: list
    sigma_hits: list
    delta_nfm: float

    def __iter__(self):
        # allow (pass, margin, violations) unpacking
        return iter((self.passed, self.margin, self.violations))


def check_nondegeneracy(model: DispersionModel, kstar, n_l: int = 1, m_F=None,
                        tol: float = TOL_ND) -> NondegeneracyResult:
    kp = _point(model, kstar)
    if model.is_band_crossing_any(kp):
        raise DegeneratePointError("center lies on the band-crossing set")
    w_l = float(model.omega(n_l, kp)[0])
    res_margin = np.inf
    violations, sigma_hits = [], []
    for theta in admissible_thetas(model, m_F):
        q = model.reduce(theta * kp)
        if model.is_band_crossing_any(q):
            sigma_hits.append(theta)
            continue
        for n in range(1, model.J + 1):
            wn = float(model.omega(n, q)[0])
            for zeta in (1, -1):
                if n == n_l and theta == zeta:
                    continue
                val = abs(theta * w_l - zeta * wn)
                res_margin = min(res_margin, val)
                if val <= tol:
                    violations.append((n, theta, zeta))
    margin = min(res_margin, w_l)
    passed = not violations and not sigma_hits and w_l > tol
    return NondegeneracyResult(passed, float(margin), float(res_margin), w_l, violations,
                               sigma_hits, delta_nfm(model, kstar, n_l, margin))


def delta_nfm(model: DispersionModel, kstar, n_l: int, omega_star: float) -> float:
    """Largest delta with delta * max_{|k-k*|<=delta} |grad omega| <= omega*/4 (diagnostic)."""
    if not np.isfinite(omega_star) or omega_star <= 0:
        return 0.0
    kp = _point(model, kstar)
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(model.d, 64))
    dirs /= np.linalg.norm(dirs, axis=0)

    def ok(delta):
        pts = kp + delta * dirs * np.linspace(0, 1, 64)
        if model.is_band_crossing_any(pts):
            return False
        gv = np.linalg.norm(model.group_velocity(n_l, 1, pts), axis=0).max()
        return delta * gv <= omega_star / 4

    lo, hi = 0.0, 1.0
    while ok(hi) and hi < 1e3:
        lo, hi = hi, 2 * hi
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def _center(c):
    if hasattr(c, "kstar"):
        return np.atleast_1d(np.asarray(c.kstar, float)), int(c.band), int(getattr(c, "zeta", 1))
    k, n, z = c
    return np.atleast_1d(np.asarray(k, float)), int(n), int(z)


def check_group_velocity_separation(model: DispersionModel, centers, include_conjugates: bool = True,
                                    tol: float = TOL_GV) -> tuple:
    """p0 = min over cross-packet pairs of |grad omega_{n1}(k1) - grad omega_{n2}(k2)|.

    With ``include_conjugates`` every center k* also stands for -k* (real
    data; each packet sits at +-k*), so the comparison runs over the closed
    center sets.
    """
    cs = [_center(c) for c in centers]
    if len(cs) < 2:
        return float("inf"), None
    vel = []
    for k, n, z in cs:
        locs = [k, -k] if include_conjugates else [k]
        vs = []
        for q in locs:
            qq = model.reduce(q)
            if model.is_band_crossing_any(qq.reshape(model.d, 1)):
                raise DegeneratePointError("center lies on the band-crossing set")
            vs.append(model.group_velocity(n, 1, qq.reshape(model.d, 1))[:, 0])
        vel.append(vs)
    best, worst = np.inf, None
    for i, j in itertools.combinations(range(len(cs)), 2):
        for a in vel[i]:
            for b in vel[j]:
                dist = float(np.linalg.norm(a - b))
                if dist < best:
                    best, worst = dist, (i, j)
    return best, worst


def gv_passes(p0: float, tol: float = TOL_GV) -> bool:
    return p0 > tol


@dataclass
class DegeneracyReport:
    center: int
    separation: bool
    sigma_clear: bool
    homogeneity: bool
    passed: bool
    details: dict


def check_complete_degeneracy(model: DispersionModel, centers, nu_max: int = 9,
                              delta: float = 1e-6, tol: float = TOL_CD) -> list:
    """Per-center report of the separation / sigma-avoidance / homogeneity tests."""
    if nu_max < 1 or nu_max % 2 == 0:
        raise ValueError("nu_max must be a positive odd integer")
    if any(m % 2 == 0 for m in model.degrees):
        raise ValueError("complete degeneracy needs an odd-only nonlinearity")
    cs = [_center(c) for c in centers]
    nus = list(range(1, nu_max + 1, 2))
    out = []
    for idx, (k, n, z) in enumerate(cs):
        kp = k.reshape(model.d, 1)
        det = {}
        # (ii) nu k* away from sigma
        clear = True
        for nu in nus:
            q = model.reduce(nu * kp)
            if model.crossing_gap(q)[0] <= delta or model.distance_to_sigma(q[:, 0]) <= delta:
                clear = False
                det.setdefault("sigma_hits", []).append(nu)
        # (iii) homogeneity along the ray
        hom = True
        if clear:
            w1 = float(model.omega(n, kp)[0])
            g1 = model.group_velocity(n, 1, kp)[:, 0]
            for th in nus[1:]:
                q = model.reduce(th * kp)
                wq = float(model.omega(n, q)[0])
                gq = model.group_velocity(n, 1, q)[:, 0]
                ew, eg = abs(wq - th * w1), float(np.linalg.norm(gq - g1))
                det.setdefault("homogeneity", []).append((th, ew, eg))
                if ew > tol or eg > tol:
                    hom = False
        else:
            hom = False
        # (i) separation from every other center over odd multiples
        sep = True
        min_sep = np.inf
        for jdx, (k2, n2, _) in enumerate(cs):
            if jdx == idx:
                continue
            for nu1 in nus:
                for nu2 in nus:
                    q1 = model.reduce(nu1 * kp)
                    q2 = model.reduce(nu2 * k2.reshape(model.d, 1))
                    if model.is_band_crossing_any(q1) or model.is_band_crossing_any(q2):
                        sep = False
                        continue
                    g1 = model.group_velocity(n, 1, q1)[:, 0]
                    g2 = model.group_velocity(n2, 1, q2)[:, 0]
                    min_sep = min(min_sep, float(np.linalg.norm(g1 - g2)))
        det["min_separation"] = min_sep
        if min_sep <= tol:
            sep = False
        out.append(DegeneracyReport(idx, sep, clear, hom, sep and clear and hom, det))
    return out


@dataclass
class GenericityReport:
    centers: list
    p0: float
    worst_pair: tuple | None
    nondegeneracy: list
    complete_degeneracy: list
    applicable_theorem: str
    notes: list = field(default_factory=list)

    def rows(self) -> list:
        rows = []
        for i, c in enumerate(self.centers):
            nd = self.nondegeneracy[i]
            cd = self.complete_degeneracy[i] if self.complete_degeneracy else None
            rows.append({
                "center": i,
                "kstar": " ".join(f"{x:.12g}" for x in np.atleast_1d(c[0])),
                "band": c[1], "zeta": c[2],
                "nondegenerate": None if nd is None else nd.passed,
                "margin": None if nd is None else nd.margin,
                "complete_degeneracy": None if cd is None else cd.passed,
                "p0": self.p0, "theorem": self.applicable_theorem,
            })
        return rows


def genericity_report(model: DispersionModel, centers, include_conjugates: bool = True,
                      nu_max: int = 9) -> GenericityReport:
    cs = [_center(c) for c in centers]
    notes = []
    nd = []
    for k, n, z in cs:
        try:
            nd.append(check_nondegeneracy(model, k, n))
        except DegeneratePointError as exc:
            nd.append(None)
            notes.append(str(exc))
    try:
        p0, worst = check_group_velocity_separation(model, cs, include_conjugates)
    except DegeneratePointError as exc:
        p0, worst = 0.0, None
        notes.append(str(exc))
    cd = []
    if all(m % 2 for m in model.degrees) and all(x is not None for x in nd):
        try:
            cd = check_complete_degeneracy(model, cs, nu_max)
        except DegeneratePointError as exc:
            notes.append(str(exc))
    gv_ok = gv_passes(p0)
    gen1 = all(r is not None and r.passed for r in nd)
    gen2 = bool(cd) and all(r.passed for r in cd) and all(
        r is not None and r.frequency_margin > TOL_ND for r in nd)
    if gv_ok and gen1:
        thm = "generic1"
    elif gv_ok and gen2:
        thm = "generic2"
    else:
        thm = "none"
    return GenericityReport([(k, n, z) for k, n, z in cs], p0, worst, nd, cd, thm, notes)
