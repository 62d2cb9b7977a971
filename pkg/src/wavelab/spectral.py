"""Grids, lattice/continuous Fourier transforms, convolution nonlinearities and norms.

Conventions
-----------
Fields live on a uniform d-dimensional grid stored in FFT ordering.  Modal
values carry a leading component axis, so a ``ModalField`` with ``J`` bands
has ``values.shape == (2*J,) + (N,)*d``.

* torus:  k in [-pi, pi)^d with dk = 2 pi / N, lattice sites m in Z^d (dx = 1).
* box:    k in [-K, K)^d with dk = 2 K / N, r-spacing dx = 2 pi / (N dk).

The forward transform is ``U~(k) = sum_m U(m) exp(-i m.k) dx^d`` and the
inverse is ``U(r) = (2 pi)^-d sum_k U~(k) exp(i k.r) dk^d``; with ``N dk dx =
2 pi`` the two are an exact inverse pair.  m-fold convolutions carry the
measure ``(dk / 2 pi)^((m-1) d)``, which is exactly what a pointwise product
in r-space produces.
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DENSE_LIMIT = 2 ** 26

__all__ = [
    "Grid", "ModalField", "SpatialField", "SeparableTerm", "ChiTensor",
    "forward_transform", "inverse_transform", "nonlinear_term",
    "direct_convolution", "l1_norm_k", "linf_norm_r", "l2_norm_k", "l2_norm_r",
    "e_norm", "write_field_csv", "read_field_csv", "write_field_binary",
    "read_field_binary", "convolve_scalar",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid in k with its dual r-grid.

    ``domain`` is ``"torus"`` for lattice problems and ``"box"`` for the
    periodized approximation of R^d, in which case ``K`` is the half-width of
    the k-box.
    """

    d: int
    N: int
    domain: str = "torus"
    K: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("grid dimension must be >= 1")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.N}")
        if self.domain not in ("torus", "box"):
            raise ValueError(f"unknown grid domain {self.domain!r}")
        if self.domain == "box":
            if self.K is None or self.K <= 0:
                raise ValueError("box grids need a positive half-width K")
        elif self.K is not None and not np.isclose(self.K, np.pi):
            raise ValueError("torus grids are fixed to [-pi, pi)")

    @property
    def dk(self) -> float:
        if self.domain == "torus":
            return 2 * np.pi / self.N
        return 2 * self.K / self.N

    @property
    def dx(self) -> float:
        return 2 * np.pi / (self.N * self.dk)

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell(self) -> float:
        """k-space volume element dk^d."""
        return self.dk ** self.d

    @property
    def k_axis(self) -> np.ndarray:
        return self.dk * self.N * np.fft.fftfreq(self.N)

    @property
    def r_axis(self) -> np.ndarray:
        return self.dx * self.N * np.fft.fftfreq(self.N)

    def k_mesh(self) -> np.ndarray:
        """Wavevectors as an array of shape (d,) + shape."""
        ax = self.k_axis
        return np.array(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def r_mesh(self) -> np.ndarray:
        ax = self.r_axis
        return np.array(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def wrap(self, k):
        """Reduce wavevectors into (-pi, pi] on the torus; identity on a box."""
        k = np.asarray(k, dtype=float)
        if self.domain != "torus":
            return k
        return wrap_torus(k)

    def index_of(self, k) -> tuple:
        """Nearest grid index of a wavevector (after wrapping)."""
        k = np.atleast_1d(self.wrap(k))
        idx = np.rint(k / self.dk).astype(int) % self.N
        return tuple(int(i) for i in idx)

    def as_dict(self) -> dict:
        out = {"d": self.d, "N": self.N, "domain": self.domain}
        if self.domain == "box":
            out["K"] = float(self.K)
        return out


def wrap_torus(k):
    """Componentwise reduction into (-pi, pi]."""
    k = np.asarray(k, dtype=float)
    w = np.mod(k + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(w, -np.pi, atol=1e-14, rtol=0), np.pi, w)


@dataclass
class ModalField:
    """Multi-component field sampled on the k-grid."""

    grid: Grid
    values: np.ndarray
    tau: float = 0.0
    model: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("modal field contains non-finite values")

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def copy(self, values=None, tau=None) -> "ModalField":
        v = self.values.copy() if values is None else values
        return ModalField(self.grid, v, self.tau if tau is None else tau, self.model)

    def __add__(self, other):
        return self.copy(self.values + _vals(other))

    def __sub__(self, other):
        return self.copy(self.values - _vals(other))

    def __mul__(self, c):
        return self.copy(self.values * c)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int, **kw) -> "ModalField":
        return cls(grid, np.zeros((ncomp,) + grid.shape, dtype=complex), **kw)


def _vals(x):
    return x.values if isinstance(x, (ModalField, SpatialField)) else x


@dataclass
class SpatialField:
    """Multi-component field on the dual r-grid (lattice sites on the torus)."""

    grid: Grid
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError("values do not match the grid")


def forward_transform(spatial: SpatialField) -> ModalField:
    g = spatial.grid
    axes = tuple(range(1, g.d + 1))
    return ModalField(g, np.fft.fftn(spatial.values, axes=axes) * g.dx ** g.d, spatial.tau)


def inverse_transform(modal: ModalField) -> SpatialField:
    g = modal.grid
    axes = tuple(range(1, g.d + 1))
    return SpatialField(g, np.fft.ifftn(modal.values, axes=axes) / g.dx ** g.d, modal.tau)


# ---------------------------------------------------------------------------
# susceptibility tensors
# ---------------------------------------------------------------------------

Multiplier = Callable[[np.ndarray], np.ndarray]


@dataclass
class SeparableTerm:
    """One term mu0(k) * C[mu1(k1) u1(k1), ..., mum(km) um(km)].

    ``mu0`` and each entry of ``mus`` map a k-mesh of shape (d,)+S to an
    array of shape (2J,)+S (componentwise multiplier); ``None`` means 1.
    ``coeff`` is the constant m-linear map stored as an array of shape
    (2J,)*(m+1) with the output index first.
    """

    coeff: np.ndarray
    mu0: Multiplier | None = None
    mus: Sequence[Multiplier | None] = ()

    def multiplier(self, j: int, k: np.ndarray, ncomp: int) -> np.ndarray | None:
        fn = self.mu0 if j == 0 else (self.mus[j - 1] if self.mus else None)
        if fn is None:
            return None
        out = np.asarray(fn(k), dtype=complex)
        return np.broadcast_to(out, (ncomp,) + k.shape[1:])


@dataclass
class ChiTensor:
    """Degree-m susceptibility, separable (sum of terms) or dense.

    ``dense`` is a callable ``dense(k, ks) -> array (2J,)*(m+1)+S`` giving the
    full tensor at output wavevector ``k`` and input wavevectors ``ks`` (a
    list of m meshes).  It is only used by the direct summation path.
    """

    degree: int
    ncomp: int
    terms: list = field(default_factory=list)
    dense: Callable | None = None
    bound: float | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        for t in self.terms:
            c = np.asarray(t.coeff)
            if c.shape != (self.ncomp,) * (self.degree + 1):
                raise ValueError(f"coefficient shape {c.shape} does not fit degree {self.degree}")
        if not self.terms and self.dense is None:
            raise ValueError("ChiTensor needs separable terms or a dense kernel")

    @property
    def separable(self) -> bool:
        return bool(self.terms)

    def norm_bound(self, grid: Grid) -> float:
        """Upper bound for the pointwise operator norm sup |chi| on the grid."""
        if self.bound is not None:
            return float(self.bound)
        k = grid.k_mesh()
        total = 0.0
        for t in self.terms:
            s = np.linalg.norm(np.asarray(t.coeff).ravel())
            for j in range(self.degree + 1):
                mu = t.multiplier(j, k, self.ncomp)
                if mu is not None:
                    s *= np.abs(mu).max()
            total += s
        return float(total)

    def evaluate(self, k, ks) -> np.ndarray:
        """Full tensor chi(k; k1..km) (pointwise), shape (2J,)*(m+1)+S."""
        if self.dense is not None and not self.terms:
            return np.asarray(self.dense(k, ks))
        k = np.asarray(k, dtype=float)
        S = k.shape[1:]
        out = 0
        for t in self.terms:
            T = np.asarray(t.coeff, dtype=complex).reshape(t.coeff.shape + (1,) * len(S))
            T = np.broadcast_to(T, t.coeff.shape + S).copy()
            a0 = t.multiplier(0, k, self.ncomp)
            if a0 is not None:
                T *= a0.reshape((self.ncomp,) + (1,) * self.degree + S)
            for j in range(1, self.degree + 1):
                aj = t.multiplier(j, np.asarray(ks[j - 1], dtype=float), self.ncomp)
                if aj is not None:
                    shp = [1] * (self.degree + 1) + list(S)
                    shp[j] = self.ncomp
                    T *= aj.reshape(shp)
            out = out + T
        return out


def _check_fields(chi: ChiTensor, fields: Sequence[ModalField]) -> Grid:
    if len(fields) != chi.degree:
        raise ValueError(f"degree mismatch: chi has degree {chi.degree}, got {len(fields)} fields")
    g = fields[0].grid
    for f in fields:
        if f.grid != g:
            raise ValueError("all fields must live on one grid")
        if f.ncomp != chi.ncomp:
            raise ValueError("component count mismatch")
    return g


def _letters(n):
    return "abcdefghijklmnopqrstuvw"[:n]


def nonlinear_term(chi: ChiTensor, fields: Sequence[ModalField], dealias: bool | None = None,
                   method: str = "fast") -> ModalField:
    """Evaluate F~(k) = sum_{k1+..+km=k} chi(k;k1..km)[u1(k1),..,um(km)] (dk/2pi)^((m-1)d).

    ``dealias=None`` picks the natural convolution for the domain: cyclic
    (exact) on the torus, zero-padded linear convolution on a box.  Passing
    ``True`` forces padding, ``False`` forces the cyclic product.
    ``method="direct"`` uses brute-force summation (the test oracle).
    """
    g = _check_fields(chi, fields)
    linear = (g.domain == "box") if dealias is None else bool(dealias)
    if method == "direct" or not chi.separable:
        return direct_convolution(chi, fields, linear=linear)
    out = apply_chi(chi, g, [f.values for f in fields], linear=linear)
    return ModalField(g, out, fields[0].tau, fields[0].model)


def padded_size(N: int, m: int) -> int:
    """Smallest power of two >= (m+1) N / 2: enough for an alias-free degree-m product."""
    return max(N, int(2 ** np.ceil(np.log2((m + 1) * N / 2))))


def apply_chi(chi: ChiTensor, g: Grid, arrays: Sequence[np.ndarray], linear: bool | None = None,
              multipliers: dict | None = None) -> np.ndarray:
    """Fast separable evaluation on raw arrays of shape (2J,) + batch + grid.shape.

    Batch axes (e.g. quadrature nodes in time) sit between the component axis
    and the trailing d grid axes.  ``multipliers`` may cache the sampled
    mu-arrays keyed by term index.
    """
    if linear is None:
        linear = g.domain == "box"
    m, d, N, nc = chi.degree, g.d, g.N, chi.ncomp
    nb = arrays[0].ndim - 1 - d
    M = padded_size(N, m) if linear else N
    axes = tuple(range(arrays[0].ndim - d, arrays[0].ndim))
    k = None
    total = None
    bshape = (1,) * nb
    for ti, t in enumerate(chi.terms):
        if multipliers is not None and ti in multipliers:
            mus = multipliers[ti]
        else:
            if k is None:
                k = g.k_mesh()
            mus = [t.multiplier(j, k, nc) for j in range(m + 1)]
            if multipliers is not None:
                multipliers[ti] = mus
        # identical (array, multiplier) inputs share one transform
        seen: dict = {}
        phys = []
        for j, v in enumerate(arrays, start=1):
            key = (id(v), id(mus[j]) if mus[j] is not None else None)
            if key not in seen:
                mu = mus[j]
                if mu is not None:
                    v = v * mu.reshape((nc,) + bshape + g.shape)
                if M != N:
                    v = _pad_axes(v, N, M, d)
                seen[key] = np.fft.ifftn(v, axes=axes)
            phys.append(seen[key])
        coeff = np.asarray(t.coeff, dtype=complex)
        prod = np.zeros((nc,) + phys[0].shape[1:], dtype=complex)
        for idx in np.argwhere(coeff != 0):
            p = coeff[tuple(idx)] * phys[0][idx[1]]
            for j in range(1, m):
                p = p * phys[j][idx[j + 1]]
            prod[idx[0]] += p
        rows = sorted({int(i) for i in np.nonzero(coeff)[0]})
        out = np.zeros_like(prod)
        out[rows] = np.fft.fftn(prod[rows], axes=axes)
        # each ifft carries 1/M^d; m of them and one fft leave M^{-(m-1)d}
        out *= float(M ** d) ** (m - 1) * (g.dk / (2 * np.pi)) ** ((m - 1) * d)
        if M != N:
            out = _unpad_axes(out, N, M, d)
        if mus[0] is not None:
            out = out * mus[0].reshape((nc,) + bshape + g.shape)
        total = out if total is None else total + out
    return total


def _pad_axes(values: np.ndarray, N: int, M: int, d: int) -> np.ndarray:
    lead = values.shape[:values.ndim - d]
    out = np.zeros(lead + (M,) * d, dtype=complex)
    idx = np.concatenate([np.arange(N // 2), np.arange(M - N // 2, M)])
    out[(Ellipsis,) + np.ix_(*([idx] * d))] = values
    return out


def _unpad_axes(values: np.ndarray, N: int, M: int, d: int) -> np.ndarray:
    idx = np.concatenate([np.arange(N // 2), np.arange(M - N // 2, M)])
    return values[(Ellipsis,) + np.ix_(*([idx] * d))]


def direct_convolution(chi: ChiTensor, fields: Sequence[ModalField], linear: bool = False) -> ModalField:
    """Brute-force convolution sum; cyclic on the index lattice or linear (truncated)."""
    g = _check_fields(chi, fields)
    m, d, N, nc = chi.degree, g.d, g.N, chi.ncomp
    npts = N ** d
    if npts ** (m - 1) > DENSE_LIMIT:
        raise ValueError(f"dense/direct evaluation on N^((m-1)d) = {npts ** (m - 1)} points exceeds {DENSE_LIMIT}")
    kax = g.k_axis
    # signed integer index per axis in FFT order
    sidx = np.rint(kax / g.dk).astype(int)
    flat_vals = [f.values.reshape(nc, npts) for f in fields]
    multi = np.array(list(itertools.product(range(N), repeat=d))).reshape(npts, d) if d > 1 else np.arange(N)[:, None]
    signed = sidx[multi]  # (npts, d)
    out = np.zeros((nc, npts), dtype=complex)
    meas = (g.dk / (2 * np.pi)) ** ((m - 1) * d)
    kvec_of = lambda s: (s * g.dk).T  # (d, n)
    for combo in itertools.product(range(npts), repeat=m - 1):
        s_prev = signed[list(combo)].sum(axis=0) if m > 1 else np.zeros(d, int)
        # last argument index for every output point
        s_last = signed - s_prev  # (npts, d)
        if linear:
            ok = np.all((s_last >= -N // 2) & (s_last < N // 2), axis=1)
        else:
            ok = np.ones(npts, bool)
            s_last = (s_last + N // 2) % N - N // 2
        if not ok.any():
            continue
        outs = np.nonzero(ok)[0]
        lin_last = np.ravel_multi_index(tuple((s_last[outs] % N).T), (N,) * d)
        ks = [np.repeat(kvec_of(signed[c][None, :]), len(outs), axis=1) for c in combo]
        ks.append(kvec_of(s_last[outs]))
        kout = kvec_of(signed[outs])
        T = chi.evaluate(kout, ks)  # (nc,)*(m+1) + (n,)
        args = [flat_vals[j][:, c][:, None] * np.ones(len(outs)) for j, c in enumerate(combo)]
        args.append(flat_vals[-1][:, lin_last])
        letters = _letters(m + 1)
        spec = letters + "z," + ",".join(f"{c}z" for c in letters[1:]) + "->" + letters[0] + "z"
        out[:, outs] += np.einsum(spec, T, *args)
    return ModalField(g, (out * meas).reshape((nc,) + g.shape), fields[0].tau, fields[0].model)


def convolve_scalar(u: ModalField, v: ModalField) -> ModalField:
    """Componentwise-summed scalar convolution (u*v)(k) used for Young-type checks."""
    g = u.grid
    axes = tuple(range(1, g.d + 1))
    pu = np.fft.ifftn(u.values, axes=axes)
    pv = np.fft.ifftn(v.values, axes=axes)
    out = np.fft.fftn(pu * pv, axes=axes) * g.N ** g.d * (g.dk / (2 * np.pi)) ** g.d
    return u.copy(out)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def pointwise_abs(values: np.ndarray) -> np.ndarray:
    """Euclidean norm over the component axis."""
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=0))


def l1_norm_k(f: ModalField) -> float:
    return float(pointwise_abs(f.values).sum() * f.grid.cell)


def l2_norm_k(f: ModalField) -> float:
    g = f.grid
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * g.cell / (2 * np.pi) ** g.d))


def l2_norm_r(s: SpatialField) -> float:
    g = s.grid
    return float(np.sqrt(np.sum(np.abs(s.values) ** 2) * g.dx ** g.d))


def linf_norm_r(s: SpatialField) -> float:
    return float(pointwise_abs(s.values).max())


def e_norm(snapshots: Sequence[ModalField]) -> float:
    """sup over snapshots of the L1(k) norm."""
    return max((l1_norm_k(f) for f in snapshots), default=0.0)


# ---------------------------------------------------------------------------
# snapshot I/O
# ---------------------------------------------------------------------------

_MAGIC = b"WLF1"
_DOMAINS = {"torus": 0, "box": 1}


def write_field_csv(path, f: ModalField) -> None:
    g = f.grid
    nc = f.ncomp
    idx = np.indices(g.shape).reshape(g.d, -1).T
    vals = f.values.reshape(nc, -1)
    cols = [f"i{j}" for j in range(g.d)]
    for c in range(nc):
        cols += [f"re{c}", f"im{c}"]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for p in range(idx.shape[0]):
            row = [str(int(i)) for i in idx[p]]
            for c in range(nc):
                row += [repr(float(vals[c, p].real)), repr(float(vals[c, p].imag))]
            fh.write(",".join(row) + "\n")


def read_field_csv(path, grid: Grid) -> ModalField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = grid.d
    nc = (data.shape[1] - d) // 2
    vals = np.zeros((nc,) + grid.shape, dtype=complex)
    idx = tuple(data[:, :d].astype(int).T)
    for c in range(nc):
        vals[(c,) + idx] = data[:, d + 2 * c] + 1j * data[:, d + 2 * c + 1]
    return ModalField(grid, vals)


def write_field_binary(path, f: ModalField) -> None:
    """Header: magic, d, N, 2J, domain code, K, tau; payload: little-endian
    float64 (re, im) pairs, component-major then row-major over the grid."""
    g = f.grid
    head = _MAGIC + struct.pack("<iiiidd", g.d, g.N, f.ncomp, _DOMAINS[g.domain],
                                float(g.K or np.pi), float(f.tau))
    payload = np.ascontiguousarray(f.values).astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(payload)


def read_field_binary(path) -> ModalField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not a field file")
    d, N, nc, dom, K, tau = struct.unpack("<iiiidd", raw[4:4 + 32])
    domain = {v: k for k, v in _DOMAINS.items()}[dom]
    grid = Grid(d, N, domain, K if domain == "box" else None)
    vals = np.frombuffer(raw[36:], dtype="<c16").reshape((nc,) + grid.shape)
    return ModalField(grid, vals.copy(), tau)
