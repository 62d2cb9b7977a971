"""Wavepacket initial data: envelopes, synthesis, diagnostics and smooth cutoffs.

A wavepacket with center k*, band n and width parameter beta has modal
components

    h_zeta(k) = a_zeta * beta^-d * hhat_zeta((k - zeta k*) / beta)
                * exp(-i (k - zeta k*).r0 / beta) * g_{n,zeta}(k),

which is the Fourier image of a_zeta * exp(i zeta k*.r) Phi(beta r - r0) g.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .dispersion import DegeneratePointError, DispersionModel, mode_index
from .spectral import Grid, ModalField, SpatialField, forward_transform, pointwise_abs

MIN_SAMPLES_PER_WIDTH = 8


class GridTooCoarseError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    """Spatial profile Phi(y) and its transform hhat(q) = int Phi(y) exp(-i q.y) dy.

    ``gaussian``: Phi = A exp(-|y|^2 / (2 w^2)),  any d.
    ``sech``:     Phi = A sech(y / w),             d = 1.
    ``custom``:   samples of hhat on a 1d q-axis (``q``, ``hhat``), linearly interpolated.
    """

    family: str = "gaussian"
    width: float = 1.0
    amplitude: complex = 1.0
    q: tuple | None = None
    hhat: tuple | None = None

    def __post_init__(self):
        if self.family not in ("gaussian", "sech", "custom"):
            raise ValueError(f"unknown envelope family {self.family!r}")
        if self.width <= 0:
            raise ValueError("envelope width must be positive")
        if self.family == "custom" and (self.q is None or self.hhat is None):
            raise ValueError("custom envelopes need sampled q and hhat")

    def fourier(self, q: np.ndarray) -> np.ndarray:
        """hhat at q, with q of shape (d,)+S."""
        q = np.asarray(q, dtype=float)
        d = q.shape[0]
        w, A = self.width, self.amplitude
        if self.family == "gaussian":
            return A * (2 * np.pi * w * w) ** (d / 2) * np.exp(-0.5 * w * w * np.sum(q * q, axis=0))
        if d != 1:
            raise ValueError(f"{self.family} envelopes are one-dimensional")
        if self.family == "sech":
            x = 0.5 * np.pi * w * q[0]
            # sech(x) written to avoid overflow for large |x|
            return A * np.pi * w * 2 * np.exp(-np.abs(x)) / (1 + np.exp(-2 * np.abs(x)))
        qs = np.asarray(self.q, float)
        hs = np.asarray(self.hhat, complex)
        re = np.interp(q[0], qs, hs.real, left=0.0, right=0.0)
        im = np.interp(q[0], qs, hs.imag, left=0.0, right=0.0)
        return A * (re + 1j * im)

    def spatial(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        w, A = self.width, self.amplitude
        if self.family == "gaussian":
            return A * np.exp(-0.5 * np.sum(y * y, axis=0) / (w * w))
        if self.family == "sech":
            x = np.abs(y[0] / w)
            return A * 2 * np.exp(-x) / (1 + np.exp(-2 * x))
        # custom: numerical inverse transform of the samples
        qs = np.asarray(self.q, float)
        hs = np.asarray(self.hhat, complex)
        dq = np.gradient(qs)
        flat = y[0].ravel()
        vals = (hs[None, :] * np.exp(1j * np.outer(flat, qs)) * dq[None, :]).sum(axis=1) / (2 * np.pi)
        return A * vals.reshape(y[0].shape)

    def tail_mass(self, R: float, d: int = 1, n: int = 4001) -> float:
        """L1 mass of |hhat| beyond radius R (in units of q), radial quadrature."""
        rmax = R + 60.0 / self.width
        r = np.linspace(R, rmax, n)
        if d == 1:
            vals = 2 * np.abs(self.fourier(r[None]))
        else:
            from math import gamma, pi
            surf = 2 * pi ** (d / 2) / gamma(d / 2)
            q = np.zeros((d, n))
            q[0] = r
            vals = surf * r ** (d - 1) * np.abs(self.fourier(q))
        return float(np.trapezoid(vals, r))

    def as_dict(self) -> dict:
        out = {"family": self.family, "width": self.width}
        a = complex(self.amplitude)
        out["amplitude"] = a.real if a.imag == 0 else [a.real, a.imag]
        if self.family == "custom":
            out["q"] = list(self.q)
            out["hhat"] = [[complex(h).real, complex(h).imag] for h in self.hhat]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Envelope":
        data = dict(data)
        a = data.pop("amplitude", 1.0)
        if isinstance(a, (list, tuple)):
            a = complex(a[0], a[1])
        q, hh = data.pop("q", None), data.pop("hhat", None)
        if hh is not None:
            hh = tuple(complex(*h) if isinstance(h, (list, tuple)) else complex(h) for h in hh)
            q = tuple(q)
        return cls(data.get("family", "gaussian"), float(data.get("width", 1.0)), a, q, hh)


@dataclass(frozen=True)
class Component:
    amplitude: complex
    envelope: Envelope = Envelope()


@dataclass
class WavepacketSpec:
    """Center, band, per-branch amplitudes/envelopes, shift r0 and width parameter beta."""

    kstar: np.ndarray
    band: int = 1
    components: dict = field(default_factory=dict)
    r0: np.ndarray | None = None
    beta: float = 0.1

    def __post_init__(self):
        self.kstar = np.atleast_1d(np.asarray(self.kstar, dtype=float))
        d = self.kstar.shape[0]
        self.r0 = np.zeros(d) if self.r0 is None else np.atleast_1d(np.asarray(self.r0, float))
        if not 0 < self.beta <= 0.5:
            raise ValueError("beta must lie in (0, 1/2]")
        comps = {}
        for z, c in dict(self.components).items():
            z = int(z)
            if z not in (1, -1):
                raise ValueError("branch labels are +1 / -1")
            if not isinstance(c, Component):
                c = Component(*c) if isinstance(c, tuple) else Component(c)
            comps[z] = c
        if not comps or all(c.amplitude == 0 for c in comps.values()):
            raise ValueError("a wavepacket needs at least one nonzero branch component")
        self.components = comps

    @property
    def d(self) -> int:
        return self.kstar.shape[0]

    @property
    def zeta(self) -> int:
        """Principal branch (the one attached to +k*), used for center bookkeeping."""
        return 1 if 1 in self.components else -1

    def centers(self) -> list:
        """(zeta, location) pairs where modal mass sits."""
        return [(z, tuple(z * self.kstar)) for z in sorted(self.components, reverse=True)]

    def with_beta(self, beta: float) -> "WavepacketSpec":
        return WavepacketSpec(self.kstar.copy(), self.band, dict(self.components), self.r0.copy(), beta)

    def scaled(self, c: complex) -> "WavepacketSpec":
        comps = {z: Component(v.amplitude * c, v.envelope) for z, v in self.components.items()}
        return WavepacketSpec(self.kstar.copy(), self.band, comps, self.r0.copy(), self.beta)

    def as_dict(self) -> dict:
        def amp(a):
            a = complex(a)
            return a.real if a.imag == 0 else [a.real, a.imag]

        return {
            "kstar": self.kstar.tolist(), "band": self.band, "beta": self.beta,
            "r0": self.r0.tolist(),
            "components": {("+" if z > 0 else "-"): {"amplitude": amp(c.amplitude),
                                                     "envelope": c.envelope.as_dict()}
                           for z, c in self.components.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WavepacketSpec":
        comps = {}
        for key, c in data["components"].items():
            z = 1 if str(key) in ("+", "1", "+1") else -1
            a = c.get("amplitude", 1.0)
            if isinstance(a, (list, tuple)):
                a = complex(a[0], a[1])
            comps[z] = Component(a, Envelope.from_dict(c.get("envelope", {})))
        return cls(data["kstar"], int(data.get("band", 1)), comps, data.get("r0"),
                   float(data.get("beta", 0.1)))


def real_packet(kstar, amplitude: complex = 1.0, envelope: Envelope | None = None,
                band: int = 1, r0=None, beta: float = 0.1) -> WavepacketSpec:
    """Packet whose r-space field is real: the -k* branch is the conjugate of the +k* one.

    Valid for envelopes with real spatial profile (gaussian, sech) and for the
    catalog eigenvectors, which satisfy conj(g_+(k)) = g_-(-k).
    """
    env = envelope or Envelope()
    a = complex(amplitude)
    return WavepacketSpec(kstar, band, {1: Component(a, env), -1: Component(np.conj(a), env)}, r0, beta)


@dataclass
class MultiWavepacket:
    packets: list
    beta: float | None = None

    def __post_init__(self):
        if not self.packets:
            raise ValueError("a multi-wavepacket needs at least one packet")
        beta = self.beta if self.beta is not None else self.packets[0].beta
        self.packets = [p if p.beta == beta else p.with_beta(beta) for p in self.packets]
        self.beta = beta
        seen = set()
        for p in self.packets:
            for c in p.centers():
                key = (c[0], tuple(np.round(c[1], 12)))
                if key in seen:
                    raise ValueError(f"duplicate wavepacket center {key}")
                seen.add(key)

    @property
    def N_h(self) -> int:
        return len(self.packets)

    def with_beta(self, beta: float) -> "MultiWavepacket":
        return MultiWavepacket([p.with_beta(beta) for p in self.packets], beta)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

def check_grid(spec: WavepacketSpec, grid: Grid) -> None:
    widths = [c.envelope.width for c in spec.components.values()]
    kwidth = spec.beta / max(widths)
    if kwidth / grid.dk < MIN_SAMPLES_PER_WIDTH:
        raise GridTooCoarseError(
            f"k-grid spacing {grid.dk:.3g} gives {kwidth / grid.dk:.2f} < {MIN_SAMPLES_PER_WIDTH} samples per packet width")
    if grid.domain == "torus":
        need = max(256, ceil(40 * max(widths) / spec.beta))
        if grid.N < need:
            raise GridTooCoarseError(f"torus grid N={grid.N} below the adequacy rule N >= {need}")


def required_torus_size(beta: float, width: float = 1.0) -> int:
    need = max(256, ceil(40 * width / beta))
    return int(2 ** ceil(np.log2(need)))


def _center_offset(model: DispersionModel, k: np.ndarray, kc: np.ndarray) -> np.ndarray:
    q = k - kc.reshape((-1,) + (1,) * (k.ndim - 1))
    return model.reduce(q) if model.domain == "torus" else q


def synthesize_modal(spec: WavepacketSpec, model: DispersionModel, grid: Grid,
                     method: str = "k", check: bool = True) -> ModalField:
    """Modal field of a wavepacket; ``method`` is "k" (closed form) or "r" (sampled + transformed)."""
    if spec.d != model.d or grid.d != model.d:
        raise ValueError("dimension mismatch between packet, model and grid")
    if model.is_band_crossing_any(spec.kstar.reshape(-1, 1)):
        raise DegeneratePointError("wavepacket center lies on the band-crossing set")
    if check:
        check_grid(spec, grid)
    k = grid.k_mesh()
    _, G = model.eigenvectors(k)
    beta, d = spec.beta, model.d
    out = np.zeros((model.ncomp,) + grid.shape, dtype=complex)
    for z, comp in spec.components.items():
        if comp.amplitude == 0:
            continue
        kc = z * spec.kstar
        if method == "k":
            q = _center_offset(model, k, kc)
            phase = np.exp(-1j * np.tensordot(spec.r0, q, axes=1) / beta)
            scal = comp.amplitude * beta ** (-d) * comp.envelope.fourier(q / beta) * phase
        elif method == "r":
            r = grid.r_mesh()
            y = beta * r - spec.r0.reshape((-1,) + (1,) * d)
            s = comp.amplitude * np.exp(1j * np.tensordot(kc, r, axes=1)) * comp.envelope.spatial(y)
            scal = forward_transform(SpatialField(grid, s[None])).values[0]
        else:
            raise ValueError("method must be 'k' or 'r'")
        out += scal[None] * G[:, mode_index(spec.band, z)]
    return ModalField(grid, out, 0.0, model.name)


def synthesize_multi(multi: MultiWavepacket, model: DispersionModel, grid: Grid, **kw) -> list:
    """List of per-packet modal fields (sum them for the combined data)."""
    return [synthesize_modal(p, model, grid, **kw) for p in multi.packets]


# ---------------------------------------------------------------------------
# diagnostics and cutoffs
# ---------------------------------------------------------------------------

def branch_parts(field: ModalField, model: DispersionModel, band: int = 1) -> dict:
    """Pi_{band,zeta} h for zeta = +-1, plus the remainder in other bands."""
    P = model.projections(field.grid.k_mesh())
    parts = {}
    for z in (1, -1):
        Pz = P[mode_index(band, z)]
        parts[z] = np.einsum("ab...,b...->a...", Pz, field.values)
    return parts


def _radius(model, grid, kc):
    q = _center_offset(model, grid.k_mesh(), np.asarray(kc, float))
    return np.sqrt(np.sum(q * q, axis=0))


def verify_wavepacket(field: ModalField, kstar, beta: float, eps: float = 0.2, *,
                      model: DispersionModel, band: int = 1) -> dict:
    """Localization diagnostics: L1 norm, tail mass, band leakage and gradient integral."""
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    g = field.grid
    kstar = np.atleast_1d(np.asarray(kstar, float))
    parts = branch_parts(field, model, band)
    rad = beta ** (1 - eps)
    cell = g.cell
    tail, grad = 0.0, 0.0
    for z, hz in parts.items():
        dist = _radius(model, g, z * kstar)
        mag = pointwise_abs(hz)
        tail += float(mag[dist >= rad].sum() * cell)
        axes = tuple(range(1, g.d + 1))
        if g.d == 1:
            dh = [np.gradient(hz, g.dk, axis=1)]
        else:
            dh = np.gradient(hz, g.dk, axis=axes)
        gmag = np.sqrt(sum(np.sum(np.abs(x) ** 2, axis=0) for x in dh))
        grad += float(gmag[dist <= rad].sum() * cell)
    leak = field.values - parts[1] - parts[-1]
    return {
        "l1_bound": float(pointwise_abs(field.values).sum() * cell),
        "tail_mass": tail,
        "band_leakage": float(pointwise_abs(leak).sum() * cell),
        "grad_bound": grad,
    }


def bump(eta_norm: np.ndarray, pi0: float) -> np.ndarray:
    """C-infinity radial cutoff: 1 for |eta| <= pi0/2, 0 for |eta| >= pi0."""
    e = np.asarray(eta_norm, dtype=float)
    out = np.zeros_like(e)
    out[e <= pi0 / 2] = 1.0
    mid = (e > pi0 / 2) & (e < pi0)
    t = 2 * e[mid] / pi0 - 1
    out[mid] = np.exp(1 - 1 / (1 - t * t))
    return out


def default_pi0(model: DispersionModel, kstar) -> float:
    dist = model.distance_to_sigma(np.atleast_1d(np.asarray(kstar, float)))
    return float(min(0.5, 0.5 * dist - 1e-6))


def apply_cutoff(field: ModalField, kstar, beta: float, eps: float = 0.2, pi0: float | None = None, *,
                 model: DispersionModel, band: int = 1) -> ModalField:
    """h^Psi = sum_zeta Psi((k - zeta k*) / beta^(1-eps)) Pi_zeta h."""
    kstar = np.atleast_1d(np.asarray(kstar, float))
    dist = model.distance_to_sigma(kstar)
    if pi0 is None:
        pi0 = default_pi0(model, kstar)
    if not 0 < pi0 < 0.5 * dist:
        raise ValueError(f"pi0 = {pi0} violates pi0 < dist(k*, sigma)/2 = {0.5 * dist}")
    g = field.grid
    scale = beta ** (1 - eps)
    parts = branch_parts(field, model, band)
    out = np.zeros_like(field.values)
    for z, hz in parts.items():
        psi = bump(_radius(model, g, z * kstar) / scale, pi0)
        out += psi[None] * hz
    return field.copy(out)
