"""Ordered trees, composition monomials, decorations and oscillatory monomial evaluation.

A composition monomial is a nested application of the multilinear
operators F^(s); it is encoded by an ordered rooted tree in which every
internal node has at least two children (class T_2).  End nodes (leaves) are
the arguments.  Trees serialize to their preorder arity list, e.g. the
monomial F3(x, x, F2(x, x)) is ``[3, 0, 0, 2, 0, 0]``.

A decoration assigns to every node a label in {+1, -1, INF}; an internal
node N then carries lambda = Gamma(N) for its output projection and the
vector (Gamma(c_1), ..., Gamma(c_mu)) of its children for the input
projections.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .dispersion import DispersionModel, mode_index
from .evolve import EvolutionProblem, OscillatoryContext
from .spectral import ModalField, l1_norm_k, wrap_torus

INF = float("inf")
MAX_ENUM = 8
DESK_RANK = 3
DESK_LEAVES = 4


class DeskScaleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

class OrderedTree:
    """Immutable ordered rooted tree; a leaf is ``OrderedTree(())``."""

    __slots__ = ("children", "__dict__")

    def __init__(self, children: Sequence["OrderedTree"] = ()):
        children = tuple(children)
        if len(children) == 1:
            raise ValueError("internal nodes need at least two children (class T2)")
        self.children = children

    # -- structure -------------------------------------------------------
    @property
    def is_leaf(self) -> bool:
        return not self.children

    @cached_property
    def leaves(self) -> int:
        """Homogeneity index m (number of end nodes)."""
        return 1 if self.is_leaf else sum(c.leaves for c in self.children)

    @cached_property
    def internal(self) -> int:
        """Incidence number i (number of non-end nodes)."""
        return 0 if self.is_leaf else 1 + sum(c.internal for c in self.children)

    @cached_property
    def rank(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.rank for c in self.children)

    @property
    def size(self) -> int:
        return self.leaves + self.internal

    @property
    def edges(self) -> int:
        return self.size - 1

    @cached_property
    def preorder(self) -> tuple:
        """Preorder arity list (canonical serialization)."""
        out = [len(self.children)]
        for c in self.children:
            out.extend(c.preorder)
        return tuple(out)

    def serialize(self) -> str:
        return ",".join(str(a) for a in self.preorder)

    @classmethod
    def from_preorder(cls, arities) -> "OrderedTree":
        if isinstance(arities, str):
            arities = [int(a) for a in arities.split(",") if a.strip()]
        arities = list(arities)
        pos = 0

        def build():
            nonlocal pos
            if pos >= len(arities):
                raise ValueError("truncated preorder arity list")
            a = arities[pos]
            pos += 1
            return cls([build() for _ in range(a)])

        t = build()
        if pos != len(arities):
            raise ValueError("trailing entries in preorder arity list")
        return t

    def __eq__(self, other):
        return isinstance(other, OrderedTree) and self.preorder == other.preorder

    def __hash__(self):
        return hash(self.preorder)

    def __repr__(self):
        return f"OrderedTree({self.serialize()})"

    # -- node tables (preorder indexing) ---------------------------------
    @cached_property
    def nodes(self) -> tuple:
        """Preorder list of (node, parent index, word) with word = child-index path."""
        out = []

        def walk(t, parent, word):
            me = len(out)
            out.append((t, parent, word))
            for i, c in enumerate(t.children, start=1):
                walk(c, me, word + (i,))

        walk(self, -1, ())
        return tuple(out)

    @cached_property
    def parents(self) -> tuple:
        return tuple(p for _, p, _ in self.nodes)

    @cached_property
    def child_index(self) -> tuple:
        """Preorder indices of the children of every node."""
        kids = [[] for _ in self.nodes]
        for i, p in enumerate(self.parents):
            if p >= 0:
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def arity(self) -> tuple:
        return tuple(len(t.children) for t, _, _ in self.nodes)

    @cached_property
    def node_rank(self) -> tuple:
        return tuple(t.rank for t, _, _ in self.nodes)

    @cached_property
    def standard_labels(self) -> tuple:
        """o(N): rank of each node's child-index word in lexicographic order, words
        padded with +infinity (so a node comes after all of its descendants)."""
        depth = max(len(w) for _, _, w in self.nodes) + 1
        keys = [tuple(w) + (math.inf,) * (depth - len(w)) for _, _, w in self.nodes]
        order = sorted(range(len(keys)), key=lambda i: keys[i])
        lab = [0] * len(keys)
        for r, i in enumerate(order, start=1):
            lab[i] = r
        return tuple(lab)

    def leaf_indices(self) -> list:
        return [i for i, a in enumerate(self.arity) if a == 0]

    def internal_indices(self) -> list:
        return [i for i, a in enumerate(self.arity) if a > 0]

    def subtree_leaves(self, idx: int) -> list:
        """Preorder indices of the end nodes below node idx."""
        out = []
        stack = [idx]
        while stack:
            j = stack.pop()
            if self.arity[j] == 0:
                out.append(j)
            stack.extend(reversed(self.child_index[j]))
        return sorted(out)


LEAF = OrderedTree(())


def _trees(m: int):
    if m == 1:
        return [LEAF]
    out = []
    for s in range(2, m + 1):
        for comp in itertools.combinations(range(1, m), s - 1):
            parts = np.diff((0,) + comp + (m,))
            for kids in itertools.product(*[_trees_cached(int(p)) for p in parts]):
                out.append(OrderedTree(kids))
    return out


_TREE_CACHE: dict = {}


def _trees_cached(m: int):
    if m not in _TREE_CACHE:
        _TREE_CACHE[m] = _trees(m)
    return _TREE_CACHE[m]


def enumerate_trees(m: int) -> list:
    """All ordered T2 trees with m end nodes, sorted by preorder arity list."""
    if not 1 <= m <= MAX_ENUM:
        raise ValueError(f"m must lie in [1, {MAX_ENUM}]")
    return sorted(_trees_cached(m), key=lambda t: t.preorder)


def count_trees_bruteforce(m: int, arities: Sequence[int] | None = None) -> int:
    """Count valid preorder arity words with m leaves by direct search over words."""
    allowed = list(range(2, m + 1)) if arities is None else [a for a in arities if a >= 2]
    count = 0

    def rec(open_slots, leaves, internal):
        nonlocal count
        if open_slots == 0:
            if leaves == m:
                count += 1
            return
        if leaves + open_slots > m:
            return
        rec(open_slots - 1, leaves + 1, internal)  # a leaf fills one slot
        for a in allowed:
            rec(open_slots - 1 + a, leaves, internal + 1)

    rec(1, 0, 0)
    return count


def series_reversion_counts(n: int, S: Sequence[int] | None = None) -> list:
    """Coefficients u_1..u_n of the power series solving u = x + sum_{s in S} u^s.

    ``S=None`` means all s >= 2, i.e. u = x + u^2 / (1 - u).
    """
    S = list(range(2, n + 1)) if S is None else sorted(s for s in S if s <= n)
    u = [0] * (n + 1)
    u[1] = 1

    def mul(a, b):
        c = [0] * (n + 1)
        for i, ai in enumerate(a):
            if ai:
                for j in range(n + 1 - i):
                    c[i + j] += ai * b[j]
        return c

    for _ in range(n):
        new = [0] * (n + 1)
        new[1] = 1
        for s in S:
            p = u
            for _ in range(s - 1):
                p = mul(p, u)
            for i in range(n + 1):
                new[i] += p[i]
        u = new
    return u[1:]


def multiplicity_coefficients(m: int, S: Sequence[int]) -> dict:
    """c_T from expanding G^(1) = x, G^(m) = sum_{s in S} sum_{i_1+..+i_s=m} F^(s)(G^(i_1),..)."""
    if not 1 <= m <= MAX_ENUM:
        raise ValueError(f"m must lie in [1, {MAX_ENUM}]")
    S = sorted(set(int(s) for s in S))
    G = {1: Counter({LEAF: 1})}
    for j in range(2, m + 1):
        acc = Counter()
        for s in S:
            if s < 2 or s > j:
                continue
            for comp in itertools.combinations(range(1, j), s - 1):
                parts = [int(p) for p in np.diff((0,) + comp + (j,))]
                for combo in itertools.product(*[list(G[p].items()) for p in parts]):
                    mult = 1
                    for _, c in combo:
                        mult *= c
                    acc[OrderedTree([t for t, _ in combo])] += mult
        G[j] = acc
    return {t: int(G[m].get(t, 0)) for t in enumerate_trees(m)}


# ---------------------------------------------------------------------------
# decorations
# ---------------------------------------------------------------------------

def _label(x) -> float:
    if x in ("inf", "∞", INF) or (isinstance(x, float) and math.isinf(x)):
        return INF
    if x in ("+", 1, 1.0, "+1"):
        return 1
    if x in ("-", -1, -1.0, "-1"):
        return -1
    raise ValueError(f"invalid decoration label {x!r}")


@dataclass(frozen=True)
class Decoration:
    """Gamma on all nodes of a tree (preorder); labels +1, -1 or INF."""

    tree: OrderedTree
    gamma: tuple

    def __post_init__(self):
        g = tuple(_label(x) for x in self.gamma)
        if len(g) != self.tree.size:
            raise ValueError("decoration length must equal the number of tree nodes")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def from_node_pairs(cls, tree: OrderedTree, pairs: Sequence, root: object | None = None) -> "Decoration":
        """Build from per-internal-node (lambda, zeta-vector) pairs in preorder; checks consistency."""
        internal = tree.internal_indices()
        if len(pairs) != len(internal):
            raise ValueError("one (lambda, zeta) pair per internal node is required")
        gamma = [None] * tree.size
        for idx, (lam, zetas) in zip(internal, pairs):
            lam = _label(lam)
            if gamma[idx] is not None and gamma[idx] != lam:
                raise ValueError(f"inconsistent decoration at node {idx}: lambda differs from parent's zeta")
            gamma[idx] = lam
            kids = tree.child_index[idx]
            if len(zetas) != len(kids):
                raise ValueError("zeta vector length must equal the arity")
            for c, z in zip(kids, zetas):
                z = _label(z)
                if gamma[c] is not None and gamma[c] != z:
                    raise ValueError(f"inconsistent decoration at edge {idx}->{c}")
                gamma[c] = z
        if gamma[0] is None:
            gamma[0] = _label(root if root is not None else 1)
        return cls(tree, tuple(gamma))

    def lam(self, idx: int) -> float:
        return self.gamma[idx]

    def zetas(self, idx: int) -> tuple:
        return tuple(self.gamma[c] for c in self.tree.child_index[idx])

    @property
    def has_inf(self) -> bool:
        return any(math.isinf(g) for g in self.gamma)


def classify_decoration(tree: OrderedTree, decoration: Decoration) -> dict:
    """{"fm": "FM"|"NFM", "afm": "AFM"|"ANFM"}."""
    if decoration.tree != tree:
        raise ValueError("decoration belongs to a different tree")
    fm = not decoration.has_inf
    afm = not decoration.has_inf
    for idx in tree.internal_indices():
        if not fm and not afm:
            break
        if decoration.has_inf:
            break
        s = sum(decoration.zetas(idx))
        lam = decoration.lam(idx)
        if s != lam:
            fm = False
        if tree.arity[idx] % 2 == 0 or np.sign(s) != lam:
            afm = False
    return {"fm": "FM" if fm else "NFM", "afm": "AFM" if afm else "ANFM"}


def all_decorations(tree: OrderedTree, labels=(1, -1)) -> list:
    return [Decoration(tree, g) for g in itertools.product(labels, repeat=tree.size)]


def random_fm_decoration(tree: OrderedTree, rng: np.random.Generator, root=None) -> Decoration:
    """Uniformly random frequency-matched decoration built root-down (odd arities only)."""
    gamma = [None] * tree.size
    gamma[0] = root if root is not None else int(rng.choice([1, -1]))
    for idx in range(tree.size):
        mu = tree.arity[idx]
        if mu == 0:
            continue
        lam = gamma[idx]
        if (mu + lam) % 2:
            raise ValueError("frequency matching needs odd arities")
        plus = (mu + lam) // 2
        z = np.array([1] * plus + [-1] * (mu - plus))
        rng.shuffle(z)
        for c, v in zip(tree.child_index[idx], z):
            gamma[c] = int(v)
    return Decoration(tree, tuple(gamma))


def concentration_assignment(tree: OrderedTree, decoration: Decoration, kstar) -> np.ndarray:
    """Leaves at Gamma(leaf) k*, internal nodes at the sum of their children."""
    kstar = np.atleast_1d(np.asarray(kstar, float))
    out = np.zeros((tree.size, kstar.size))
    for idx in reversed(range(tree.size)):
        if tree.arity[idx] == 0:
            g = decoration.gamma[idx]
            if math.isinf(g):
                raise ValueError("no concentration point for INF-decorated leaves")
            out[idx] = g * kstar
        else:
            out[idx] = out[list(tree.child_index[idx])].sum(axis=0)
    return out


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def _check_matching(model: DispersionModel, tree: OrderedTree, k: np.ndarray, tol: float = 1e-12) -> None:
    for idx in tree.internal_indices():
        diff = k[idx] - k[list(tree.child_index[idx])].sum(axis=0)
        if model.domain == "torus":
            diff = wrap_torus(diff)
        if np.max(np.abs(diff)) > tol:
            raise ValueError(f"phase matching violated at node {idx} by {np.max(np.abs(diff)):.3e}")


def interaction_phase(model: DispersionModel, tree: OrderedTree, decoration: Decoration, k_assign,
                      taus: Sequence[float] | None = None, band: int = 1, check: bool = True) -> float:
    """Phi = sum_N tau_N [Gamma_N w(k_N) - sum_children Gamma_c w(k_c)]."""
    k = np.asarray(k_assign, float).reshape(tree.size, model.d)
    if check:
        _check_matching(model, tree, k)
    if decoration.has_inf:
        raise ValueError("phase undefined for INF-decorated nodes")
    w = model.omega(band, model.reduce(k.T))
    w = np.atleast_1d(w)
    total = 0.0
    for j, idx in enumerate(tree.internal_indices()):
        t = 1.0 if taus is None else float(taus[j])
        kids = tree.child_index[idx]
        total += t * (decoration.gamma[idx] * w[idx] - sum(decoration.gamma[c] * w[c] for c in kids))
    return float(total)


def _free_layout(tree: OrderedTree) -> list:
    """Free variables: root, then the first mu-1 children of each internal node (preorder)."""
    free = [0]
    for idx in tree.internal_indices():
        free.extend(tree.child_index[idx][:-1])
    return free


def assignment_from_free(tree: OrderedTree, free_vals: np.ndarray) -> np.ndarray:
    free = _free_layout(tree)
    d = free_vals.shape[1]
    k = np.full((tree.size, d), np.nan)
    for slot, idx in enumerate(free):
        k[idx] = free_vals[slot]
    for idx in range(tree.size):  # preorder: a parent is fixed before its children
        kids = tree.child_index[idx]
        if kids:
            k[kids[-1]] = k[idx] - k[list(kids[:-1])].sum(axis=0)
    return k


def phase_gradient(model: DispersionModel, tree: OrderedTree, decoration: Decoration, k_assign,
                   h: float = 1e-4, taus=None, band: int = 1) -> np.ndarray:
    """Central-difference gradient of Phi over the free wavevectors (phase matching kept)."""
    k = np.asarray(k_assign, float).reshape(tree.size, model.d)
    _check_matching(model, tree, k)
    free = _free_layout(tree)
    base = k[free].copy()
    grad = np.zeros(base.size)
    for p in range(base.size):
        e = np.zeros(base.size)
        e[p] = h
        up = assignment_from_free(tree, base + e.reshape(base.shape))
        dn = assignment_from_free(tree, base - e.reshape(base.shape))
        grad[p] = (interaction_phase(model, tree, decoration, up, taus, band, check=False)
                   - interaction_phase(model, tree, decoration, dn, taus, band, check=False)) / (2 * h)
    return grad


# ---------------------------------------------------------------------------
# SI / CI
# ---------------------------------------------------------------------------

def si_ci_classify(multiindex: Sequence[int], N_h: int) -> str:
    if any(not 1 <= l <= N_h for l in multiindex):
        raise ValueError("packet labels must lie in 1..N_h")
    return "SI" if len(set(multiindex)) == 1 else "CI"


def ci_multiindices(m: int, N_h: int):
    for idx in itertools.product(range(1, N_h + 1), repeat=m):
        if len(set(idx)) > 1:
            yield idx


def count_ci(m: int, N_h: int) -> int:
    return N_h ** m - N_h


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def mode_mask(model: DispersionModel, label: float, n0: int = 1) -> np.ndarray:
    mask = np.zeros(model.ncomp)
    if math.isinf(label):
        mask[:] = 1.0
        mask[mode_index(n0, 1)] = 0.0
        mask[mode_index(n0, -1)] = 0.0
    else:
        mask[mode_index(n0, int(label))] = 1.0
    return mask


def evaluate_monomial(ctx: OscillatoryContext, tree: OrderedTree, decoration: Decoration | None,
                      inputs: Sequence[ModalField], n0: int = 1, limits=(DESK_RANK, DESK_LEAVES)) -> ModalField:
    """Value of the (decorated) composition monomial at tau = ctx.quad.tau, reduced variables.

    ``inputs`` are the end-node arguments in left-to-right order (u-variables).
    """
    if tree.rank > limits[0] or tree.leaves > limits[1]:
        raise DeskScaleError(f"tree rank {tree.rank} / leaves {tree.leaves} exceed desk limits {limits}")
    if len(inputs) != tree.leaves:
        raise ValueError("one input field per end node is required")
    model = ctx.problem.model
    P = ctx.prop
    leaf_ids = tree.leaf_indices()
    leaf_val = {i: P.to_modal(f.values)[:, None] for i, f in zip(leaf_ids, inputs)}

    def mask(idx):
        return None if decoration is None else mode_mask(model, decoration.gamma[idx], n0)

    def ev(idx):
        if tree.arity[idx] == 0:
            c = leaf_val[idx]
            mk = mask(idx)
            if mk is not None:
                c = c * mk.reshape((-1,) + (1,) * (c.ndim - 1))
            return c, c[:, 0]
        args = [ev(c)[0] for c in tree.child_index[idx]]
        return ctx.operator(tree.arity[idx], args, out_mask=mask(idx))

    _, end = ev(0)
    g = ctx.problem.grid
    return ModalField(g, P.from_modal(end), ctx.quad.tau, model.name)


def monomial_bound(ctx: OscillatoryContext, tree: OrderedTree, inputs: Sequence[ModalField]) -> float:
    """Crude uniform bound tau^i * C_chi^i * C_xi^(2 m + 1) * prod ||inputs|| for a composition monomial."""
    from .dispersion import xi_bound

    g = ctx.problem.grid
    k = g.k_mesh().reshape(g.d, -1)
    cxi = xi_bound(ctx.problem.model, k[:, :: max(1, k.shape[1] // 512)])
    bound = 1.0
    for idx in tree.internal_indices():
        chi = ctx.chi(tree.arity[idx])
        bound *= ctx.quad.tau * chi.norm_bound(g) * cxi ** (2 * tree.arity[idx] + 1)
    for f in inputs:
        bound *= l1_norm_k(f)
    return bound


def fit_power(xs, ys) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(sol[0]), float(sol[1])


def nfm_magnitude_probe(problem: EvolutionProblem, tree: OrderedTree, decoration: Decoration,
                        inputs: Sequence[ModalField], rhos: Sequence[float], tau: float,
                        allow_fm: bool = False, n0: int = 1) -> dict:
    """L1 magnitude of a decorated monomial across a rho ladder and the fitted rho-exponent."""
    cls = classify_decoration(tree, decoration)
    if cls["fm"] == "FM" and not allow_fm:
        raise ValueError("decoration is frequency matched; the NFM probe is meaningless")
    from dataclasses import replace

    mags = []
    for rho in rhos:
        ctx = OscillatoryContext.build(replace(problem, rho=float(rho)), tau=tau)
        mags.append(l1_norm_k(evaluate_monomial(ctx, tree, decoration, inputs, n0=n0)))
    if min(mags) == 0.0:
        raise ValueError("decorated monomial vanishes identically on these inputs (empty branch?)")
    slope, _ = fit_power(rhos, mags)
    return {"rho": list(map(float, rhos)), "magnitude": mags, "exponent": slope,
            "classification": cls, "ratio": mags[-1] / mags[0]}


# ---------------------------------------------------------------------------
# polarization
# ---------------------------------------------------------------------------

def polar_form(P: Callable, args: Sequence, n: int | None = None):
    """Symmetric n-linear form of a degree-n homogeneous polynomial P (signed polarization)."""
    n = len(args) if n is None else n
    if n != len(args):
        raise ValueError("need exactly n arguments")
    if n > 5:
        raise ValueError("polarization implemented for degree <= 5")
    args = [np.asarray(a) for a in args]
    total = 0
    for xi in itertools.product((1, -1), repeat=n):
        x = sum(s * a for s, a in zip(xi, args))
        total = total + np.prod(xi) * P(x)
    return total / (2 ** n * math.factorial(n))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def expansion_rows(m: int, S: Sequence[int]) -> list:
    coeffs = multiplicity_coefficients(m, S)
    return [{"m": m, "preorder": t.serialize(), "c_T": c} for t, c in coeffs.items()]
