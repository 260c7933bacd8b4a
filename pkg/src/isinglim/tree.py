"""Exact Ising Gibbs computations on the k-regular tree.

Everything here is deterministic closed-form or exact finite enumeration:
the cavity fixed point, finite-depth marginals under plus/minus/free/mixture
boundary conditions, edge correlation, root magnetization, Bethe free energy,
pair correlations along paths, ball-average tail probabilities, and a DLR
consistency check.

Conventions. The infinite k-regular tree is rooted; the root has k children
and every other vertex has k-1 children. Vertices of the radius-t ball are
indexed by BFS slots (root = 0, then depth by depth, children grouped under
their parent). Probability tables are indexed by configuration integers in
which bit j is 1 when the slot-j spin is +1.

The cavity recursion is implemented in the standard belief-propagation form
    h' = (k-1) * atanh(tanh(beta) * tanh(h)),
under which the pair law across an edge of the plus measure is proportional
to exp(beta*x*y + h*x + h*y). tests/test_tree.py checks this form against
raw Boltzmann enumeration of finite forced-boundary trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IsingParams",
    "TreeFixedPoint",
    "TreeMarginal",
    "NonzeroFieldError",
    "SizeLimitError",
    "critical_beta",
    "solve_fixed_point",
    "plus_boundary_marginal",
    "minus_boundary_marginal",
    "free_boundary_marginal",
    "mixture_marginal",
    "leaf_field_marginal",
    "edge_correlation",
    "root_magnetization",
    "free_energy",
    "pair_correlation",
    "f_statistic_tree",
    "dlr_check",
    "tree_slots",
    "MAX_TABLE_SPINS",
]

MAX_TABLE_SPINS = 22

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 10_000


class NonzeroFieldError(ValueError):
    """Operation requires external field B = 0."""


class SizeLimitError(ValueError):
    """Requested exact table exceeds the enumeration limit."""


@dataclass(frozen=True)
class IsingParams:
    """Ising model parameters on the k-regular tree: degree, inverse temperature, field."""

    k: int
    beta: float
    B: float = 0.0

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("degree k must be at least 3")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative (ferromagnetic)")

    @property
    def uniqueness(self) -> bool:
        """True when (k-1) tanh(beta) <= 1, i.e. the tree Gibbs measure is unique."""
        return (self.k - 1) * math.tanh(self.beta) <= 1.0


def critical_beta(k: int) -> float:
    """Uniqueness threshold atanh(1/(k-1))."""
    return math.atanh(1.0 / (k - 1))


@dataclass(frozen=True)
class TreeFixedPoint:
    """Largest solution of the cavity recursion, with iteration diagnostics."""

    h: float
    m: float
    converged: bool
    iterations: int


def _cavity_map(h: float, k: int, beta: float) -> float:
    return (k - 1) * math.atanh(math.tanh(beta) * math.tanh(h))


def solve_fixed_point(
    p: IsingParams,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> TreeFixedPoint:
    """Largest fixed point of h = (k-1) atanh(tanh(beta) tanh(h)).

    Iterates from h0 = k*beta, which dominates every fixed point; the map is
    increasing and concave on [0, inf), so the iteration decreases monotonically
    to the largest solution. In the uniqueness regime (k-1)tanh(beta) <= 1 the
    largest solution is exactly 0 and the returned h is snapped to 0.0.
    """
    if p.B != 0.0:
        raise NonzeroFieldError("fixed point is defined for B = 0")
    h = p.k * p.beta
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        h_next = _cavity_map(h, p.k, p.beta)
        done = abs(h_next - h) < tol
        h = h_next
        if done:
            converged = True
            break
    if p.uniqueness:
        h = 0.0
    return TreeFixedPoint(h=h, m=math.tanh(h), converged=converged, iterations=iterations)


def _edge_message(beta: float, field: float) -> float:
    """Field a vertex with total inner field `field` passes across an edge."""
    return math.atanh(math.tanh(beta) * math.tanh(field))


def _plus_message(k: int, beta: float, s: int) -> float:
    """Message toward the parent from a vertex whose forced +1 boundary is s levels below it."""
    m = beta
    for _ in range(s):
        m = _edge_message(beta, (k - 1) * m)
    return m


def tree_slots(k: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    """(parents, depths) arrays for the BFS slot order of the radius-t tree ball."""
    parents = [-1]
    depths = [0]
    start = 0
    for d in range(1, t + 1):
        level = [i for i in range(len(depths)) if depths[i] == d - 1]
        for v in level:
            nchildren = k if d == 1 else k - 1
            for _ in range(nchildren):
                parents.append(v)
                depths.append(d)
        start += len(level)
    return np.array(parents, dtype=np.int32), np.array(depths, dtype=np.int32)


def _tree_size(k: int, t: int) -> int:
    if t == 0:
        return 1
    return 1 + k * ((k - 1) ** t - 1) // (k - 2)


class TreeMarginal:
    """Exact distribution of the spins in the radius-t ball of the k-regular tree.

    A marginal is determined by the Ising weights on the ball's edges plus a
    boundary field applied to every depth-t vertex (the integrated-out effect
    of everything below). plus/minus/free/mixture and explicit leaf-field
    boundaries all reduce to this form; minus is represented exactly as the
    spin-flip image of plus, and mixture as their equal-weight average.
    """

    def __init__(self, p: IsingParams, t: int, boundary: str, leaf_field: float,
                 root_field: float | None = None, t_plus: int | None = None):
        if p.B != 0.0:
            raise NonzeroFieldError("tree marginals are computed for B = 0")
        if t < 0:
            raise ValueError("depth t must be nonnegative")
        self.p = p
        self.t = t
        self.boundary = boundary
        self.leaf_field = leaf_field
        self.t_plus = t_plus
        self.size = _tree_size(p.k, t)
        self.parents, self.depths = tree_slots(p.k, t)
        k, beta = p.k, p.beta
        # inward fields per depth: W[d] is the total from-below field at a
        # depth-d vertex, W[t] being the boundary field itself
        W = np.zeros(t + 1)
        W[t] = leaf_field
        for d in range(t - 1, 0, -1):
            W[d] = (k - 1) * _edge_message(beta, W[d + 1])
        if t == 0:
            F_root = leaf_field if root_field is None else root_field
        else:
            F_root = k * _edge_message(beta, W[1])
        W[0] = F_root
        self.inward = W
        # outward fields: A[d] is the from-above field at a depth-d vertex
        A = np.zeros(t + 1)
        for d in range(1, t + 1):
            if d == 1:
                excl = F_root - _edge_message(beta, W[1])
            else:
                excl = A[d - 1] + W[d - 1] - _edge_message(beta, W[d])
            A[d] = _edge_message(beta, excl)
        self.outward = A
        self._table = None

    # -- internal helpers ----------------------------------------------------

    def _cond_plus_prob(self, d: int) -> tuple[float, float]:
        """(P(+|parent=+), P(+|parent=-)) for a depth-d vertex, base orientation."""
        beta = self.p.beta
        w = self.inward[d]
        return (_sigmoid(2.0 * (beta + w)), _sigmoid(2.0 * (-beta + w)))

    def _base_table(self) -> np.ndarray:
        if self.size > MAX_TABLE_SPINS:
            raise SizeLimitError(
                f"explicit table needs {self.size} spins; limit is {MAX_TABLE_SPINS}"
            )
        n = self.size
        idx = np.arange(1 << n, dtype=np.int64)
        root_plus = _sigmoid(2.0 * self.inward[0])
        bit0 = (idx & 1).astype(np.float64)
        table = root_plus * bit0 + (1.0 - root_plus) * (1.0 - bit0)
        for j in range(1, n):
            d = int(self.depths[j])
            pj = int(self.parents[j])
            p_pp, p_pm = self._cond_plus_prob(d)
            bj = ((idx >> j) & 1).astype(np.float64)
            bp = ((idx >> pj) & 1).astype(np.float64)
            p_plus_given_parent = bp * p_pp + (1.0 - bp) * p_pm
            table *= bj * p_plus_given_parent + (1.0 - bj) * (1.0 - p_plus_given_parent)
        return table

    def _flip_table(self, table: np.ndarray) -> np.ndarray:
        full = (1 << self.size) - 1
        idx = np.arange(1 << self.size, dtype=np.int64)
        return table[full - idx]

    # -- public surface -------------------------------------------------------

    def table(self) -> np.ndarray:
        """Probability table over spin configurations, indexed by bit pattern."""
        if self._table is None:
            base = self._base_table()
            if self.boundary == "minus":
                base = self._flip_table(base)
            elif self.boundary == "mixture":
                base = 0.5 * (base + self._flip_table(base))
            elif self.boundary == "free":
                # mathematically flip symmetric already; averaging removes the
                # last-ulp asymmetry of the conditional-product construction
                base = 0.5 * (base + self._flip_table(base))
            self._table = base
        return self._table

    def means(self) -> np.ndarray:
        """Single-site mean spin at every slot, exact from the message fields."""
        vals = np.empty(self.size)
        vals[0] = math.tanh(self.inward[0])
        for j in range(1, self.size):
            d = int(self.depths[j])
            vals[j] = math.tanh(self.outward[d] + self.inward[d])
        if self.boundary == "minus":
            vals = -vals
        elif self.boundary == "mixture":
            vals = np.zeros(self.size)
        return vals

    def root_mean(self) -> float:
        return float(self.means()[0])

    def two_point(self, i: int, j: int) -> float:
        """Expectation of x_i * x_j, computed from the explicit table."""
        table = self.table()
        idx = np.arange(1 << self.size, dtype=np.int64)
        si = (((idx >> i) & 1) * 2 - 1).astype(np.float64)
        sj = (((idx >> j) & 1) * 2 - 1).astype(np.float64)
        return float(np.dot(table, si * sj))

    def sample(self, nsamples: int, rng) -> np.ndarray:
        """Perfect top-down samples, shape (nsamples, size), entries +-1 (int8)."""
        rng = np.random.default_rng(rng)
        out = np.empty((nsamples, self.size), dtype=np.int8)
        root_plus = _sigmoid(2.0 * self.inward[0])
        out[:, 0] = np.where(rng.random(nsamples) < root_plus, 1, -1)
        for d in range(1, self.t + 1):
            slots = np.nonzero(self.depths == d)[0]
            p_pp, p_pm = self._cond_plus_prob(d)
            parent_spins = out[:, self.parents[slots]]
            probs = np.where(parent_spins == 1, p_pp, p_pm)
            u = rng.random((nsamples, len(slots)))
            out[:, slots] = np.where(u < probs, 1, -1)
        if self.boundary == "minus":
            out = -out
        elif self.boundary == "mixture":
            signs = np.where(rng.random(nsamples) < 0.5, 1, -1).astype(np.int8)
            out = out * signs[:, None]
        return out

    def tv(self, other: "TreeMarginal") -> float:
        """Total variation distance between two marginals on the same ball."""
        if self.size != other.size:
            raise ValueError("marginals live on different balls")
        return 0.5 * float(np.abs(self.table() - other.table()).sum())

    def export_csv(self, path) -> None:
        """Write (configuration index, probability) rows.

        Bit j of the index is 1 when the spin at BFS slot j is +1; slots are
        root first, then depth by depth with children grouped under parents.
        """
        table = self.table()
        with open(path, "w") as fh:
            fh.write("# tree marginal: k=%d beta=%.17g t=%d boundary=%s\n"
                     % (self.p.k, self.p.beta, self.t, self.boundary))
            fh.write("# index bit j = 1 <=> spin +1 at BFS slot j "
                     "(root, then depth-major, children grouped by parent)\n")
            fh.write("index,probability\n")
            for i, q in enumerate(table):
                fh.write("%d,%.17g\n" % (i, q))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _check_depths(t: int, t_plus: int | None):
    if t_plus is not None and not t_plus > t:
        raise ValueError("need t_plus > t")


def _plus_like_marginal(p: IsingParams, t: int, t_plus: int | None, boundary: str) -> TreeMarginal:
    _check_depths(t, t_plus)
    k, beta = p.k, p.beta
    if t_plus is None:
        h = solve_fixed_point(p).h
        if t == 0:
            return TreeMarginal(p, 0, boundary, leaf_field=0.0,
                                root_field=k * _edge_message(beta, h))
        return TreeMarginal(p, t, boundary, leaf_field=h)
    if t == 0:
        root_field = k * _plus_message(k, beta, t_plus - 1)
        return TreeMarginal(p, 0, boundary, leaf_field=0.0, root_field=root_field,
                            t_plus=t_plus)
    leaf = (k - 1) * _plus_message(k, beta, t_plus - t - 1)
    return TreeMarginal(p, t, boundary, leaf_field=leaf, t_plus=t_plus)


def plus_boundary_marginal(p: IsingParams, t: int, t_plus: int | None = None) -> TreeMarginal:
    """Exact marginal on the radius-t ball of the depth-t_plus model with all
    depth-t_plus spins forced to +1.

    t_plus=None gives the infinite-depth limit: every depth-t vertex carries
    the fixed-point boundary field h.
    """
    return _plus_like_marginal(p, t, t_plus, "plus")


def minus_boundary_marginal(p: IsingParams, t: int, t_plus: int | None = None) -> TreeMarginal:
    """Spin-flip image of the plus-boundary marginal."""
    return _plus_like_marginal(p, t, t_plus, "minus")


def free_boundary_marginal(p: IsingParams, t: int, t_plus: int | None = None) -> TreeMarginal:
    """Marginal of the free-boundary model; independent of t_plus because a
    free boundary sends zero field inward."""
    _check_depths(t, t_plus)
    return TreeMarginal(p, t, "free", leaf_field=0.0, t_plus=t_plus)


def mixture_marginal(p: IsingParams, t: int, t_plus: int | None = None) -> TreeMarginal:
    """Equal-weight mixture of the plus and minus boundary marginals."""
    return _plus_like_marginal(p, t, t_plus, "mixture")


def leaf_field_marginal(p: IsingParams, t: int, h_leaf: float) -> TreeMarginal:
    """Ising model on the radius-t ball with field h_leaf on every depth-t vertex."""
    return TreeMarginal(p, t, "leaf_field", leaf_field=h_leaf)


def edge_correlation(p: IsingParams) -> float:
    """Expectation of the product of two adjacent spins under the plus measure:
    (tanh(beta) + m^2) / (1 + tanh(beta) m^2) with m = tanh(h)."""
    if p.B != 0.0:
        raise NonzeroFieldError("edge correlation is computed for B = 0")
    m = solve_fixed_point(p).m
    tb = math.tanh(p.beta)
    return (tb + m * m) / (1.0 + tb * m * m)


def root_magnetization(p: IsingParams) -> float:
    """Mean spin at a vertex under the plus measure:
    (m + tanh(beta) m) / (1 + tanh(beta) m^2) with m = tanh(h)."""
    if p.B != 0.0:
        raise NonzeroFieldError("root magnetization is computed for B = 0")
    m = solve_fixed_point(p).m
    tb = math.tanh(p.beta)
    return (m + tb * m) / (1.0 + tb * m * m)


def free_energy(p: IsingParams) -> float:
    """Bethe free energy density phi(beta) at the largest fixed point."""
    if p.B != 0.0:
        raise NonzeroFieldError("free energy is computed for B = 0")
    k = p.k
    h = solve_fixed_point(p).h
    tb = math.tanh(p.beta)
    th = math.tanh(h)
    return (
        (k / 2.0) * math.log(math.cosh(p.beta))
        - (k / 2.0) * math.log(1.0 + tb * th * th)
        + math.log((1.0 + tb * th) ** k + (1.0 - tb * th) ** k)
    )


def pair_correlation(p: IsingParams, d: int) -> float:
    """Expectation of x_j * x_j' for two vertices at tree distance d under the
    plus measure, by exact transfer-matrix contraction along the path.

    Path endpoints receive field (k-1)*u from their off-path subtrees and
    interior vertices (k-2)*u, with u the fixed-point edge message.
    """
    if d < 1:
        raise ValueError("pair correlation needs distance d >= 1")
    if p.B != 0.0:
        raise NonzeroFieldError("pair correlation is computed for B = 0")
    k, beta = p.k, p.beta
    h = solve_fixed_point(p).h
    u = _edge_message(beta, h)
    f_end = (k - 1) * u
    f_mid = (k - 2) * u
    signs = np.array([1.0, -1.0])
    w = np.exp(f_end * signs)           # weights over x_0
    z_vec = w.copy()                    # partition contributions
    s_vec = signs * w                   # contributions weighted by x_0
    for i in range(1, d + 1):
        f = f_end if i == d else f_mid
        m = np.exp(beta * np.outer(signs, signs) + f * signs[None, :])
        z_vec = z_vec @ m
        s_vec = s_vec @ m
    z = float(z_vec @ np.ones(2))
    corr = float(s_vec @ signs)
    return corr / z


def f_statistic_tree(
    p: IsingParams,
    boundary: str,
    ell: int,
    delta: float,
    nsamples: int = 200_000,
    seed=0,
) -> float:
    """Probability that the ball-average spin is at most -delta under the
    plus or minus infinite-tree measure restricted to the radius-ell ball.

    Exact enumeration when the ball fits the table limit, otherwise perfect
    top-down sampling with `nsamples` draws.
    """
    if boundary not in ("plus", "minus"):
        raise ValueError("boundary must be 'plus' or 'minus'")
    rho = root_magnetization(p)
    if not 0 < delta < rho:
        raise ValueError(f"delta must satisfy 0 < delta < {rho} (the root magnetization)")
    marg = plus_boundary_marginal(p, ell) if boundary == "plus" else \
        minus_boundary_marginal(p, ell)
    n = marg.size
    if n <= MAX_TABLE_SPINS:
        table = marg.table()
        pc = _popcount(np.arange(1 << n, dtype=np.int64))
        ball_sum = 2 * pc - n
        return float(table[ball_sum <= -delta * n].sum())
    spins = marg.sample(nsamples, seed)
    sums = spins.sum(axis=1, dtype=np.int64)
    return float(np.mean(sums <= -delta * n))


_PC16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


def _popcount(idx: np.ndarray) -> np.ndarray:
    return _PC16[idx & 0xFFFF] + _PC16[(idx >> 16) & 0xFFFF]


def dlr_check(p: IsingParams, t: int, t_plus: int) -> float:
    """Worst-case total variation between the conditional law of the inner
    radius-t ball given a boundary shell and the bare Ising form on the
    radius-(t+1) ball.

    The conditional given all spins at depths t+1..t_plus depends only on the
    depth-(t+1) shell (Markov property of the finite forced model), so the
    maximum runs over all depth-(t+1) shell configurations. Values should sit
    at floating-point roundoff for a correct implementation.
    """
    _check_depths(t, t_plus)
    marg = plus_boundary_marginal(p, t + 1, t_plus)
    n_outer = marg.size
    n_inner = _tree_size(p.k, t)
    if n_outer > MAX_TABLE_SPINS:
        raise SizeLimitError("dlr_check needs the radius-(t+1) table")
    table = marg.table().reshape(1 << (n_outer - n_inner), 1 << n_inner)
    cond = table / table.sum(axis=1, keepdims=True)

    parents, depths = tree_slots(p.k, t + 1)
    inner_idx = np.arange(1 << n_inner, dtype=np.int64)
    inner_spins = (((inner_idx[:, None] >> np.arange(n_inner)[None, :]) & 1) * 2 - 1)
    energy_inner = np.zeros(1 << n_inner)
    for j in range(1, n_inner):
        energy_inner += inner_spins[:, j] * inner_spins[:, parents[j]]
    shell_slots = np.arange(n_inner, n_outer)
    shell_idx = np.arange(1 << (n_outer - n_inner), dtype=np.int64)
    shell_spins = (((shell_idx[:, None] >> np.arange(n_outer - n_inner)[None, :]) & 1) * 2 - 1)
    # per inner leaf vertex, the summed spins of its shell children
    leaf_slots = np.nonzero(depths[:n_inner] == t)[0]
    child_sums = np.zeros((1 << (n_outer - n_inner), len(leaf_slots)))
    for a, v in enumerate(leaf_slots):
        kids = np.nonzero(parents[shell_slots] == v)[0]
        child_sums[:, a] = shell_spins[:, kids].sum(axis=1)
    cross = child_sums @ inner_spins[:, leaf_slots].T
    logw = p.beta * (energy_inner[None, :] + cross)
    logw -= logw.max(axis=1, keepdims=True)
    ref = np.exp(logw)
    ref /= ref.sum(axis=1, keepdims=True)
    return float(0.5 * np.abs(cond - ref).sum(axis=1).max())
