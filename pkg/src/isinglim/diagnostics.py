"""Local weak convergence statistics from sample batches.

Ball-marginal total variation in two modes (vertex-averaged and per-vertex),
edge agreement, ball-average censuses, anticoncentration of the magnetization,
and variances of spatial averages of local functions. All statistics are pure
functions of an immutable batch and a graph.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    RegularGraph,
    ball,
    ball_member_table,
    greedy_independent_set,
    tree_ball_table,
    tree_size,
)
from .sampling import SampleBatch, SpinConfig
from .tree import TreeMarginal

__all__ = [
    "BallLaw",
    "ConvergenceReport",
    "tv_distance",
    "empirical_ball_law",
    "ball_pattern_counts",
    "empirical_state_distribution",
    "mode_A_statistic",
    "mode_C_statistic",
    "edge_agreement",
    "f_indicator",
    "f_census",
    "f_disagreement",
    "q_hat",
    "anticoncentration",
    "local_average_variance",
    "format_float",
    "dump_json",
]


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two tables with a common index order."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("tables must have identical shape")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class BallLaw:
    """Empirical law of the spin pattern on one vertex's radius-t ball."""

    center: int
    t: int
    table: np.ndarray
    tree_shaped: bool
    nsamples: int


def _bits01(batch: SampleBatch) -> np.ndarray:
    return (batch.spins > 0).astype(np.int8)


def _pattern_codes(bits01: np.ndarray, cols: np.ndarray) -> np.ndarray:
    weights = (np.int64(1) << np.arange(len(cols), dtype=np.int64))
    return bits01[:, cols].astype(np.int64) @ weights


def empirical_ball_law(batch: SampleBatch, g: RegularGraph, i: int, t: int) -> BallLaw:
    """Frequency table of ball spin patterns around vertex i.

    Tree-shaped balls use the canonical rooted-tree slot order so the table is
    directly comparable with tree marginals; other balls use the
    (distance, id) order of their vertex list.
    """
    if len(batch) == 0:
        raise ValueError("batch is empty")
    orders, mask = tree_ball_table(g, t)
    if mask[i]:
        cols = orders[i]
        tree_shaped = True
    else:
        cols = ball(g, i, t).vertices
        tree_shaped = False
    codes = _pattern_codes(_bits01(batch), cols)
    table = np.bincount(codes, minlength=1 << len(cols)).astype(np.float64) / len(batch)
    return BallLaw(center=i, t=t, table=table, tree_shaped=tree_shaped, nsamples=len(batch))


def ball_pattern_counts(batch: SampleBatch, g: RegularGraph, t: int):
    """Per-vertex pattern counts over tree-shaped balls.

    Returns (counts, mask): counts[i] is the histogram of tree-ordered ball
    patterns for vertex i when mask[i] (ball tree-shaped), zeros otherwise.
    """
    orders, mask = tree_ball_table(g, t)
    size = tree_size(g.k, t)
    counts = np.zeros((g.n, 1 << size), dtype=np.int64)
    bits = _bits01(batch)
    for i in np.nonzero(mask)[0]:
        codes = _pattern_codes(bits, orders[i])
        counts[i] = np.bincount(codes, minlength=1 << size)
    return counts, mask


def _check_reference(g: RegularGraph, t: int, ref: TreeMarginal):
    if ref.t != t:
        raise ValueError(f"reference marginal has depth {ref.t}, expected {t}")
    if ref.p.k != g.k:
        raise ValueError("reference marginal degree does not match the graph")


def mode_A_statistic(batch: SampleBatch, g: RegularGraph, t: int, ref: TreeMarginal) -> float:
    """TV between the vertex-averaged empirical ball law and the reference
    tree marginal.

    The reference law lives on (tree shape) x (pattern); balls that are not
    tree-shaped contribute their entire mass to the distance.
    """
    _check_reference(g, t, ref)
    counts, mask = ball_pattern_counts(batch, g, t)
    return mode_A_from_counts(counts, mask, len(batch), g.n, ref.table())


def mode_C_statistic(
    batch: SampleBatch, g: RegularGraph, t: int, ref: TreeMarginal, eps: float
) -> tuple[np.ndarray, float]:
    """Per-vertex TVs to the reference marginal and the fraction exceeding eps.

    Vertices with non-tree balls are at distance 1 from the reference.
    """
    _check_reference(g, t, ref)
    counts, mask = ball_pattern_counts(batch, g, t)
    tvs = np.ones(g.n, dtype=np.float64)
    table = ref.table()
    nsamp = len(batch)
    for i in np.nonzero(mask)[0]:
        tvs[i] = 0.5 * float(np.abs(counts[i] / nsamp - table).sum())
    return tvs, float(np.mean(tvs > eps))


def mode_A_from_counts(counts: np.ndarray, mask: np.ndarray, nsamples: int,
                       n: int, ref_table: np.ndarray) -> float:
    """mode_A_statistic when the pattern counts are already available."""
    avg = counts[mask].sum(axis=0).astype(np.float64) / (n * nsamples)
    non_tree_mass = 1.0 - float(mask.sum()) / n
    return 0.5 * (float(np.abs(avg - ref_table).sum()) + non_tree_mass)


def mode_C_from_counts(counts: np.ndarray, mask: np.ndarray, nsamples: int,
                       ref_table: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    """mode_C_statistic when the pattern counts are already available."""
    tvs = np.ones(counts.shape[0], dtype=np.float64)
    for i in np.nonzero(mask)[0]:
        tvs[i] = 0.5 * float(np.abs(counts[i] / nsamples - ref_table).sum())
    return tvs, float(np.mean(tvs > eps))


def _per_sample_edge_means(batch: SampleBatch, g: RegularGraph) -> np.ndarray:
    e0 = g.edges[:, 0]
    e1 = g.edges[:, 1]
    vals = np.empty(len(batch))
    for start in range(0, len(batch), 1024):
        block = batch.spins[start:start + 1024]
        prod = block[:, e0].astype(np.int32) * block[:, e1]
        vals[start:start + len(block)] = prod.mean(axis=1)
    return vals


def _batch_means_stderr(vals: np.ndarray, nblocks: int = 32) -> float:
    m = len(vals)
    if m < 2:
        return 0.0
    nblocks = min(nblocks, m)
    usable = (m // nblocks) * nblocks
    blocks = vals[:usable].reshape(nblocks, -1).mean(axis=1)
    return float(blocks.std(ddof=1) / np.sqrt(nblocks))


def edge_agreement(batch: SampleBatch, g: RegularGraph) -> tuple[float, float]:
    """Mean of x_i * x_j over a uniformly random edge, with a batch-means
    standard error (robust to mild autocorrelation in MCMC batches)."""
    vals = _per_sample_edge_means(batch, g)
    return float(vals.mean()), _batch_means_stderr(vals)


def empirical_state_distribution(batch: SampleBatch) -> np.ndarray:
    """Empirical distribution over whole-graph states (n <= 24), indexed like
    exact_distribution: bit j of the state is 1 when spin j is +1."""
    n = batch.n
    if n > 24:
        raise ValueError("state histograms are limited to n <= 24")
    codes = _pattern_codes(_bits01(batch), np.arange(n))
    return np.bincount(codes, minlength=1 << n).astype(np.float64) / len(batch)


# -- ball-average censuses ----------------------------------------------------


def f_indicator(config: SpinConfig, g: RegularGraph, i: int, ell: int, delta: float) -> int:
    """1 when the ball-average spin around i is at most -delta."""
    members = ball(g, i, ell).vertices
    s = int(config.spins[members].sum())
    return int(s <= -delta * len(members))


def _census_fractions(spins2d: np.ndarray, g: RegularGraph, ell: int, delta: float,
                      members=None, sizes=None) -> np.ndarray:
    if members is None:
        members, sizes = ball_member_table(g, ell)
    frac = np.zeros(spins2d.shape[0], dtype=np.float64)
    for i in range(g.n):
        cols = members[i, : sizes[i]]
        s = spins2d[:, cols].sum(axis=1, dtype=np.int64)
        frac += s <= -delta * sizes[i]
    return frac / g.n


def f_census(config: SpinConfig, g: RegularGraph, ell: int, delta: float) -> float:
    """Fraction of vertices whose ball-average spin is at most -delta.

    For configurations with nonnegative magnetization on locally tree-like
    graphs the census cannot exceed 1/(1 + delta/2) for large n; a violation
    triggers a warning, not an error.
    """
    census = float(_census_fractions(config.spins[None, :], g, ell, delta)[0])
    if config.magnetization >= 0 and census > 1.0 / (1.0 + delta / 2.0):
        warnings.warn(
            f"census {census:.4f} exceeds 1/(1+delta/2) = "
            f"{1.0 / (1.0 + delta / 2.0):.4f} on a nonnegative-magnetization "
            "configuration; expected only for small n or non-tree-like graphs",
            stacklevel=2,
        )
    return census


def f_disagreement(config: SpinConfig, g: RegularGraph, ell: int, delta: float) -> float:
    """Fraction of edges whose endpoints disagree on the ball-average indicator."""
    members, sizes = ball_member_table(g, ell)
    flags = np.zeros(g.n, dtype=bool)
    for i in range(g.n):
        cols = members[i, : sizes[i]]
        flags[i] = config.spins[cols].sum() <= -delta * sizes[i]
    e = g.edges
    return float(np.mean(flags[e[:, 0]] != flags[e[:, 1]]))


def q_hat(batch: SampleBatch, g: RegularGraph, ell: int, delta: float) -> float:
    """Mean ball-average census over a conditioned batch: the empirical weight
    of the minus component."""
    if not batch.meta.get("conditioned"):
        raise ValueError("q_hat expects a batch conditioned on positive magnetization")
    return float(_census_fractions(batch.spins, g, ell, delta).mean())


def batch_census_mean(batch: SampleBatch, g: RegularGraph, ell: int, delta: float) -> float:
    """Mean ball-average census over any batch."""
    return float(_census_fractions(batch.spins, g, ell, delta).mean())


def anticoncentration(batch: SampleBatch, g: RegularGraph) -> float:
    """sup_m P(M = m) estimated from the batch, scaled by the square root of a
    greedy independent set size. Bounded across n for fixed parameters."""
    m = batch.magnetizations
    _, counts = np.unique(m, return_counts=True)
    sup_p = counts.max() / len(batch)
    if len(counts) == 1:
        warnings.warn("degenerate batch: all samples share one magnetization", stacklevel=2)
    iset = len(greedy_independent_set(g))
    return float(sup_p * np.sqrt(iset))


def local_average_variance(batch: SampleBatch, g: RegularGraph, f_family="center_spin",
                           ell: int = 1) -> float:
    """Sample variance across the batch of (1/n) sum_i f_i(ball spins).

    f_family is 'center_spin' (f_i = x_i), 'ball_agreement' (f_i = mean of
    x_i x_j over neighbors j), or a callable f(spins_row, i, members_i).
    """
    if f_family == "center_spin":
        vals = batch.magnetizations.astype(np.float64) / batch.n
    elif f_family == "ball_agreement":
        vals = _per_sample_edge_means(batch, g)
    elif callable(f_family):
        members, sizes = ball_member_table(g, ell)
        vals = np.empty(len(batch))
        for r in range(len(batch)):
            row = batch.spins[r]
            vals[r] = np.mean([
                f_family(row, i, members[i, : sizes[i]]) for i in range(g.n)
            ])
    else:
        raise ValueError(f"unknown f_family {f_family!r}")
    return float(vals.var(ddof=1))


# -- reports -------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Summary statistics of one (graph, batch, reference) comparison."""

    label: str
    n: int
    beta: float
    t: int
    nsamples: int
    mode_A_tv: float | None = None
    mode_C_exceed_fraction: float | None = None
    mode_C_epsilon: float | None = None
    mode_C_tv_per_vertex: np.ndarray | None = None
    edge_agreement: float | None = None
    edge_agreement_stderr: float | None = None
    f_census_mean: float | None = None
    f_disagreement_mean: float | None = None
    q_hat: float | None = None
    anticoncentration_sup: float | None = None
    extra: dict = field(default_factory=dict)

    def scalar_fields(self) -> dict:
        out = {
            "label": self.label,
            "n": self.n,
            "beta": self.beta,
            "t": self.t,
            "nsamples": self.nsamples,
        }
        for key in (
            "mode_A_tv",
            "mode_C_exceed_fraction",
            "mode_C_epsilon",
            "edge_agreement",
            "edge_agreement_stderr",
            "f_census_mean",
            "f_disagreement_mean",
            "q_hat",
            "anticoncentration_sup",
        ):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        out.update(self.extra)
        return out

    def to_json_dict(self) -> dict:
        out = self.scalar_fields()
        if self.mode_C_tv_per_vertex is not None:
            out["mode_C_tv_per_vertex"] = [float(v) for v in self.mode_C_tv_per_vertex]
        return out


def format_float(x) -> str:
    return format(float(x), ".17g")


def _json_fragment(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        inner = ",".join(f"{json.dumps(str(k))}:{_json_fragment(v)}"
                         for k, v in sorted(value.items()))
        return "{" + inner + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_json_fragment(v) for v in value) + "]"
    if value is None:
        return "null"
    raise TypeError(f"cannot serialize {type(value)!r}")


def dump_json(obj, path) -> None:
    """Deterministic JSON writer: sorted keys, floats at 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(_json_fragment(obj))
        fh.write("\n")


def reports_to_csv(reports: list[ConvergenceReport], path) -> None:
    """Flat CSV of the scalar fields, one row per report."""
    keys: list[str] = []
    rows = []
    for rep in reports:
        fields = rep.scalar_fields()
        for key in fields:
            if key not in keys:
                keys.append(key)
        rows.append(fields)
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for fields in rows:
            cells = []
            for key in keys:
                value = fields.get(key, "")
                if isinstance(value, (float, np.floating)):
                    cells.append(format_float(value))
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")
