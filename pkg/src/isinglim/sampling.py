"""Exact and Monte Carlo sampling of Ising measures on finite regular graphs.

Provides full enumeration for small graphs (n <= 24), random-scan heat-bath
(Glauber) dynamics, the Wolff single-cluster algorithm for B = 0, seeded
batch collection with metadata, and the sign-flip construction of the
positive-magnetization conditional measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graphs import RegularGraph
from .tree import IsingParams, NonzeroFieldError, SizeLimitError

__all__ = [
    "SpinConfig",
    "ChainState",
    "SampleBatch",
    "ExactDistribution",
    "exact_distribution",
    "log_partition",
    "init_chain",
    "glauber_sweep",
    "wolff_step",
    "sample_unconditioned",
    "sample_exact",
    "sample_conditioned_plus",
    "save_batch_csv",
    "load_batch_csv",
    "save_batch_npz",
    "load_batch_npz",
    "EXACT_MAX_N",
]

EXACT_MAX_N = 24

DEFAULT_BURN = {"wolff": 200, "glauber": 100}
DEFAULT_THIN = 10


@dataclass(frozen=True)
class SpinConfig:
    """A single +-1 spin assignment with its cached total magnetization."""

    spins: np.ndarray
    magnetization: int

    @classmethod
    def from_spins(cls, spins) -> "SpinConfig":
        spins = np.asarray(spins, dtype=np.int8)
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be +-1")
        return cls(spins=spins, magnetization=int(spins.sum()))


@dataclass
class ChainState:
    """Evolving MCMC state: current configuration, private RNG stream, progress."""

    config: SpinConfig
    rng: np.random.Generator
    stream: object
    sweeps_done: int = 0


class SampleBatch:
    """A stack of spin configurations with the metadata that produced them.

    spins has shape (nsamples, n) with int8 entries +-1. meta is a plain dict
    (graph hash, beta, B, algorithm, burn-in, thinning, seed, conditioned flag).
    Batches are immutable once created.
    """

    def __init__(self, spins: np.ndarray, meta: dict):
        self.spins = np.asarray(spins, dtype=np.int8)
        self.spins.setflags(write=False)
        self.meta = dict(meta)

    def __len__(self) -> int:
        return self.spins.shape[0]

    @property
    def n(self) -> int:
        return self.spins.shape[1]

    @property
    def magnetizations(self) -> np.ndarray:
        return self.spins.sum(axis=1, dtype=np.int64)

    def config(self, r: int) -> SpinConfig:
        return SpinConfig.from_spins(self.spins[r])

    def configs(self):
        for r in range(len(self)):
            yield self.config(r)


@dataclass(frozen=True)
class ExactDistribution:
    """Exact Ising law on a small graph: probabilities over all 2^n states
    (bit j of the state index is 1 when spin j is +1) and log Z."""

    probs: np.ndarray
    log_z: float
    n: int


def _chunked_log_weights(g: RegularGraph, p: IsingParams, chunk: int = 1 << 20):
    e0 = g.edges[:, 0].astype(np.int64)
    e1 = g.edges[:, 1].astype(np.int64)
    total = 1 << g.n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        agree = np.zeros(len(idx), dtype=np.int64)
        for a, b in zip(e0, e1):
            agree += ((idx >> a) ^ (idx >> b)) & 1
        energy = (g.num_edges - 2 * agree).astype(np.float64)
        logw = p.beta * energy
        if p.B != 0.0:
            mag = (2 * _popcount_bits(idx, g.n) - g.n).astype(np.float64)
            logw += p.B * mag
        yield start, logw


def _popcount_bits(idx: np.ndarray, n: int) -> np.ndarray:
    count = np.zeros(len(idx), dtype=np.int64)
    for j in range(n):
        count += (idx >> j) & 1
    return count


def exact_distribution(g: RegularGraph, p: IsingParams) -> ExactDistribution:
    """Exact probability table and log partition function by full enumeration."""
    _check_params(g, p)
    if g.n > EXACT_MAX_N:
        raise SizeLimitError(f"exact enumeration is limited to n <= {EXACT_MAX_N}")
    logw_max = -np.inf
    for _, logw in _chunked_log_weights(g, p):
        logw_max = max(logw_max, float(logw.max()))
    total = 0.0
    probs = np.empty(1 << g.n, dtype=np.float64)
    for start, logw in _chunked_log_weights(g, p):
        w = np.exp(logw - logw_max)
        probs[start:start + len(w)] = w
        total += float(w.sum())
    probs /= total
    return ExactDistribution(probs=probs, log_z=logw_max + np.log(total), n=g.n)


def log_partition(g: RegularGraph, p: IsingParams) -> float:
    """Exact log Z by enumeration (n <= 24)."""
    return exact_distribution(g, p).log_z


def _check_params(g: RegularGraph, p: IsingParams):
    if p.k != g.k:
        raise ValueError(f"params degree k={p.k} does not match graph degree {g.k}")


def _pplus_table(k: int, beta: float, B: float) -> np.ndarray:
    """Heat-bath acceptance table: entry j is P(spin -> +1) given neighbor sum -k+2j."""
    s = np.arange(-k, k + 1, 2, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-2.0 * (beta * s + B)))


def init_chain(g: RegularGraph, p: IsingParams, seed, init: str = "random") -> ChainState:
    """Fresh chain state; init is 'random', 'all_plus', or 'all_minus'."""
    _check_params(g, p)
    rng = np.random.default_rng(seed)
    if init == "random":
        spins = np.where(rng.random(g.n) < 0.5, 1, -1).astype(np.int8)
    elif init == "all_plus":
        spins = np.ones(g.n, dtype=np.int8)
    elif init == "all_minus":
        spins = -np.ones(g.n, dtype=np.int8)
    else:
        raise ValueError(f"unknown init {init!r}")
    stream = _kernels.make_stream(rng)
    return ChainState(config=SpinConfig.from_spins(spins), rng=rng, stream=stream)


def glauber_sweep(g: RegularGraph, p: IsingParams, state: ChainState,
                  nsweeps: int = 1) -> ChainState:
    """Advance the chain by whole heat-bath sweeps (n random-site updates each).

    The state is updated in place and returned.
    """
    _check_params(g, p)
    indptr, indices = g.csr()
    pplus = _pplus_table(g.k, p.beta, p.B)
    spins = state.config.spins.copy()
    out = np.empty((0, g.n), dtype=np.int8)
    _kernels.glauber_sample(spins, indptr, indices, pplus, nsweeps, 1, out, state.stream)
    state.config = SpinConfig.from_spins(spins)
    state.sweeps_done += nsweeps
    return state


def wolff_step(g: RegularGraph, p: IsingParams, state: ChainState,
               nsteps: int = 1) -> ChainState:
    """Advance the chain by single-cluster flips (B = 0 only).

    The state is updated in place and returned.
    """
    _check_params(g, p)
    if p.B != 0.0:
        raise NonzeroFieldError("the cluster algorithm requires B = 0")
    indptr, indices = g.csr()
    p_add = 1.0 - np.exp(-2.0 * p.beta)
    spins = state.config.spins.copy()
    out = np.empty((0, g.n), dtype=np.int8)
    _kernels.wolff_sample(spins, indptr, indices, p_add, nsteps, 1, out, state.stream)
    state.config = SpinConfig.from_spins(spins)
    state.sweeps_done += nsteps
    return state


def _run_chain(g, p, algorithm, burn_in, thin, nsamples, seed, init, indptr, indices):
    rng = np.random.default_rng(seed)
    if init == "random":
        spins = np.where(rng.random(g.n) < 0.5, 1, -1).astype(np.int8)
    elif init == "all_plus":
        spins = np.ones(g.n, dtype=np.int8)
    else:
        raise ValueError(f"unknown init {init!r}")
    stream = _kernels.make_stream(rng)
    out = np.empty((nsamples, g.n), dtype=np.int8)
    if algorithm == "glauber":
        pplus = _pplus_table(g.k, p.beta, p.B)
        _kernels.glauber_sample(spins, indptr, indices, pplus, burn_in, thin, out, stream)
    else:
        p_add = 1.0 - np.exp(-2.0 * p.beta)
        _kernels.wolff_sample(spins, indptr, indices, p_add, burn_in, thin, out, stream)
    return out


def sample_unconditioned(
    g: RegularGraph,
    p: IsingParams,
    nsamples: int,
    algorithm: str = "wolff",
    burn_in: int | None = None,
    thin: int | None = None,
    seed=0,
    init: str = "random",
    chains: int = 1,
) -> SampleBatch:
    """Seeded, thinned MCMC batch from the unconditioned Ising measure.

    burn_in counts sweeps (Glauber) or cluster steps (Wolff); one sample is
    recorded every `thin` sweeps/steps. With chains > 1 the samples are split
    over independently seeded and burned chains; random initialization then
    gives exactly symmetric phase weights, which matters for single-site
    dynamics at low temperature where in-chain sign flips are rare. Identical
    inputs and seed give bit-identical batches.
    """
    _check_params(g, p)
    if algorithm not in ("wolff", "glauber"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm == "wolff" and p.B != 0.0:
        raise NonzeroFieldError("the cluster algorithm requires B = 0")
    if burn_in is None:
        burn_in = DEFAULT_BURN[algorithm]
    if thin is None:
        thin = DEFAULT_THIN
    if chains < 1:
        raise ValueError("chains must be positive")
    indptr, indices = g.csr()
    if chains == 1:
        out = _run_chain(g, p, algorithm, burn_in, thin, nsamples, seed, init,
                         indptr, indices)
    else:
        chains = min(chains, nsamples)
        chain_seeds = np.random.SeedSequence(seed).generate_state(chains)
        counts = np.full(chains, nsamples // chains, dtype=np.int64)
        counts[: nsamples % chains] += 1
        out = np.empty((nsamples, g.n), dtype=np.int8)
        row = 0
        for c in range(chains):
            out[row:row + counts[c]] = _run_chain(
                g, p, algorithm, burn_in, thin, int(counts[c]),
                int(chain_seeds[c]), init, indptr, indices,
            )
            row += counts[c]
    meta = {
        "graph_hash": g.hash_hex(),
        "n": g.n,
        "k": g.k,
        "beta": p.beta,
        "B": p.B,
        "algorithm": algorithm,
        "burn_in": burn_in,
        "thin": thin,
        "seed": seed,
        "chains": chains,
        "conditioned": False,
        "backend": _kernels.backend_name(),
    }
    return SampleBatch(out, meta)


def sample_exact(g: RegularGraph, p: IsingParams, nsamples: int, seed=0) -> SampleBatch:
    """Independent draws from the exactly enumerated measure (n <= 24)."""
    dist = exact_distribution(g, p)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    states = np.searchsorted(cdf, rng.random(nsamples), side="right")
    spins = np.empty((nsamples, g.n), dtype=np.int8)
    for j in range(g.n):
        spins[:, j] = (((states >> j) & 1) * 2 - 1).astype(np.int8)
    meta = {
        "graph_hash": g.hash_hex(),
        "n": g.n,
        "k": g.k,
        "beta": p.beta,
        "B": p.B,
        "algorithm": "exact",
        "burn_in": 0,
        "thin": 1,
        "seed": seed,
        "conditioned": False,
        "backend": "exact",
    }
    return SampleBatch(spins, meta)


def sample_conditioned_plus(batch: SampleBatch) -> SampleBatch:
    """Batch from the measure conditioned on positive total magnetization.

    Configurations with negative magnetization are globally flipped and
    zero-magnetization configurations are discarded. At B = 0 the measure is
    exactly flip symmetric, so this maps an exact sample of the unconditioned
    measure to an exact sample of the conditioned one.
    """
    if batch.meta.get("conditioned"):
        raise ValueError("batch is already conditioned")
    if batch.meta.get("B", 0.0) != 0.0:
        raise NonzeroFieldError("conditioning by sign flip requires B = 0")
    m = batch.magnetizations
    keep = m != 0
    spins = batch.spins[keep].copy()
    neg = m[keep] < 0
    spins[neg] *= -1
    meta = dict(batch.meta)
    meta["conditioned"] = True
    meta["dropped_zero_magnetization"] = int(np.count_nonzero(~keep))
    return SampleBatch(spins, meta)


# -- batch serialization -----------------------------------------------------


def save_batch_csv(batch: SampleBatch, path) -> None:
    """CSV rows of +-1 spins; the header line carries metadata as key=value pairs."""
    items = " ".join(f"{k}={batch.meta[k]}" for k in sorted(batch.meta))
    with open(path, "w") as fh:
        fh.write(f"# {items}\n")
        for start in range(0, len(batch), 4096):
            block = batch.spins[start:start + 4096]
            fh.write("\n".join(",".join(str(int(v)) for v in row) for row in block))
            fh.write("\n")


def _parse_meta_token(value: str):
    for caster in (int, float):
        try:
            return caster(value)
        except ValueError:
            pass
    if value in ("True", "False"):
        return value == "True"
    return value


def load_batch_csv(path) -> SampleBatch:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing metadata header line")
        meta = {}
        for token in header[1:].split():
            key, _, value = token.partition("=")
            meta[key] = _parse_meta_token(value)
        rows = [line.strip().split(",") for line in fh if line.strip()]
    spins = np.array(rows, dtype=np.int8)
    return SampleBatch(spins, meta)


def save_batch_npz(batch: SampleBatch, path) -> None:
    np.savez_compressed(path, spins=batch.spins, meta=np.array(repr(batch.meta), dtype=object))


def load_batch_npz(path) -> SampleBatch:
    import ast

    data = np.load(path, allow_pickle=True)
    meta = ast.literal_eval(str(data["meta"]))
    return SampleBatch(data["spins"], meta)
