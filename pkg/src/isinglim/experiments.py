"""Named end-to-end experiments with config files and machine-readable outputs.

Each experiment wires the graph, tree, sampling, and diagnostics layers into
one reproducible run: a config plus a seed fully determines every output
byte. Experiments write a manifest (config echo, package version, derived
seeds), a JSON report, and a flat CSV, and carry their own pass/fail
assertions so the command line can exit nonzero on contract violations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from ._kernels import backend_name
from . import diagnostics as diag
from .diagnostics import ConvergenceReport, dump_json, reports_to_csv
from .graphs import (
    RegularGraph,
    disjoint_union,
    generate_random_regular,
    k4,
    load_edgelist,
    petersen,
)
from .sampling import (
    SampleBatch,
    exact_distribution,
    sample_conditioned_plus,
    sample_unconditioned,
)
from .tree import (
    IsingParams,
    critical_beta,
    edge_correlation,
    free_energy,
    mixture_marginal,
    plus_boundary_marginal,
    root_magnetization,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "ConfigError",
    "parse_config",
    "load_config",
    "EXPERIMENTS",
    "run_experiment",
    "run_mixture_convergence",
    "run_plus_convergence",
    "run_disconnected_mixture",
    "run_energy_density",
    "run_spatial_concentration",
    "run_sampler_validation",
]


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    """Validated settings for one experiment run."""

    experiment: str = ""
    graph: str = "random"
    k: int = 3
    n: int = 1000
    n_ladder: list = field(default_factory=lambda: [100, 1000, 10000])
    r: int = 16
    n_per: int = 500
    beta: float = 1.0
    B: float = 0.0
    algorithm: str = "auto"
    nsamples: int = 10000
    burn_in: int | None = None
    thin: int | None = None
    seed: int = 0
    t_list: list = field(default_factory=lambda: [1, 2])
    ell: int = 2
    delta: float | None = None
    epsilon: float = 0.05
    beta_grid: list = field(default_factory=lambda: [0.3, 0.45, 0.7, 0.9, 1.2])
    tv_threshold: float = 0.01
    out_dir: str = "results"
    assert_results: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}"
            )
        if self.graph not in ("random", "k4", "petersen", "disjoint") and not \
                self.graph.startswith("file:"):
            raise ConfigError(f"unknown graph spec {self.graph!r}")
        if not self.n_ladder:
            raise ConfigError("n_ladder must not be empty")
        if any(int(n) <= 0 for n in self.n_ladder):
            raise ConfigError("n_ladder entries must be positive")
        if sorted(self.n_ladder) != list(self.n_ladder):
            raise ConfigError("n_ladder must be increasing")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if self.algorithm not in ("auto", "wolff", "glauber"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.nsamples <= 1:
            raise ConfigError("nsamples must exceed 1")
        if not self.t_list:
            raise ConfigError("t_list must not be empty")
        return self


_LIST_KEYS = {"n_ladder": int, "t_list": int, "beta_grid": float}
_OPTIONAL_INT = {"burn_in", "thin"}
_OPTIONAL_FLOAT = {"delta"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the key = value config format ('#' comments, comma lists)."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if value == "":
            if key in _OPTIONAL_INT or key in _OPTIONAL_FLOAT:
                setattr(cfg, key, None)
                continue
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if key in _LIST_KEYS:
            caster = _LIST_KEYS[key]
            try:
                setattr(cfg, key, [caster(tok) for tok in value.split(",") if tok.strip()])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad list for {key!r}: {exc}") from exc
            continue
        current = getattr(cfg, key)
        try:
            if key in _OPTIONAL_INT:
                setattr(cfg, key, int(value))
            elif key in _OPTIONAL_FLOAT:
                setattr(cfg, key, float(value))
            elif isinstance(current, bool):
                if value.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(f"expected boolean, got {value!r}")
                setattr(cfg, key, value.lower() in ("true", "1"))
            elif isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


@dataclass
class ExperimentResult:
    name: str
    reports: list
    passed: bool
    failures: list
    out_dir: str | None = None


def _sub_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _algorithm_for(cfg: ExperimentConfig, beta: float, k: int) -> str:
    if cfg.algorithm != "auto":
        return cfg.algorithm
    return "wolff" if beta > critical_beta(k) else "glauber"


def _build_graph(cfg: ExperimentConfig, n: int, seed: int) -> RegularGraph:
    if cfg.graph == "k4":
        return k4()
    if cfg.graph == "petersen":
        return petersen()
    if cfg.graph.startswith("file:"):
        return load_edgelist(cfg.graph[5:])
    if cfg.graph == "disjoint":
        comp_seeds = _sub_seeds(seed, cfg.r)
        comps = [generate_random_regular(cfg.n_per, cfg.k, s) for s in comp_seeds]
        return disjoint_union(comps)
    return generate_random_regular(n, cfg.k, seed)


def _delta_for(cfg: ExperimentConfig, p: IsingParams) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return root_magnetization(p) / 2.0


def _write_outputs(cfg: ExperimentConfig, result: ExperimentResult, extra: dict | None = None):
    out_dir = os.path.join(cfg.out_dir, result.name)
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "experiment": result.name,
        "config": {f.name: getattr(cfg, f.name) for f in fields(ExperimentConfig)},
        "version": __version__,
        "backend": backend_name(),
        "seed_derivation": "numpy.random.SeedSequence(config seed).generate_state",
    }
    dump_json(manifest, os.path.join(out_dir, "manifest.json"))
    payload = {
        "passed": result.passed,
        "failures": result.failures,
        "reports": [rep.to_json_dict() for rep in result.reports],
    }
    if extra:
        payload.update(extra)
    dump_json(payload, os.path.join(out_dir, "report.json"))
    reports_to_csv(result.reports, os.path.join(out_dir, "report.csv"))
    result.out_dir = out_dir


def _sample_for(cfg: ExperimentConfig, g: RegularGraph, p: IsingParams, seed: int,
                nsamples: int | None = None) -> SampleBatch:
    algorithm = _algorithm_for(cfg, p.beta, p.k)
    return sample_unconditioned(
        g, p, nsamples or cfg.nsamples, algorithm=algorithm,
        burn_in=cfg.burn_in, thin=cfg.thin, seed=seed,
    )


def run_mixture_convergence(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Unconditioned measure against the symmetric mixture of the plus and
    minus tree measures: vertex-averaged and per-vertex ball TVs down an
    n-ladder."""
    p = IsingParams(cfg.k, cfg.beta, cfg.B)
    refs = {t: mixture_marginal(p, t) for t in cfg.t_list}
    seeds = _sub_seeds(cfg.seed, 2 * len(cfg.n_ladder))
    reports = []
    series: dict[int, list[float]] = {t: [] for t in cfg.t_list}
    for i, n in enumerate(cfg.n_ladder):
        g = _build_graph(cfg, n, seeds[2 * i])
        batch = _sample_for(cfg, g, p, seeds[2 * i + 1])
        for t in cfg.t_list:
            counts, mask = diag.ball_pattern_counts(batch, g, t)
            mode_a = diag.mode_A_from_counts(counts, mask, len(batch), g.n, refs[t].table())
            tvs, exceed = diag.mode_C_from_counts(counts, mask, len(batch),
                                                  refs[t].table(), cfg.epsilon)
            series[t].append(mode_a)
            reports.append(ConvergenceReport(
                label="mixture_convergence", n=g.n, beta=cfg.beta, t=t,
                nsamples=len(batch), mode_A_tv=mode_a,
                mode_C_exceed_fraction=exceed, mode_C_epsilon=cfg.epsilon,
                mode_C_tv_per_vertex=tvs,
            ))
    failures = []
    if cfg.assert_results:
        for t, vals in series.items():
            if not all(a > b for a, b in zip(vals, vals[1:])):
                failures.append(f"mode_A TV not strictly decreasing at t={t}: {vals}")
    result = ExperimentResult("mixture_convergence", reports, not failures, failures)
    if write:
        _write_outputs(cfg, result)
    return result


def run_plus_convergence(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Measure conditioned on positive magnetization against the plus-boundary
    tree measure, plus the empirical minus-phase weight q_hat."""
    p = IsingParams(cfg.k, cfg.beta, cfg.B)
    refs = {t: plus_boundary_marginal(p, t) for t in cfg.t_list}
    delta = _delta_for(cfg, p)
    seeds = _sub_seeds(cfg.seed, 2 * len(cfg.n_ladder))
    reports = []
    series: dict[int, list[float]] = {t: [] for t in cfg.t_list}
    q_series = []
    for i, n in enumerate(cfg.n_ladder):
        g = _build_graph(cfg, n, seeds[2 * i])
        batch = sample_conditioned_plus(_sample_for(cfg, g, p, seeds[2 * i + 1]))
        q = diag.q_hat(batch, g, cfg.ell, delta)
        q_series.append(q)
        for t in cfg.t_list:
            counts, mask = diag.ball_pattern_counts(batch, g, t)
            mode_a = diag.mode_A_from_counts(counts, mask, len(batch), g.n, refs[t].table())
            tvs, exceed = diag.mode_C_from_counts(counts, mask, len(batch),
                                                  refs[t].table(), cfg.epsilon)
            series[t].append(mode_a)
            reports.append(ConvergenceReport(
                label="plus_convergence", n=g.n, beta=cfg.beta, t=t,
                nsamples=len(batch), mode_A_tv=mode_a,
                mode_C_exceed_fraction=exceed, mode_C_epsilon=cfg.epsilon,
                mode_C_tv_per_vertex=tvs, q_hat=q,
                extra={"ell": cfg.ell, "delta": delta},
            ))
    failures = []
    if cfg.assert_results:
        for t, vals in series.items():
            if not all(a > b for a, b in zip(vals, vals[1:])):
                failures.append(f"mode_A TV not decreasing at t={t}: {vals}")
        if q_series[-1] >= 0.05:
            failures.append(f"q_hat at the largest n is {q_series[-1]:.4f} >= 0.05")
    result = ExperimentResult("plus_convergence", reports, not failures, failures)
    if write:
        _write_outputs(cfg, result, extra={"q_series": q_series})
    return result


def run_disconnected_mixture(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Conditioning on global positive magnetization over disjoint components:
    the minus-phase weight q_hat stays bounded away from zero."""
    p = IsingParams(cfg.k, cfg.beta, cfg.B)
    delta = _delta_for(cfg, p)
    seeds = _sub_seeds(cfg.seed, 2)
    comps = [generate_random_regular(cfg.n_per, cfg.k, s)
             for s in _sub_seeds(seeds[0], cfg.r)]
    g = disjoint_union(comps)
    batch = sample_conditioned_plus(_sample_for(cfg, g, p, seeds[1]))
    q = diag.q_hat(batch, g, cfg.ell, delta)
    report = ConvergenceReport(
        label="disconnected_mixture", n=g.n, beta=cfg.beta, t=cfg.ell,
        nsamples=len(batch), q_hat=q,
        extra={"r": cfg.r, "n_per": cfg.n_per, "ell": cfg.ell, "delta": delta},
    )
    failures = []
    if cfg.assert_results and not (0.2 <= q < 0.5):
        failures.append(f"q_hat = {q:.4f} outside [0.2, 0.5)")
    result = ExperimentResult("disconnected_mixture", [report], not failures, failures)
    if write:
        _write_outputs(cfg, result)
    return result


def run_energy_density(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Empirical edge agreement against the exact tree edge correlation across
    a beta grid, under both the unconditioned and conditioned measures, plus
    the finite-difference check of d(free energy)/d(beta)."""
    seeds = _sub_seeds(cfg.seed, 2 * len(cfg.beta_grid))
    reports = []
    failures = []
    fd_eps = 1e-4
    for i, beta in enumerate(cfg.beta_grid):
        p = IsingParams(cfg.k, beta, cfg.B)
        g = _build_graph(cfg, cfg.n_ladder[-1], seeds[2 * i])
        batch = _sample_for(cfg, g, p, seeds[2 * i + 1])
        ea, se = diag.edge_agreement(batch, g)
        cond = sample_conditioned_plus(batch)
        ea_c, se_c = diag.edge_agreement(cond, g)
        ec = edge_correlation(p)
        fd = (free_energy(IsingParams(cfg.k, beta + fd_eps))
              - free_energy(IsingParams(cfg.k, beta - fd_eps))) / (2 * fd_eps)
        identity_gap = abs(fd - (cfg.k / 2.0) * ec)
        reports.append(ConvergenceReport(
            label="energy_density", n=g.n, beta=beta, t=0, nsamples=len(batch),
            edge_agreement=ea, edge_agreement_stderr=se,
            extra={
                "edge_agreement_conditioned": ea_c,
                "edge_agreement_conditioned_stderr": se_c,
                "tree_edge_correlation": ec,
                "free_energy_fd_identity_gap": identity_gap,
            },
        ))
        if cfg.assert_results:
            if abs(ea - ec) > 2 * se:
                failures.append(
                    f"beta={beta}: unconditioned agreement {ea:.5f} vs tree {ec:.5f} "
                    f"beyond 2 stderr ({se:.2g})"
                )
            if abs(ea_c - ec) > 2 * max(se_c, 1e-12):
                failures.append(
                    f"beta={beta}: conditioned agreement {ea_c:.5f} vs tree {ec:.5f} "
                    f"beyond 2 stderr ({se_c:.2g})"
                )
            if abs(ea - ea_c) > 2 * max(se, se_c, 1e-12):
                failures.append(f"beta={beta}: conditioned vs unconditioned agreement differ")
            if abs(beta - critical_beta(cfg.k)) > 0.02 and identity_gap > 1e-6:
                failures.append(f"beta={beta}: free-energy derivative identity gap {identity_gap:.2g}")
    result = ExperimentResult("energy_density", reports, not failures, failures)
    if write:
        _write_outputs(cfg, result)
    return result


def run_spatial_concentration(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Variance of spatial averages of local functions under the conditioned
    measure down an n-ladder; the paper-level prediction is decay to zero."""
    p = IsingParams(cfg.k, cfg.beta, cfg.B)
    seeds = _sub_seeds(cfg.seed, 2 * len(cfg.n_ladder))
    reports = []
    var_center = []
    var_agree = []
    for i, n in enumerate(cfg.n_ladder):
        g = _build_graph(cfg, n, seeds[2 * i])
        batch = sample_conditioned_plus(_sample_for(cfg, g, p, seeds[2 * i + 1]))
        v_c = diag.local_average_variance(batch, g, "center_spin")
        v_a = diag.local_average_variance(batch, g, "ball_agreement")
        var_center.append(v_c)
        var_agree.append(v_a)
        reports.append(ConvergenceReport(
            label="spatial_concentration", n=g.n, beta=cfg.beta, t=1,
            nsamples=len(batch),
            extra={"var_center_spin": v_c, "var_ball_agreement": v_a},
        ))
    failures = []
    if cfg.assert_results:
        if not all(a > b for a, b in zip(var_center, var_center[1:])):
            failures.append(f"center-spin variance not strictly decreasing: {var_center}")
    result = ExperimentResult("spatial_concentration", reports, not failures, failures)
    if write:
        _write_outputs(cfg, result, extra={"var_center_spin": var_center,
                                           "var_ball_agreement": var_agree})
    return result


def run_sampler_validation(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Exact-enumeration validation of both samplers on the built-in graphs."""
    reports = []
    failures = []
    betas = cfg.beta_grid if cfg.beta_grid else [0.3, 0.7, 1.2]
    seeds = iter(_sub_seeds(cfg.seed, 4 * len(betas) + 4))
    for g, gname in ((k4(), "k4"), (petersen(), "petersen")):
        for beta in betas:
            p = IsingParams(3, beta)
            dist = exact_distribution(g, p)
            for algorithm in ("glauber", "wolff"):
                kwargs = {}
                if algorithm == "wolff":
                    # odd thinning: supercritical cluster flips alternate the
                    # global sign almost deterministically, so an odd stride
                    # keeps the recorded phase weights balanced
                    kwargs["thin"] = 9
                elif beta >= 1.0:
                    # single-site dynamics flips the global sign too rarely at
                    # low temperature; independent chains restore exact
                    # phase symmetry
                    kwargs["chains"] = 50_000
                batch = sample_unconditioned(g, p, cfg.nsamples, algorithm=algorithm,
                                             seed=next(seeds), **kwargs)
                emp = diag.empirical_state_distribution(batch)
                tv = diag.tv_distance(emp, dist.probs)
                reports.append(ConvergenceReport(
                    label=f"validate_{gname}_{algorithm}", n=g.n, beta=beta, t=0,
                    nsamples=len(batch),
                    extra={"tv_vs_exact": tv, "algorithm": algorithm, "graph": gname},
                ))
                if cfg.assert_results and tv >= cfg.tv_threshold:
                    failures.append(
                        f"{gname} {algorithm} beta={beta}: TV {tv:.4f} >= {cfg.tv_threshold}"
                    )
    result = ExperimentResult("sampler_validation", reports, not failures, failures)
    if write:
        _write_outputs(cfg, result)
    return result


EXPERIMENTS = {
    "mixture-convergence": run_mixture_convergence,
    "plus-convergence": run_plus_convergence,
    "disconnected-mixture": run_disconnected_mixture,
    "energy-density": run_energy_density,
    "spatial-concentration": run_spatial_concentration,
    "sampler-validation": run_sampler_validation,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    cfg.validate()
    return EXPERIMENTS[cfg.experiment](cfg, write=write)
