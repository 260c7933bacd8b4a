"""Command-line interface.

Subcommands: generate-graph, solve-tree, sample, analyze, experiment, validate.
Experiment runs are driven by a key = value config file and write a manifest,
a JSON report, and a CSV; the process exits 0 only when every configured
assertion passes.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from ._kernels import backend_name
from . import diagnostics as diag
from .diagnostics import ConvergenceReport, dump_json, reports_to_csv
from .experiments import (
    ConfigError,
    ExperimentConfig,
    load_config,
    run_experiment,
    run_sampler_validation,
)
from .graphs import (
    GraphError,
    generate_random_regular,
    k4,
    load_edgelist,
    petersen,
    save_edgelist,
)
from .sampling import (
    load_batch_csv,
    sample_conditioned_plus,
    sample_unconditioned,
    save_batch_csv,
    save_batch_npz,
)
from .tree import (
    IsingParams,
    critical_beta,
    edge_correlation,
    free_energy,
    mixture_marginal,
    plus_boundary_marginal,
    root_magnetization,
    solve_fixed_point,
)


def _graph_from_spec(spec: str, k: int, seed: int):
    if spec == "k4":
        return k4()
    if spec == "petersen":
        return petersen()
    if spec.startswith("random:"):
        return generate_random_regular(int(spec.split(":", 1)[1]), k, seed)
    return load_edgelist(spec)


def _cmd_generate_graph(args) -> int:
    g = generate_random_regular(args.n, args.k, args.seed)
    save_edgelist(g, args.out)
    print(f"wrote {args.out}: n={g.n} k={g.k} edges={g.num_edges} hash={g.hash_hex()}")
    return 0


def _cmd_solve_tree(args) -> int:
    p = IsingParams(args.k, args.beta)
    fp = solve_fixed_point(p)
    payload = {
        "k": args.k,
        "beta": args.beta,
        "critical_beta": critical_beta(args.k),
        "uniqueness_regime": p.uniqueness,
        "h": fp.h,
        "m": fp.m,
        "converged": fp.converged,
        "iterations": fp.iterations,
        "edge_correlation": edge_correlation(p),
        "root_magnetization": root_magnetization(p),
        "free_energy": free_energy(p),
    }
    if args.out:
        dump_json(payload, args.out)
        print(f"wrote {args.out}")
    else:
        for key, value in payload.items():
            print(f"{key} = {value}")
    return 0


def _cmd_sample(args) -> int:
    g = _graph_from_spec(args.graph, args.k, args.graph_seed)
    p = IsingParams(g.k, args.beta, args.B)
    batch = sample_unconditioned(
        g, p, args.nsamples, algorithm=args.algorithm,
        burn_in=args.burn_in, thin=args.thin, seed=args.seed,
    )
    if args.condition_positive:
        batch = sample_conditioned_plus(batch)
    if args.out.endswith(".npz"):
        save_batch_npz(batch, args.out)
    else:
        save_batch_csv(batch, args.out)
    print(f"wrote {args.out}: {len(batch)} samples of n={batch.n}")
    return 0


def _cmd_analyze(args) -> int:
    batch = load_batch_csv(args.batch)
    g = load_edgelist(args.graph)
    p = IsingParams(g.k, float(batch.meta["beta"]), float(batch.meta.get("B", 0.0)))
    ref = (plus_boundary_marginal(p, args.t) if args.boundary == "plus"
           else mixture_marginal(p, args.t))
    counts, mask = diag.ball_pattern_counts(batch, g, args.t)
    mode_a = diag.mode_A_from_counts(counts, mask, len(batch), g.n, ref.table())
    tvs, exceed = diag.mode_C_from_counts(counts, mask, len(batch), ref.table(), args.epsilon)
    ea, se = diag.edge_agreement(batch, g)
    delta = args.delta if args.delta is not None else root_magnetization(p) / 2.0
    census = diag.batch_census_mean(batch, g, args.ell, delta)
    report = ConvergenceReport(
        label="analyze", n=g.n, beta=p.beta, t=args.t, nsamples=len(batch),
        mode_A_tv=mode_a, mode_C_exceed_fraction=exceed, mode_C_epsilon=args.epsilon,
        mode_C_tv_per_vertex=tvs, edge_agreement=ea, edge_agreement_stderr=se,
        f_census_mean=census,
        anticoncentration_sup=diag.anticoncentration(batch, g),
        extra={"ell": args.ell, "delta": delta,
               "boundary": args.boundary,
               "tree_edge_correlation": edge_correlation(p)},
    )
    if batch.meta.get("conditioned"):
        report.q_hat = census
    dump_json(report.to_json_dict(), args.out)
    reports_to_csv([report], args.out.rsplit(".", 1)[0] + ".csv")
    print(f"wrote {args.out}: mode_A_tv={mode_a:.5f} edge_agreement={ea:.5f}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    result = run_experiment(cfg)
    print(f"experiment {result.name}: {'PASS' if result.passed else 'FAIL'}")
    for failure in result.failures:
        print(f"  assertion failed: {failure}")
    if result.out_dir:
        print(f"outputs in {result.out_dir}")
    return 0 if result.passed else 1


def _cmd_validate(args) -> int:
    cfg = ExperimentConfig()
    cfg.experiment = "sampler-validation"
    cfg.seed = args.seed
    cfg.beta_grid = [0.3, 0.7, 1.2]
    if args.quick:
        cfg.nsamples = 300_000
        cfg.tv_threshold = 0.03
    else:
        cfg.nsamples = 4_000_000
        cfg.tv_threshold = 0.01
    cfg.out_dir = args.out_dir
    result = run_sampler_validation(cfg)
    for rep in result.reports:
        print(f"{rep.extra['graph']:9s} {rep.extra['algorithm']:8s} beta={rep.beta:4.2f} "
              f"TV={rep.extra['tv_vs_exact']:.5f} "
              f"({'ok' if rep.extra['tv_vs_exact'] < cfg.tv_threshold else 'FAIL'})")
    print(f"sampler validation: {'PASS' if result.passed else 'FAIL'}")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isinglim",
        description="Ising measures on regular graphs: exact tree computations, "
                    "samplers, and convergence experiments",
    )
    parser.add_argument("--version", action="version",
                        version=f"isinglim {__version__} ({backend_name()} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate-graph", help="write a random regular graph edge list")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--k", type=int, default=3)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate_graph)

    p_tree = sub.add_parser("solve-tree", help="fixed point and exact tree quantities")
    p_tree.add_argument("--k", type=int, default=3)
    p_tree.add_argument("--beta", type=float, required=True)
    p_tree.add_argument("--out", default=None, help="JSON output path (default: stdout)")
    p_tree.set_defaults(func=_cmd_solve_tree)

    p_sample = sub.add_parser("sample", help="draw a thinned MCMC batch")
    p_sample.add_argument("--graph", required=True,
                          help="k4 | petersen | random:N | edge-list path")
    p_sample.add_argument("--k", type=int, default=3)
    p_sample.add_argument("--graph-seed", type=int, default=0)
    p_sample.add_argument("--beta", type=float, required=True)
    p_sample.add_argument("--B", type=float, default=0.0)
    p_sample.add_argument("--nsamples", type=int, default=10000)
    p_sample.add_argument("--algorithm", choices=["wolff", "glauber"], default="wolff")
    p_sample.add_argument("--burn-in", type=int, default=None)
    p_sample.add_argument("--thin", type=int, default=None)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--condition-positive", action="store_true",
                          help="flip to positive total magnetization, drop zeros")
    p_sample.add_argument("--out", required=True, help=".csv or .npz path")
    p_sample.set_defaults(func=_cmd_sample)

    p_an = sub.add_parser("analyze", help="convergence statistics for a saved batch")
    p_an.add_argument("--batch", required=True)
    p_an.add_argument("--graph", required=True, help="edge-list path")
    p_an.add_argument("--t", type=int, default=1)
    p_an.add_argument("--boundary", choices=["mixture", "plus"], default="mixture")
    p_an.add_argument("--ell", type=int, default=2)
    p_an.add_argument("--delta", type=float, default=None)
    p_an.add_argument("--epsilon", type=float, default=0.05)
    p_an.add_argument("--out", required=True, help="JSON output path")
    p_an.set_defaults(func=_cmd_analyze)

    p_exp = sub.add_parser("experiment", help="run a named experiment from a config file")
    p_exp.add_argument("config", help="key = value config file; see README")
    p_exp.add_argument("--out-dir", default=None)
    p_exp.set_defaults(func=_cmd_experiment)

    p_val = sub.add_parser("validate", help="exact-enumeration sampler validation")
    p_val.add_argument("--quick", action="store_true",
                       help="300k samples at TV < 0.03 instead of 4M at TV < 0.01")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out-dir", default="results")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
