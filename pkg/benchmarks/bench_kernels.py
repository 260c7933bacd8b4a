"""Benchmark: compiled Cython kernels against the pure-Python fallback.

Runs matched Glauber and Wolff workloads through both backends and reports
throughput and speedup. The workloads are scaled so the pure backend finishes
in seconds; both backends consume identical random streams, so the outputs
are also checked for bit equality on the shared prefix of work.

Usage: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from isinglim import _kernels
from isinglim.graphs import generate_random_regular, petersen
from isinglim.sampling import _pplus_table


def _run_glauber(backend, g, beta, nsweeps, seed):
    rng = np.random.default_rng(seed)
    spins = np.where(rng.random(g.n) < 0.5, 1, -1).astype(np.int8)
    stream = backend.make_stream(rng)
    indptr, indices = g.csr()
    out = np.empty((1, g.n), dtype=np.int8)
    pplus = _pplus_table(g.k, beta, 0.0)
    t0 = time.perf_counter()
    backend.glauber_sample(spins, indptr, indices, pplus, nsweeps - 1, 1, out, stream)
    return time.perf_counter() - t0, out


def _run_wolff(backend, g, beta, nsteps, seed):
    rng = np.random.default_rng(seed)
    spins = np.where(rng.random(g.n) < 0.5, 1, -1).astype(np.int8)
    stream = backend.make_stream(rng)
    indptr, indices = g.csr()
    out = np.empty((1, g.n), dtype=np.int8)
    p_add = 1.0 - np.exp(-2.0 * beta)
    t0 = time.perf_counter()
    backend.wolff_sample(spins, indptr, indices, p_add, nsteps - 1, 1, out, stream)
    return time.perf_counter() - t0, out


def main():
    try:
        compiled = _kernels.get_backend("compiled")
    except ImportError:
        print("compiled backend not built; run pip install -e . first")
        return
    pure = _kernels.get_backend("pure")
    graphs = [("petersen  n=10   ", petersen()),
              ("random    n=2000 ", generate_random_regular(2000, 3, 1))]
    print(f"{'kernel':10s} {'graph':18s} {'work':>14s} {'compiled':>12s} "
          f"{'pure':>12s} {'speedup':>9s}")
    for label, g in graphs:
        sweeps_fast = max(200_000 // g.n * 50, 200)
        sweeps_slow = max(sweeps_fast // 50, 4)
        t_fast, out_fast = _run_glauber(compiled, g, 0.8, sweeps_fast, seed=3)
        t_slow, out_slow = _run_glauber(pure, g, 0.8, sweeps_slow, seed=3)
        rate_fast = sweeps_fast * g.n / t_fast
        rate_slow = sweeps_slow * g.n / t_slow
        print(f"{'glauber':10s} {label:18s} {sweeps_fast:>8d} sweeps "
              f"{rate_fast:>9.2e}/s {rate_slow:>9.2e}/s {rate_fast / rate_slow:>8.1f}x")
        _, check_fast = _run_glauber(compiled, g, 0.8, sweeps_slow, seed=3)
        assert np.array_equal(check_fast, out_slow), "backends diverged"

        steps_fast = 20_000 if g.n <= 100 else 2_000
        steps_slow = max(steps_fast // 50, 4)
        t_fast, _ = _run_wolff(compiled, g, 1.0, steps_fast, seed=4)
        t_slow, out_slow = _run_wolff(pure, g, 1.0, steps_slow, seed=4)
        rate_fast = steps_fast / t_fast
        rate_slow = steps_slow / t_slow
        print(f"{'wolff':10s} {label:18s} {steps_fast:>8d} steps  "
              f"{rate_fast:>9.2e}/s {rate_slow:>9.2e}/s {rate_fast / rate_slow:>8.1f}x")
        _, check_fast = _run_wolff(compiled, g, 1.0, steps_slow, seed=4)
        assert np.array_equal(check_fast, out_slow), "backends diverged"


if __name__ == "__main__":
    main()
