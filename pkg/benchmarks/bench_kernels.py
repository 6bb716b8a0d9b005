"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot kernels behind training — the signed neighbor
scatter-add used by the message-passing layer and the fused Adam step —
on synthetic inputs of configurable size, and verifies that both
backends produce bit-identical results before timing them.

Usage:
    python benchmarks/bench_kernels.py [--nodes N] [--edges M] [--dim D]
                                       [--adam-size K] [--repeats R]
"""

from __future__ import annotations

import argparse
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from dyadnet._kernels import _fallback

try:
    from dyadnet._kernels import _core
except ImportError:
    _core = None


def _best_ms(fn: Callable[[], None], repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def bench_scatter(backend, n_nodes: int, n_edges: int, dim: int,
                  repeats: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    u = rng.integers(0, n_nodes, size=n_edges)
    v = (u + 1 + rng.integers(0, n_nodes - 1, size=n_edges)) % n_nodes
    src = np.concatenate([u, v]).astype(np.intp)
    dst = np.concatenate([v, u]).astype(np.intp)
    w = np.repeat(rng.choice([-1.0, 1.0], size=n_edges), 2)
    x = rng.normal(size=(n_nodes, dim))
    out = np.zeros((n_nodes, dim))

    def step() -> None:
        out.fill(0.0)
        backend.signed_scatter_add(out, dst, src, w, x)

    return _best_ms(step, repeats)


def bench_adam(backend, size: int, repeats: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    p = rng.normal(size=size)
    g = rng.normal(size=size)
    m = np.zeros(size)
    v = np.zeros(size)

    def step() -> None:
        backend.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)

    return _best_ms(step, repeats)


def verify_backends(n_nodes: int, n_edges: int, dim: int, size: int,
                    seed: int) -> None:
    """Assert the extension and the fallback agree bit for bit."""
    rng = np.random.default_rng(seed)
    u = rng.integers(0, n_nodes, size=n_edges)
    v = (u + 1 + rng.integers(0, n_nodes - 1, size=n_edges)) % n_nodes
    src = np.concatenate([u, v]).astype(np.intp)
    dst = np.concatenate([v, u]).astype(np.intp)
    w = np.repeat(rng.choice([-1.0, 1.0], size=n_edges), 2)
    x = rng.normal(size=(n_nodes, dim))
    out_a = np.zeros((n_nodes, dim))
    out_b = np.zeros((n_nodes, dim))
    _core.signed_scatter_add(out_a, dst, src, w, x)
    _fallback.signed_scatter_add(out_b, dst, src, w, x)
    assert np.array_equal(out_a, out_b), "scatter-add backends disagree"

    state_a = [rng.normal(size=size) for _ in range(2)] + \
              [np.abs(rng.normal(size=size)) for _ in range(2)]
    state_b = [arr.copy() for arr in state_a]
    g = rng.normal(size=size)
    _core.adam_update(state_a[0], g, state_a[2], state_a[3],
                      1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
    _fallback.adam_update(state_b[0], g, state_b[2], state_b[3],
                          1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
    for arr_a, arr_b in zip(state_a, state_b):
        assert np.array_equal(arr_a, arr_b), "adam backends disagree"


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=5000)
    parser.add_argument("--edges", type=int, default=50000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--adam-size", type=int, default=1_000_000)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends: List[Tuple[str, object]] = [("fallback", _fallback)]
    if _core is not None:
        backends.insert(0, ("extension", _core))
        verify_backends(200, 800, 16, 4096, args.seed)
        print("backends agree bit for bit on a 200-node check problem")
    else:
        print("compiled extension not available; timing the fallback only")

    rows = []
    scatter_label = (f"signed_scatter_add  nodes={args.nodes} "
                     f"edges={args.edges} dim={args.dim}")
    adam_label = f"adam_update         size={args.adam_size}"
    for name, backend in backends:
        ms = bench_scatter(backend, args.nodes, args.edges, args.dim,
                           args.repeats, args.seed)
        rows.append((scatter_label, name, ms))
    for name, backend in backends:
        ms = bench_adam(backend, args.adam_size, args.repeats, args.seed)
        rows.append((adam_label, name, ms))

    print()
    print(f"{'kernel':<50} {'backend':<10} {'best ms':>9}")
    base: dict = {}
    for label, name, ms in rows:
        line = f"{label:<50} {name:<10} {ms:>9.3f}"
        if name == "fallback" and label in base:
            line += f"   ({ms / base[label]:.1f}x slower)"
        else:
            base[label] = ms
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
