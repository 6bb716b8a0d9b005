"""Planted-structure benchmark graphs.

Two controlled settings separate the two information channels:

- balance_benchmark: labels follow a two-faction structural-balance rule
  (plus exact-count label noise) while every node carries the same feature
  vector, so content carries no signal and topology carries nearly all.
- content_benchmark: labels follow the sign of the endpoint feature dot
  product (with a hard margin, noiseless) on a triangle-free graph, so
  content is sufficient while the signed neighborhood around any edge is
  uninformative about its label.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .errors import DataError
from .models import GraphTensors, ModelConfig


def _sample_pairs(rng: np.random.Generator, n_nodes: int,
                  n_edges: int) -> Tuple[np.ndarray, np.ndarray]:
    iu, iv = np.triu_indices(n_nodes, k=1)
    total = len(iu)
    if n_edges > total:
        raise DataError(f"cannot place {n_edges} edges on {n_nodes} nodes")
    chosen = rng.choice(total, size=n_edges, replace=False)
    chosen.sort()
    return iu[chosen], iv[chosen]


def balance_benchmark(seed: int = 0, n_nodes: int = 200,
                      faction_sizes: Tuple[int, int] = (160, 40),
                      n_edges: int = 4000, flip_rate: float = 0.05,
                      node_dim: int = 8, edge_dim: int = 8) -> GraphTensors:
    """Two unequal factions; ALLIES within, ENEMIES across, exact-count
    label flips; one shared random node vector; random edge vectors."""
    if sum(faction_sizes) != n_nodes:
        raise DataError("faction sizes must sum to the node count")
    rng = np.random.default_rng(seed)
    faction = np.zeros(n_nodes, dtype=np.int64)
    faction[faction_sizes[0]:] = 1
    u, v = _sample_pairs(rng, n_nodes, n_edges)
    y = (faction[u] == faction[v]).astype(np.float64)
    n_flips = int(round(flip_rate * n_edges))
    if n_flips:
        flip = rng.choice(n_edges, size=n_flips, replace=False)
        y[flip] = 1.0 - y[flip]
    shared = rng.normal(size=node_dim)
    X = np.tile(shared, (n_nodes, 1))
    Xe = rng.normal(size=(n_edges, edge_dim))
    return GraphTensors.from_arrays(X, u, v, y, Xe)


def content_benchmark(seed: int = 0, n_nodes: int = 450, node_dim: int = 32,
                      n_edges: int = 2000, ally_fraction: float = 0.8,
                      margin: float = 0.35, feature_scale: float = 3.0,
                      edge_dim: int = 8) -> GraphTensors:
    """Unit node vectors (scaled); edge label = sign of the endpoint dot
    product, restricted to pairs with |dot| >= margin; no label noise;
    all-zero edge vectors.

    Edges are sampled greedily so the graph stays triangle-free: adjacent
    edges never close a triangle, which removes the two-hop correlation
    between an edge's label and the signed structure around it (structural
    balance) that an ordinary random pair sample would plant.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_nodes, node_dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    dots = X @ X.T
    iu, iv = np.triu_indices(n_nodes, k=1)
    pair_dots = dots[iu, iv]
    n_ally = int(round(ally_fraction * n_edges))
    n_enemy = n_edges - n_ally
    pools = {
        1: np.flatnonzero(pair_dots >= margin),
        0: np.flatnonzero(pair_dots <= -margin),
    }
    need = {1: n_ally, 0: n_enemy}
    adjacency = [set() for _ in range(n_nodes)]
    chosen = []
    for label in (1, 0):
        pool = pools[label]
        rng.shuffle(pool)
        quota = need[label]
        for k in pool:
            if quota == 0:
                break
            a, b = int(iu[k]), int(iv[k])
            if adjacency[a] & adjacency[b]:
                continue
            adjacency[a].add(b)
            adjacency[b].add(a)
            chosen.append(k)
            quota -= 1
        if quota > 0:
            side = "ally" if label else "enemy"
            raise DataError(
                f"margin {margin} leaves too few triangle-free {side} "
                f"pairs (short {quota} of {need[label]})")
    chosen = np.array(sorted(chosen))
    u, v = iu[chosen], iv[chosen]
    y = (pair_dots[chosen] > 0).astype(np.float64)
    Xe = np.zeros((n_edges, edge_dim))
    return GraphTensors.from_arrays(X * feature_scale, u, v, y, Xe)


def benchmark_config(variant: str, node_dim: int = 8, edge_dim: int = 8,
                     hidden: int = 16, out_dim: int = 16,
                     gin_steps: int = 2, seed: int = 0) -> ModelConfig:
    """Small, fast dims for the planted benchmarks."""
    return ModelConfig(variant=variant,
                       node_encoder_dims=(node_dim, hidden),
                       edge_encoder_dims=(edge_dim, hidden),
                       classifier_dims=(hidden, out_dim),
                       gin_update_dims=(hidden, hidden),
                       gin_steps=gin_steps, seed=seed)
