"""Post-hoc similarity analytics: section-pair cosine distances, Welch's
t-test (own incomplete-beta p-value), 2-component PCA, and plot/CSV export.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .graph import DyadGraph

from .features import Vocabulary, top_unigrams, tfidf_vector


def cosine_distance(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    """1 - cos(a, b); None (a skip signal) when either vector is all-zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return None
    return 1.0 - float(a @ b) / (na * nb)


@dataclass(frozen=True)
class SectionPairStat:
    title_a: str
    title_b: str
    relation: str
    co_occurrence_count: int
    mean_distance: float
    sd_distance: float


def _sample_sd(values: List[float]) -> float:
    if len(values) < 2:
        return 0.0
    arr = np.asarray(values)
    return float(np.sqrt(np.sum((arr - arr.mean()) ** 2) / (len(values) - 1)))


def section_pair_stats(graph: DyadGraph,
                       section_vectors: Mapping[Tuple[str, str], np.ndarray],
                       top_n: int = 1000,
                       pooled: bool = False
                       ) -> Tuple[List[SectionPairStat], int]:
    """Distance statistics for co-occurring section-title pairs.

    For every edge and every (section of u, section of v) combination, the
    unordered title pair collects one cosine-distance sample under the
    edge's relation.  Pairs are ranked by co-occurrence count (per relation
    class unless pooled) and the top_n kept.  Returns (stats, skipped)
    where skipped counts samples dropped for zero vectors.
    """
    by_entity: Dict[str, List[str]] = {}
    for (entity, title) in section_vectors:
        by_entity.setdefault(entity, []).append(title)
    for titles in by_entity.values():
        titles.sort()

    samples: Dict[Tuple[str, str, str], List[float]] = {}
    skipped = 0
    for edge in graph.edges:
        for tu in by_entity.get(edge.u, ()):
            vec_u = section_vectors[(edge.u, tu)]
            for tv in by_entity.get(edge.v, ()):
                dist = cosine_distance(vec_u, section_vectors[(edge.v, tv)])
                if dist is None:
                    skipped += 1
                    continue
                a, b = sorted((tu, tv))
                samples.setdefault((a, b, edge.label), []).append(dist)

    stats = [SectionPairStat(title_a=a, title_b=b, relation=rel,
                             co_occurrence_count=len(vals),
                             mean_distance=float(np.mean(vals)),
                             sd_distance=_sample_sd(vals))
             for (a, b, rel), vals in samples.items()]
    order = lambda s: (-s.co_occurrence_count, s.title_a, s.title_b)
    if pooled:
        stats.sort(key=lambda s: order(s) + (s.relation,))
        return stats[:top_n], skipped
    out: List[SectionPairStat] = []
    for rel in sorted({s.relation for s in stats}):
        group = sorted((s for s in stats if s.relation == rel), key=order)
        out.extend(group[:top_n])
    return out, skipped


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), accurate to ~1e-12."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T >= t) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise DataError("degrees of freedom must be positive")
    x = df / (df + t * t)
    tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def welch_t_test(samples_a: Sequence[float],
                 samples_b: Sequence[float]) -> Tuple[float, float]:
    """Welch's unequal-variance t and the two-sided p-value."""
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DataError("welch_t_test needs >= 2 samples per group")
    na, nb = a.size, b.size
    va = float(np.sum((a - a.mean()) ** 2) / (na - 1))
    vb = float(np.sum((b - b.mean()) ** 2) / (nb - 1))
    se2 = va / na + vb / nb
    diff = float(a.mean() - b.mean())
    if se2 == 0.0:
        if diff == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = 2.0 * student_t_sf(abs(t), df)
    return t, min(p, 1.0)


@dataclass(frozen=True)
class Projection2D:
    entity: object
    x: float
    y: float


def pca_top2(vectors: Sequence[np.ndarray],
             ids: Optional[Sequence] = None
             ) -> Tuple[List[Projection2D], Tuple[float, float]]:
    """Project onto the top-2 principal components.

    Mean-centered sample covariance, eigendecomposition, components ordered
    by descending variance; each component's largest-magnitude loading is
    made positive so the projection is sign-deterministic.
    """
    X = np.stack([np.asarray(v, dtype=np.float64) for v in vectors], axis=0)
    n = X.shape[0]
    if n < 3:
        raise DataError("pca_top2 needs at least 3 vectors")
    if ids is None:
        ids = list(range(n))
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    tol = max(eigvals[0], 0.0) * 1e-12
    rank = int(np.sum(eigvals > tol))
    if rank < 2:
        raise DataError(f"data rank {rank} < 2, cannot project")
    comps = eigvecs[:, :2].copy()
    for j in range(2):
        k = int(np.argmax(np.abs(comps[:, j])))
        if comps[k, j] < 0:
            comps[:, j] = -comps[:, j]
    proj = Xc @ comps
    out = [Projection2D(entity=e, x=float(proj[i, 0]), y=float(proj[i, 1]))
           for i, e in enumerate(ids)]
    return out, (float(eigvals[0]), float(eigvals[1]))


def export_plot_data(stats: Sequence[SectionPairStat],
                     k: int = 250) -> List[SectionPairStat]:
    """k lowest-mean-distance pairs per relation; ties lexicographic."""
    out: List[SectionPairStat] = []
    for rel in sorted({s.relation for s in stats}):
        group = sorted((s for s in stats if s.relation == rel),
                       key=lambda s: (s.mean_distance, s.title_a, s.title_b))
        out.extend(group[:k])
    return out


def write_section_pairs_csv(path, stats: Sequence[SectionPairStat]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["title_a", "title_b", "relation", "count",
                         "mean_distance", "sd_distance"])
        for s in stats:
            writer.writerow([s.title_a, s.title_b, s.relation,
                             s.co_occurrence_count,
                             f"{s.mean_distance:.9f}", f"{s.sd_distance:.9f}"])


def write_pca_csv(path, projections: Sequence[Projection2D]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "pc1", "pc2"])
        for p in projections:
            writer.writerow([p.entity, f"{p.x:.9f}", f"{p.y:.9f}"])


def write_top_unigrams_csv(path, docs: Mapping[str, Mapping[str, int]],
                           vocab: Vocabulary, k: int = 10) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc", "rank", "term", "weight"])
        index = vocab.index()
        for doc_id in sorted(docs):
            bag = docs[doc_id]
            vec = tfidf_vector(bag, vocab)
            for rank, term in enumerate(top_unigrams(bag, vocab, k), start=1):
                writer.writerow([doc_id, rank, term,
                                 f"{vec[index[term]]:.9f}"])
