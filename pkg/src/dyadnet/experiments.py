"""Transductive experiment harness: splits, training with early stopping,
binary F1, repeated runs, permutation significance tests, and grid search.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, NumericalError
from .models import GraphTensors, ModelConfig, ModelParams, forward_batch
from .tensor import AdamState, adam_step, backward, bce_mean, zero_grads

DEFAULT_FRACTIONS = (0.6, 0.3, 0.1)
MAX_EPOCHS = 30
PATIENCE = 3
BATCH_SIZE = 512


@dataclass(frozen=True)
class SplitSpec:
    train: Tuple[int, ...]
    validation: Tuple[int, ...]
    test: Tuple[int, ...]
    fractions: Tuple[float, float, float]
    seed: int

    @property
    def n_edges(self) -> int:
        return len(self.train) + len(self.validation) + len(self.test)

    def train_mask(self, n_edges: int) -> np.ndarray:
        mask = np.zeros(n_edges, dtype=bool)
        mask[list(self.train)] = True
        return mask

    def to_dict(self) -> Dict:
        return {"train": list(self.train), "validation": list(self.validation),
                "test": list(self.test), "fractions": list(self.fractions),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Dict) -> "SplitSpec":
        return cls(train=tuple(d["train"]),
                   validation=tuple(d["validation"]),
                   test=tuple(d["test"]),
                   fractions=tuple(d["fractions"]), seed=d["seed"])


def split_sizes(n_edges: int,
                fractions: Tuple[float, float, float]) -> Tuple[int, int, int]:
    """Floor each fraction, then hand out the remainder one edge at a time
    in train, validation, test order."""
    sizes = [int(np.floor(f * n_edges)) for f in fractions]
    short = n_edges - sum(sizes)
    for i in range(short):
        sizes[i % 3] += 1
    return sizes[0], sizes[1], sizes[2]


def split_edges(n_edges: int,
                fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS,
                seed: int = 0) -> SplitSpec:
    """Seeded uniform shuffle, then a contiguous three-way partition."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError("split fractions must sum to 1")
    if n_edges < 10:
        raise DataError(f"cannot split {n_edges} edges into three parts "
                        "honoring the fractions")
    n_train, n_val, _ = split_sizes(n_edges, fractions)
    order = np.random.default_rng(seed).permutation(n_edges)
    return SplitSpec(
        train=tuple(int(i) for i in order[:n_train]),
        validation=tuple(int(i) for i in order[n_train:n_train + n_val]),
        test=tuple(int(i) for i in order[n_train + n_val:]),
        fractions=tuple(fractions), seed=seed)


def f1_score(predictions: Sequence, gold: Sequence, positive=1.0) -> float:
    """Binary F1 for the positive class; 0 when precision + recall = 0."""
    pred = np.asarray(predictions)
    gt = np.asarray(gold)
    if pred.shape != gt.shape or pred.size == 0:
        raise DataError("predictions and gold must be equal-length, non-empty")
    pp = pred == positive
    gp = gt == positive
    tp = float(np.sum(pp & gp))
    fp = float(np.sum(pp & ~gp))
    fn = float(np.sum(~pp & gp))
    denom = 2.0 * tp + fp + fn
    if denom == 0.0:
        return 0.0
    return 2.0 * tp / denom


@dataclass
class TrainReport:
    variant: str
    seed: int
    train_loss_curve: List[float]
    val_f1_curve: List[float]
    stopped_epoch: int
    best_epoch: int
    test_f1: float
    wall_time_s: float
    test_predictions: List[int]
    test_gold: List[int]

    def to_dict(self) -> Dict:
        return {"variant": self.variant, "seed": self.seed,
                "train_loss_curve": self.train_loss_curve,
                "val_f1_curve": self.val_f1_curve,
                "stopped_epoch": self.stopped_epoch,
                "best_epoch": self.best_epoch,
                "test_f1": self.test_f1,
                "wall_time_s": self.wall_time_s,
                "test_predictions": self.test_predictions,
                "test_gold": self.test_gold}


def predict_edges(params: ModelParams, gt: GraphTensors,
                  eids: Sequence[int], label_visible: np.ndarray,
                  batch_size: int = BATCH_SIZE) -> np.ndarray:
    """Hard 0/1 predictions, batched; 1 = ALLIES at probability >= 0.5."""
    eids = np.asarray(eids, dtype=np.intp)
    out = np.empty(len(eids), dtype=np.float64)
    for lo in range(0, len(eids), batch_size):
        chunk = eids[lo:lo + batch_size]
        p = forward_batch(params, gt, chunk, label_visible)
        out[lo:lo + len(chunk)] = (p.data[:, 0] >= 0.5).astype(np.float64)
    return out


def _majority_report(config: ModelConfig, gt: GraphTensors,
                     split: SplitSpec, t0: float) -> Tuple[None, TrainReport]:
    test_ids = np.asarray(split.test, dtype=np.intp)
    preds = np.ones(len(test_ids))
    gold = gt.y[test_ids]
    report = TrainReport(
        variant="MAJ", seed=config.seed, train_loss_curve=[],
        val_f1_curve=[], stopped_epoch=0, best_epoch=0,
        test_f1=f1_score(preds, gold), wall_time_s=time.perf_counter() - t0,
        test_predictions=[int(x) for x in preds],
        test_gold=[int(x) for x in gold])
    return None, report


def simulate_early_stop(val_curve: Sequence[float],
                        patience: int = PATIENCE) -> Tuple[int, int]:
    """Replay the stopping rule on a validation-F1 trace.

    Returns ``(stopped_epoch, best_epoch)``, both 1-based, exactly as
    train() would report them for the same trace: stop after `patience`
    consecutive epochs without strict improvement, keep the best epoch.
    """
    if not val_curve:
        raise DataError("empty validation curve")
    best = -np.inf
    best_epoch = 0
    bad = 0
    epoch = 0
    for epoch, f1 in enumerate(val_curve, start=1):
        if f1 > best:
            best = f1
            best_epoch = epoch
            bad = 0
        else:
            bad += 1
            if bad >= patience:
                break
    return epoch, best_epoch


def train(config: ModelConfig, gt: GraphTensors, split: SplitSpec,
          max_epochs: int = MAX_EPOCHS, patience: int = PATIENCE,
          batch_size: int = BATCH_SIZE,
          shuffle_seed: Optional[int] = None,
          restore_best: bool = True
          ) -> Tuple[Optional[ModelParams], TrainReport]:
    """Train one variant on one split.

    Signed propagation sees training-edge labels only; validation labels
    feed the early-stopping metric and nothing else.  Stops when validation
    F1 fails to improve (strictly) for `patience` consecutive epochs, then
    restores the best epoch's parameters.

    With ``restore_best=False`` the final epoch's weights are kept instead;
    combined with ``patience >= max_epochs`` this makes the learned weights
    a function of the training fold alone, which the leakage tests rely on.
    """
    t0 = time.perf_counter()
    if config.variant == "MAJ":
        return _majority_report(config, gt, split, t0)
    params = ModelParams(config)
    tensors = params.tensors()
    adam = AdamState(tensors)
    label_visible = split.train_mask(gt.n_edges)
    train_ids = np.asarray(split.train, dtype=np.intp)
    val_ids = np.asarray(split.validation, dtype=np.intp)
    test_ids = np.asarray(split.test, dtype=np.intp)
    rng = np.random.default_rng(config.seed + 1 if shuffle_seed is None
                                else shuffle_seed)

    loss_curve: List[float] = []
    val_curve: List[float] = []
    best_f1 = -np.inf
    best_epoch = 0
    best_arrays = params.copy_arrays()
    bad_epochs = 0
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(train_ids))
        total = 0.0
        for lo in range(0, len(train_ids), batch_size):
            batch = train_ids[order[lo:lo + batch_size]]
            p = forward_batch(params, gt, batch, label_visible)
            loss = bce_mean(p, gt.y[batch])
            if not np.isfinite(loss.data):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} ({config.variant})")
            zero_grads(tensors)
            backward(loss)
            adam_step(adam, tensors)
            total += float(loss.data) * len(batch)
        loss_curve.append(total / len(train_ids))
        val_f1 = f1_score(predict_edges(params, gt, val_ids, label_visible,
                                        batch_size), gt.y[val_ids])
        val_curve.append(val_f1)
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_arrays = params.copy_arrays()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= patience:
                break
    if restore_best:
        params.load_arrays(best_arrays)

    preds = predict_edges(params, gt, test_ids, label_visible, batch_size)
    gold = gt.y[test_ids]
    report = TrainReport(
        variant=config.variant, seed=config.seed,
        train_loss_curve=loss_curve, val_f1_curve=val_curve,
        stopped_epoch=epoch, best_epoch=best_epoch,
        test_f1=f1_score(preds, gold),
        wall_time_s=time.perf_counter() - t0,
        test_predictions=[int(x) for x in preds],
        test_gold=[int(x) for x in gold])
    return params, report


@dataclass
class AggregateResult:
    variant: str
    f1_scores: List[float]
    mean: float
    sd: float
    reports: List[TrainReport]

    def to_dict(self) -> Dict:
        return {"variant": self.variant, "f1_scores": self.f1_scores,
                "mean": self.mean, "sd": self.sd,
                "reports": [r.to_dict() for r in self.reports]}


def sample_sd(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    return float(np.sqrt(np.sum((arr - arr.mean()) ** 2) / (arr.size - 1)))


def run_repeated(config: ModelConfig, gt: GraphTensors, n_runs: int = 10,
                 fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS,
                 seed_base: int = 0, max_epochs: int = MAX_EPOCHS,
                 patience: int = PATIENCE,
                 batch_size: int = BATCH_SIZE) -> AggregateResult:
    """Repeat train/eval with run-indexed seeds; each run re-splits.

    Run i uses seed_base + i for both the split and parameter init, so
    different variants executed under the same seed_base see identical
    splits run-for-run (and share component initializations).
    """
    if n_runs < 2:
        raise DataError("run_repeated needs n_runs >= 2")
    reports: List[TrainReport] = []
    for i in range(n_runs):
        run_seed = seed_base + i
        split = split_edges(gt.n_edges, fractions, seed=run_seed)
        run_config = dataclasses.replace(config, seed=run_seed)
        _, report = train(run_config, gt, split, max_epochs=max_epochs,
                          patience=patience, batch_size=batch_size)
        reports.append(report)
    scores = [r.test_f1 for r in reports]
    return AggregateResult(variant=config.variant, f1_scores=scores,
                           mean=float(np.mean(scores)), sd=sample_sd(scores),
                           reports=reports)


def majority_f1_closed_form(positive_rate: float) -> float:
    """Binary F1 of a constant-positive predictor: 2p / (1 + p)."""
    return 2.0 * positive_rate / (1.0 + positive_rate)


def _f1_batch(pred: np.ndarray, gold: np.ndarray) -> np.ndarray:
    """Row-wise binary F1 for stacked 0/1 prediction matrices."""
    gp = gold[None, :] == 1.0
    pp = pred == 1.0
    tp = np.sum(pp & gp, axis=1, dtype=np.float64)
    fp = np.sum(pp & ~gp, axis=1, dtype=np.float64)
    fn = np.sum(~pp & gp, axis=1, dtype=np.float64)
    denom = 2.0 * tp + fp + fn
    out = np.zeros(len(pred))
    nz = denom > 0
    out[nz] = 2.0 * tp[nz] / denom[nz]
    return out


def permutation_test(preds_a: Sequence, preds_b: Sequence, gold: Sequence,
                     n_resamples: int = 10000, seed: int = 0,
                     exhaustive: bool = False) -> float:
    """Approximate-randomization p-value for |F1(a) - F1(b)|.

    Each resample swaps the two systems' predictions independently per test
    edge with probability 1/2.  Sampled mode returns the add-one-smoothed
    estimate (1 + hits) / (1 + n_resamples); exhaustive mode enumerates all
    2^n swap patterns and returns the exact hits / 2^n.
    """
    a = np.asarray(preds_a, dtype=np.float64)
    b = np.asarray(preds_b, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    if not (a.shape == b.shape == y.shape) or a.ndim != 1 or a.size == 0:
        raise DataError("prediction vectors must be aligned and non-empty")
    n = a.size
    observed = abs(f1_score(a, y) - f1_score(b, y))
    if exhaustive:
        if n > 20:
            raise DataError("exhaustive mode supports at most 20 edges")
        patterns = np.arange(2 ** n, dtype=np.uint32)
        bits = ((patterns[:, None] >> np.arange(n)) & 1).astype(bool)
        swapped_a = np.where(bits, b[None, :], a[None, :])
        swapped_b = np.where(bits, a[None, :], b[None, :])
        stats = np.abs(_f1_batch(swapped_a, y) - _f1_batch(swapped_b, y))
        return float(np.sum(stats >= observed)) / float(2 ** n)
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, min(n_resamples, 4_000_000 // max(n, 1)))
    done = 0
    while done < n_resamples:
        r = min(chunk, n_resamples - done)
        bits = rng.random((r, n)) < 0.5
        swapped_a = np.where(bits, b[None, :], a[None, :])
        swapped_b = np.where(bits, a[None, :], b[None, :])
        stats = np.abs(_f1_batch(swapped_a, y) - _f1_batch(swapped_b, y))
        hits += int(np.sum(stats >= observed))
        done += r
    return (1.0 + hits) / (1.0 + n_resamples)


def parameter_count(config: ModelConfig) -> int:
    if config.variant == "MAJ":
        return 0
    mask = config.mask
    total = 0

    def mlp_size(dims: Tuple[int, ...]) -> int:
        return sum(di * do + do for di, do in zip(dims[:-1], dims[1:]))

    if mask.needs_node_encoder:
        total += mlp_size(config.node_encoder_dims)
    if mask.needs_edge_encoder:
        total += mlp_size(config.edge_encoder_dims)
    total += config.gin_steps * mlp_size(config.update_dims)
    total += mlp_size(config.classifier_dims)
    return total


def grid_search(grid: Sequence[ModelConfig], gt: GraphTensors,
                n_runs: int = 3, seed_base: int = 0,
                fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS,
                max_epochs: int = MAX_EPOCHS,
                batch_size: int = BATCH_SIZE) -> Tuple[ModelConfig, List[Dict]]:
    """Pick the config with the best mean validation F1 over seeded runs.

    Ties break toward fewer parameters, then lexicographic dim tuples.
    """
    if not grid:
        raise DataError("empty grid")
    rows: List[Dict] = []
    scored = []
    for gi, cand in enumerate(grid):
        vals = []
        for i in range(n_runs):
            run_seed = seed_base + i
            split = split_edges(gt.n_edges, fractions, seed=run_seed)
            run_config = dataclasses.replace(cand, seed=run_seed)
            _, report = train(run_config, gt, split, max_epochs=max_epochs,
                              batch_size=batch_size)
            vals.append(max(report.val_f1_curve) if report.val_f1_curve
                        else report.test_f1)
        mean_val = float(np.mean(vals))
        key = (cand.node_encoder_dims, cand.edge_encoder_dims,
               cand.classifier_dims, cand.gin_update_dims)
        scored.append((-mean_val, parameter_count(cand), key, gi))
        rows.append({"config_index": gi, "mean_val_f1": mean_val,
                     "val_f1_runs": vals,
                     "parameter_count": parameter_count(cand)})
    scored.sort()
    return grid[scored[0][3]], rows


def default_grid(template: ModelConfig,
                 widths: Sequence[int] = (32, 64, 128)) -> List[ModelConfig]:
    """Grid over the shared embedding width and the classifier output width.

    The two-slot aggregation forces node-encoder, edge-encoder, and
    classifier input widths to agree, so they vary together.
    """
    out: List[ModelConfig] = []
    node_in = template.node_encoder_dims[0] if template.node_encoder_dims else 0
    edge_in = template.edge_encoder_dims[0] if template.edge_encoder_dims else 0
    for d in widths:
        for out_d in widths:
            out.append(dataclasses.replace(
                template,
                node_encoder_dims=(node_in, d) if node_in else (),
                edge_encoder_dims=(edge_in, d) if edge_in else (),
                classifier_dims=(d, out_d),
                gin_update_dims=(d, d)))
    return out


def write_table_csv(path, aggregates: Sequence[AggregateResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "f1_mean", "f1_sd"])
        for agg in aggregates:
            writer.writerow([agg.variant, f"{agg.mean:.6f}", f"{agg.sd:.6f}"])
