"""Reverse-mode autodiff over float64 numpy arrays, plus MLP, Adam, and
checkpoint I/O.

The op set is deliberately small: exactly what the edge classifiers need.
Every op records a backward closure that accumulates into its parents'
gradients; `backward` walks the tape in reverse topological order.
"""

from __future__ import annotations

import struct
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .errors import DataError, NumericalError

__all__ = [
    "Tensor", "Linear", "MlpParams", "AdamState",
    "matmul", "add", "sub", "add_bias", "relu", "sigmoid", "scale",
    "const_add", "smul", "mul_cols", "row_dot", "gather_rows", "slice_rows",
    "tile_rows", "tile_rows_masked", "scatter_add", "bce_mean", "backward",
    "init_mlp", "mlp_forward", "mlp_tensors", "glorot_uniform", "zero_grads",
    "gin_layer", "dot_score", "adam_step", "save_checkpoint",
    "load_checkpoint",
]


class Tensor:
    """A float64 array with an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 parents: Tuple["Tensor", ...] = (),
                 backward_fn: Optional[Callable[[np.ndarray], None]] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"


def _out(data, parents, backward_fn) -> Tensor:
    if any(p.requires_grad or p._parents for p in parents):
        return Tensor(data, parents=parents, backward_fn=backward_fn)
    return Tensor(data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bw(g):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    return _out(out_data, (a, b), bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bw(g):
        a.accumulate(g)
        b.accumulate(g)

    return _out(out_data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bw(g):
        a.accumulate(g)
        b.accumulate(-g)

    return _out(out_data, (a, b), bw)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x (n, d) plus a bias row b (d,)."""
    out_data = x.data + b.data

    def bw(g):
        x.accumulate(g)
        b.accumulate(g.sum(axis=0))

    return _out(out_data, (x, b), bw)


def relu(x: Tensor) -> Tensor:
    out_data = np.maximum(x.data, 0.0)

    def bw(g):
        x.accumulate(np.where(x.data > 0.0, g, 0.0))

    return _out(out_data, (x,), bw)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)

    def bw(g):
        x.accumulate(g * s * (1.0 - s))

    return _out(s, (x,), bw)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python-float constant."""
    out_data = x.data * c

    def bw(g):
        x.accumulate(g * c)

    return _out(out_data, (x,), bw)


def const_add(x: Tensor, c: float) -> Tensor:
    out_data = x.data + c

    def bw(g):
        x.accumulate(g)

    return _out(out_data, (x,), bw)


def smul(x: Tensor, s: Tensor) -> Tensor:
    """Multiply by a one-element tensor (learnable scalar)."""
    out_data = x.data * s.data.reshape(())

    def bw(g):
        x.accumulate(g * s.data.reshape(()))
        s.accumulate(np.asarray([(g * x.data).sum()]))

    return _out(out_data, (x, s), bw)


def mul_cols(x: Tensor, c: np.ndarray) -> Tensor:
    """Multiply rows by a constant column vector c (n, 1)."""
    out_data = x.data * c

    def bw(g):
        x.accumulate(g * c)

    return _out(out_data, (x,), bw)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise dot product of two (n, d) tensors, result (n, 1)."""
    out_data = np.einsum("ij,ij->i", a.data, b.data)[:, None]

    def bw(g):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    return _out(out_data, (a, b), bw)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    out_data = x.data[idx]

    def bw(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, idx, g)

    return _out(out_data, (x,), bw)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    out_data = x.data[start:stop]

    def bw(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        x.grad[start:stop] += g

    return _out(out_data, (x,), bw)


def tile_rows(x: Tensor, reps: int) -> Tensor:
    """Stack reps copies of x (n, d) into (reps * n, d)."""
    out_data = np.tile(x.data, (reps, 1))
    n = x.data.shape[0]

    def bw(g):
        x.accumulate(g.reshape(reps, n, -1).sum(axis=0))

    return _out(out_data, (x,), bw)


def tile_rows_masked(x: Tensor, reps: int, zero_rows: np.ndarray) -> Tensor:
    """tile_rows followed by zeroing the given output rows (one fused op)."""
    zero_rows = np.asarray(zero_rows, dtype=np.intp)
    out_data = np.tile(x.data, (reps, 1))
    out_data[zero_rows] = 0.0
    n = x.data.shape[0]

    def bw(g):
        gz = g.copy()
        gz[zero_rows] = 0.0
        x.accumulate(gz.reshape(reps, n, -1).sum(axis=0))

    return _out(out_data, (x,), bw)


def scatter_add(x: Tensor, src: np.ndarray, dst: np.ndarray, w: np.ndarray,
                n_out: int) -> Tensor:
    """out[dst[k]] += w[k] * x[src[k]]; the GIN aggregation kernel.

    Backward is the same kernel with src and dst swapped.
    """
    src = np.ascontiguousarray(src, dtype=np.intp)
    dst = np.ascontiguousarray(dst, dtype=np.intp)
    w = np.ascontiguousarray(w, dtype=np.float64)
    out_data = np.zeros((n_out, x.data.shape[1]))
    _kernels.signed_scatter_add(out_data, dst, src, w, np.ascontiguousarray(x.data))

    def bw(g):
        gx = np.zeros_like(x.data)
        _kernels.signed_scatter_add(gx, src, dst, w, np.ascontiguousarray(g))
        x.accumulate(gx)

    return _out(out_data, (x,), bw)


_BCE_CLAMP = 1e-12


def bce_mean(p: Tensor, y: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of probabilities p against 0/1 targets y.

    Probabilities are clamped to [1e-12, 1 - 1e-12]; clamped entries get
    zero gradient.
    """
    y = np.asarray(y, dtype=np.float64).reshape(p.data.shape)
    ph = np.clip(p.data, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    n = ph.size
    loss = float(np.mean(-y * np.log(ph) - (1.0 - y) * np.log1p(-ph)))
    inside = (p.data > _BCE_CLAMP) & (p.data < 1.0 - _BCE_CLAMP)

    def bw(g):
        gp = np.where(inside, (ph - y) / (ph * (1.0 - ph)), 0.0) / n
        p.accumulate(g * gp)

    return _out(np.asarray(loss), (p,), bw)


def backward(root: Tensor) -> None:
    """Propagate gradients from a scalar root through the tape."""
    topo: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class Linear:
    """One affine layer: weight (fan_in, fan_out) and bias (fan_out,)."""

    __slots__ = ("W", "b")

    def __init__(self, W: Tensor, b: Tensor):
        self.W = W
        self.b = b


MlpParams = List[Linear]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(rng: np.random.Generator, dims: Sequence[int]) -> MlpParams:
    """Glorot-uniform weights, zero biases, one Linear per consecutive dim pair."""
    layers: MlpParams = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        W = Tensor(glorot_uniform(rng, fan_in, fan_out), requires_grad=True)
        b = Tensor(np.zeros(fan_out), requires_grad=True)
        layers.append(Linear(W, b))
    return layers


def mlp_forward(layers: MlpParams, x: Tensor) -> Tensor:
    """ReLU between layers, linear output layer."""
    h = x
    for i, layer in enumerate(layers):
        if h.data.shape[-1] != layer.W.data.shape[0]:
            raise DataError(
                f"layer {i}: input dim {h.data.shape[-1]} != "
                f"{layer.W.data.shape[0]}")
        h = add_bias(matmul(h, layer.W), layer.b)
        if i < len(layers) - 1:
            h = relu(h)
    return h


def gin_layer(h: Tensor, src: np.ndarray, dst: np.ndarray, w: np.ndarray,
              update: MlpParams, eps: float = 0.0) -> Tensor:
    """One signed GIN step: h'_v = MLP((1+eps)·h_v + Σ_{u∈N(v)} w_uv·h_u).

    (src, dst, w) list each undirected edge in both orientations with
    w ∈ {+1, -1}; an empty list degenerates to MLP((1+eps)·h).
    """
    pre = scale(h, 1.0 + eps)
    if len(src):
        pre = add(pre, scatter_add(h, src, dst, w, h.data.shape[0]))
    return mlp_forward(update, pre)


def dot_score(a, b) -> float:
    """sigma(a · b) for two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DataError(f"dot_score length mismatch: {a.shape} vs {b.shape}")
    return float(_sigmoid(np.asarray(a @ b)))


def mlp_tensors(layers: MlpParams) -> List[Tensor]:
    out: List[Tensor] = []
    for layer in layers:
        out.append(layer.W)
        out.append(layer.b)
    return out


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


class AdamState:
    """First/second moment buffers and the step counter for a parameter list."""

    def __init__(self, params: Sequence[Tensor]):
        self.step = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(state: AdamState, params: Sequence[Tensor],
              grads: Optional[Sequence[np.ndarray]] = None, *,
              lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, in place. Errors on non-finite grads."""
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                 for p in params]
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient in adam_step")
        _kernels.adam_update(p.data.reshape(-1), g.reshape(-1),
                             m.reshape(-1), v.reshape(-1),
                             lr, beta1, beta2, eps, bc1, bc2)
    return state


_CKPT_MAGIC = b"DYN1"
_CKPT_VERSION = 1


def save_checkpoint(path, named_arrays: Dict[str, np.ndarray]) -> None:
    """Binary checkpoint: magic, version, count, then per-tensor records.

    Each record is name length, utf-8 name, rank, dims, little-endian
    float64 payload.
    """
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(named_arrays)))
        for name, arr in named_arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.astype("<f8").tobytes(order="C"))


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError("truncated checkpoint")
    return buf


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _CKPT_MAGIC:
            raise DataError("bad checkpoint magic")
        version, count = struct.unpack("<II", _read_exact(fh, 8))
        if version != _CKPT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        out: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = tuple(struct.unpack("<Q", _read_exact(fh, 8))[0]
                          for _ in range(rank))
            n_items = int(np.prod(shape)) if shape else 1
            payload = _read_exact(fh, 8 * n_items)
            out[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
        return out
