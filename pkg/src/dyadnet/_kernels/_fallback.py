"""Pure-numpy implementations of the compiled kernels.

Both backends accumulate in the same element order, so results are
bit-identical between them.
"""

from __future__ import annotations

import numpy as np


def signed_scatter_add(out, dst, src, w, x):
    """out[dst[k], :] += w[k] * x[src[k], :] for every k, in k order."""
    n_rows = out.shape[0]
    for j in range(out.shape[1]):
        out[:, j] += np.bincount(dst, weights=w * x[src, j], minlength=n_rows)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """One fused Adam step on flat arrays, in place."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
