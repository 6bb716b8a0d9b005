"""Backend selection and bit-level parity of the compiled kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from dyadnet._kernels import BACKEND, _fallback, adam_update, signed_scatter_add

try:
    from dyadnet._kernels import _core
except ImportError:  # pragma: no cover - fallback-only environment
    _core = None

needs_core = pytest.mark.skipif(_core is None,
                                reason="compiled extension not built")


def test_default_backend_is_extension_when_built():
    if _core is None:
        assert BACKEND == "fallback"
    elif os.environ.get("DYADNET_PURE_PYTHON"):
        assert BACKEND == "fallback"
    else:
        assert BACKEND == "extension"


def test_env_override_selects_fallback():
    env = dict(os.environ, DYADNET_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "import dyadnet; print(dyadnet.KERNEL_BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "fallback"


def _random_scatter_case(rng):
    n_out = int(rng.integers(1, 12))
    d = int(rng.integers(1, 9))
    n_src = int(rng.integers(1, 30))
    n = int(rng.integers(0, 60))
    x = np.ascontiguousarray(rng.normal(size=(n_src, d)))
    src = np.ascontiguousarray(rng.integers(0, n_src, size=n), dtype=np.intp)
    dst = np.ascontiguousarray(rng.integers(0, n_out, size=n), dtype=np.intp)
    w = np.ascontiguousarray(rng.choice([-1.0, 1.0, 0.37, 2.5], size=n))
    return n_out, d, x, src, dst, w


@needs_core
def test_scatter_add_backends_bitwise_identical():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n_out, d, x, src, dst, w = _random_scatter_case(rng)
        a = np.zeros((n_out, d))
        b = np.zeros((n_out, d))
        _core.signed_scatter_add(a, dst, src, w, x)
        _fallback.signed_scatter_add(b, dst, src, w, x)
        assert np.array_equal(a, b)


@needs_core
def test_adam_backends_bitwise_identical():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(1, 300))
        p = np.ascontiguousarray(rng.normal(size=n))
        p2 = p.copy()
        g = np.ascontiguousarray(rng.normal(size=n))
        m = np.ascontiguousarray(rng.normal(size=n) * 0.1)
        m2 = m.copy()
        v = np.ascontiguousarray(np.abs(rng.normal(size=n)) * 0.01)
        v2 = v.copy()
        t = int(rng.integers(1, 60))
        bc1, bc2 = 1.0 - 0.9 ** t, 1.0 - 0.999 ** t
        _core.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, bc1, bc2)
        _fallback.adam_update(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, bc1, bc2)
        assert np.array_equal(p, p2)
        assert np.array_equal(m, m2)
        assert np.array_equal(v, v2)


def test_scatter_add_dense_reference():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n_out, d, x, src, dst, w = _random_scatter_case(rng)
        out = np.zeros((n_out, d))
        signed_scatter_add(out, dst, src, w, x)
        want = np.zeros((n_out, d))
        for k in range(len(src)):
            want[dst[k]] += w[k] * x[src[k]]
        assert np.allclose(out, want, atol=1e-12)


def test_scatter_add_empty_index_is_noop():
    out = np.full((3, 2), 7.0)
    empty = np.zeros(0, dtype=np.intp)
    signed_scatter_add(out, empty, empty, np.zeros(0), np.zeros((0, 2)))
    assert np.array_equal(out, np.full((3, 2), 7.0))


def test_adam_matches_standard_recurrence():
    rng = np.random.default_rng(3)
    n = 40
    p = np.ascontiguousarray(rng.normal(size=n))
    m = np.zeros(n)
    v = np.zeros(n)
    p_ref, m_ref, v_ref = p.copy(), m.copy(), v.copy()
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    for t in range(1, 8):
        g = np.ascontiguousarray(rng.normal(size=n))
        adam_update(p, g, m, v, lr, b1, b2, eps, 1.0 - b1 ** t, 1.0 - b2 ** t)
        m_ref = b1 * m_ref + (1 - b1) * g
        v_ref = b2 * v_ref + (1 - b2) * g * g
        m_hat = m_ref / (1.0 - b1 ** t)
        v_hat = v_ref / (1.0 - b2 ** t)
        p_ref = p_ref - lr * m_hat / (np.sqrt(v_hat) + eps)
    assert np.allclose(p, p_ref, atol=1e-14)
    assert np.allclose(m, m_ref, atol=1e-14)
    assert np.allclose(v, v_ref, atol=1e-14)


def test_trained_loss_curve_identical_across_backends():
    script = (
        "import numpy as np\n"
        "from dyadnet.models import GraphTensors, ModelConfig\n"
        "from dyadnet.experiments import split_edges, train\n"
        "rng = np.random.default_rng(4)\n"
        "iu, iv = np.triu_indices(16, k=1)\n"
        "pick = np.sort(rng.choice(len(iu), size=30, replace=False))\n"
        "gt = GraphTensors.from_arrays(rng.normal(size=(16, 5)), iu[pick],\n"
        "    iv[pick], rng.integers(0, 2, 30).astype(float),\n"
        "    rng.normal(size=(30, 4)))\n"
        "cfg = ModelConfig('S', (5, 8), (4, 8), (8, 8), (8, 8), seed=1)\n"
        "_, rep = train(cfg, gt, split_edges(30, seed=2), max_epochs=3,\n"
        "               batch_size=8)\n"
        "print(repr(rep.train_loss_curve)); print(repr(rep.test_predictions))\n")
    runs = {}
    for name, env in (("ext", dict(os.environ)),
                      ("fb", dict(os.environ, DYADNET_PURE_PYTHON="1"))):
        env.pop("DYADNET_PURE_PYTHON", None) if name == "ext" else None
        out = subprocess.run([sys.executable, "-c", script],
                             capture_output=True, text=True, env=env,
                             check=True)
        runs[name] = out.stdout
    assert runs["ext"] == runs["fb"]
