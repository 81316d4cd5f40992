"""Hot scoring kernels: hybrid similarity for every node in one pass.

Two interchangeable backends:

* numba ``@njit`` loops (default when numba imports cleanly), and
* a pure-numpy path, selected by setting ``GRAPHTRIAGE_NO_NUMBA=1``.

The numba path accumulates sequentially in float64 without fastmath, so its
results are bit-reproducible across platforms and bit-identical to a naive
Python loop over the same float32 inputs. The numpy path uses vectorized
reductions whose summation order differs, so the two backends agree only to
~1e-12 relative; golden fixtures are pinned to the default (numba) path.

``benchmarks/bench_kernels.py`` compares the two backends.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

_FALSY = {"", "0", "false", "no"}


def numba_requested() -> bool:
    """True unless the GRAPHTRIAGE_NO_NUMBA env flag disables the jit path."""
    return os.environ.get("GRAPHTRIAGE_NO_NUMBA", "").strip().lower() in _FALSY


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag tests
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = _HAVE_NUMBA and numba_requested()


@njit(cache=True)
def _hybrid_scores_loop(text_mat, mm_mat, q_text, q_mm, lam):
    n, d = text_mat.shape
    out = np.empty(n, dtype=np.float64)
    qt_norm = 0.0
    qm_norm = 0.0
    for k in range(d):
        qt_norm += q_text[k] * q_text[k]
        qm_norm += q_mm[k] * q_mm[k]
    qt_norm = np.sqrt(qt_norm)
    qm_norm = np.sqrt(qm_norm)
    for i in range(n):
        st = 0.0
        tn = 0.0
        sm = 0.0
        mn = 0.0
        for k in range(d):
            t = np.float64(text_mat[i, k])
            m = np.float64(mm_mat[i, k])
            st += t * q_text[k]
            tn += t * t
            sm += m * q_mm[k]
            mn += m * m
        st = st / (np.sqrt(tn) * qt_norm)
        sm = sm / (np.sqrt(mn) * qm_norm)
        if st > 1.0:
            st = 1.0
        elif st < -1.0:
            st = -1.0
        if sm > 1.0:
            sm = 1.0
        elif sm < -1.0:
            sm = -1.0
        if lam == 1.0:
            out[i] = st
        elif lam == 0.0:
            out[i] = sm
        else:
            out[i] = lam * (st - sm) + sm
    return out


@njit(cache=True)
def _text_scores_loop(text_mat, q_text):
    n, d = text_mat.shape
    out = np.empty(n, dtype=np.float64)
    q_norm = 0.0
    for k in range(d):
        q_norm += q_text[k] * q_text[k]
    q_norm = np.sqrt(q_norm)
    for i in range(n):
        st = 0.0
        tn = 0.0
        for k in range(d):
            t = np.float64(text_mat[i, k])
            st += t * q_text[k]
            tn += t * t
        st = st / (np.sqrt(tn) * q_norm)
        if st > 1.0:
            st = 1.0
        elif st < -1.0:
            st = -1.0
        out[i] = st
    return out


def _hybrid_scores_numpy(text_mat, mm_mat, q_text, q_mm, lam):
    t64 = text_mat.astype(np.float64)
    m64 = mm_mat.astype(np.float64)
    st = (t64 @ q_text) / (np.linalg.norm(t64, axis=1) * np.linalg.norm(q_text))
    sm = (m64 @ q_mm) / (np.linalg.norm(m64, axis=1) * np.linalg.norm(q_mm))
    np.clip(st, -1.0, 1.0, out=st)
    np.clip(sm, -1.0, 1.0, out=sm)
    if lam == 1.0:
        return st
    if lam == 0.0:
        return sm
    return lam * (st - sm) + sm


def _text_scores_numpy(text_mat, q_text):
    t64 = text_mat.astype(np.float64)
    st = (t64 @ q_text) / (np.linalg.norm(t64, axis=1) * np.linalg.norm(q_text))
    np.clip(st, -1.0, 1.0, out=st)
    return st


def hybrid_scores(text_mat: np.ndarray, mm_mat: np.ndarray, q_text: np.ndarray,
                  q_mm: np.ndarray, lam: float,
                  use_numba: Optional[bool] = None) -> np.ndarray:
    """Hybrid similarity of one query against every node row.

    text_mat/mm_mat are (n, d) float32 embedding matrices; q_text/q_mm are
    (d,) float64 query vectors. Returns (n,) float64 scores in [-1, 1].
    """
    backend = USE_NUMBA if use_numba is None else use_numba
    q_text = np.ascontiguousarray(q_text, dtype=np.float64)
    q_mm = np.ascontiguousarray(q_mm, dtype=np.float64)
    if backend and _HAVE_NUMBA:
        return _hybrid_scores_loop(text_mat, mm_mat, q_text, q_mm, float(lam))
    return _hybrid_scores_numpy(text_mat, mm_mat, q_text, q_mm, float(lam))


def text_scores(text_mat: np.ndarray, q_text: np.ndarray,
                use_numba: Optional[bool] = None) -> np.ndarray:
    """Text-only similarity of one query against every node row (unimodal fallback)."""
    backend = USE_NUMBA if use_numba is None else use_numba
    q_text = np.ascontiguousarray(q_text, dtype=np.float64)
    if backend and _HAVE_NUMBA:
        return _text_scores_loop(text_mat, q_text)
    return _text_scores_numpy(text_mat, q_text)


def warmup() -> None:
    """Force one-time jit compilation so timed paths do not pay it."""
    if not (USE_NUMBA and _HAVE_NUMBA):
        return
    t = np.ones((2, 3), dtype=np.float32)
    q = np.ones(3, dtype=np.float64)
    _hybrid_scores_loop(t, t, q, q, 0.5)
    _text_scores_loop(t, q)
