"""Kernel backend tests: numba/numpy agreement and env-flag selection."""

import os
import subprocess
import sys

import numpy as np
import pytest

from graphtriage import kernels

from .oracles import seq_hybrid


def _random_problem(seed, n=40, dim=16):
    rng = np.random.RandomState(seed)

    def unit_rows(count):
        rows = rng.standard_normal((count, dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        return rows.astype(np.float32)

    text = unit_rows(n)
    mm = unit_rows(n)
    q = rng.standard_normal(2 * dim)
    q /= np.linalg.norm(q)
    q_text = q[:dim].copy()
    q_mm = q[dim:].copy()
    return text, mm, q_text, q_mm


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.4, 1.0])
def test_backends_agree(lam):
    text, mm, q_text, q_mm = _random_problem(0)
    jit = kernels.hybrid_scores(text, mm, q_text, q_mm, lam, use_numba=True)
    plain = kernels.hybrid_scores(text, mm, q_text, q_mm, lam, use_numba=False)
    np.testing.assert_allclose(jit, plain, rtol=1e-12, atol=1e-12)


def test_text_backends_agree():
    text, _, q_text, _ = _random_problem(1)
    jit = kernels.text_scores(text, q_text, use_numba=True)
    plain = kernels.text_scores(text, q_text, use_numba=False)
    np.testing.assert_allclose(jit, plain, rtol=1e-12, atol=1e-12)


def test_jit_path_matches_sequential_oracle_bitwise():
    # the jit loop accumulates sequentially in float64, so a naive python
    # loop over the same float32 inputs must reproduce it exactly
    text, mm, q_text, q_mm = _random_problem(2, n=25, dim=8)
    for lam in (0.0, 0.3, 0.7, 1.0):
        scores = kernels.hybrid_scores(text, mm, q_text, q_mm, lam,
                                       use_numba=True)
        for i in range(text.shape[0]):
            expected = seq_hybrid(q_text, q_mm, text[i], mm[i], lam)
            assert scores[i] == expected


def test_scores_clamped():
    vec = np.array([[1.0, 0.0]], dtype=np.float32)
    q = np.array([1.0, 0.0])
    for flag in (True, False):
        assert kernels.text_scores(vec, q, use_numba=flag)[0] <= 1.0


def test_env_flag_selects_numpy_path():
    code = ("import graphtriage.kernels as k; "
            "print(k.numba_requested(), k.USE_NUMBA)")
    env = dict(os.environ, GRAPHTRIAGE_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "False"]
    env = dict(os.environ, GRAPHTRIAGE_NO_NUMBA="")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "True"


def test_scalar_hybrid_consistent_with_kernels():
    # cross-module spot check: batched kernel scores equal per-pair scalar calls
    from graphtriage.vectors import HybridEncoding, hybrid_score

    class Node:
        def __init__(self, t, m):
            self.text_embedding = t
            self.mm_embedding = m

    text, mm, q_text, q_mm = _random_problem(3, n=10, dim=8)
    query = HybridEncoding(text_vec=q_text.astype(np.float32),
                           mm_vec=q_mm.astype(np.float32))
    scores = kernels.hybrid_scores(text, mm,
                                   query.text_vec.astype(np.float64),
                                   query.mm_vec.astype(np.float64), 0.4)
    for i in range(10):
        scalar = hybrid_score(query, Node(text[i], mm[i]), 0.4)
        assert scores[i] == pytest.approx(scalar, abs=1e-12)
