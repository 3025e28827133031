# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

from typing import Optional

import numpy as np
from scipy.stats import unitary_group


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary matrix."""
    if n == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(n, random_state=rng)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_complex(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate every column so its largest-magnitude component is real and positive.

    Ties in magnitude resolve to the lowest row index.
    """
    vectors = np.array(vectors, dtype=complex)
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[rows, np.arange(vectors.shape[1])]
    phases = np.ones_like(pivots)
    nonzero = np.abs(pivots) > 0
    phases[nonzero] = np.abs(pivots[nonzero]) / pivots[nonzero]
    return vectors * phases[np.newaxis, :]


def is_diagonal(a: np.ndarray, tol: float = 0.0) -> bool:
    off = a - np.diag(np.diag(a))
    return bool(np.max(np.abs(off), initial=0.0) <= tol)
