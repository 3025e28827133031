# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Block inner products, shifted Frobenius norms, tangent projections and the QR retraction.

A block state is a list with one (N_G(k), N) coefficient array per k-point.
A block matrix is a list with one N x N array per k-point. ``overlap_apply``
maps (k index, coefficient block) to B times that block; None means B = I.
"""

from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg

from ..common.exceptions import CholeskyError, InvalidMatrixError, NotOrthonormalError, ShapeMismatchError
from ..common.logger import logger
from ..common.utils import fix_phase, is_diagonal

BlockStates = List[np.ndarray]
BlockMatrix = List[np.ndarray]
OverlapApply = Optional[Callable[[int, np.ndarray], np.ndarray]]

CHOLESKY_JITTER = 1e-15


def _apply_b(overlap_apply: OverlapApply, k: int, block: np.ndarray) -> np.ndarray:
    return block if overlap_apply is None else overlap_apply(k, block)


def _check_pairs(left: Sequence[np.ndarray], right: Sequence[np.ndarray]):
    if len(left) != len(right):
        raise ShapeMismatchError(f"{len(left)} blocks against {len(right)} blocks")
    for k, (a, b) in enumerate(zip(left, right)):
        if a.shape[0] != b.shape[0]:
            raise ShapeMismatchError(f"k-point {k}: basis sizes {a.shape[0]} and {b.shape[0]} differ")


def gram(psi: BlockStates, phi: BlockStates) -> BlockMatrix:
    """<Psi* Phi> per k-point."""
    _check_pairs(psi, phi)
    return [p.conj().T @ f for p, f in zip(psi, phi)]


def overlap_gram(psi: BlockStates, phi: BlockStates, overlap_apply: OverlapApply = None) -> BlockMatrix:
    """<Psi* B Phi> per k-point."""
    return gram(psi, [_apply_b(overlap_apply, k, f) for k, f in enumerate(phi)])


def inner(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> complex:
    """sum_k tr(A_k^* B_k) for block states or block matrices."""
    _check_pairs(a, b)
    return complex(sum(np.vdot(x, y) for x, y in zip(a, b)))


def norm(a: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.vdot(x, x).real for x in a)))


def inf_norm(a: Sequence[np.ndarray]) -> float:
    """max_k ||A_k||_F."""
    return float(max(np.linalg.norm(x) for x in a))


def sf_shift(a: BlockMatrix) -> float:
    """c_A = sum_k tr A_k / (n N), the minimizer of ||cI - A||_F."""
    n = len(a)
    size = a[0].shape[0]
    return float(np.real(sum(np.trace(x) for x in a)) / (n * size))


def sf_norm(a: BlockMatrix) -> float:
    c = sf_shift(a)
    return float(np.sqrt(sum(np.linalg.norm(c * np.eye(x.shape[0]) - x) ** 2 for x in a)))


def sf_inf_norm(a: BlockMatrix) -> float:
    """min_k ||c_A I - A_k||_F with the shared shift c_A."""
    c = sf_shift(a)
    return float(min(np.linalg.norm(c * np.eye(x.shape[0]) - x) for x in a))


def scale(a: Sequence[np.ndarray], factor) -> List[np.ndarray]:
    return [factor * x for x in a]


def axpy(alpha, x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> List[np.ndarray]:
    """alpha x + y blockwise."""
    return [alpha * u + v for u, v in zip(x, y)]


def orthonormality_error(psi: BlockStates, overlap_apply: OverlapApply = None) -> float:
    """max_k ||<Psi_k* B Psi_k> - I||_F."""
    return float(
        max(np.linalg.norm(s - np.eye(s.shape[0])) for s in overlap_gram(psi, psi, overlap_apply))
    )


def require_orthonormal(psi: BlockStates, overlap_apply: OverlapApply = None, tol: float = 1e-10):
    error = orthonormality_error(psi, overlap_apply)
    if error > tol:
        raise NotOrthonormalError(f"||<Psi* B Psi> - I||_F = {error:.3e} exceeds {tol:.1e}")


def b_orthonormalize(psi: BlockStates, overlap_apply: OverlapApply = None) -> BlockStates:
    """Cholesky B-orthonormalization of every block."""
    result = []
    for k, block in enumerate(psi):
        s = block.conj().T @ _apply_b(overlap_apply, k, block)
        lower = _cholesky(0.5 * (s + s.conj().T))
        result.append(scipy.linalg.solve_triangular(lower.conj(), block.T, lower=True).T)
    return result


def project_tangent(
    psi: BlockStates, phi: BlockStates, alpha: float = 0.0, overlap_apply: OverlapApply = None, check: bool = False
) -> BlockStates:
    """P_alpha(Phi) = Phi - B Psi <Psi* Phi> + alpha B Psi (X - X*), X = <Psi* Phi>."""
    if check:
        require_orthonormal(psi, overlap_apply)
    result = []
    for k, (p, f) in enumerate(zip(psi, phi)):
        bp = _apply_b(overlap_apply, k, p)
        x = p.conj().T @ f
        result.append(f - bp @ x + alpha * bp @ (x - x.conj().T))
    return result


def project_tangent_adjoint(
    psi: BlockStates, phi: BlockStates, alpha: float = 0.0, overlap_apply: OverlapApply = None, check: bool = False
) -> BlockStates:
    """P*_alpha(Phi) = Phi - Psi <Psi* B Phi> + alpha Psi (<Psi* B Phi> - <Phi* B Psi>)."""
    if check:
        require_orthonormal(psi, overlap_apply)
    result = []
    for k, (p, f) in enumerate(zip(psi, phi)):
        x = p.conj().T @ _apply_b(overlap_apply, k, f)
        result.append(f - p @ x + alpha * p @ (x - x.conj().T))
    return result


def _cholesky(matrix: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(matrix, lower=True)
    except np.linalg.LinAlgError:
        logger.warning(f"Cholesky failed, retrying with diagonal jitter {CHOLESKY_JITTER:.0e}")
    try:
        return scipy.linalg.cholesky(matrix + CHOLESKY_JITTER * np.eye(matrix.shape[0]), lower=True)
    except np.linalg.LinAlgError as error:
        raise CholeskyError(f"Cholesky factorization failed: {error}") from error


def ortho_qr(psi: BlockStates, d: BlockStates, t: float, overlap_apply: OverlapApply = None) -> BlockStates:
    """QR retraction (Psi + t D) L^{-*} with L L* = I + t^2 <D* B D>."""
    _check_pairs(psi, d)
    if t == 0.0:
        return [p.copy() for p in psi]
    result = []
    for k, (p, dk) in enumerate(zip(psi, d)):
        s = dk.conj().T @ _apply_b(overlap_apply, k, dk)
        lower = _cholesky(np.eye(s.shape[0]) + t * t * 0.5 * (s + s.conj().T))
        y = p + t * dk
        result.append(scipy.linalg.solve_triangular(lower.conj(), y.T, lower=True).T)
    return result


def _lower_half(s: np.ndarray) -> np.ndarray:
    """Lower-triangular Phi(S) with Phi(S) + Phi(S)* = S for Hermitian S."""
    return np.tril(s, -1) + 0.5 * np.diag(np.diag(s))


def retraction_taylor_derivative(
    psi: BlockStates, d: BlockStates, t: float, overlap_apply: OverlapApply = None
) -> BlockStates:
    """Third order approximation of d/dt ortho_qr(Psi, D, t)."""
    _check_pairs(psi, d)
    result = []
    for k, (p, dk) in enumerate(zip(psi, d)):
        s = dk.conj().T @ _apply_b(overlap_apply, k, dk)
        phi_h = _lower_half(0.5 * (s + s.conj().T)).conj().T
        result.append(dk - 2.0 * t * p @ phi_h - 3.0 * t * t * dk @ phi_h)
    return result


class Rotation(NamedTuple):
    eta: BlockMatrix
    psi: BlockStates
    d_psi: Optional[BlockStates]
    d_eta: Optional[BlockMatrix]
    unitaries: BlockMatrix


def diagonalizing_unitary(eta_k: np.ndarray):
    """Ascending eigenvalues and phase-fixed eigenvectors; permutations when eta_k is diagonal."""
    eta_k = np.asarray(eta_k)
    if np.linalg.norm(eta_k - eta_k.conj().T) > 1e-10:
        raise InvalidMatrixError("eta block is not Hermitian")
    if is_diagonal(eta_k):
        values = np.real(np.diag(eta_k))
        order = np.argsort(values, kind="stable")
        return values[order], np.eye(eta_k.shape[0], dtype=complex)[:, order]
    values, vectors = np.linalg.eigh(0.5 * (eta_k + eta_k.conj().T))
    return values, fix_phase(vectors)


def rotate_states(blocks: BlockStates, unitaries: BlockMatrix) -> BlockStates:
    return [b @ u for b, u in zip(blocks, unitaries)]


def rotate_matrices(blocks: BlockMatrix, unitaries: BlockMatrix) -> BlockMatrix:
    rotated = [u.conj().T @ b @ u for b, u in zip(blocks, unitaries)]
    return [0.5 * (r + r.conj().T) for r in rotated]


def diagonalize_and_rotate(
    eta: BlockMatrix,
    psi: BlockStates,
    d_psi: Optional[BlockStates] = None,
    d_eta: Optional[BlockMatrix] = None,
) -> Rotation:
    """Diagonalize every eta block as P* eta P and rotate states and directions with the same P."""
    pairs = [diagonalizing_unitary(e) for e in eta]
    unitaries = [u for _, u in pairs]
    eta_diag = [np.diag(values).astype(complex) for values, _ in pairs]
    return Rotation(
        eta=eta_diag,
        psi=rotate_states(psi, unitaries),
        d_psi=None if d_psi is None else rotate_states(d_psi, unitaries),
        d_eta=None if d_eta is None else rotate_matrices(d_eta, unitaries),
        unitaries=unitaries,
    )
