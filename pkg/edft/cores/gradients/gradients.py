# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Gradients of the free energy with respect to Psi and a diagonal eta, and their preconditioners."""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from ..common.base_statistics import record_duration, register_statistics
from ..common.exceptions import FlatOccupationError, InvalidMatrixError
from ..common.logger import logger
from ..common.utils import is_diagonal
from ..linalg.block_linalg import (
    diagonalizing_unitary,
    norm,
    ortho_qr,
    retraction_taylor_derivative,
    rotate_matrices,
    rotate_states,
    sf_norm,
)
from ..model.model import Evaluation, KohnShamModel, apply_overlap, evaluate
from ..smearing.smearing import divided_difference_matrix, f_prime

FLAT_OCCUPATION_FLOOR = 1e-30
ETA_PRECOND_CAP = 1e6


@dataclass
class GradientPair:
    """Riemannian Psi-gradient and eta-gradient at a point with diagonal eta."""

    g_psi: List[np.ndarray]
    g_eta: List[np.ndarray]
    residual: List[np.ndarray]
    sigma_matrices: List[np.ndarray]
    divided_differences: List[np.ndarray]
    eigenvalues: List[np.ndarray]
    mu: float
    d_mu: float
    fprime_sum: float
    sigma: float

    @property
    def c_shift(self) -> float:
        """Constant c with Sigma_ii = eta_ii + c at a stationary point."""
        return self.sigma * self.d_mu / self.fprime_sum

    @property
    def grad_psi_half_norm(self) -> float:
        return 0.5 * norm(self.g_psi)

    @property
    def grad_eta_sf_norm(self) -> float:
        return sf_norm(self.g_eta)

    @property
    def error_metric(self) -> float:
        """sqrt(||1/2 grad_Psi F||^2 + ||grad_eta F||_sF^2)."""
        return float(np.hypot(self.grad_psi_half_norm, self.grad_eta_sf_norm))


def _diagonal_eigs(eta: Sequence[np.ndarray]) -> List[np.ndarray]:
    eigs = []
    for k, eta_k in enumerate(eta):
        if not is_diagonal(eta_k):
            raise InvalidMatrixError(f"gradients need a diagonal eta; block {k} is not")
        eigs.append(np.real(np.diag(eta_k)))
    return eigs


def grad_psi(
    model: KohnShamModel,
    psi: Sequence[np.ndarray],
    evaluation: Evaluation,
    residual: Optional[Sequence[np.ndarray]] = None,
) -> List[np.ndarray]:
    """grad_Psi F = 2 w_k (H Psi_k - B Psi_k Sigma_k) F_k."""
    if residual is None:
        residual = residuals(model, psi, evaluation)
    return [2.0 * w * r @ f for w, r, f in zip(model.weights, residual, evaluation.occ.f_matrices)]


def residuals(model: KohnShamModel, psi: Sequence[np.ndarray], evaluation: Evaluation) -> List[np.ndarray]:
    """Unscaled residuals H Psi_k - B Psi_k Sigma_k."""
    return [
        hpsi - apply_overlap(model, k, psi_k) @ s
        for k, (psi_k, hpsi, s) in enumerate(zip(psi, evaluation.hpsi, evaluation.sigma))
    ]


def grad_eta(model: KohnShamModel, eta: Sequence[np.ndarray], evaluation: Evaluation):
    """grad_eta F for diagonal eta, with the chemical potential coupling.

    :return: (blocks, d_mu, sum of w f', divided difference matrices)
    """
    spec = model.smearing
    sigma = spec.sigma
    mu = evaluation.occ.mu
    eigs = _diagonal_eigs(eta)
    fprimes = [f_prime(spec, (e - mu) / sigma) for e in eigs]
    fprime_sum = float(sum(w * np.sum(fp) for w, fp in zip(model.weights, fprimes)))
    if abs(fprime_sum) < FLAT_OCCUPATION_FLOOR:
        raise FlatOccupationError("every state is far from mu; increase sigma or the orbital count")
    d_mu = float(
        sum(
            w * np.sum((np.real(np.diag(s)) - e) * fp) / sigma
            for w, s, e, fp in zip(model.weights, evaluation.sigma, eigs, fprimes)
        )
    )
    blocks, dds = [], []
    for w, s, e, fp in zip(model.weights, evaluation.sigma, eigs, fprimes):
        dd = divided_difference_matrix(spec, mu, e)
        g = w * s * dd
        diagonal = w * ((np.real(np.diag(s)) - e) * fp / sigma - fp * d_mu / fprime_sum)
        np.fill_diagonal(g, diagonal)
        blocks.append(0.5 * (g + g.conj().T))
        dds.append(dd)
    return blocks, d_mu, fprime_sum, dds


@register_statistics(names=["gradients"])
def gradients(model: KohnShamModel, psi: Sequence[np.ndarray], eta: Sequence[np.ndarray], evaluation: Evaluation):
    """Both gradients at (Psi, eta) from an existing evaluation."""
    with record_duration("gradients"):
        res = residuals(model, psi, evaluation)
        g_psi = grad_psi(model, psi, evaluation, res)
        g_eta, d_mu, fprime_sum, dds = grad_eta(model, eta, evaluation)
    return GradientPair(
        g_psi=g_psi,
        g_eta=g_eta,
        residual=res,
        sigma_matrices=list(evaluation.sigma),
        divided_differences=dds,
        eigenvalues=_diagonal_eigs(eta),
        mu=evaluation.occ.mu,
        d_mu=d_mu,
        fprime_sum=fprime_sum,
        sigma=model.smearing.sigma,
    )


def psi_multiplier(x: np.ndarray) -> np.ndarray:
    """Kinetic preconditioner 1 / (1 + x + sqrt(1 + (x - 1)^2)) with x = 1/2 |k+G|^2."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + x + np.sqrt(1.0 + (x - 1.0) ** 2))


def precond_psi(model: KohnShamModel, residual: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Apply the kinetic preconditioner to the unscaled residuals H Psi - B Psi Sigma."""
    return [psi_multiplier(basis.kinetic)[:, np.newaxis] * r for basis, r in zip(model.bases, residual)]


def eta_precond_floor(model: KohnShamModel) -> float:
    return 1.0 / (ETA_PRECOND_CAP * model.smearing.sigma)


def clamped_entries(model: KohnShamModel, grads: GradientPair) -> int:
    """Number of divided differences below the eta preconditioner floor."""
    floor = eta_precond_floor(model)
    return sum(int(np.count_nonzero(np.abs(dd) < floor)) for dd in grads.divided_differences)


def precond_eta(model: KohnShamModel, grads: GradientPair, blocks: Optional[Sequence[np.ndarray]] = None):
    """(M A)_ij = A_ij / (w_k |d_ij|); maps grad_eta F to c I + eta - Sigma.

    Divided differences below the floor have underflowed. On the gradient itself
    those entries take the closed form (c I + eta - Sigma)_ij, so states far from
    mu keep following Sigma; any other block is divided by the floor there.
    """
    closed_form = blocks is None
    blocks = grads.g_eta if closed_form else blocks
    floor = eta_precond_floor(model)
    result = []
    for w, a, dd, s, e in zip(
        model.weights, blocks, grads.divided_differences, grads.sigma_matrices, grads.eigenvalues
    ):
        magnitude = np.abs(dd)
        block = a / (w * np.maximum(magnitude, floor))
        small = magnitude < floor
        if closed_form and np.any(small):
            block = np.where(small, np.diag(e + grads.c_shift) - s, block)
        result.append(block)
    clamped = clamped_entries(model, grads)
    if clamped:
        logger.debug(f"eta preconditioner: {clamped} divided differences below {floor:.3e}")
    return result


class LinePoint(NamedTuple):
    value: float
    d_t_psi: float
    d_t_eta: float
    evaluation: Evaluation
    grads: GradientPair
    psi: List[np.ndarray]
    eta: List[np.ndarray]
    unitaries: List[np.ndarray]

    @property
    def failed(self) -> bool:
        """True for a trial whose occupations could not be evaluated."""
        return self.evaluation is None

    @classmethod
    def failure(cls) -> "LinePoint":
        return cls(math.inf, math.nan, math.nan, None, None, None, None, None)


@register_statistics(names=["line_partials"])
def line_partials(
    model: KohnShamModel,
    psi: Sequence[np.ndarray],
    eta: Sequence[np.ndarray],
    d_psi: Sequence[np.ndarray],
    d_eta: Sequence[np.ndarray],
    t_psi: float,
    t_eta: float,
    mu_guess: Optional[float] = None,
) -> LinePoint:
    """Value and partial derivatives of F(ortho(Psi, D_Psi, t_Psi), eta + t_eta D_eta).

    The trial eta is diagonalized and the retracted states rotated with it, so the
    returned point carries a diagonal eta and can be reused as the next iterate.
    """
    with record_duration("line_partials"):
        overlap = model.overlap_apply
        moved = ortho_qr(psi, d_psi, t_psi, overlap)
        derivative = retraction_taylor_derivative(psi, d_psi, t_psi, overlap)
        shifted = [e + t_eta * d for e, d in zip(eta, d_eta)]
        pairs = [diagonalizing_unitary(e) for e in shifted]
        unitaries = [u for _, u in pairs]
        eta_diag = [np.diag(values).astype(complex) for values, _ in pairs]
        psi_rot = rotate_states(moved, unitaries)
        evaluation = evaluate(model, psi_rot, eta_diag, mu_guess=mu_guess)
        grads = gradients(model, psi_rot, eta_diag, evaluation)
        derivative_rot = rotate_states(derivative, unitaries)
        d_t_psi = 0.0
        for w, hx, dx, occ_k in zip(model.weights, evaluation.hpsi, derivative_rot, evaluation.occ.occupations):
            d_t_psi += 2.0 * w * float(np.real(np.sum(occ_k * np.einsum("gi,gi->i", hx.conj(), dx))))
        d_eta_rot = rotate_matrices(d_eta, unitaries)
        d_t_eta = float(sum(np.real(np.vdot(g, d)) for g, d in zip(grads.g_eta, d_eta_rot)))
    return LinePoint(
        value=evaluation.energies.total,
        d_t_psi=d_t_psi,
        d_t_eta=d_t_eta,
        evaluation=evaluation,
        grads=grads,
        psi=psi_rot,
        eta=eta_diag,
        unitaries=unitaries,
    )


def ks_stationarity_residual(
    model: KohnShamModel, psi: Sequence[np.ndarray], eta: Sequence[np.ndarray], evaluation: Evaluation
) -> float:
    """max_k max_i ||H psi_ki - (eps_ki + c) B psi_ki|| with c from the chemical potential coupling."""
    grads = gradients(model, psi, eta, evaluation)
    c = grads.c_shift
    worst = 0.0
    for k, (psi_k, hpsi, eta_k) in enumerate(zip(psi, evaluation.hpsi, eta)):
        shifted = np.real(np.diag(eta_k)) + c
        r = hpsi - apply_overlap(model, k, psi_k) * shifted[np.newaxis, :]
        worst = max(worst, float(np.max(np.linalg.norm(r, axis=0))))
    return worst
