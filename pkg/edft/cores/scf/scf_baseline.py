# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Self-consistent field baseline: eigensolver, density mixing and the density residual loop."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, lobpcg

from ..common.base_statistics import record_duration, register_statistics
from ..common.constants import ExitCode, MixingKind
from ..common.exceptions import EigensolverError, FlatOccupationError
from ..common.logger import logger
from ..common.utils import make_rng
from ..gradients.gradients import GradientPair, gradients, psi_multiplier
from ..lattice.lattice_basis import grid_integral
from ..linalg.block_linalg import b_orthonormalize
from ..model.model import (
    Evaluation,
    KohnShamModel,
    Potential,
    apply_hamiltonian,
    apply_overlap,
    density,
    effective_potential,
    evaluate,
    initial_density,
    kohn_sham_matrix,
    overlap_matrix,
)
from ..proto.config_protocol import ScfConfig
from ..proto.records import IterationRecord
from ..smearing.smearing import occupation_state
from ..telemetry.edft_telemetry import edft_telemetry

LOBPCG_MAXITER = 400


def _eigen_residuals(model: KohnShamModel, potential: Potential, k: int, vectors: np.ndarray, values: np.ndarray):
    hv = apply_hamiltonian(model, potential, k, vectors)
    bv = apply_overlap(model, k, vectors)
    return np.linalg.norm(hv - bv * values[np.newaxis, :], axis=0)


def _dense_pairs(model: KohnShamModel, potential: Potential, k: int, n_pairs: int):
    h = kohn_sham_matrix(model, potential, k)
    if model.has_overlap:
        b = overlap_matrix(model, k)
        return scipy.linalg.eigh(h, 0.5 * (b + b.conj().T), subset_by_index=[0, n_pairs - 1])
    return scipy.linalg.eigh(h, subset_by_index=[0, n_pairs - 1])


def _iterative_pairs(model: KohnShamModel, potential: Potential, k: int, n_pairs: int, tol: float, seed: int):
    basis = model.bases[k]
    size = basis.size
    shape = (size, size)

    def matmat_h(block):
        return apply_hamiltonian(model, potential, k, np.asarray(block, dtype=complex).reshape(size, -1))

    def matmat_b(block):
        return apply_overlap(model, k, np.asarray(block, dtype=complex).reshape(size, -1))

    multiplier = psi_multiplier(basis.kinetic)[:, np.newaxis]
    operator_h = LinearOperator(shape, matvec=matmat_h, matmat=matmat_h, dtype=complex)
    operator_b = LinearOperator(shape, matvec=matmat_b, matmat=matmat_b, dtype=complex) if model.has_overlap else None
    operator_m = LinearOperator(
        shape,
        matvec=lambda x: multiplier * np.asarray(x).reshape(size, -1),
        matmat=lambda x: multiplier * np.asarray(x),
        dtype=complex,
    )
    rng = make_rng(seed + k)
    start = multiplier * (rng.standard_normal((size, n_pairs)) + 1j * rng.standard_normal((size, n_pairs)))
    _, vectors = lobpcg(
        operator_h, start, B=operator_b, M=operator_m, tol=tol, maxiter=LOBPCG_MAXITER, largest=False
    )
    vectors = b_orthonormalize([vectors], None if operator_b is None else (lambda _, b: matmat_b(b)))[0]
    reduced = vectors.conj().T @ matmat_h(vectors)
    values, rotation = np.linalg.eigh(0.5 * (reduced + reduced.conj().T))
    return values, vectors @ rotation


@register_statistics(names=["eigensolve"])
def solve_eigenpairs(
    model: KohnShamModel, potential: Potential, n_pairs: int, config: ScfConfig, seed: int = 0
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Lowest n_pairs solutions of H phi = eps B phi at every k-point.

    Bases up to ``config.dense_limit`` plane waves are solved densely, larger ones with LOBPCG.

    :return: (B-orthonormal orbital blocks, ascending eigenvalues) per k-point.
    """
    orbitals, eigenvalues = [], []
    with record_duration("eigensolve"):
        for k, basis in enumerate(model.bases):
            if n_pairs > basis.size:
                raise EigensolverError(f"k-point {k}: {n_pairs} pairs requested from {basis.size} plane waves")
            if basis.size <= config.dense_limit:
                values, vectors = _dense_pairs(model, potential, k, n_pairs)
            else:
                values, vectors = _iterative_pairs(model, potential, k, n_pairs, config.eig_tol, seed)
            residuals = _eigen_residuals(model, potential, k, vectors, values)
            worst = float(residuals.max())
            if worst > config.eig_tol * max(1.0, float(np.abs(values).max())):
                raise EigensolverError(
                    f"k-point {k}: eigenpair residual {worst:.3e} above {config.eig_tol:.1e}", residuals.tolist()
                )
            orbitals.append(np.asarray(vectors, dtype=complex))
            eigenvalues.append(np.asarray(values, dtype=float))
    return orbitals, eigenvalues


def mix_density(
    history: Sequence[Tuple[np.ndarray, np.ndarray]],
    config: ScfConfig,
    n_electrons: Optional[float] = None,
    volume: Optional[float] = None,
) -> np.ndarray:
    """Next input density from the (rho_in, rho_out) history, newest last.

    Linear mixing moves a fraction ``factor`` towards rho_out. Broyden mixing is the
    limited memory type II update on the residual F = rho_out - rho_in over the last
    ``history`` differences, starting with a linear step.
    """
    if not history:
        raise ValueError("mixing needs at least one (rho_in, rho_out) pair")
    beta = config.factor
    rho_in, rho_out = history[-1]
    residual = rho_out - rho_in
    mixed = rho_in + beta * residual
    if config.mixing == MixingKind.BROYDEN and len(history) > 1:
        recent = list(history)[-(config.history + 1):]
        d_rho = np.stack([(b[0] - a[0]).ravel() for a, b in zip(recent[:-1], recent[1:])], axis=1)
        d_res = np.stack([((b[1] - b[0]) - (a[1] - a[0])).ravel() for a, b in zip(recent[:-1], recent[1:])], axis=1)
        gamma, *_ = np.linalg.lstsq(d_res, residual.ravel(), rcond=None)
        mixed = mixed - ((d_rho + beta * d_res) @ gamma).reshape(rho_in.shape)
    if n_electrons is not None and volume is not None:
        total = grid_integral(mixed, volume)
        if total > 0:
            mixed = mixed * (n_electrons / total)
    return mixed


@dataclass
class ScfResult:
    psi: List[np.ndarray]
    eta: List[np.ndarray]
    evaluation: Evaluation
    grads: Optional[GradientPair]
    converged: bool
    iterations: int
    records: List[IterationRecord] = field(default_factory=list)
    exit_code: ExitCode = ExitCode.OK

    @property
    def energies(self):
        return self.evaluation.energies

    @property
    def density_residual(self) -> Optional[float]:
        return self.records[-1].density_residual if self.records else None


@edft_telemetry
def run_scf(
    model: KohnShamModel, config: ScfConfig, rho0: Optional[np.ndarray] = None, seed: int = 0
) -> ScfResult:
    """SCF loop on the density with eta = Diag(eps) reported at exit.

    :param rho0: starting density; the superposition of atomic charges when omitted.
    """
    rho_in = initial_density(model) if rho0 is None else np.array(rho0, dtype=float)
    history: List[Tuple[np.ndarray, np.ndarray]] = []
    records: List[IterationRecord] = []
    mu = None
    converged = False
    n = 0
    psi, eta, evaluation, grads = None, None, None, None
    logger.info(f"scf: mixing={config.mixing} factor={config.factor} eps={config.eps_density:.1e}")
    while n < config.max_iter:
        n += 1
        potential = effective_potential(model, rho_in)
        psi, eigenvalues = solve_eigenpairs(model, potential, model.n_orbitals, config, seed)
        eta = [np.diag(e).astype(complex) for e in eigenvalues]
        occ = occupation_state(eta, model.weights, model.smearing, model.n_electrons, mu_guess=mu)
        mu = occ.mu
        rho_out = density(model, psi, occ)
        residual = float(np.sqrt(grid_integral((rho_out - rho_in) ** 2, model.volume)))
        evaluation = evaluate(model, psi, eta, mu_guess=mu)
        try:
            grads = gradients(model, psi, eta, evaluation)
        except FlatOccupationError:
            grads = None
        records.append(
            IterationRecord(
                n=n,
                free_energy=evaluation.energies.total,
                grad_psi_half_norm=None if grads is None else grads.grad_psi_half_norm,
                grad_eta_sf_norm=None if grads is None else grads.grad_eta_sf_norm,
                error=None if grads is None else grads.error_metric,
                mu=mu,
                density_residual=residual,
            )
        )
        logger.scf(
            f"n={n:4d} F={evaluation.energies.total:.12f} Ha drho={residual:.3e} "
            f"error={'-' if grads is None else format(grads.error_metric, '.3e')} mu={mu:.8f}"
        )
        history.append((rho_in, rho_out))
        if residual <= config.eps_density:
            converged = True
            break
        target = grid_integral(rho_out, model.volume)
        rho_in = mix_density(history[-(config.history + 1):], config, target, model.volume)

    if converged:
        logger.info(f"scf: converged after {n} iterations, F={evaluation.energies.total:.12f} Ha")
    else:
        logger.warning(f"scf: not converged after {n} iterations, drho={records[-1].density_residual:.3e}")
    return ScfResult(
        psi=psi,
        eta=eta,
        evaluation=evaluation,
        grads=grads,
        converged=converged,
        iterations=n,
        records=records,
        exit_code=ExitCode.OK if converged else ExitCode.NOT_CONVERGED,
    )
