# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Model Hamiltonian and the ensemble free energy.

Local potentials are periodic Gaussians given in reciprocal space, nonlocal
projectors are Gaussian envelopes centred on atom sites, and the optional
augmentation shapes are normalized Gaussians placed between projector pairs.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.fft

from ..common.base_statistics import record_duration, register_statistics
from ..common.constants import XcKind
from ..common.exceptions import ConfigError, EmptyBasisError, ShapeMismatchError
from ..common.logger import logger
from ..lattice.lattice_basis import (
    KpointSet,
    PlanewaveBasis,
    ReciprocalLattice,
    UnitCell,
    build_bases,
    build_reciprocal,
    fft_gvectors,
    grid_integral,
    to_realspace,
    to_reciprocal,
)
from ..proto.config_protocol import ModelConfig, RunConfig, SmearingSpec
from ..proto.records import EnergyBreakdown
from ..smearing.smearing import OccupationState, default_orbital_count, occupation_state

SLATER_CX = 0.75 * (3.0 / math.pi) ** (1.0 / 3.0)


@dataclass(eq=False)
class KohnShamModel:
    """Everything needed to evaluate the free energy of (Psi, eta)."""

    cell: UnitCell
    recip: ReciprocalLattice
    kpoints: KpointSet
    bases: List[PlanewaveBasis]
    n_electrons: float
    n_orbitals: int
    smearing: SmearingSpec
    vloc: np.ndarray
    projectors: List[np.ndarray]
    d_matrix: np.ndarray
    q_matrix: np.ndarray
    q_shapes: Optional[np.ndarray]
    hartree: bool = True
    hartree_scale: float = 1.0
    xc: XcKind = XcKind.NONE
    reference_density: Optional[np.ndarray] = None

    def __post_init__(self):
        self.fftgrid = self.bases[0].fftgrid
        self.volume = self.cell.volume
        gvec = fft_gvectors(self.recip, self.fftgrid)
        self.g2 = np.einsum("...i,...i->...", gvec, gvec)
        self.weights = self.kpoints.weights
        self.has_overlap = self.n_projectors > 0 and bool(np.any(self.q_matrix != 0))

    @property
    def n_projectors(self) -> int:
        return self.d_matrix.shape[0]

    @property
    def overlap_apply(self) -> Optional[Callable[[int, np.ndarray], np.ndarray]]:
        if not self.has_overlap:
            return None
        return lambda k, block: apply_overlap(self, k, block)

    def summary(self) -> dict:
        return {
            "volume": self.volume,
            "n_electrons": self.n_electrons,
            "n_orbitals": self.n_orbitals,
            "n_projectors": self.n_projectors,
            "bases": [b.summary() for b in self.bases],
        }


class Potential(NamedTuple):
    vtot: np.ndarray
    vloc: np.ndarray
    vh: np.ndarray
    vxc: np.ndarray
    d_tilde: np.ndarray
    hartree_energy: float
    xc_energy: float


def _gaussian_recip(g2: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-0.5 * width * width * g2)


def _structure_factor(gvec: np.ndarray, positions_cart: np.ndarray) -> np.ndarray:
    phase = np.einsum("...i,ai->...a", gvec, positions_cart)
    return np.sum(np.exp(-1j * phase), axis=-1)


def _to_grid(coeffs_full: np.ndarray) -> np.ndarray:
    """Real grid function from coefficients over the whole FFT grid (sum_G c_G e^{iGr})."""
    return np.real(scipy.fft.ifftn(coeffs_full) * coeffs_full.size)


def local_potential(cell: UnitCell, recip: ReciprocalLattice, fftgrid, species) -> np.ndarray:
    """Periodic sum of Gaussian wells amp exp(-|r - tau|^2 / (2 w^2)); average removed."""
    gvec = fft_gvectors(recip, fftgrid)
    g2 = np.einsum("...i,...i->...", gvec, gvec)
    v_g = np.zeros(fftgrid, dtype=complex)
    for sp in species:
        positions = np.asarray(sp.positions, dtype=float) @ cell.matrix
        prefactor = sp.amplitude * (2.0 * math.pi * sp.width**2) ** 1.5 / cell.volume
        v_g += prefactor * _gaussian_recip(g2, sp.width) * _structure_factor(gvec, positions)
    v_g[0, 0, 0] = 0.0
    return _to_grid(v_g)


def superposition_density(cell: UnitCell, recip: ReciprocalLattice, fftgrid, species, n_e: float) -> np.ndarray:
    """Sum of normalized atomic Gaussian charges scaled to integrate to n_e; uniform when no charges are set."""
    gvec = fft_gvectors(recip, fftgrid)
    g2 = np.einsum("...i,...i->...", gvec, gvec)
    rho_g = np.zeros(fftgrid, dtype=complex)
    total = 0.0
    for sp in species:
        if sp.charge <= 0:
            continue
        positions = np.asarray(sp.positions, dtype=float) @ cell.matrix
        rho_g += sp.charge * _gaussian_recip(g2, sp.charge_width) * _structure_factor(gvec, positions) / cell.volume
        total += sp.charge * len(sp.positions)
    if total == 0.0:
        return np.full(fftgrid, n_e / cell.volume)
    rho = np.maximum(_to_grid(rho_g), 0.0)
    return rho * n_e / grid_integral(rho, cell.volume)


def projector_block(basis: PlanewaveBasis, position_cart: np.ndarray, width: float) -> np.ndarray:
    """Unit-norm coefficients of exp(-w^2 |k+G|^2 / 2) exp(-i (k+G) . tau) on one basis."""
    envelope = np.exp(-0.5 * width * width * np.einsum("ij,ij->i", basis.kplusg, basis.kplusg))
    phase = np.exp(-1j * basis.kplusg @ position_cart)
    coeffs = envelope * phase
    return coeffs / np.linalg.norm(coeffs)


def augmentation_shapes(
    cell: UnitCell, recip: ReciprocalLattice, fftgrid, positions_crystal: np.ndarray, q_matrix: np.ndarray, width: float
) -> np.ndarray:
    """Q_ab g_ab(r) with g_ab a unit-integral Gaussian at the minimum-image midpoint of sites a and b."""
    gvec = fft_gvectors(recip, fftgrid)
    g2 = np.einsum("...i,...i->...", gvec, gvec)
    envelope = _gaussian_recip(g2, width) / cell.volume
    count = positions_crystal.shape[0]
    shapes = np.zeros((count, count) + tuple(fftgrid))
    for a in range(count):
        for b in range(a, count):
            if q_matrix[a, b] == 0:
                continue
            delta = positions_crystal[b] - positions_crystal[a]
            delta -= np.round(delta)
            mid = (positions_crystal[a] + 0.5 * delta) @ cell.matrix
            g_ab = _to_grid(envelope * _structure_factor(gvec, mid[np.newaxis, :]))
            shapes[a, b] = q_matrix[a, b] * g_ab
            shapes[b, a] = shapes[a, b]
    return shapes


def overlap_lower_bound(model: KohnShamModel) -> float:
    """Smallest eigenvalue of B = I + M Q M* over all k-point bases."""
    if not model.has_overlap:
        return 1.0
    bound = math.inf
    for basis, m in zip(model.bases, model.projectors):
        gram_m = m.conj().T @ m
        values, vectors = np.linalg.eigh(0.5 * (gram_m + gram_m.conj().T))
        root = (vectors * np.sqrt(np.maximum(values, 0.0))) @ vectors.conj().T
        reduced = np.eye(model.n_projectors) + root @ model.q_matrix @ root
        bound = min(bound, float(np.linalg.eigvalsh(0.5 * (reduced + reduced.conj().T)).min()))
        if basis.size > np.linalg.matrix_rank(m):
            bound = min(bound, 1.0)
    return bound


def build_model(config: RunConfig) -> KohnShamModel:
    """Assemble the model described by a validated run configuration."""
    cell = UnitCell(config.cell.a1, config.cell.a2, config.cell.a3)
    recip = build_reciprocal(cell)
    if config.kpoints.mesh is not None:
        kpoints = KpointSet.monkhorst_pack(*config.kpoints.mesh, shift=config.kpoints.shift)
    elif config.kpoints.weights is None:
        kpoints = KpointSet.uniform(config.kpoints.points)
    else:
        kpoints = KpointSet(config.kpoints.points, config.kpoints.weights)
    bases = build_bases(recip, kpoints, config.e_cut)
    spec: ModelConfig = config.model

    n_orbitals = spec.n_orbitals or default_orbital_count(spec.n_electrons)
    smallest = min(b.size for b in bases)
    if n_orbitals > smallest:
        raise EmptyBasisError(f"{n_orbitals} orbitals requested but the smallest basis has {smallest} plane waves")

    fftgrid = bases[0].fftgrid
    count = len(spec.projectors)
    positions = np.array([p.position for p in spec.projectors], dtype=float).reshape(count, 3)
    projectors = []
    for basis in bases:
        columns = [projector_block(basis, pos @ cell.matrix, p.width) for pos, p in zip(positions, spec.projectors)]
        projectors.append(np.stack(columns, axis=1) if columns else np.zeros((basis.size, 0), dtype=complex))
    d_matrix = np.asarray(spec.d_matrix if spec.d_matrix is not None else np.zeros((count, count)), dtype=complex)
    q_matrix = np.asarray(spec.q_matrix if spec.q_matrix is not None else np.zeros((count, count)), dtype=complex)
    q_shapes = None
    if count and spec.augment_density and np.any(q_matrix != 0):
        q_shapes = augmentation_shapes(cell, recip, fftgrid, positions, np.real(q_matrix), spec.augmentation_width)

    model = KohnShamModel(
        cell=cell,
        recip=recip,
        kpoints=kpoints,
        bases=bases,
        n_electrons=spec.n_electrons,
        n_orbitals=n_orbitals,
        smearing=config.smearing,
        vloc=local_potential(cell, recip, fftgrid, spec.species),
        projectors=projectors,
        d_matrix=d_matrix,
        q_matrix=q_matrix,
        q_shapes=q_shapes,
        hartree=spec.hartree,
        hartree_scale=spec.hartree_scale,
        xc=spec.xc,
        reference_density=superposition_density(cell, recip, fftgrid, spec.species, spec.n_electrons),
    )
    bound = overlap_lower_bound(model)
    if bound <= 0:
        raise ConfigError([f"model.q_matrix: overlap operator is not coercive (smallest eigenvalue {bound:.3e})"])
    logger.info(
        f"model: N_e={model.n_electrons} N={n_orbitals} K={count} grid={fftgrid} "
        f"N_G={[b.size for b in bases]} overlap bound={bound:.6f}"
    )
    return model


def apply_overlap(model: KohnShamModel, k: int, psi_k: np.ndarray) -> np.ndarray:
    """B Psi_k = Psi_k + M Q <M* Psi_k>."""
    if not model.has_overlap:
        return psi_k
    m = model.projectors[k]
    return psi_k + m @ (model.q_matrix @ (m.conj().T @ psi_k))


def overlap_matrix(model: KohnShamModel, k: int) -> np.ndarray:
    m = model.projectors[k]
    return np.eye(m.shape[0]) + m @ model.q_matrix @ m.conj().T


def initial_density(model: KohnShamModel) -> np.ndarray:
    return model.reference_density.copy()


def hartree_potential(rho: np.ndarray, g2: np.ndarray, volume: float, scale: float = 1.0):
    """Hartree energy and potential 4 pi rho(G) / |G|^2 with the G = 0 term removed.

    :return: (energy, potential on the grid)
    """
    rho_g = scipy.fft.fftn(rho) / rho.size
    safe = np.where(g2 > 0, g2, 1.0)
    v_g = np.where(g2 > 0, 4.0 * math.pi * rho_g / safe, 0.0)
    v_h = scale * np.real(scipy.fft.ifftn(v_g) * rho.size)
    energy = 0.5 * grid_integral(rho * v_h, volume)
    return energy, v_h


def xc_energy_potential(rho: np.ndarray, kind: XcKind, volume: float):
    """Exchange-correlation energy and potential.

    :return: (energy, potential on the grid)
    """
    if kind == XcKind.NONE:
        return 0.0, np.zeros_like(rho)
    clamped = np.maximum(rho, 0.0)
    energy = -SLATER_CX * grid_integral(clamped ** (4.0 / 3.0), volume)
    return energy, -(4.0 / 3.0) * SLATER_CX * np.cbrt(clamped)


def effective_potential(model: KohnShamModel, rho: np.ndarray) -> Potential:
    """Total local potential V_loc + v_H + v_xc and the augmentation strengths D~ = int V~ Q."""
    if model.hartree:
        e_h, v_h = hartree_potential(rho, model.g2, model.volume, model.hartree_scale)
    else:
        e_h, v_h = 0.0, np.zeros_like(rho)
    e_xc, v_xc = xc_energy_potential(rho, model.xc, model.volume)
    vtot = model.vloc + v_h + v_xc
    count = model.n_projectors
    d_tilde = np.zeros((count, count), dtype=complex)
    if model.q_shapes is not None:
        d_tilde = model.volume * np.einsum("abxyz,xyz->ab", model.q_shapes, vtot) / rho.size
    return Potential(vtot, model.vloc, v_h, v_xc, d_tilde, e_h, e_xc)


def apply_hamiltonian(model: KohnShamModel, potential: Potential, k: int, psi_k: np.ndarray) -> np.ndarray:
    """H_k Psi_k = -1/2 (ik + grad)^2 Psi_k + V~ Psi_k + M (D + D~) <M* Psi_k>."""
    basis = model.bases[k]
    if psi_k.shape[0] != basis.size:
        raise ShapeMismatchError(f"expected {basis.size} coefficients, got {psi_k.shape[0]}")
    block = psi_k.reshape(basis.size, -1)
    result = basis.kinetic[:, np.newaxis] * block
    result = result + to_reciprocal(basis, potential.vtot[np.newaxis] * to_realspace(basis, block))
    if model.n_projectors:
        m = model.projectors[k]
        result = result + m @ ((model.d_matrix + potential.d_tilde) @ (m.conj().T @ block))
    return result.reshape(psi_k.shape)


def kohn_sham_matrix(model: KohnShamModel, potential: Potential, k: int) -> np.ndarray:
    """Dense Hermitian H_k, assembled column by column."""
    size = model.bases[k].size
    h = apply_hamiltonian(model, potential, k, np.eye(size, dtype=complex))
    return 0.5 * (h + h.conj().T)


def density(model: KohnShamModel, psi: Sequence[np.ndarray], occ: OccupationState) -> np.ndarray:
    """rho = sum_k w_k tr((Psi_k* Psi_k + <Psi_k* M> Q(r) <M* Psi_k>) F_k) on the grid."""
    if len(psi) != len(model.bases) or len(occ.f_matrices) != len(psi):
        raise ShapeMismatchError("density needs one orbital block and one occupation matrix per k-point")
    rho = np.zeros(model.fftgrid)
    for k, (basis, psi_k, f_k, w) in enumerate(zip(model.bases, psi, occ.f_matrices, model.weights)):
        if f_k.shape[0] != psi_k.shape[1]:
            raise ShapeMismatchError(f"k-point {k}: {psi_k.shape[1]} orbitals against {f_k.shape[0]} occupations")
        u = to_realspace(basis, psi_k).reshape(psi_k.shape[1], -1)
        rho += w * np.real(np.einsum("ir,ji,jr->r", u.conj(), f_k, u)).reshape(model.fftgrid)
        if model.q_shapes is not None:
            p = model.projectors[k].conj().T @ psi_k
            w_ab = p @ f_k @ p.conj().T
            rho += w * np.real(np.einsum("abxyz,ba->xyz", model.q_shapes, w_ab))
    return rho


class Evaluation(NamedTuple):
    energies: EnergyBreakdown
    occ: OccupationState
    rho: np.ndarray
    potential: Potential
    hpsi: List[np.ndarray]
    sigma: List[np.ndarray]


@register_statistics(names=["free_energy"])
def evaluate(
    model: KohnShamModel, psi: Sequence[np.ndarray], eta: Sequence[np.ndarray], mu_guess: Optional[float] = None
) -> Evaluation:
    """Free energy of (Psi, eta) together with H Psi and Sigma = <Psi* H Psi> per k."""
    with record_duration("free_energy"):
        occ = occupation_state(eta, model.weights, model.smearing, model.n_electrons, mu_guess=mu_guess)
        rho = density(model, psi, occ)
        potential = effective_potential(model, rho)
        hpsi, sigma = [], []
        kinetic_nonlocal = 0.0
        for k, (basis, psi_k, f_k, w) in enumerate(zip(model.bases, psi, occ.f_matrices, model.weights)):
            hpsi_k = apply_hamiltonian(model, potential, k, psi_k)
            hpsi.append(hpsi_k)
            s = psi_k.conj().T @ hpsi_k
            sigma.append(0.5 * (s + s.conj().T))
            one_body = psi_k.conj().T @ (basis.kinetic[:, np.newaxis] * psi_k)
            if model.n_projectors:
                p = model.projectors[k].conj().T @ psi_k
                one_body = one_body + p.conj().T @ model.d_matrix @ p
            kinetic_nonlocal += w * float(np.real(np.trace(one_body @ f_k)))
        energies = EnergyBreakdown(
            kinetic_nonlocal=kinetic_nonlocal,
            local=grid_integral(model.vloc * rho, model.volume),
            hartree=potential.hartree_energy,
            xc=potential.xc_energy,
            entropy=occ.entropy(),
        )
    return Evaluation(energies, occ, rho, potential, hpsi, sigma)


def free_energy(
    model: KohnShamModel, psi: Sequence[np.ndarray], eta: Sequence[np.ndarray], mu_guess: Optional[float] = None
) -> EnergyBreakdown:
    return evaluate(model, psi, eta, mu_guess=mu_guess).energies
