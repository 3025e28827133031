# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Unit cell, reciprocal lattice, k-point sampling and plane-wave bases.

Coefficients follow e_G(r) = |Omega|^{-1/2} exp(iG.r), so the squared
coefficient norm of a periodic function equals its integral over the cell.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from ..common.constants import KPOINT_WEIGHT_SUM
from ..common.exceptions import ConfigError, EmptyBasisError, InvalidCellError, ShapeMismatchError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class UnitCell:
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray

    def __post_init__(self):
        for name in ("a1", "a2", "a3"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        if self.volume < 1e-12:
            raise InvalidCellError(f"degenerate cell, volume {self.volume:.3e} bohr^3")

    @classmethod
    def cubic(cls, length: float) -> "UnitCell":
        return cls(*(length * np.eye(3)))

    @property
    def matrix(self) -> np.ndarray:
        """Lattice vectors as rows."""
        return np.vstack([self.a1, self.a2, self.a3])

    @property
    def volume(self) -> float:
        return float(abs(np.dot(self.a1, np.cross(self.a2, self.a3))))


@dataclass(frozen=True, eq=False)
class ReciprocalLattice:
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    volume: float

    @property
    def matrix(self) -> np.ndarray:
        """Reciprocal vectors as rows."""
        return np.vstack([self.b1, self.b2, self.b3])

    @property
    def direct_matrix(self) -> np.ndarray:
        """Direct lattice vectors as rows, recovered from b_i . a_j = 2 pi delta_ij."""
        return TWO_PI * np.linalg.inv(self.matrix).T

    def to_cartesian(self, crystal: np.ndarray) -> np.ndarray:
        return np.asarray(crystal, dtype=float) @ self.matrix


@dataclass(frozen=True, eq=False)
class KpointSet:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if points.shape[1] != 3 or points.shape[0] != weights.shape[0]:
            raise ShapeMismatchError(f"{points.shape[0]} k-points with {weights.shape[0]} weights")
        violations = []
        if np.any(weights <= 0):
            violations.append("kpoints.weights: weights must be positive")
        if abs(weights.sum() - KPOINT_WEIGHT_SUM) > 1e-12:
            violations.append(f"kpoints.weights: weights sum to {weights.sum()}, expected {KPOINT_WEIGHT_SUM}")
        if violations:
            raise ConfigError(violations)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def gamma(cls) -> "KpointSet":
        return cls(np.zeros((1, 3)), np.array([KPOINT_WEIGHT_SUM]))

    @classmethod
    def uniform(cls, points: Sequence[Sequence[float]]) -> "KpointSet":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, np.full(points.shape[0], KPOINT_WEIGHT_SUM / points.shape[0]))

    @classmethod
    def monkhorst_pack(cls, n1: int, n2: int, n3: int, shift: Sequence[float] = (0.0, 0.0, 0.0)) -> "KpointSet":
        """Uniform n1 x n2 x n3 mesh; ``shift`` is in units of one mesh step."""
        axes = []
        for n, s in zip((n1, n2, n3), shift):
            axes.append((np.arange(n) + 0.5 * (1 - n) + s) / n)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return cls.uniform(mesh)


@dataclass(frozen=True, eq=False)
class PlanewaveBasis:
    kpoint: np.ndarray
    kpoint_cart: np.ndarray
    gvectors: np.ndarray
    kplusg: np.ndarray
    kinetic: np.ndarray
    fftgrid: Tuple[int, int, int]
    gmap: np.ndarray
    volume: float
    e_cut: float
    _flat_size: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_flat_size", int(np.prod(self.fftgrid)))

    @property
    def size(self) -> int:
        return self.gvectors.shape[0]

    @property
    def npoints(self) -> int:
        return self._flat_size

    def summary(self) -> Dict:
        return {
            "kpoint": [float(x) for x in self.kpoint],
            "n_g": int(self.size),
            "e_cut": float(self.e_cut),
            "fftgrid": [int(n) for n in self.fftgrid],
            "volume": float(self.volume),
        }


def build_reciprocal(cell: UnitCell) -> ReciprocalLattice:
    """Dual basis b_i with b_i . a_j = 2 pi delta_ij."""
    volume = cell.volume
    if volume < 1e-12:
        raise InvalidCellError(f"degenerate cell, volume {volume:.3e} bohr^3")
    signed = float(np.dot(cell.a1, np.cross(cell.a2, cell.a3)))
    b1 = TWO_PI * np.cross(cell.a2, cell.a3) / signed
    b2 = TWO_PI * np.cross(cell.a3, cell.a1) / signed
    b3 = TWO_PI * np.cross(cell.a1, cell.a2) / signed
    return ReciprocalLattice(b1, b2, b3, volume)


def miller_bounds(recip: ReciprocalLattice, k: np.ndarray, e_cut: float) -> np.ndarray:
    """Per-axis bound on |m_i| for every G with 1/2 |k+G|^2 <= e_cut."""
    gmax = np.sqrt(2.0 * e_cut) + np.linalg.norm(recip.to_cartesian(k))
    a_norms = np.linalg.norm(recip.direct_matrix, axis=1)
    return np.ceil(a_norms * gmax / TWO_PI).astype(int)


def fft_grid_for(gvectors: np.ndarray) -> Tuple[int, int, int]:
    """Smallest efficient grid holding products of two basis functions without aliasing."""
    max_m = np.max(np.abs(gvectors), axis=0)
    return tuple(int(scipy.fft.next_fast_len(int(4 * m + 1))) for m in max_m)


def _grid_map(gvectors: np.ndarray, fftgrid: Tuple[int, int, int]) -> np.ndarray:
    indices = tuple(gvectors[:, axis] % fftgrid[axis] for axis in range(3))
    return np.ravel_multi_index(indices, fftgrid)


def build_basis(
    recip: ReciprocalLattice,
    k: Sequence[float],
    e_cut: float,
    fftgrid: Optional[Tuple[int, int, int]] = None,
) -> PlanewaveBasis:
    """Plane waves with 1/2 |k+G|^2 <= e_cut for one k-point (crystal coordinates).

    :param fftgrid: shared grid to map onto; the smallest admissible grid when omitted.
    """
    if e_cut <= 0:
        raise EmptyBasisError(f"e_cut must be positive, got {e_cut}")
    k = np.asarray(k, dtype=float).reshape(3)
    bounds = miller_bounds(recip, k, e_cut)
    ranges = [np.arange(-b, b + 1) for b in bounds]
    candidates = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
    kplusg = recip.to_cartesian(candidates + k)
    kinetic = 0.5 * np.einsum("ij,ij->i", kplusg, kplusg)
    keep = kinetic <= e_cut
    if not np.any(keep):
        raise EmptyBasisError(f"no plane wave satisfies 1/2|k+G|^2 <= {e_cut} at k={k.tolist()}")
    gvectors, kplusg, kinetic = candidates[keep], kplusg[keep], kinetic[keep]

    order = np.lexsort((gvectors[:, 2], gvectors[:, 1], gvectors[:, 0], np.round(kinetic, 10)))
    gvectors, kplusg, kinetic = gvectors[order], kplusg[order], kinetic[order]

    minimal = fft_grid_for(gvectors)
    if fftgrid is None:
        fftgrid = minimal
    elif any(n < 2 * int(np.max(np.abs(gvectors[:, i]))) + 1 for i, n in enumerate(fftgrid)):
        raise ShapeMismatchError(f"grid {tuple(fftgrid)} too small for the basis at k={k.tolist()}")
    fftgrid = tuple(int(n) for n in fftgrid)
    return PlanewaveBasis(
        kpoint=k,
        kpoint_cart=recip.to_cartesian(k),
        gvectors=gvectors,
        kplusg=kplusg,
        kinetic=kinetic,
        fftgrid=fftgrid,
        gmap=_grid_map(gvectors, fftgrid),
        volume=recip.volume,
        e_cut=float(e_cut),
    )


def build_bases(recip: ReciprocalLattice, kpoints: KpointSet, e_cut: float) -> List[PlanewaveBasis]:
    """One basis per k-point, all mapped onto a common FFT grid."""
    provisional = [build_basis(recip, k, e_cut) for k in kpoints.points]
    shared = tuple(int(n) for n in np.max([b.fftgrid for b in provisional], axis=0))
    return [build_basis(recip, k, e_cut, fftgrid=shared) for k in kpoints.points]


def fft_gvectors(recip: ReciprocalLattice, fftgrid: Tuple[int, int, int]) -> np.ndarray:
    """Cartesian G of every grid point in FFT ordering, shape (n1, n2, n3, 3)."""
    freqs = [np.rint(scipy.fft.fftfreq(n) * n).astype(int) for n in fftgrid]
    miller = np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1)
    return miller @ recip.matrix


def grid_integral(values: np.ndarray, volume: float) -> float:
    """Quadrature of a periodic grid function over the cell."""
    return float(volume * np.sum(values) / values.size)


def to_realspace(basis: PlanewaveBasis, coeffs: np.ndarray) -> np.ndarray:
    """Periodic part on the grid; a (N_G, N) block maps to shape (N, n1, n2, n3)."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] != basis.size or coeffs.ndim > 2:
        raise ShapeMismatchError(f"expected {basis.size} coefficients per column, got shape {coeffs.shape}")
    block = coeffs.reshape(basis.size, -1)
    flat = np.zeros((block.shape[1], basis.npoints), dtype=complex)
    flat[:, basis.gmap] = block.T
    grid = flat.reshape((block.shape[1],) + basis.fftgrid)
    values = scipy.fft.ifftn(grid, axes=(1, 2, 3)) * (basis.npoints / np.sqrt(basis.volume))
    return values[0] if coeffs.ndim == 1 else values


def to_reciprocal(basis: PlanewaveBasis, values: np.ndarray) -> np.ndarray:
    """Inverse of ``to_realspace`` restricted to the basis (projection onto it)."""
    values = np.asarray(values)
    single = values.shape == basis.fftgrid
    if not single and values.shape[1:] != basis.fftgrid:
        raise ShapeMismatchError(f"expected grid {basis.fftgrid}, got shape {values.shape}")
    grid = values.reshape((-1,) + basis.fftgrid)
    transformed = scipy.fft.fftn(grid, axes=(1, 2, 3)) * (np.sqrt(basis.volume) / basis.npoints)
    coeffs = transformed.reshape(grid.shape[0], -1)[:, basis.gmap].T
    return coeffs[:, 0] if single else coeffs
