# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import math
import re
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..common.constants import (
    KPOINT_WEIGHT_SUM,
    MV_A_DEFAULT,
    InitKind,
    MixingKind,
    SmearingKind,
    Strategy,
    Variant,
    XcKind,
)

Vector3 = Tuple[float, float, float]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class CellSpec(StrictModel):
    a1: Vector3 = Field(description="First lattice vector (bohr).")
    a2: Vector3 = Field(description="Second lattice vector (bohr).")
    a3: Vector3 = Field(description="Third lattice vector (bohr).")

    @model_validator(mode="after")
    def check_volume(self):
        volume = abs(float(np.dot(self.a1, np.cross(self.a2, self.a3))))
        if volume <= 1e-12:
            raise ValueError(f"lattice vectors are coplanar (volume {volume:.3e})")
        return self


class KpointSpec(StrictModel):
    points: List[Vector3] = Field(default=[(0.0, 0.0, 0.0)], description="k-points in crystal coordinates.")
    weights: Optional[List[float]] = Field(default=None, description="Weights summing to 2; equal when omitted.")
    mesh: Optional[Tuple[int, int, int]] = Field(
        default=None, description="Monkhorst-Pack mesh; replaces points and weights when set."
    )
    shift: Vector3 = Field(default=(0.0, 0.0, 0.0), description="Mesh shift in units of one mesh step.")

    @model_validator(mode="after")
    def check_weights(self):
        if self.mesh is not None:
            if min(self.mesh) < 1:
                raise ValueError("mesh dimensions must be positive")
            return self
        if self.weights is None:
            return self
        if len(self.weights) != len(self.points):
            raise ValueError(f"{len(self.weights)} weights given for {len(self.points)} k-points")
        if any(w <= 0 for w in self.weights):
            raise ValueError("k-point weights must be positive")
        if abs(sum(self.weights) - KPOINT_WEIGHT_SUM) > 1e-12:
            raise ValueError(f"k-point weights sum to {sum(self.weights)}, expected {KPOINT_WEIGHT_SUM}")
        return self


class SpeciesSpec(StrictModel):
    name: str = Field(default="X", description="Label used in logs.")
    amplitude: float = Field(description="Peak value of the Gaussian local potential (hartree); negative binds.")
    width: float = Field(gt=0, description="Gaussian width of the local potential (bohr).")
    positions: List[Vector3] = Field(description="Atom sites in crystal coordinates.")
    charge: float = Field(default=0.0, ge=0, description="Valence charge per atom for the superposition density.")
    charge_width: float = Field(default=1.0, gt=0, description="Gaussian width of the atomic valence charge (bohr).")


class ProjectorSpec(StrictModel):
    position: Vector3 = Field(description="Projector center in crystal coordinates.")
    width: float = Field(gt=0, description="Gaussian envelope width (bohr).")


class ModelConfig(StrictModel):
    n_electrons: float = Field(gt=0, description="Electron count N_e.")
    n_orbitals: Optional[int] = Field(default=None, description="Orbital count N; N_b + floor(0.2 N_b) when omitted.")
    hartree: bool = Field(default=True, description="Include the Hartree term.")
    hartree_scale: float = Field(default=1.0, ge=0, description="Coupling constant multiplying the Hartree term.")
    xc: XcKind = Field(default=XcKind.NONE, description="Exchange-correlation functional.")
    species: List[SpeciesSpec] = Field(default=[], description="Local potential species.")
    projectors: List[ProjectorSpec] = Field(default=[], description="Nonlocal projector functions.")
    d_matrix: Optional[List[List[float]]] = Field(default=None, description="K x K nonlocal strengths D.")
    q_matrix: Optional[List[List[float]]] = Field(default=None, description="K x K augmentation charges Q.")
    augmentation_width: float = Field(default=0.8, gt=0, description="Gaussian width of the augmentation shapes.")
    augment_density: bool = Field(default=True, description="Add the augmentation charge to the density.")

    @model_validator(mode="after")
    def check_matrices(self):
        k = len(self.projectors)
        for label in ("d_matrix", "q_matrix"):
            matrix = getattr(self, label)
            if matrix is None:
                continue
            array = np.asarray(matrix, dtype=float)
            if array.shape != (k, k):
                raise ValueError(f"{label} has shape {array.shape}, expected ({k}, {k}) for {k} projectors")
            if not np.allclose(array, array.T, atol=1e-12):
                raise ValueError(f"{label} must be symmetric")
        if self.n_orbitals is not None:
            n_b = math.ceil(self.n_electrons / 2)
            if self.n_orbitals <= n_b:
                raise ValueError(f"n_orbitals={self.n_orbitals} must exceed N_b={n_b}")
        return self


class SmearingSpec(StrictModel):
    kind: SmearingKind = Field(default=SmearingKind.GAUSSIAN, description="Smearing function pair.")
    sigma: float = Field(gt=0, description="Smearing width (hartree).")
    mp_order: int = Field(default=1, ge=1, description="Methfessel-Paxton order.")
    mv_a: float = Field(default=MV_A_DEFAULT, description="Marzari-Vanderbilt parameter a.")


class OptimizerConfig(StrictModel):
    variant: Variant = Field(default=Variant.PCG, description="PCG, restarted variant I or II.")
    strategy: Strategy = Field(default=Strategy.PARTIAL_DERIVATIVES, description="Step size strategy.")
    nu: float = Field(default=0.25, gt=0, le=0.5, description="Sufficient decrease constant.")
    alpha: float = Field(default=0.0, ge=0, lt=1, description="Nonmonotone memory; 0 is monotone Armijo.")
    gamma: float = Field(default=0.5, ge=0, lt=1, description="Restart threshold.")
    a: float = Field(default=1.0, gt=0, description="Restart exponent.")
    t_min_psi: float = Field(default=0.001, gt=0)
    t_min_eta: float = Field(default=0.001, gt=0)
    t_trial_init: float = Field(default=0.4, gt=0, description="Step sizes used before any step is taken.")
    theta_max: float = Field(default=0.8, gt=0, description="Upper bound of the step length cap.")
    ratio_bounds: Optional[Tuple[float, float]] = Field(
        default=None, description="(c_lower, c_upper) bounds on t_eta / t_psi; disabled when omitted."
    )
    max_iter: int = Field(default=500, ge=1)
    tol: float = Field(default=1e-5, gt=0)
    max_backtracks: int = Field(default=30, ge=0, description="Step halvings allowed when Armijo fails.")
    check_invariants: bool = Field(default=False, description="Raise when orthonormality or descent breaks.")

    @field_validator("ratio_bounds")
    @classmethod
    def check_ratio_bounds(cls, value):
        if value is not None and not (0 <= value[0] < value[1]):
            raise ValueError("ratio_bounds must satisfy 0 <= c_lower < c_upper")
        return value


class ScfConfig(StrictModel):
    mixing: MixingKind = Field(default=MixingKind.BROYDEN, description="Density mixing scheme.")
    factor: float = Field(default=0.3, gt=0, le=1, description="Mixing factor.")
    history: int = Field(default=8, ge=1, description="Broyden history length.")
    eps_density: float = Field(default=1e-9, gt=0, description="Density residual tolerance.")
    max_iter: int = Field(default=500, ge=1)
    eig_tol: float = Field(default=1e-9, gt=0, description="Eigenpair residual tolerance.")
    dense_limit: int = Field(default=2000, ge=1, description="Largest basis solved densely.")


ALGORITHM_PATTERN = re.compile(r"^(scf|pcg(?:-(r1|r2))?-(s1|s2|s3))$")


def parse_algorithm(name: str) -> Tuple[Optional[Variant], Optional[Strategy]]:
    """Split an algorithm label such as ``pcg-r2-s3`` into its variant and strategy.

    :return: (None, None) for ``scf``.
    """
    match = ALGORITHM_PATTERN.match(name.strip().lower())
    if not match:
        raise ValueError(f"unknown algorithm '{name}'; expected scf, pcg-sN, pcg-r1-sN or pcg-r2-sN")
    if match.group(1) == "scf":
        return None, None
    variant = Variant(f"pcg-{match.group(2)}") if match.group(2) else Variant.PCG
    return variant, Strategy(match.group(3))


class AlgorithmConfig(StrictModel):
    name: str = Field(default="pcg-s3", description="scf, pcg-s1..s3, pcg-r1-s1..s3 or pcg-r2-s1..s3.")
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    scf: ScfConfig = Field(default_factory=ScfConfig)

    @model_validator(mode="after")
    def apply_name(self):
        variant, strategy = parse_algorithm(self.name)
        if variant is not None:
            self.optimizer = self.optimizer.model_copy(update={"variant": variant, "strategy": strategy})
        self.name = self.name.strip().lower()
        return self

    @property
    def is_scf(self) -> bool:
        return self.name == "scf"


class OutputConfig(StrictModel):
    dir: str = Field(default="runs", description="Directory receiving the run artifacts.")
    prefix: Optional[str] = Field(default=None, description="File prefix; the run name when omitted.")


class RunConfig(StrictModel):
    name: str = Field(default="custom", description="Run label.")
    cell: CellSpec
    kpoints: KpointSpec = Field(default_factory=KpointSpec)
    e_cut: float = Field(gt=0, description="Kinetic energy cutoff (hartree).")
    model: ModelConfig
    smearing: SmearingSpec
    algorithm: AlgorithmConfig = Field(default_factory=AlgorithmConfig)
    seed: int = Field(default=0, ge=0)
    init: InitKind = Field(default=InitKind.RANDOM)
    output: OutputConfig = Field(default_factory=OutputConfig)
