# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, computed_field

from ..common.constants import HARTREE_TO_RY


class EnergyBreakdown(BaseModel):
    """Free energy terms in hartree."""

    kinetic_nonlocal: float = 0.0
    local: float = 0.0
    hartree: float = 0.0
    xc: float = 0.0
    entropy: float = 0.0

    @computed_field
    @property
    def total(self) -> float:
        return self.kinetic_nonlocal + self.local + self.hartree + self.xc + self.entropy

    @property
    def total_ry(self) -> float:
        return HARTREE_TO_RY * self.total


class IterationRecord(BaseModel):
    n: int
    free_energy: float = Field(description="Free energy (hartree).")
    grad_psi_half_norm: Optional[float] = None
    grad_eta_sf_norm: Optional[float] = None
    error: Optional[float] = None
    t_psi: Optional[float] = None
    t_eta: Optional[float] = None
    beta: Optional[float] = None
    zeta: Optional[float] = None
    restarted: bool = False
    mu: float = 0.0
    density_residual: Optional[float] = None

    @property
    def free_energy_ry(self) -> float:
        return HARTREE_TO_RY * self.free_energy


class RunSummary(BaseModel):
    run_id: str
    name: str
    algorithm: str
    seed: int
    converged: bool
    iterations: int
    energies: EnergyBreakdown
    total_ha: float
    total_ry: float
    mu: float
    occupations: List[List[float]] = Field(description="Occupation numbers per k-point.")
    eigenvalues: List[List[float]] = Field(description="Diagonal of eta per k-point (hartree).")
    error: Optional[float] = None
    density_residual: Optional[float] = None
    ks_residual: Optional[float] = None
    exit_code: int = 0
    statistics: Dict[str, Any] = {}
