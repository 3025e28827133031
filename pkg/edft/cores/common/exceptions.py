# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

from typing import List, Optional

from .constants import ExitCode


class EdftError(Exception):
    """Base class of every error raised by the solver."""

    exit_code = ExitCode.NUMERICAL


class ConfigError(EdftError):
    """Invalid run configuration; carries every violation found."""

    exit_code = ExitCode.CONFIG

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))


class UnknownFixtureError(EdftError):
    exit_code = ExitCode.USAGE


class InvalidCellError(EdftError):
    exit_code = ExitCode.CONFIG


class EmptyBasisError(EdftError):
    exit_code = ExitCode.CONFIG


class ShapeMismatchError(EdftError):
    pass


class InvalidMatrixError(EdftError):
    pass


class NotOrthonormalError(EdftError):
    pass


class CholeskyError(EdftError):
    pass


class InfeasibleElectronCountError(EdftError):
    exit_code = ExitCode.CONFIG


class NoChemicalPotentialError(EdftError):
    pass


class FlatOccupationError(EdftError):
    """Every state sits far from mu, so the occupations carry no derivative."""


class UndefinedEstimatorError(EdftError):
    pass


class StationaryPointReached(EdftError):
    """Both gradients vanish; raised as a signal, not a failure."""

    exit_code = ExitCode.OK


class EigensolverError(EdftError):
    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        self.residuals = residuals or []
        super().__init__(message)


class LineEvaluationError(EdftError):
    """No point along the search direction could be evaluated."""


class InvariantViolation(EdftError):
    """A runtime invariant failed while ``check_invariants`` was on."""
