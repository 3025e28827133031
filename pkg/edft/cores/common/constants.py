# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

from enum import Enum, IntEnum

HARTREE_TO_RY = 2.0

# Sum of k-point weights (spin degeneracy folded in)
KPOINT_WEIGHT_SUM = 2.0

MV_A_DEFAULT = -0.5634
MV_A_ALTERNATIVE = -((2.0 / 3.0) ** 0.5)


class SmearingKind(Enum):
    """The enum of a smearing function pair (f, S)."""

    FERMI_DIRAC = "fermi-dirac"
    GAUSSIAN = "gaussian"
    METHFESSEL_PAXTON = "methfessel-paxton"
    MARZARI_VANDERBILT = "marzari-vanderbilt"

    def __str__(self):
        return self.value

    @property
    def is_monotone(self) -> bool:
        return self in (SmearingKind.FERMI_DIRAC, SmearingKind.GAUSSIAN)


class XcKind(Enum):
    """The enum of an exchange-correlation functional."""

    NONE = "none"
    SLATER_X = "slater-x"

    def __str__(self):
        return self.value


class Variant(Enum):
    """The enum of a PCG variant."""

    PCG = "pcg"
    RESTART_I = "pcg-r1"
    RESTART_II = "pcg-r2"

    def __str__(self):
        return self.value


class Strategy(Enum):
    """The enum of a step size strategy."""

    ENERGY = "s1"
    DERIVATIVE = "s2"
    PARTIAL_DERIVATIVES = "s3"

    def __str__(self):
        return self.value


class MixingKind(Enum):
    """The enum of an SCF density mixing scheme."""

    LINEAR = "linear"
    BROYDEN = "broyden"

    def __str__(self):
        return self.value


class InitKind(Enum):
    """The enum of an initial wavefunction guess."""

    RANDOM = "random"
    RITZ = "ritz"

    def __str__(self):
        return self.value


class ExitCode(IntEnum):
    """The enum of a process exit status."""

    OK = 0
    NOT_CONVERGED = 2
    CONFIG = 3
    NUMERICAL = 4
    USAGE = 64
