#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

# Config and records
from edft.cores.proto.config_protocol import (
    AlgorithmConfig,
    ModelConfig,
    OptimizerConfig,
    RunConfig,
    ScfConfig,
    SmearingSpec,
)
from edft.cores.proto.records import EnergyBreakdown, IterationRecord, RunSummary

# Constants and errors
from edft.cores.common.constants import ExitCode, InitKind, MixingKind, SmearingKind, Strategy, Variant, XcKind
from edft.cores.common.exceptions import EdftError, ConfigError

# Model
from edft.cores.model.model import KohnShamModel, build_model, evaluate, free_energy

# Solvers
from edft.cores.optimizer.optimizer import initial_guess, minimize
from edft.cores.scf.scf_baseline import mix_density, run_scf, solve_eigenpairs

# Runner
from edft.cores.runner.config import load_config, make_fixture, parse_config
from edft.cores.runner.catalog import list_fixtures
from edft.cores.runner.run import compare, run

# Telemetry
from edft.cores.telemetry.edft_telemetry import edft_telemetry

# Statistics
from edft.cores.common.base_statistics import statistics_dict, register_statistics

from edft.version import __version__
