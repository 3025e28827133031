# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import os
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ValidationError

from ..common.exceptions import ConfigError
from ..proto.config_protocol import AlgorithmConfig, RunConfig
from .catalog import fixture_path


def _violations(error: ValidationError) -> List[str]:
    result = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        result.append(f"{location}: {item['msg']}")
    return result


def validate_document(document: Any) -> RunConfig:
    """Validate an already loaded mapping; every violation ends up in one ConfigError."""
    if not isinstance(document, dict):
        raise ConfigError([f"<root>: expected a mapping, got {type(document).__name__}"])
    try:
        return RunConfig.model_validate(document)
    except ValidationError as error:
        raise ConfigError(_violations(error)) from error


def parse_config(path: str) -> RunConfig:
    """Load and validate a YAML run configuration."""
    if not os.path.isfile(path):
        raise ConfigError([f"<file>: {path} does not exist"])
    with open(path) as file:
        try:
            document = yaml.safe_load(file)
        except yaml.YAMLError as error:
            raise ConfigError([f"<file>: {path} is not valid YAML ({error})"]) from error
    return validate_document(document)


def make_fixture(name: str) -> RunConfig:
    """Validated RunConfig of a catalog fixture."""
    return parse_config(fixture_path(name))


def load_config(reference: str) -> RunConfig:
    """A config file path, or the name of a fixture from the catalog."""
    if os.path.isfile(reference) or os.sep in reference or reference.endswith((".yaml", ".yml")):
        return parse_config(reference)
    return make_fixture(reference)


def apply_overrides(
    config: RunConfig,
    algo: Optional[str] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
) -> RunConfig:
    """Copy of ``config`` with command line overrides applied and revalidated."""
    document: Dict[str, Any] = config.model_dump(mode="json")
    algorithm = document["algorithm"]
    if algo is not None:
        algorithm["name"] = algo
    if max_iter is not None:
        algorithm["optimizer"]["max_iter"] = max_iter
        algorithm["scf"]["max_iter"] = max_iter
    if tol is not None:
        algorithm["optimizer"]["tol"] = tol
        algorithm["scf"]["eps_density"] = tol
    if seed is not None:
        document["seed"] = seed
    if out_dir is not None:
        document["output"]["dir"] = out_dir
    return validate_document(document)


def with_algorithm(config: RunConfig, name: str) -> RunConfig:
    """Same run with another algorithm label; optimizer and SCF settings are kept."""
    algorithm = config.algorithm.model_dump(mode="json")
    algorithm["name"] = name
    return config.model_copy(update={"algorithm": AlgorithmConfig.model_validate(algorithm)})
