# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Catalog of small deterministic systems shipped as YAML next to this module."""

import os
from typing import List

from ..common.exceptions import UnknownFixtureError

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def list_fixtures() -> List[str]:
    return sorted(name[: -len(".yaml")] for name in os.listdir(FIXTURE_DIR) if name.endswith(".yaml"))


def fixture_path(name: str) -> str:
    path = os.path.join(FIXTURE_DIR, f"{name}.yaml")
    if not os.path.isfile(path):
        raise UnknownFixtureError(f"unknown fixture '{name}'; available: {', '.join(list_fixtures())}")
    return path
