# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Small builders shared by the test suites."""

from typing import Any, Dict, List, Tuple

import numpy as np

from edft.cores.common.utils import make_rng, random_hermitian
from edft.cores.linalg.block_linalg import b_orthonormalize
from edft.cores.model.model import KohnShamModel, build_model
from edft.cores.proto.config_protocol import RunConfig
from edft.cores.runner.config import make_fixture, validate_document


def _merge(target: Dict[str, Any], updates: Dict[str, Any]):
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _merge(target[key], value)
        else:
            target[key] = value


def fixture_config(name: str, **updates) -> RunConfig:
    """Catalog fixture with nested dict updates, e.g. ``model={"xc": "none"}``."""
    document = make_fixture(name).model_dump(mode="json")
    _merge(document, updates)
    return validate_document(document)


def fixture_model(name: str, **updates) -> KohnShamModel:
    return build_model(fixture_config(name, **updates))


def random_orbitals(model: KohnShamModel, seed: int = 0) -> List[np.ndarray]:
    rng = make_rng(seed)
    blocks = [
        rng.standard_normal((b.size, model.n_orbitals)) + 1j * rng.standard_normal((b.size, model.n_orbitals))
        for b in model.bases
    ]
    return b_orthonormalize(blocks, model.overlap_apply)


def random_eta(model: KohnShamModel, seed: int = 0, scale: float = 0.1) -> List[np.ndarray]:
    rng = make_rng(seed)
    return [random_hermitian(model.n_orbitals, rng, scale) for _ in model.bases]


def diagonal_eta(values_per_k: List[List[float]]) -> List[np.ndarray]:
    return [np.diag(np.asarray(v, dtype=float)).astype(complex) for v in values_per_k]


def random_point(model: KohnShamModel, seed: int = 0) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    return random_orbitals(model, seed), random_eta(model, seed + 1)
