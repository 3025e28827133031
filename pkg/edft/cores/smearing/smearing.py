# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Smearing and entropy pairs (f, S), chemical potential and occupation matrices.

Every pair satisfies S'(x) = x f'(x). Arguments are x = (e - mu) / sigma.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, eval_hermite, expit

from ..common.constants import MV_A_DEFAULT, SmearingKind
from ..common.exceptions import InfeasibleElectronCountError, InvalidMatrixError, NoChemicalPotentialError
from ..common.logger import logger
from ..common.utils import is_diagonal
from ..proto.config_protocol import SmearingSpec

SQRT_PI = math.sqrt(math.pi)
BRACKET_WIDTH = 60.0

SmearingLike = Union[SmearingSpec, SmearingKind]


def _resolve(spec: SmearingLike, mp_order: Optional[int] = None, mv_a: Optional[float] = None):
    if isinstance(spec, SmearingSpec):
        kind, order, a = spec.kind, spec.mp_order, spec.mv_a
    else:
        kind, order, a = SmearingKind(spec), 1, MV_A_DEFAULT
    if mp_order is not None:
        order = mp_order
    if mv_a is not None:
        a = mv_a
    return kind, order, a


def mp_coefficient(i: int) -> float:
    """Methfessel-Paxton expansion coefficient A_i = (-1)^i / (i! 4^i sqrt(pi))."""
    return (-1) ** i / (math.factorial(i) * 4**i * SQRT_PI)


def _gauss(x):
    return np.exp(-np.minimum(x * x, 745.0))


def f_value(spec: SmearingLike, x, mp_order: Optional[int] = None, mv_a: Optional[float] = None):
    kind, order, a = _resolve(spec, mp_order, mv_a)
    x = np.asarray(x, dtype=float)
    if kind == SmearingKind.FERMI_DIRAC:
        return expit(-x)
    if kind == SmearingKind.GAUSSIAN:
        return 0.5 * erfc(x)
    if kind == SmearingKind.METHFESSEL_PAXTON:
        value = 0.5 * erfc(x)
        for i in range(1, order + 1):
            value = value + mp_coefficient(i) * eval_hermite(2 * i - 1, x) * _gauss(x)
        return value
    return 0.5 * erfc(x) + (-2.0 * a * x * x + 2.0 * x + a) * _gauss(x) / (4.0 * SQRT_PI)


def f_prime(spec: SmearingLike, x, mp_order: Optional[int] = None, mv_a: Optional[float] = None):
    kind, order, a = _resolve(spec, mp_order, mv_a)
    x = np.asarray(x, dtype=float)
    if kind == SmearingKind.FERMI_DIRAC:
        return -expit(x) * expit(-x)
    if kind == SmearingKind.GAUSSIAN:
        return -_gauss(x) / SQRT_PI
    if kind == SmearingKind.METHFESSEL_PAXTON:
        value = np.zeros_like(x)
        for i in range(order + 1):
            value = value - mp_coefficient(i) * eval_hermite(2 * i, x)
        return value * _gauss(x)
    return (-0.5 - 1.5 * a * x - x * x + a * x**3) * _gauss(x) / SQRT_PI


def s_value(spec: SmearingLike, x, mp_order: Optional[int] = None, mv_a: Optional[float] = None):
    kind, order, a = _resolve(spec, mp_order, mv_a)
    x = np.asarray(x, dtype=float)
    if kind == SmearingKind.FERMI_DIRAC:
        f = expit(-x)
        return f * np.logaddexp(0.0, x) + (1.0 - f) * np.logaddexp(0.0, -x)
    if kind == SmearingKind.GAUSSIAN:
        return _gauss(x) / (2.0 * SQRT_PI)
    if kind == SmearingKind.METHFESSEL_PAXTON:
        return 0.5 * mp_coefficient(order) * eval_hermite(2 * order, x) * _gauss(x)
    # antiderivative of x f'(x) for the f above
    return (0.75 + 0.5 * x * x - 0.5 * a * x**3) * _gauss(x) / SQRT_PI


def divided_difference_f(spec: SmearingSpec, sigma: float, mu: float, e1, e2):
    """(f((e2-mu)/sigma) - f((e1-mu)/sigma)) / (e2 - e1), or f'((e1-mu)/sigma)/sigma on the diagonal.

    Broadcasts over ``e1`` and ``e2``.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    delta = e2 - e1
    switch = 1e-8 * np.maximum(1.0, np.maximum(np.abs(e1), np.abs(e2)))
    close = np.abs(delta) <= switch
    x1 = (e1 - mu) / sigma
    x2 = (e2 - mu) / sigma
    safe = np.where(close, 1.0, delta)
    secant = (f_value(spec, x2) - f_value(spec, x1)) / safe
    tangent = f_prime(spec, x1) / sigma
    result = np.where(close, tangent, secant)
    return float(result) if result.ndim == 0 else result


def divided_difference_matrix(spec: SmearingSpec, mu: float, eigs: np.ndarray) -> np.ndarray:
    """Matrix of divided differences d_ij between the entries of ``eigs``."""
    eigs = np.asarray(eigs, dtype=float)
    return divided_difference_f(spec, spec.sigma, mu, eigs[:, np.newaxis], eigs[np.newaxis, :])


def default_orbital_count(n_e: float) -> int:
    """N_b + floor(0.2 N_b) orbitals, never fewer than N_b + 1."""
    n_b = math.ceil(n_e / 2)
    return max(n_b + int(math.floor(0.2 * n_b)), n_b + 1)


def _counting(spec: SmearingSpec, eigs: List[np.ndarray], weights: np.ndarray, n_e: float):
    def count(mu):
        return sum(w * np.sum(f_value(spec, (e - mu) / spec.sigma)) for e, w in zip(eigs, weights)) - n_e

    def slope(mu):
        return sum(-w * np.sum(f_prime(spec, (e - mu) / spec.sigma)) for e, w in zip(eigs, weights)) / spec.sigma

    return count, slope


def _scan_brackets(count, lower: float, upper: float, step: float) -> List[Tuple[float, float]]:
    grid = np.arange(lower, upper + step, step)
    values = np.array([count(m) for m in grid])
    brackets = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            brackets.append((grid[i], grid[i]))
        elif values[i] * values[i + 1] < 0:
            brackets.append((grid[i], grid[i + 1]))
    return brackets


def solve_mu(
    eta_eigs: Sequence[np.ndarray],
    weights: Sequence[float],
    spec: SmearingSpec,
    n_e: float,
    mu_guess: Optional[float] = None,
) -> float:
    """Chemical potential with sum_k w_k sum_i f((e_ki - mu)/sigma) = n_e.

    :param mu_guess: warm start; for non-monotone smearings the root nearest to it is returned.
    """
    eigs = [np.asarray(e, dtype=float).reshape(-1) for e in eta_eigs]
    weights = np.asarray(weights, dtype=float)
    capacity = float(sum(w * e.size for e, w in zip(eigs, weights)))
    if not 0 < n_e < capacity:
        raise InfeasibleElectronCountError(f"need 0 < N_e < {capacity}, got N_e={n_e}")
    everything = np.concatenate(eigs)
    if not np.all(np.isfinite(everything)):
        raise NoChemicalPotentialError("non-finite eigenvalues")
    lower = float(everything.min()) - BRACKET_WIDTH * spec.sigma
    upper = float(everything.max()) + BRACKET_WIDTH * spec.sigma
    count, slope = _counting(spec, eigs, weights, n_e)

    if spec.kind.is_monotone:
        if count(lower) * count(upper) > 0:
            raise NoChemicalPotentialError(f"no sign change of the electron count on [{lower:.6g}, {upper:.6g}]")
        mu = brentq(count, lower, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    else:
        if mu_guess is None:
            ordered = np.sort(everything)
            mu_guess = float(ordered[min(math.ceil(n_e / 2), ordered.size) - 1])
        brackets = _scan_brackets(count, lower, upper, 0.25 * spec.sigma)
        if not brackets:
            raise NoChemicalPotentialError(f"no sign change of the electron count on [{lower:.6g}, {upper:.6g}]")
        lo, hi = min(brackets, key=lambda b: abs(0.5 * (b[0] + b[1]) - mu_guess))
        if len(brackets) > 1:
            logger.debug(f"{len(brackets)} roots of the electron count; keeping the one nearest {mu_guess:.8f}")
        mu = lo if lo == hi else brentq(count, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    residual = count(mu)
    for _ in range(5):
        if abs(residual) <= 1e-14 * n_e:
            break
        derivative = slope(mu)
        if derivative == 0.0:
            break
        candidate = mu - residual / derivative
        candidate_residual = count(candidate)
        if abs(candidate_residual) >= abs(residual):
            break
        mu, residual = candidate, candidate_residual
    return float(mu)


def _check_hermitian(eta_k: np.ndarray):
    eta_k = np.asarray(eta_k)
    if eta_k.ndim != 2 or eta_k.shape[0] != eta_k.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {eta_k.shape}")
    deviation = np.linalg.norm(eta_k - eta_k.conj().T)
    if deviation > 1e-10:
        raise InvalidMatrixError(f"matrix is not Hermitian (||A - A*||_F = {deviation:.3e})")


def eigen_decompose(eta_k: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Eigenvalues and eigenvectors; vectors are None on the diagonal fast path."""
    _check_hermitian(eta_k)
    if is_diagonal(eta_k):
        return np.real(np.diag(eta_k)).copy(), None
    eigs, vectors = np.linalg.eigh(0.5 * (eta_k + eta_k.conj().T))
    return eigs, vectors


def _matrix_function(values: np.ndarray, vectors: Optional[np.ndarray]) -> np.ndarray:
    if vectors is None:
        return np.diag(values).astype(complex)
    result = (vectors * values[np.newaxis, :]) @ vectors.conj().T
    return 0.5 * (result + result.conj().T)


def occupation_matrix(eta_k: np.ndarray, mu: float, spec: SmearingSpec) -> np.ndarray:
    """F = f((eta - mu I) / sigma) as a Hermitian matrix."""
    eigs, vectors = eigen_decompose(eta_k)
    return _matrix_function(f_value(spec, (eigs - mu) / spec.sigma), vectors)


def entropy_term(eta: Sequence[np.ndarray], mu: float, weights: Sequence[float], spec: SmearingSpec) -> float:
    """-sigma sum_k w_k tr S((eta_k - mu I) / sigma)."""
    total = 0.0
    for eta_k, w in zip(eta, weights):
        eigs, _ = eigen_decompose(eta_k)
        total += w * float(np.sum(s_value(spec, (eigs - mu) / spec.sigma)))
    return -spec.sigma * total


@dataclass
class OccupationState:
    """Chemical potential and occupation matrices for one set of eta blocks."""

    mu: float
    f_matrices: List[np.ndarray]
    eigenvalues: List[np.ndarray]
    eigenvectors: List[Optional[np.ndarray]]
    occupations: List[np.ndarray]
    electron_count: float
    weights: np.ndarray
    spec: SmearingSpec

    def trace_count(self) -> float:
        return float(sum(w * np.real(np.trace(f)) for f, w in zip(self.f_matrices, self.weights)))

    def entropy(self) -> float:
        total = sum(
            w * float(np.sum(s_value(self.spec, (e - self.mu) / self.spec.sigma)))
            for e, w in zip(self.eigenvalues, self.weights)
        )
        return -self.spec.sigma * total


def occupation_state(
    eta: Sequence[np.ndarray],
    weights: Sequence[float],
    spec: SmearingSpec,
    n_e: float,
    mu_guess: Optional[float] = None,
) -> OccupationState:
    decompositions = [eigen_decompose(eta_k) for eta_k in eta]
    eigenvalues = [d[0] for d in decompositions]
    eigenvectors = [d[1] for d in decompositions]
    mu = solve_mu(eigenvalues, weights, spec, n_e, mu_guess=mu_guess)
    occupations = [f_value(spec, (e - mu) / spec.sigma) for e in eigenvalues]
    f_matrices = [_matrix_function(f, v) for f, v in zip(occupations, eigenvectors)]
    return OccupationState(
        mu=mu,
        f_matrices=f_matrices,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        occupations=occupations,
        electron_count=float(n_e),
        weights=np.asarray(weights, dtype=float),
        spec=spec,
    )
