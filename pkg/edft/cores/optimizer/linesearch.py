# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Adaptive double step size strategy, curvature strategies, DY parameter and restart test."""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from ..common.exceptions import LineEvaluationError, StationaryPointReached, UndefinedEstimatorError

CURVATURE_FLOOR = 1e-14
DY_RESTART_RATIO = 1e-14
TRIAL_SHRINKS = 30


@dataclass(frozen=True)
class NonmonotoneRef:
    """Reference value C_n and weight Q_n of the nonmonotone sufficient decrease test."""

    c_value: float
    q_value: float = 1.0


def nonmonotone_update(ref: NonmonotoneRef, f_new: float, alpha: float) -> NonmonotoneRef:
    """Q' = alpha Q + 1, C' = (alpha Q C + f_new) / Q'."""
    q_new = alpha * ref.q_value + 1.0
    return NonmonotoneRef(c_value=(alpha * ref.q_value * ref.c_value + f_new) / q_new, q_value=q_new)


def estimator_zeta(
    f0: float, dfd_psi: float, dfd_eta: float, c1: float, c2: float, t_psi: float, t_eta: float, c_ref: float
) -> float:
    """Ratio of the quadratic-model decrease (relative to C) to the first order decrease."""
    linear = t_psi * dfd_psi + t_eta * dfd_eta
    if linear == 0.0:
        raise UndefinedEstimatorError("first order decrease vanishes; both directional derivatives are zero")
    return (f0 + linear + 0.5 * c1 * t_psi**2 + 0.5 * c2 * t_eta**2 - c_ref) / linear


def _cap(theta: float, direction_norm: float) -> float:
    return math.inf if direction_norm == 0.0 else theta / direction_norm


@dataclass
class StepInput:
    """Quantities at (0, 0) shared by every strategy."""

    f0: float
    g_psi: float
    g_eta: float
    d_psi_inf: float
    d_eta_sf_inf: float
    d_norm2: float
    t_prev_psi: float
    t_prev_eta: float
    t_min_psi: float
    t_min_eta: float
    theta_max: float


@dataclass
class StrategyResult:
    c1: float
    c2: float
    t_init_psi: float
    t_init_eta: float
    theta_psi: float
    theta_eta: float
    curvature: float
    trial: object = None


@dataclass
class StepState:
    t_psi: float
    t_eta: float
    c1: float
    c2: float
    zeta: float
    accepted: bool


def _split_curvature(step: StepInput, t_model: float) -> Tuple[float, float]:
    """(c1, c2) whose separate minimizers both sit at t_model."""
    return max(-step.g_psi, 0.0) / t_model, max(-step.g_eta, 0.0) / t_model


def point_failed(point) -> bool:
    return bool(getattr(point, "failed", False))


def feasible_trial(line: Callable, t_psi: float, t_eta: float):
    """Evaluate the trial pair, halving both steps while the point cannot be evaluated.

    :return: (point, t_psi, t_eta) at the first pair that evaluates.
    """
    point = line(t_psi, t_eta)
    shrinks = 0
    while point_failed(point):
        if shrinks == TRIAL_SHRINKS:
            raise LineEvaluationError(f"no evaluable trial point after {TRIAL_SHRINKS} halvings")
        t_psi, t_eta = 0.5 * t_psi, 0.5 * t_eta
        point = line(t_psi, t_eta)
        shrinks += 1
    return point, t_psi, t_eta


def _common_trial(step: StepInput):
    combined = math.hypot(step.d_psi_inf, step.d_eta_sf_inf)
    theta = min(step.theta_max, combined)
    cap = _cap(theta, combined)
    t_trial = min(max(step.t_min_psi, step.t_prev_psi), cap)
    theta_psi = 0.0 if combined == 0 else theta * step.d_psi_inf / combined
    theta_eta = 0.0 if combined == 0 else theta * step.d_eta_sf_inf / combined
    return t_trial, cap, theta_psi, theta_eta


def _finish_common(step: StepInput, curvature: float, t_trial: float, cap: float, theta_psi, theta_eta, trial):
    slope = step.g_psi + step.g_eta
    t_m = -slope / curvature if curvature > 0 else -1.0
    if t_m > 0:
        t_init, t_model = min(t_m, cap), t_m
    else:
        curvature = max(curvature, CURVATURE_FLOOR * step.d_norm2)
        t_init = t_model = t_trial
    c1, c2 = _split_curvature(step, t_model)
    return StrategyResult(c1, c2, t_init, t_init, theta_psi, theta_eta, curvature, trial)


def strategy_s1(step: StepInput, line: Callable) -> StrategyResult:
    """Common step; curvature from the energy at one trial step."""
    t_trial, cap, theta_psi, theta_eta = _common_trial(step)
    trial, t_trial, _ = feasible_trial(line, t_trial, t_trial)
    slope = step.g_psi + step.g_eta
    curvature = 2.0 * (trial.value - step.f0 - t_trial * slope) / t_trial**2
    return _finish_common(step, curvature, t_trial, cap, theta_psi, theta_eta, trial)


def strategy_s2(step: StepInput, line: Callable) -> StrategyResult:
    """Common step; curvature from the derivative along the diagonal at one trial step."""
    t_trial, cap, theta_psi, theta_eta = _common_trial(step)
    trial, t_trial, _ = feasible_trial(line, t_trial, t_trial)
    slope = step.g_psi + step.g_eta
    curvature = (trial.d_t_psi + trial.d_t_eta - slope) / t_trial
    return _finish_common(step, curvature, t_trial, cap, theta_psi, theta_eta, trial)


def strategy_s3(step: StepInput, line: Callable) -> StrategyResult:
    """Separate steps; curvatures from both partial derivatives at one trial pair."""
    theta_psi = min(step.theta_max, step.d_psi_inf)
    theta_eta = min(step.theta_max, step.d_eta_sf_inf)
    cap_psi = _cap(theta_psi, step.d_psi_inf)
    cap_eta = _cap(theta_eta, step.d_eta_sf_inf)
    t_psi_trial = min(max(step.t_min_psi, step.t_prev_psi), cap_psi)
    t_eta_trial = min(max(step.t_min_eta, step.t_prev_eta), cap_eta)
    trial, t_psi_trial, t_eta_trial = feasible_trial(line, t_psi_trial, t_eta_trial)
    c1 = (trial.d_t_psi - step.g_psi) / t_psi_trial
    c2 = (trial.d_t_eta - step.g_eta) / t_eta_trial
    t_m_psi = -step.g_psi / c1 if c1 > 0 else -1.0
    t_m_eta = -step.g_eta / c2 if c2 > 0 else -1.0
    if t_m_psi > 0 and t_m_eta > 0:
        t_init_psi, t_init_eta = min(t_m_psi, cap_psi), min(t_m_eta, cap_eta)
    else:
        t_init_psi, t_init_eta = t_psi_trial, t_eta_trial
    floor = CURVATURE_FLOOR * step.d_norm2
    c1 = 0.0 if step.g_psi == 0.0 else max(c1, floor)
    c2 = 0.0 if step.g_eta == 0.0 else max(c2, floor)
    return StrategyResult(c1, c2, t_init_psi, t_init_eta, theta_psi, theta_eta, c1 + c2, trial)


def adaptive_double_step(
    step: StepInput,
    strategy: StrategyResult,
    nu: float,
    c_ref: float,
    ratio_bounds: Optional[Tuple[float, float]] = None,
) -> StepState:
    """Accept the initial pair when the estimator reaches nu, else move to the model minimizer."""
    if step.g_psi == 0.0 and step.g_eta == 0.0:
        raise StationaryPointReached("both directional derivatives vanish")
    cap_psi = _cap(strategy.theta_psi, step.d_psi_inf)
    cap_eta = _cap(strategy.theta_eta, step.d_eta_sf_inf)
    t_psi = min(max(strategy.t_init_psi, step.t_min_psi), cap_psi)
    t_eta = min(max(strategy.t_init_eta, step.t_min_eta), cap_eta)
    c1, c2 = strategy.c1, strategy.c2
    zeta = estimator_zeta(step.f0, step.g_psi, step.g_eta, c1, c2, t_psi, t_eta, c_ref)
    accepted = zeta >= nu
    if not accepted:
        model_psi = -step.g_psi / c1 if c1 > 0 else None
        model_eta = -step.g_eta / c2 if c2 > 0 else None
        if model_psi is None:
            model_psi = model_eta
        if model_eta is None:
            model_eta = model_psi
        t_psi = min(model_psi, cap_psi)
        t_eta = min(model_eta, cap_eta)
    if ratio_bounds is not None and t_psi > 0:
        lower, upper = ratio_bounds
        if t_eta / t_psi < lower:
            t_psi = t_eta / lower
        elif t_eta / t_psi > upper:
            t_eta = upper * t_psi
    return StepState(t_psi=t_psi, t_eta=t_eta, c1=c1, c2=c2, zeta=zeta, accepted=accepted)


def dy_beta(
    g_psi, g_eta, pg_psi, pg_eta, d_psi_prev, d_eta_prev, g_psi_prev, g_eta_prev, inner: Callable
) -> Optional[float]:
    """Dai-Yuan parameter; 0 without a previous direction, None when a restart is forced."""
    if d_psi_prev is None or d_eta_prev is None:
        return 0.0
    numerator = (inner(pg_psi, g_psi) + inner(pg_eta, g_eta)).real
    diff_psi = [a - b for a, b in zip(g_psi, g_psi_prev)]
    diff_eta = [a - b for a, b in zip(g_eta, g_eta_prev)]
    denominator = (inner(d_psi_prev, diff_psi) + inner(d_eta_prev, diff_eta)).real
    if denominator == 0.0 or abs(denominator) < DY_RESTART_RATIO * abs(numerator):
        return None
    return numerator / denominator


def restart_ratio(
    g_psi, g_eta, d_psi, d_eta, pg_psi, pg_eta, a: float, inner: Callable
) -> float:
    """-Re(<G_Psi, D_Psi> + <G_eta, D_eta>) / (|<G_Psi, M G_Psi>|^a + |<G_eta, M G_eta>|^a)."""
    denominator = abs(inner(g_psi, pg_psi)) ** a + abs(inner(g_eta, pg_eta)) ** a
    if denominator == 0.0:
        raise StationaryPointReached("preconditioned gradients vanish")
    return -(inner(g_psi, d_psi) + inner(g_eta, d_eta)).real / denominator


def restart_condition(g_psi, g_eta, d_psi, d_eta, pg_psi, pg_eta, gamma: float, a: float, inner: Callable) -> bool:
    return restart_ratio(g_psi, g_eta, d_psi, d_eta, pg_psi, pg_eta, a, inner) < gamma
