# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Preconditioned conjugate gradient minimization of the ensemble free energy over (Psi, eta).

Three variants share one loop: plain PCG flips the sign of a non-descent block,
restarted variant I flips and then restarts on a weak direction, and restarted
variant II restarts instead of flipping.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..common.constants import ExitCode, InitKind, Strategy, Variant
from ..common.exceptions import (
    EdftError,
    FlatOccupationError,
    InvariantViolation,
    LineEvaluationError,
    NoChemicalPotentialError,
    NotOrthonormalError,
    StationaryPointReached,
    UndefinedEstimatorError,
)
from ..common.logger import logger
from ..common.utils import make_rng
from ..gradients.gradients import (
    GradientPair,
    LinePoint,
    clamped_entries,
    eta_precond_floor,
    line_partials,
    precond_eta,
    precond_psi,
    psi_multiplier,
)
from ..linalg.block_linalg import (
    axpy,
    b_orthonormalize,
    diagonalize_and_rotate,
    inf_norm,
    inner,
    norm,
    orthonormality_error,
    project_tangent_adjoint,
    rotate_matrices,
    rotate_states,
    scale,
    sf_inf_norm,
    sf_norm,
)
from ..model.model import Evaluation, KohnShamModel, apply_hamiltonian, effective_potential, initial_density
from ..proto.config_protocol import OptimizerConfig
from ..proto.records import IterationRecord
from ..telemetry.edft_telemetry import edft_telemetry
from .linesearch import (
    NonmonotoneRef,
    StepInput,
    StepState,
    adaptive_double_step,
    dy_beta,
    nonmonotone_update,
    restart_condition,
    strategy_s1,
    strategy_s2,
    strategy_s3,
)

ORTHONORMALITY_TOL = 1e-10
ARMIJO_SLACK = 1e-13
DESCENT_SLACK = 1e-10

STRATEGIES = {
    Strategy.ENERGY: strategy_s1,
    Strategy.DERIVATIVE: strategy_s2,
    Strategy.PARTIAL_DERIVATIVES: strategy_s3,
}


def initial_guess(
    model: KohnShamModel, kind: InitKind = InitKind.RANDOM, seed: int = 0
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """B-orthonormal Psi0 and diagonal ascending eta0 from the superposition density potential.

    ``random`` draws seeded complex Gaussian coefficients damped by the kinetic
    preconditioner; ``ritz`` draws twice as many and keeps the lowest Ritz vectors.
    """
    rng = make_rng(seed)
    potential = effective_potential(model, initial_density(model))
    overlap = model.overlap_apply
    n = model.n_orbitals
    psi, eta = [], []
    for k, basis in enumerate(model.bases):
        width = n if kind == InitKind.RANDOM else min(2 * n, basis.size)
        raw = rng.standard_normal((basis.size, width)) + 1j * rng.standard_normal((basis.size, width))
        raw = psi_multiplier(basis.kinetic)[:, np.newaxis] * raw
        block = b_orthonormalize([raw], None if overlap is None else (lambda _, b, k=k: overlap(k, b)))[0]
        sigma = block.conj().T @ apply_hamiltonian(model, potential, k, block)
        sigma = 0.5 * (sigma + sigma.conj().T)
        if kind == InitKind.RITZ:
            values, vectors = np.linalg.eigh(sigma)
            block = block @ vectors[:, :n]
            eta.append(np.diag(values[:n]).astype(complex))
        else:
            eta.append(np.diag(np.real(np.diag(sigma))).astype(complex))
        psi.append(block)
    rotation = diagonalize_and_rotate(eta, psi)
    return rotation.psi, rotation.eta


@dataclass
class MinimizeResult:
    psi: List[np.ndarray]
    eta: List[np.ndarray]
    evaluation: Evaluation
    grads: GradientPair
    converged: bool
    iterations: int
    records: List[IterationRecord] = field(default_factory=list)
    exit_code: ExitCode = ExitCode.OK

    @property
    def energies(self):
        return self.evaluation.energies

    @property
    def error(self) -> float:
        return self.grads.error_metric


class _LineCache:
    """Line evaluations along one direction, keyed by the step pair.

    A trial whose occupations cannot be evaluated is cached as a failed point
    with an infinite value instead of ending the run.
    """

    def __init__(self, model, psi, eta, d_psi, d_eta, mu_guess):
        self.model = model
        self.args = (psi, eta, d_psi, d_eta)
        self.mu_guess = mu_guess
        self.points: Dict[Tuple[float, float], LinePoint] = {}

    def __call__(self, t_psi: float, t_eta: float) -> LinePoint:
        key = (float(t_psi), float(t_eta))
        if key not in self.points:
            try:
                self.points[key] = line_partials(self.model, *self.args, t_psi, t_eta, mu_guess=self.mu_guess)
            except (FlatOccupationError, NoChemicalPotentialError) as error:
                logger.debug(f"line point t_psi={t_psi:.3e} t_eta={t_eta:.3e} not evaluable: {error}")
                self.points[key] = LinePoint.failure()
        return self.points[key]


def _record(n, point_value, grads, mu, step: Optional[StepState] = None, beta=None, restarted=False):
    return IterationRecord(
        n=n,
        free_energy=point_value,
        grad_psi_half_norm=grads.grad_psi_half_norm,
        grad_eta_sf_norm=grads.grad_eta_sf_norm,
        error=grads.error_metric,
        t_psi=None if step is None else step.t_psi,
        t_eta=None if step is None else step.t_eta,
        beta=beta,
        zeta=None if step is None else step.zeta,
        restarted=restarted,
        mu=mu,
    )


def _log(record: IterationRecord):
    def fmt(value):
        return "-" if value is None else f"{value:.6e}"

    logger.iter(
        f"n={record.n:4d} F={record.free_energy:.12f} Ha error={record.error:.3e} "
        f"t_psi={fmt(record.t_psi)} t_eta={fmt(record.t_eta)} beta={fmt(record.beta)} "
        f"zeta={fmt(record.zeta)} restart={int(record.restarted)} mu={record.mu:.8f}"
    )


def _check(message: str, error_type=InvariantViolation):
    logger.error(message)
    raise error_type(message)


def _weak_direction(slope_psi: float, slope_eta: float) -> bool:
    """Restart test of variant II on the block slopes.

    A block whose slope is exactly zero only counts when the other one is not
    descending either; a vanishing block gradient alone is not an ascent.
    """
    return slope_psi > 0 or slope_eta > 0 or (slope_psi >= 0 and slope_eta >= 0)


DirectionHook = Callable[[int, List[np.ndarray], List[np.ndarray]], Tuple[List[np.ndarray], List[np.ndarray]]]


@edft_telemetry
def minimize(
    model: KohnShamModel,
    config: OptimizerConfig,
    psi0: Optional[Sequence[np.ndarray]] = None,
    eta0: Optional[Sequence[np.ndarray]] = None,
    seed: int = 0,
    init: InitKind = InitKind.RANDOM,
    direction_hook: Optional[DirectionHook] = None,
) -> MinimizeResult:
    """Minimize F(Psi, eta) with the configured variant and step size strategy.

    :param psi0: B-orthonormal starting orbitals; drawn by ``initial_guess`` when omitted.
    :param eta0: Hermitian starting eta; rotated to diagonal form before the first step.
    :param direction_hook: called as ``hook(n, d_psi, d_eta)`` on the projected conjugate
        direction before the sign flip or restart; returns the direction to use.
    :return: the last iterate, its evaluation and gradients, and one record per iteration.
    """
    if psi0 is None or eta0 is None:
        psi0, eta0 = initial_guess(model, init, seed)
    overlap = model.overlap_apply
    rotation = diagonalize_and_rotate(list(eta0), list(psi0))
    start = line_partials(model, rotation.psi, rotation.eta, scale(rotation.psi, 0.0), scale(rotation.eta, 0.0), 0, 0)
    point: LinePoint = start
    ref = NonmonotoneRef(c_value=point.value, q_value=1.0)
    strategy = STRATEGIES[config.strategy]
    t_prev = (config.t_trial_init, config.t_trial_init)
    d_prev: Optional[Tuple[List[np.ndarray], List[np.ndarray]]] = None
    g_prev: Optional[Tuple[List[np.ndarray], List[np.ndarray]]] = None
    records: List[IterationRecord] = []
    q_upper = 1.0 / (1.0 - config.alpha)
    converged = False
    force_steepest = False
    clamp_warned = False
    n = 0

    logger.info(f"minimize: variant={config.variant} strategy={config.strategy} tol={config.tol:.1e}")
    records.append(_record(0, point.value, point.grads, point.evaluation.occ.mu))
    _log(records[-1])

    while True:
        grads = point.grads
        if grads.error_metric < config.tol:
            converged = True
            break
        if n >= config.max_iter:
            break
        n += 1
        psi, eta = point.psi, point.eta
        g_psi, g_eta = grads.g_psi, grads.g_eta
        pg_psi = precond_psi(model, grads.residual)
        pg_eta = precond_eta(model, grads)
        if not clamp_warned and clamped_entries(model, grads):
            logger.warning(
                f"n={n}: eta preconditioner floor {eta_precond_floor(model):.3e} reached; "
                "states far from mu follow Sigma directly"
            )
            clamp_warned = True

        beta = dy_beta(
            g_psi,
            g_eta,
            pg_psi,
            pg_eta,
            None if d_prev is None else d_prev[0],
            None if d_prev is None else d_prev[1],
            None if g_prev is None else g_prev[0],
            None if g_prev is None else g_prev[1],
            inner,
        )
        restarted = beta is None or force_steepest
        if beta is None:
            logger.debug(f"n={n}: DY denominator vanished, restarting")
        if restarted:
            beta = 0.0
        if d_prev is None or beta == 0.0:
            d_psi, d_eta = scale(pg_psi, -1.0), scale(pg_eta, -1.0)
        else:
            d_psi = axpy(-1.0, pg_psi, scale(d_prev[0], beta))
            d_eta = axpy(-1.0, pg_eta, scale(d_prev[1], beta))
        d_psi = project_tangent_adjoint(psi, d_psi, 0.0, overlap)
        steepest = (project_tangent_adjoint(psi, scale(pg_psi, -1.0), 0.0, overlap), scale(pg_eta, -1.0))
        if direction_hook is not None:
            d_psi, d_eta = direction_hook(n, d_psi, d_eta)

        slope_psi = inner(g_psi, d_psi).real
        slope_eta = inner(g_eta, d_eta).real
        signal: Optional[EdftError] = None
        try:
            if config.variant == Variant.RESTART_II:
                if _weak_direction(slope_psi, slope_eta) or restart_condition(
                    g_psi, g_eta, d_psi, d_eta, pg_psi, pg_eta, config.gamma, config.a, inner
                ):
                    logger.debug(f"n={n}: restarting, slopes ({slope_psi:.3e}, {slope_eta:.3e})")
                    d_psi, d_eta = steepest
                    restarted = True
                    beta = 0.0
            else:
                if slope_psi > 0:
                    logger.debug(f"n={n}: Psi block is not a descent direction, flipping its sign")
                    d_psi = scale(d_psi, -1.0)
                if slope_eta > 0:
                    logger.debug(f"n={n}: eta block is not a descent direction, flipping its sign")
                    d_eta = scale(d_eta, -1.0)
                if config.variant == Variant.RESTART_I and restart_condition(
                    g_psi, g_eta, d_psi, d_eta, pg_psi, pg_eta, config.gamma, config.a, inner
                ):
                    d_psi, d_eta = steepest
                    restarted = True
                    beta = 0.0
        except StationaryPointReached as exc:
            signal = exc

        if signal is None:
            slope_psi = inner(g_psi, d_psi).real
            slope_eta = inner(g_eta, d_eta).real
            if config.check_invariants:
                scale_psi = DESCENT_SLACK * abs(inner(g_psi, pg_psi))
                scale_eta = DESCENT_SLACK * abs(inner(g_eta, pg_eta))
                if slope_psi > scale_psi or slope_eta > scale_eta:
                    _check(f"n={n}: non-descent direction, slopes ({slope_psi:.3e}, {slope_eta:.3e})")
            # rounding in the projection can leave a tiny positive slope after a restart
            if slope_psi > 0:
                d_psi, slope_psi = scale(d_psi, -1.0), -slope_psi
            if slope_eta > 0:
                d_eta, slope_eta = scale(d_eta, -1.0), -slope_eta

            step_input = StepInput(
                f0=point.value,
                g_psi=slope_psi,
                g_eta=slope_eta,
                d_psi_inf=inf_norm(d_psi),
                d_eta_sf_inf=sf_inf_norm(d_eta),
                d_norm2=norm(d_psi) ** 2 + sf_norm(d_eta) ** 2,
                t_prev_psi=max(t_prev) if config.strategy != Strategy.PARTIAL_DERIVATIVES else t_prev[0],
                t_prev_eta=max(t_prev) if config.strategy != Strategy.PARTIAL_DERIVATIVES else t_prev[1],
                t_min_psi=config.t_min_psi,
                t_min_eta=config.t_min_eta,
                theta_max=config.theta_max,
            )
            line = _LineCache(model, psi, eta, d_psi, d_eta, point.evaluation.occ.mu)
            try:
                if slope_psi == 0.0 and slope_eta == 0.0:
                    raise StationaryPointReached("both directional derivatives vanish")
                chosen = strategy(step_input, line)
                step = adaptive_double_step(step_input, chosen, config.nu, ref.c_value, config.ratio_bounds)
            except (StationaryPointReached, UndefinedEstimatorError) as exc:
                signal = exc

        if signal is not None:
            converged = grads.error_metric <= config.tol
            if converged or force_steepest:
                logger.warning(f"n={n}: {signal}; stopping at error={grads.error_metric:.3e}")
                break
            logger.info(f"n={n}: {signal}; retrying along the preconditioned steepest descent")
            force_steepest = True
            n -= 1
            continue

        candidate = line(step.t_psi, step.t_eta)
        bound = config.nu * (step.t_psi * slope_psi + step.t_eta * slope_eta) + ARMIJO_SLACK * (1 + abs(ref.c_value))
        halvings = 0
        while candidate.value - ref.c_value > bound and halvings < config.max_backtracks:
            step.t_psi *= 0.5
            step.t_eta *= 0.5
            halvings += 1
            candidate = line(step.t_psi, step.t_eta)
            bound = config.nu * (step.t_psi * slope_psi + step.t_eta * slope_eta)
            bound += ARMIJO_SLACK * (1 + abs(ref.c_value))
        if candidate.failed:
            raise LineEvaluationError(
                f"n={n}: occupations undefined along the direction after {halvings} halvings"
            )
        excess = candidate.value - ref.c_value - bound
        if excess > 0:
            message = f"n={n}: sufficient decrease not met after {halvings} halvings, excess {excess:.3e} Ha"
            if config.check_invariants:
                _check(message)
            logger.warning(message)
        elif halvings:
            (logger.warning if halvings > 2 else logger.debug)(f"n={n}: step halved {halvings} times")

        unitaries = candidate.unitaries
        d_prev = (rotate_states(d_psi, unitaries), rotate_matrices(d_eta, unitaries))
        g_prev = (rotate_states(g_psi, unitaries), rotate_matrices(g_eta, unitaries))
        t_prev = (step.t_psi, step.t_eta)
        point = candidate
        ref = nonmonotone_update(ref, point.value, config.alpha)
        force_steepest = False

        if config.check_invariants:
            ortho_error = orthonormality_error(point.psi, overlap)
            if ortho_error > ORTHONORMALITY_TOL:
                _check(f"n={n}: orthonormality error {ortho_error:.3e}", NotOrthonormalError)
            if not 1.0 <= ref.q_value <= q_upper + 1e-12:
                _check(f"n={n}: Q_n={ref.q_value} outside [1, {q_upper}]")

        records.append(
            _record(n, point.value, point.grads, point.evaluation.occ.mu, step, beta, restarted)
        )
        _log(records[-1])

    exit_code = ExitCode.OK if converged else ExitCode.NOT_CONVERGED
    if not converged:
        logger.warning(f"minimize: not converged after {n} iterations, error={point.grads.error_metric:.3e}")
    else:
        logger.info(f"minimize: converged after {n} iterations, F={point.value:.12f} Ha")
    return MinimizeResult(
        psi=point.psi,
        eta=point.eta,
        evaluation=point.evaluation,
        grads=point.grads,
        converged=converged,
        iterations=n,
        records=records,
        exit_code=exit_code,
    )
