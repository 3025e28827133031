# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import math
import unittest
from collections import namedtuple

import numpy as np

from edft.cores.common.exceptions import LineEvaluationError, StationaryPointReached, UndefinedEstimatorError
from edft.cores.linalg.block_linalg import inner
from edft.cores.optimizer.linesearch import (
    NonmonotoneRef,
    StepInput,
    StrategyResult,
    adaptive_double_step,
    dy_beta,
    estimator_zeta,
    feasible_trial,
    nonmonotone_update,
    restart_condition,
    restart_ratio,
    strategy_s1,
    strategy_s2,
    strategy_s3,
)

Point = namedtuple("Point", ["value", "d_t_psi", "d_t_eta"])
GuardedPoint = namedtuple("GuardedPoint", ["value", "d_t_psi", "d_t_eta", "failed"])

F0, G1, G2, A1, A2 = 1.0, -0.3, -0.2, 2.0, 1.0


def quadratic_line(t_psi, t_eta):
    """F(t1, t2) = F0 + G1 t1 + G2 t2 + A1 t1^2 / 2 + A2 t2^2 / 2."""
    value = F0 + G1 * t_psi + G2 * t_eta + 0.5 * A1 * t_psi**2 + 0.5 * A2 * t_eta**2
    return Point(value, G1 + A1 * t_psi, G2 + A2 * t_eta)


def make_step(**updates):
    values = dict(
        f0=F0,
        g_psi=G1,
        g_eta=G2,
        d_psi_inf=1.0,
        d_eta_sf_inf=1.0,
        d_norm2=2.0,
        t_prev_psi=0.1,
        t_prev_eta=0.1,
        t_min_psi=0.001,
        t_min_eta=0.001,
        theta_max=0.8,
    )
    values.update(updates)
    return StepInput(**values)


class TestStrategies(unittest.TestCase):
    def test_partial_derivatives(self):
        result = strategy_s3(make_step(), quadratic_line)
        self.assertAlmostEqual(result.c1, A1)
        self.assertAlmostEqual(result.c2, A2)
        self.assertAlmostEqual(result.t_init_psi, 0.15)
        self.assertAlmostEqual(result.t_init_eta, 0.2)
        self.assertAlmostEqual(result.theta_psi, 0.8)

    def test_common_step(self):
        for strategy in (strategy_s1, strategy_s2):
            with self.subTest(strategy=strategy.__name__):
                result = strategy(make_step(), quadratic_line)
                self.assertAlmostEqual(result.curvature, A1 + A2)
                self.assertAlmostEqual(result.t_init_psi, 0.5 / 3.0)
                self.assertEqual(result.t_init_psi, result.t_init_eta)
                # both separate model minimizers sit at the common step
                self.assertAlmostEqual(-G1 / result.c1, 0.5 / 3.0)
                self.assertAlmostEqual(-G2 / result.c2, 0.5 / 3.0)
                self.assertAlmostEqual(result.trial.value, 0.965)

    def test_concave_trial(self):
        def concave(t_psi, t_eta):
            return Point(F0 + G1 * t_psi + G2 * t_eta - t_psi**2 - t_eta**2, G1 - 2 * t_psi, G2 - 2 * t_eta)

        result = strategy_s3(make_step(), concave)
        self.assertEqual((result.t_init_psi, result.t_init_eta), (0.1, 0.1))
        self.assertGreater(result.c1, 0.0)
        result = strategy_s1(make_step(), concave)
        self.assertAlmostEqual(result.t_init_psi, 0.1)
        self.assertAlmostEqual(-G1 / result.c1, 0.1)

    def test_trial_step_capped(self):
        result = strategy_s3(make_step(t_prev_psi=5.0, d_psi_inf=4.0), quadratic_line)
        self.assertAlmostEqual(result.theta_psi, 0.8)
        self.assertAlmostEqual(result.trial.d_t_psi, G1 + A1 * 0.2)


class TestFailedTrials(unittest.TestCase):
    @staticmethod
    def _guarded(limit):
        def line(t_psi, t_eta):
            if max(t_psi, t_eta) > limit:
                return GuardedPoint(math.inf, math.nan, math.nan, True)
            return GuardedPoint(*quadratic_line(t_psi, t_eta), False)

        return line

    def test_trial_shrinks(self):
        point, t_psi, t_eta = feasible_trial(self._guarded(0.03), 0.1, 0.2)
        self.assertFalse(point.failed)
        self.assertAlmostEqual(t_psi, 0.0125)
        self.assertAlmostEqual(t_eta, 0.025)

    def test_strategies_use_shrunken_trial(self):
        line = self._guarded(0.03)
        result = strategy_s3(make_step(), line)
        self.assertAlmostEqual(result.c1, A1)
        self.assertAlmostEqual(result.c2, A2)
        for strategy in (strategy_s1, strategy_s2):
            with self.subTest(strategy=strategy.__name__):
                result = strategy(make_step(), line)
                self.assertAlmostEqual(result.curvature, A1 + A2)
                self.assertFalse(result.trial.failed)

    def test_nothing_evaluates(self):
        with self.assertRaises(LineEvaluationError):
            feasible_trial(self._guarded(-1.0), 0.1, 0.1)


class TestAdaptiveDoubleStep(unittest.TestCase):
    def test_estimator(self):
        self.assertAlmostEqual(estimator_zeta(F0, G1, G2, A1, A2, 0.15, 0.2, F0), 0.5)
        with self.assertRaises(UndefinedEstimatorError):
            estimator_zeta(F0, 0.0, 0.0, A1, A2, 0.1, 0.1, F0)

    def test_accept_initial_pair(self):
        step = make_step()
        state = adaptive_double_step(step, strategy_s3(step, quadratic_line), 0.25, F0)
        self.assertTrue(state.accepted)
        self.assertAlmostEqual(state.zeta, 0.5)
        self.assertAlmostEqual(state.t_psi, 0.15)
        self.assertAlmostEqual(state.t_eta, 0.2)

    def test_model_minimizer(self):
        strategy = StrategyResult(A1, A2, 0.5, 0.5, 0.8, 0.8, A1 + A2)
        state = adaptive_double_step(make_step(), strategy, 0.25, F0)
        self.assertFalse(state.accepted)
        self.assertAlmostEqual(state.zeta, -0.5)
        self.assertAlmostEqual(state.t_psi, 0.15)
        self.assertAlmostEqual(state.t_eta, 0.2)

    def test_bounds(self):
        strategy = StrategyResult(0.0, 0.0, 5.0, 1e-5, 0.8, 0.8, 0.0)
        state = adaptive_double_step(make_step(), strategy, 0.25, F0)
        self.assertAlmostEqual(state.zeta, 1.0)
        self.assertAlmostEqual(state.t_psi, 0.8)
        self.assertAlmostEqual(state.t_eta, 0.001)

    def test_ratio_bounds(self):
        strategy = StrategyResult(0.0, 0.0, 0.02, 0.2, 0.8, 0.8, 0.0)
        state = adaptive_double_step(make_step(), strategy, 0.25, F0, ratio_bounds=(0.5, 3.0))
        self.assertAlmostEqual(state.t_psi, 0.02)
        self.assertAlmostEqual(state.t_eta, 0.06)
        strategy = StrategyResult(0.0, 0.0, 0.2, 0.02, 0.8, 0.8, 0.0)
        state = adaptive_double_step(make_step(), strategy, 0.25, F0, ratio_bounds=(0.5, 3.0))
        self.assertAlmostEqual(state.t_psi, 0.04)
        self.assertAlmostEqual(state.t_eta, 0.02)

    def test_stationary(self):
        strategy = StrategyResult(0.0, 0.0, 0.1, 0.1, 0.8, 0.8, 0.0)
        with self.assertRaises(StationaryPointReached):
            adaptive_double_step(make_step(g_psi=0.0, g_eta=0.0), strategy, 0.25, F0)

    def test_nonmonotone_reference(self):
        ref = nonmonotone_update(NonmonotoneRef(c_value=1.0), 0.4, 0.0)
        self.assertEqual((ref.c_value, ref.q_value), (0.4, 1.0))
        ref = nonmonotone_update(NonmonotoneRef(c_value=1.0), 0.4, 0.5)
        self.assertAlmostEqual(ref.q_value, 1.5)
        self.assertAlmostEqual(ref.c_value, 0.6)
        for _ in range(200):
            ref = nonmonotone_update(ref, 0.4, 0.5)
        self.assertLessEqual(ref.q_value, 2.0 + 1e-12)


class TestConjugacy(unittest.TestCase):
    def setUp(self):
        self.g_psi = [np.array([[1.0], [1.0]], dtype=complex)]
        self.g_eta = [np.array([[0.5]], dtype=complex)]

    def test_dai_yuan(self):
        self.assertEqual(dy_beta(self.g_psi, self.g_eta, self.g_psi, self.g_eta, None, None, None, None, inner), 0.0)
        d_psi_prev = [np.array([[1.0], [0.0]], dtype=complex)]
        d_eta_prev = [np.array([[1.0]], dtype=complex)]
        g_psi_prev = [np.array([[0.5], [1.0]], dtype=complex)]
        beta = dy_beta(
            self.g_psi, self.g_eta, self.g_psi, self.g_eta, d_psi_prev, d_eta_prev, g_psi_prev, self.g_eta, inner
        )
        self.assertAlmostEqual(beta, 2.25 / 0.5)
        forced = dy_beta(
            self.g_psi, self.g_eta, self.g_psi, self.g_eta, d_psi_prev, d_eta_prev, self.g_psi, self.g_eta, inner
        )
        self.assertIsNone(forced)

    def test_restart(self):
        steepest_psi = [-g for g in self.g_psi]
        steepest_eta = [-g for g in self.g_eta]
        args = (self.g_psi, self.g_eta)
        self.assertAlmostEqual(restart_ratio(*args, steepest_psi, steepest_eta, *args, 1.0, inner), 1.0)
        self.assertFalse(restart_condition(*args, steepest_psi, steepest_eta, *args, 0.5, 1.0, inner))
        weak_psi = [0.1 * d for d in steepest_psi]
        weak_eta = [0.1 * d for d in steepest_eta]
        self.assertTrue(restart_condition(*args, weak_psi, weak_eta, *args, 0.5, 1.0, inner))
        zeros = ([np.zeros((2, 1), dtype=complex)], [np.zeros((1, 1), dtype=complex)])
        with self.assertRaises(StationaryPointReached):
            restart_ratio(*args, steepest_psi, steepest_eta, *zeros, 1.0, inner)


if __name__ == "__main__":
    unittest.main()
