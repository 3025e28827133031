# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import logging
import unittest

import numpy as np

from edft.cores.common.base_statistics import (
    BaseStatistics,
    collect_all_statistics,
    record_duration,
    register_statistics,
    statistics_dict,
)
from edft.cores.common.constants import ExitCode, SmearingKind, Strategy, Variant
from edft.cores.common.exceptions import ConfigError, EdftError, StationaryPointReached, UnknownFixtureError
from edft.cores.common.logger import CustomLogger
from edft.cores.common.utils import fix_phase, is_diagonal, make_rng, random_unitary


@register_statistics(names=["test_phase"])
def timed_phase():
    with record_duration("test_phase"):
        return sum(range(100))


class TestLogger(unittest.TestCase):
    def test_custom_levels(self):
        log = CustomLogger("edft-test")
        self.assertEqual(logging.getLevelName(21), "ITER")
        self.assertEqual(logging.getLevelName(22), "SCF")
        with self.assertLogs("edft-test", level="INFO") as captured:
            log.iter("n=1")
            log.scf("n=2")
        self.assertEqual(len(captured.records), 2)
        self.assertEqual(captured.records[0].levelname, "ITER")
        self.assertFalse(log.logger.propagate)


class TestStatistics(unittest.TestCase):
    def test_percentiles(self):
        statistic = BaseStatistics()
        for value in (1.0, 2.0, 3.0):
            statistic.append_duration(value)
        result = statistic.calculate_statistics()
        self.assertEqual(result["calls"], 3)
        self.assertAlmostEqual(result["p50_seconds"], 2.0)
        self.assertAlmostEqual(result["average_seconds"], 2.0)
        statistic.reset()
        self.assertEqual(statistic.calculate_statistics()["calls"], 0)

    def test_registered_phase(self):
        statistics_dict["test_phase"].reset()
        timed_phase()
        timed_phase()
        self.assertEqual(collect_all_statistics()["test_phase"]["calls"], 2)


class TestErrorsAndConstants(unittest.TestCase):
    def test_exit_codes(self):
        self.assertEqual(ConfigError(["a: b"]).exit_code, ExitCode.CONFIG)
        self.assertEqual(UnknownFixtureError("x").exit_code, ExitCode.USAGE)
        self.assertEqual(StationaryPointReached("done").exit_code, ExitCode.OK)
        self.assertEqual(EdftError("x").exit_code, ExitCode.NUMERICAL)
        self.assertIn("a: b", str(ConfigError(["a: b"])))

    def test_enum_strings(self):
        self.assertEqual(str(Variant.RESTART_II), "pcg-r2")
        self.assertEqual(str(Strategy.PARTIAL_DERIVATIVES), "s3")
        self.assertTrue(SmearingKind.FERMI_DIRAC.is_monotone)
        self.assertFalse(SmearingKind.MARZARI_VANDERBILT.is_monotone)


class TestUtils(unittest.TestCase):
    def test_random_unitary(self):
        u = random_unitary(4, make_rng(0))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)

    def test_fix_phase(self):
        vectors = np.array([[1j, 0.1], [0.2, -2.0]])
        fixed = fix_phase(vectors)
        self.assertAlmostEqual(fixed[0, 0], 1.0)
        self.assertAlmostEqual(fixed[1, 1], 2.0)

    def test_is_diagonal(self):
        self.assertTrue(is_diagonal(np.diag([1.0, 2.0])))
        self.assertFalse(is_diagonal(np.array([[1.0, 1e-3], [1e-3, 1.0]])))
        self.assertTrue(is_diagonal(np.array([[1.0, 1e-3], [1e-3, 1.0]]), tol=1e-2))


if __name__ == "__main__":
    unittest.main()
