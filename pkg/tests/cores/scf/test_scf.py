# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import unittest

import numpy as np

from edft.cores.common.constants import ExitCode, MixingKind
from edft.cores.common.exceptions import EigensolverError
from edft.cores.lattice.lattice_basis import grid_integral
from edft.cores.linalg.block_linalg import orthonormality_error
from edft.cores.model.model import build_model, effective_potential, initial_density
from edft.cores.optimizer.optimizer import minimize
from edft.cores.proto.config_protocol import ScfConfig
from edft.cores.scf.scf_baseline import mix_density, run_scf, solve_eigenpairs
from tests.cores.helpers import fixture_config, fixture_model


class TestEigensolver(unittest.TestCase):
    def test_free_electron_spectrum(self):
        model = fixture_model("free-electron")
        potential = effective_potential(model, initial_density(model))
        orbitals, values = solve_eigenpairs(model, potential, model.n_orbitals, ScfConfig())
        unit = 0.5 * (2 * np.pi / 6.0) ** 2
        np.testing.assert_allclose(values[0], [0.0] + [unit] * 6, atol=1e-10)
        self.assertLess(orthonormality_error(orbitals), 1e-10)

    def test_iterative_matches_dense(self):
        model = fixture_model("smooth-potential")
        potential = effective_potential(model, initial_density(model))
        _, dense = solve_eigenpairs(model, potential, 1, ScfConfig())
        orbitals, iterative = solve_eigenpairs(model, potential, 1, ScfConfig(dense_limit=1, eig_tol=1e-7), seed=2)
        self.assertAlmostEqual(iterative[0][0], dense[0][0], places=9)
        self.assertLess(orthonormality_error(orbitals), 1e-10)

    def test_generalized_problem(self):
        model = fixture_model("generalized-overlap")
        potential = effective_potential(model, initial_density(model))
        orbitals, values = solve_eigenpairs(model, potential, model.n_orbitals, ScfConfig())
        self.assertLess(orthonormality_error(orbitals, model.overlap_apply), 1e-10)
        self.assertTrue(np.all(np.diff(values[0]) >= 0))

    def test_too_many_pairs(self):
        model = fixture_model("free-electron")
        potential = effective_potential(model, initial_density(model))
        with self.assertRaises(EigensolverError):
            solve_eigenpairs(model, potential, 28, ScfConfig())


class TestMixing(unittest.TestCase):
    def setUp(self):
        self.rho0 = np.full((3, 3, 3), 0.1)
        self.target = np.linspace(0.05, 0.2, 27).reshape(3, 3, 3)

    def test_linear(self):
        config = ScfConfig(mixing=MixingKind.LINEAR, factor=0.4)
        mixed = mix_density([(self.rho0, self.target)], config)
        np.testing.assert_allclose(mixed, self.rho0 + 0.4 * (self.target - self.rho0))
        renormalized = mix_density([(self.rho0, self.target)], config, n_electrons=2.0, volume=8.0)
        self.assertAlmostEqual(grid_integral(renormalized, 8.0), 2.0)

    def test_broyden_fixed_map(self):
        config = ScfConfig(mixing=MixingKind.BROYDEN, factor=0.3)
        rho1 = mix_density([(self.rho0, self.target)], config)
        np.testing.assert_allclose(rho1, self.rho0 + 0.3 * (self.target - self.rho0))
        rho2 = mix_density([(self.rho0, self.target), (rho1, self.target)], config)
        np.testing.assert_allclose(rho2, self.target, atol=1e-12)

    def test_empty_history(self):
        with self.assertRaises(ValueError):
            mix_density([], ScfConfig())


class TestRunScf(unittest.TestCase):
    def test_free_electron(self):
        config = fixture_config("free-electron", algorithm={"name": "scf"})
        model = build_model(config)
        result = run_scf(model, config.algorithm.scf, seed=config.seed)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.iterations, 2)
        self.assertEqual(result.exit_code, ExitCode.OK)
        self.assertLess(result.density_residual, 1e-9)
        self.assertLess(result.grads.error_metric, 1e-8)

    def test_agrees_with_minimizer(self):
        config = fixture_config("smooth-potential")
        model = build_model(config)
        scf = run_scf(model, config.algorithm.scf, seed=config.seed)
        pcg = minimize(model, config.algorithm.optimizer, seed=config.seed)
        self.assertTrue(scf.converged)
        self.assertTrue(pcg.converged)
        self.assertAlmostEqual(scf.energies.total, pcg.energies.total, delta=1e-6)
        # eta is only fixed up to a constant shift, the occupations are not
        np.testing.assert_allclose(scf.evaluation.occ.occupations[0], pcg.evaluation.occ.occupations[0], atol=1e-4)
        self.assertEqual([r.n for r in scf.records], list(range(1, scf.iterations + 1)))

    def test_iteration_limit(self):
        config = fixture_config("smooth-potential", algorithm={"name": "scf", "scf": {"max_iter": 1}})
        model = build_model(config)
        result = run_scf(model, config.algorithm.scf)
        self.assertFalse(result.converged)
        self.assertEqual(result.exit_code, ExitCode.NOT_CONVERGED)
        self.assertEqual(len(result.records), 1)


if __name__ == "__main__":
    unittest.main()
