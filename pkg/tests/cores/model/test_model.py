# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import unittest

import numpy as np

from edft.cores.common.exceptions import ConfigError, EmptyBasisError, ShapeMismatchError
from edft.cores.common.utils import make_rng, random_complex, random_unitary
from edft.cores.lattice.lattice_basis import grid_integral
from edft.cores.model.model import (
    apply_hamiltonian,
    evaluate,
    hartree_potential,
    kohn_sham_matrix,
    overlap_lower_bound,
    overlap_matrix,
)
from edft.cores.proto.config_protocol import SmearingSpec
from edft.cores.smearing.smearing import f_value, s_value, solve_mu
from tests.cores.helpers import diagonal_eta, fixture_model, random_point


class TestModelEnergy(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = fixture_model("gradient-check")

    def test_unitary_and_shift_invariance(self):
        psi, eta = random_point(self.model, seed=3)
        reference = evaluate(self.model, psi, eta).energies.total
        rng = make_rng(9)
        unitaries = [random_unitary(self.model.n_orbitals, rng) for _ in psi]
        psi_rot = [p @ u for p, u in zip(psi, unitaries)]
        eta_rot = [u.conj().T @ (e + 0.7 * np.eye(e.shape[0])) @ u for e, u in zip(eta, unitaries)]
        eta_rot = [0.5 * (e + e.conj().T) for e in eta_rot]
        self.assertAlmostEqual(evaluate(self.model, psi_rot, eta_rot).energies.total, reference, places=9)

    def test_density_integrates_to_electron_count(self):
        psi, eta = random_point(self.model, seed=4)
        evaluation = evaluate(self.model, psi, eta)
        self.assertIsNotNone(self.model.q_shapes)
        self.assertAlmostEqual(grid_integral(evaluation.rho, self.model.volume), self.model.n_electrons, places=8)
        self.assertAlmostEqual(evaluation.occ.trace_count(), self.model.n_electrons, places=10)

    def test_dense_hamiltonian(self):
        psi, eta = random_point(self.model, seed=5)
        potential = evaluate(self.model, psi, eta).potential
        rng = make_rng(1)
        for k, basis in enumerate(self.model.bases):
            h = kohn_sham_matrix(self.model, potential, k)
            x = random_complex((basis.size, 2), rng)
            np.testing.assert_allclose(h @ x, apply_hamiltonian(self.model, potential, k, x), atol=1e-10)
            np.testing.assert_allclose(h, h.conj().T)
        with self.assertRaises(ShapeMismatchError):
            apply_hamiltonian(self.model, potential, 0, np.zeros((3, 2), dtype=complex))

    def test_overlap(self):
        self.assertTrue(self.model.has_overlap)
        bound = overlap_lower_bound(self.model)
        self.assertGreater(bound, 0.0)
        smallest = min(np.linalg.eigvalsh(overlap_matrix(self.model, k)).min() for k in range(len(self.model.bases)))
        self.assertAlmostEqual(bound, smallest, places=8)


class TestModelConstruction(unittest.TestCase):
    def test_non_coercive_overlap(self):
        with self.assertRaises(ConfigError) as context:
            fixture_model("gradient-check", model={"q_matrix": [[-5.0, 0.0], [0.0, -5.0]]})
        self.assertIn("q_matrix", context.exception.violations[0])

    def test_too_many_orbitals(self):
        with self.assertRaises(EmptyBasisError):
            fixture_model("free-electron", model={"n_orbitals": 30})

    def test_free_electron_energy(self):
        model = fixture_model("free-electron")
        self.assertEqual(model.bases[0].size, 27)
        self.assertEqual(overlap_lower_bound(model), 1.0)
        eps = model.bases[0].kinetic[: model.n_orbitals]
        psi = [np.eye(model.bases[0].size, model.n_orbitals, dtype=complex)]
        energies = evaluate(model, psi, diagonal_eta([eps])).energies

        spec = SmearingSpec(kind="gaussian", sigma=0.025)
        mu = solve_mu([eps], [2.0], spec, 4.0)
        x = (eps - mu) / spec.sigma
        self.assertAlmostEqual(energies.kinetic_nonlocal, 2.0 * np.sum(f_value(spec, x) * eps), places=12)
        self.assertAlmostEqual(energies.entropy, -spec.sigma * 2.0 * np.sum(s_value(spec, x)), places=12)
        self.assertEqual(energies.hartree, 0.0)
        self.assertAlmostEqual(energies.local, 0.0, places=12)
        self.assertAlmostEqual(energies.total_ry, 2.0 * energies.total)

    def test_uniform_hartree(self):
        model = fixture_model("free-electron")
        rho = np.full(model.fftgrid, 0.3)
        energy, potential = hartree_potential(rho, model.g2, model.volume)
        self.assertAlmostEqual(energy, 0.0, places=12)
        np.testing.assert_allclose(potential, 0.0, atol=1e-12)


if __name__ == "__main__":
    unittest.main()
