# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0

import itertools
import unittest

import numpy as np

from edft.cores.common.exceptions import ConfigError, EmptyBasisError, InvalidCellError, ShapeMismatchError
from edft.cores.lattice.lattice_basis import (
    KpointSet,
    UnitCell,
    build_basis,
    build_bases,
    build_reciprocal,
    fft_gvectors,
    grid_integral,
    to_realspace,
    to_reciprocal,
)


class TestLattice(unittest.TestCase):
    def test_reciprocal_duality(self):
        cell = UnitCell([5.0, 0.0, 0.0], [1.0, 6.0, 0.0], [0.5, 0.3, 7.0])
        recip = build_reciprocal(cell)
        np.testing.assert_allclose(cell.matrix @ recip.matrix.T, 2 * np.pi * np.eye(3), atol=1e-12)
        np.testing.assert_allclose(recip.direct_matrix, cell.matrix, atol=1e-12)
        self.assertAlmostEqual(recip.volume, 210.0)

    def test_coplanar_cell(self):
        with self.assertRaises(InvalidCellError):
            UnitCell([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0])

    def test_kpoint_weights(self):
        mesh = KpointSet.monkhorst_pack(2, 2, 1)
        self.assertEqual(len(mesh), 4)
        self.assertAlmostEqual(mesh.weights.sum(), 2.0)
        np.testing.assert_allclose(sorted(mesh.points[:, 0]), [-0.25, -0.25, 0.25, 0.25])
        with self.assertRaises(ConfigError):
            KpointSet(np.zeros((1, 3)), np.array([1.7]))


class TestPlanewaveBasis(unittest.TestCase):
    def setUp(self):
        self.cell = UnitCell.cubic(6.0)
        self.recip = build_reciprocal(self.cell)

    def test_free_electron_shells(self):
        basis = build_basis(self.recip, [0.0, 0.0, 0.0], 2.0)
        self.assertEqual(basis.size, 27)
        self.assertTrue(np.all(np.diff(basis.kinetic) >= -1e-12))
        self.assertTrue(np.all(basis.kinetic <= 2.0))
        unit = 0.5 * (2 * np.pi / 6.0) ** 2
        np.testing.assert_allclose(basis.kinetic[:7], [0.0] + [unit] * 6, atol=1e-12)
        for axis, n in enumerate(basis.fftgrid):
            self.assertGreaterEqual(n, 2 * np.max(np.abs(basis.gvectors[:, axis])) + 1)

    def test_unit_reciprocal_cube(self):
        recip = build_reciprocal(UnitCell.cubic(2 * np.pi))
        basis = build_basis(recip, [0.0, 0.0, 0.0], 0.6)
        self.assertEqual(basis.size, 7)
        shell = {tuple(int(x) for x in g) for g in basis.gvectors[1:]}
        self.assertEqual(shell, {(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)})

    def test_matches_enumeration(self):
        rng = np.random.default_rng(21)
        for trial in range(100):
            vectors = np.diag(rng.uniform(4.0, 8.0, 3)) + rng.uniform(-0.5, 0.5, (3, 3))
            cell = UnitCell(*vectors)
            recip = build_reciprocal(cell)
            k = rng.uniform(-0.5, 0.5, 3)
            e_cut = rng.uniform(0.5, 3.0)
            # |m_i| = |a_i . (k+G)| / 2pi - k_i is bounded by the cutoff radius
            radius = np.sqrt(2.0 * e_cut)
            bounds = [int(np.ceil(radius * np.linalg.norm(a) / (2 * np.pi))) + 1 for a in vectors]
            expected = set()
            for m in itertools.product(*(range(-b, b + 1) for b in bounds)):
                kplusg = recip.to_cartesian(np.asarray(m) + k)
                if 0.5 * float(kplusg @ kplusg) <= e_cut:
                    expected.add(m)
            with self.subTest(trial=trial):
                if not expected:
                    with self.assertRaises(EmptyBasisError):
                        build_basis(recip, k, e_cut)
                    continue
                basis = build_basis(recip, k, e_cut)
                self.assertEqual({tuple(int(x) for x in g) for g in basis.gvectors}, expected)
                self.assertEqual(basis.size, len(expected))

    def test_empty_and_small_grid(self):
        with self.assertRaises(EmptyBasisError):
            build_basis(self.recip, [0.5, 0.5, 0.5], 1e-3)
        with self.assertRaises(ShapeMismatchError):
            build_basis(self.recip, [0.0, 0.0, 0.0], 2.0, fftgrid=(2, 2, 2))

    def test_shared_grid(self):
        bases = build_bases(self.recip, KpointSet.uniform([[0, 0, 0], [0.5, 0, 0]]), 2.0)
        self.assertEqual(bases[0].fftgrid, bases[1].fftgrid)
        np.testing.assert_allclose(bases[1].kpoint_cart, [np.pi / 6.0, 0.0, 0.0])

    def test_transforms(self):
        basis = build_basis(self.recip, [0.0, 0.0, 0.0], 2.0)
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal((basis.size, 2)) + 1j * rng.standard_normal((basis.size, 2))
        values = to_realspace(basis, coeffs)
        self.assertEqual(values.shape, (2,) + basis.fftgrid)
        np.testing.assert_allclose(to_reciprocal(basis, values), coeffs, atol=1e-12)
        # Parseval: the coefficient norm equals the integral of |u|^2
        self.assertAlmostEqual(
            grid_integral(np.abs(values[0]) ** 2, basis.volume), float(np.vdot(coeffs[:, 0], coeffs[:, 0]).real)
        )
        plane_wave = np.zeros(basis.size, dtype=complex)
        plane_wave[0] = 1.0
        np.testing.assert_allclose(np.abs(to_realspace(basis, plane_wave)) ** 2, 1.0 / basis.volume)

    def test_fft_gvectors(self):
        gvec = fft_gvectors(self.recip, (4, 4, 4))
        self.assertEqual(gvec.shape, (4, 4, 4, 3))
        np.testing.assert_allclose(gvec[1, 0, 0], [2 * np.pi / 6.0, 0, 0])
        np.testing.assert_allclose(gvec[3, 0, 0], [-2 * np.pi / 6.0, 0, 0])


if __name__ == "__main__":
    unittest.main()
