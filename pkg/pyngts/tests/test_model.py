# -*- coding: utf8 -*-
import unittest

import numpy as np

from pyngts.errors import StructuralError
from pyngts.model import (
    QAM16,
    QAM64,
    QPSK,
    ComplexSystem,
    Constellation,
    RealSystem,
    bit_errors,
    draw_instance,
    quantize,
    to_real,
    trial_rng,
)


class TestConstellation(unittest.TestCase):
    def test_alphabets(self):
        self.assertEqual(QPSK.real_alphabet.tolist(), [-1, 1])
        self.assertEqual(QAM16.real_alphabet.tolist(), [-3, -1, 1, 3])
        self.assertEqual(QAM64.real_alphabet.tolist(), [-7, -5, -3, -1, 1, 3, 5, 7])
        for c in (QPSK, QAM16, QAM64):
            self.assertEqual(c.delta, 2)

    def test_sizes_and_power(self):
        self.assertEqual(QPSK.size, 4)
        self.assertEqual(QAM64.size, 64)
        self.assertEqual(QAM16.bits_per_dim, 2)
        self.assertAlmostEqual(QPSK.mean_power, 2.0)
        self.assertAlmostEqual(QAM16.mean_power, 10.0)
        self.assertAlmostEqual(QAM64.mean_power, 42.0)
        self.assertEqual(len(QAM16.complex_points), 16)

    def test_by_name(self):
        self.assertIs(Constellation.by_name('qpsk'), QPSK)
        self.assertIs(Constellation.by_name('4QAM'), QPSK)
        self.assertIs(Constellation.by_name('16-QAM'), QAM16)
        self.assertIs(Constellation.by_name('qam64'), QAM64)
        with self.assertRaises(StructuralError) as ctx:
            Constellation.by_name('8psk')
        self.assertEqual(ctx.exception.code, 102)

    def test_invalid_alphabets(self):
        for alphabet in ([-1, 3], [1, -1], [-3, -1, 1], [-5, -1, 1, 5], [1]):
            with self.assertRaises(StructuralError):
                Constellation('bad', alphabet)

    def test_index_of(self):
        self.assertEqual(QAM16.index_of([-3, 3]).tolist(), [0, 3])
        self.assertTrue(QAM16.contains([1, -1]))
        self.assertFalse(QAM16.contains([2]))
        with self.assertRaises(StructuralError) as ctx:
            QPSK.index_of([0.5])
        self.assertEqual(ctx.exception.code, 101)


class TestToReal(unittest.TestCase):
    def test_block_structure(self):
        sys = to_real(ComplexSystem(H=[[1 + 2j]], y=[3 - 1j], constellation=QPSK))
        self.assertEqual(sys.H.tolist(), [[1, -2], [2, 1]])
        self.assertEqual(sys.y.tolist(), [3, -1])
        self.assertEqual((sys.N, sys.M, sys.nt), (2, 2, 1))

    def test_paired_column_norms(self):
        rng = np.random.default_rng(3)
        c_sys = draw_instance(2, 2, QPSK, 10.0, rng)
        H = to_real(c_sys).H
        norms = np.linalg.norm(H, axis=0)
        self.assertAlmostEqual(norms[0], norms[2], places=12)
        self.assertAlmostEqual(norms[1], norms[3], places=12)

    def test_metric_preserved(self):
        for i in range(20):
            c_sys = draw_instance(3, 5, QAM16, 8.0, trial_rng(11, i))
            sys = to_real(c_sys)
            r = c_sys.y - c_sys.H @ c_sys.s
            expected = float(np.vdot(r, r).real)
            self.assertLessEqual(abs(sys.metric(sys.s) - expected), 1e-10 * max(expected, 1.0))

    def test_dimension_mismatch(self):
        with self.assertRaises(StructuralError):
            ComplexSystem(H=np.ones((2, 2)), y=np.ones(3), constellation=QPSK)
        with self.assertRaises(StructuralError):
            RealSystem(H=np.ones((4, 2)), y=np.ones(4), s=[1, 1, 1], constellation=QPSK)

    def test_non_alphabet_symbols(self):
        with self.assertRaises(StructuralError):
            RealSystem(H=np.eye(2), y=np.ones(2), s=[1, 2], constellation=QPSK)

    def test_paired_system_checks_blocks(self):
        c_sys = draw_instance(2, 3, QAM16, 10.0, trial_rng(7, 0))
        sys = to_real(c_sys)
        same = RealSystem(H=sys.H, y=sys.y, s=sys.s, constellation=QAM16, nt=2)
        self.assertEqual(same.nt, 2)

        H = np.array(sys.H)
        H[0, 3] += 0.5
        with self.assertRaises(StructuralError) as cm:
            RealSystem(H=H, y=sys.y, constellation=QAM16, nt=2)
        self.assertEqual(cm.exception.code, 100)

    def test_paired_system_wrong_antenna_count(self):
        sys = to_real(draw_instance(2, 2, QPSK, 10.0, trial_rng(7, 1)))
        for nt in (0, 1, 3):
            with self.assertRaises(StructuralError) as cm:
                RealSystem(H=sys.H, y=sys.y, constellation=QPSK, nt=nt)
            self.assertEqual(cm.exception.code, 100)
        with self.assertRaises(StructuralError) as cm:
            RealSystem(H=np.ones((3, 2)), y=np.ones(3), constellation=QPSK, nt=1)
        self.assertEqual(cm.exception.code, 100)

    def test_unpaired_system(self):
        rng = np.random.default_rng(8)
        sys = RealSystem(H=rng.standard_normal((4, 4)), y=rng.standard_normal(4), constellation=QAM16)
        self.assertIsNone(sys.nt)


class TestDrawInstance(unittest.TestCase):
    def test_same_seed_same_instance(self):
        a = draw_instance(4, 4, QAM16, 12.0, trial_rng(5, 2))
        b = draw_instance(4, 4, QAM16, 12.0, trial_rng(5, 2))
        self.assertTrue(np.array_equal(a.H, b.H))
        self.assertTrue(np.array_equal(a.y, b.y))
        self.assertTrue(np.array_equal(a.s, b.s))

    def test_trial_substreams_differ(self):
        a = draw_instance(4, 4, QPSK, 12.0, trial_rng(5, 0))
        b = draw_instance(4, 4, QPSK, 12.0, trial_rng(5, 1))
        self.assertFalse(np.array_equal(a.H, b.H))

    def test_noiseless(self):
        c_sys = draw_instance(3, 3, QAM64, 0.0, trial_rng(1, 0), noiseless=True)
        self.assertEqual(c_sys.noise_var, 0.0)
        self.assertTrue(np.array_equal(c_sys.y, c_sys.H @ c_sys.s))

    def test_noiseless_keeps_stream_position(self):
        rng_a, rng_b = trial_rng(9, 0), trial_rng(9, 0)
        draw_instance(2, 2, QPSK, 5.0, rng_a)
        draw_instance(2, 2, QPSK, 5.0, rng_b, noiseless=True)
        self.assertEqual(rng_a.integers(1 << 30), rng_b.integers(1 << 30))

    def test_snr_scaling(self):
        c_sys = draw_instance(2, 2, QAM16, 10.0, trial_rng(1, 0))
        self.assertAlmostEqual(c_sys.symbol_power / c_sys.noise_var, 10.0)

    def test_channel_variance(self):
        c_sys = draw_instance(50, 2000, QPSK, 10.0, np.random.default_rng(0))
        var = np.var(c_sys.H.real)
        self.assertTrue(0.48 <= var <= 0.52, var)

    def test_symbols_in_constellation(self):
        c_sys = draw_instance(16, 16, QAM64, 10.0, trial_rng(2, 0))
        self.assertTrue(QAM64.contains(c_sys.s.real))
        self.assertTrue(QAM64.contains(c_sys.s.imag))

    def test_preconditions(self):
        with self.assertRaises(StructuralError):
            draw_instance(0, 2, QPSK, 10.0, trial_rng(1, 0))
        with self.assertRaises(StructuralError):
            draw_instance(2, 2, QPSK, float('inf'), trial_rng(1, 0))


class TestQuantize(unittest.TestCase):
    def test_nearest_point(self):
        self.assertEqual(quantize([0.3, -0.2], QPSK).tolist(), [1, -1])
        self.assertEqual(quantize([-2.2, 3.9], QAM16).tolist(), [-3, 3])
        self.assertEqual(quantize([-100.0, 100.0], QAM64).tolist(), [-7, 7])

    def test_midpoints_go_up(self):
        self.assertEqual(quantize([0.0], QPSK).tolist(), [1])
        self.assertEqual(quantize([-2.0, 0.0, 2.0], QAM16).tolist(), [-1, 1, 3])

    def test_idempotent(self):
        v = QAM64.real_alphabet
        self.assertEqual(quantize(quantize(v, QAM64), QAM64).tolist(), v.tolist())


class TestBitErrors(unittest.TestCase):
    def test_identity(self):
        s = np.array([1, -3, 3, -1])
        self.assertEqual(bit_errors(s, s, QAM16), 0)

    def test_qpsk_flip(self):
        self.assertEqual(bit_errors([1, -1, 1], [1, 1, 1], QPSK), 1)

    def test_gray_neighbors(self):
        # labels 00, 01, 11, 10
        self.assertEqual(bit_errors([-3], [-1], QAM16), 1)
        self.assertEqual(bit_errors([-1], [1], QAM16), 1)
        self.assertEqual(bit_errors([-3], [3], QAM16), 1)
        self.assertEqual(bit_errors([-3], [1], QAM16), 2)

    def test_errors(self):
        with self.assertRaises(StructuralError) as ctx:
            bit_errors([2], [1], QAM16)
        self.assertEqual(ctx.exception.code, 101)
        with self.assertRaises(StructuralError):
            bit_errors([1, 1], [1], QPSK)


if __name__ == '__main__':
    unittest.main()
