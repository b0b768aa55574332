# -*- coding: utf8 -*-
import unittest

import numpy as np

from pyngts.data import OpLedger, SearchTrace, TraceRow
from pyngts.errors import StructuralError


class TestOpLedger(unittest.TestCase):
    def test_phases(self):
        ledger = OpLedger()
        ledger.charge('qr', mults=10, adds=8)
        ledger.charge('gamma', mults=3, adds=2)
        ledger.charge('gamma', mults=1)
        self.assertEqual(ledger.mults(), 14)
        self.assertEqual(ledger.mults('initialization'), 10)
        self.assertEqual(ledger.total('iterative_search'), 6)
        self.assertEqual(ledger.adds(step='gamma'), 2)
        self.assertEqual(ledger.steps(), ('gamma', 'qr'))

    def test_bad_charges(self):
        ledger = OpLedger()
        with self.assertRaises(StructuralError):
            ledger.charge('coffee', mults=1)
        with self.assertRaises(StructuralError):
            ledger.charge('qr', mults=-1)

    def test_samples(self):
        ledger = OpLedger()
        ledger.record_iteration(2, 4, 3)
        ledger.record_iteration(3, 5, 1)
        ledger.record_iteration(0, 0, None)
        self.assertEqual(ledger.iterations, 3)
        self.assertAlmostEqual(ledger.mean_K, 5 / 3)
        self.assertAlmostEqual(ledger.mean_L, 3.0)
        self.assertAlmostEqual(ledger.mean_dstar, 2.0)
        self.assertEqual(OpLedger().mean_dstar, 0.0)

    def test_merge(self):
        a, b = OpLedger(), OpLedger()
        a.charge('neighbors', mults=4, adds=3)
        a.record_iteration(1, 2, 1)
        b.charge('neighbors', mults=6, adds=5)
        b.record_iteration(3, 4, 2)
        b.record_fallback()
        total = sum([a, b], OpLedger())
        self.assertEqual(total.total(), 18)
        self.assertEqual(total.iterations, 2)
        self.assertEqual(total.gamma_fallbacks, 1)
        self.assertEqual(a + b, b + a)
        self.assertEqual(sum([a, b]), total)
        self.assertEqual(a.mults(), 4)

    def test_ops_per_iteration(self):
        ledger = OpLedger()
        self.assertEqual(ledger.ops_per_iteration(), 0.0)
        ledger.charge('qr', mults=100)
        ledger.charge('update', mults=6, adds=4)
        ledger.record_iteration(1, 1, 1)
        ledger.record_iteration(1, 1, 1)
        self.assertEqual(ledger.ops_per_iteration(), 5.0)

    def test_dump(self):
        ledger = OpLedger()
        ledger.charge('zf', mults=3, adds=1)
        self.assertIn('zf', ledger.dump())


class TestSearchTrace(unittest.TestCase):
    def test_moves_and_metrics(self):
        trace = SearchTrace()
        trace.add(TraceRow(0, None, None, None, 5.0, 0, 0, 10), np.array([1, 1]))
        trace.add(TraceRow(1, 2, 1, -2, 3.0, 4, 2, 20), np.array([1, 3]))
        self.assertEqual(trace.moves(), [(1, -2)])
        self.assertEqual(trace.metrics().tolist(), [5.0, 3.0])
        self.assertEqual(len(trace), 2)

    def test_candidates_are_copies(self):
        trace = SearchTrace()
        c = np.array([1, -1])
        trace.add(TraceRow(0, None, None, None, 1.0, 0, 0, 0), c)
        c[0] = 3
        self.assertEqual(trace.candidates[0].tolist(), [1, -1])


if __name__ == '__main__':
    unittest.main()
