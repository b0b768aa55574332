# -*- coding: utf8 -*-
import os
import tempfile
import unittest
from pathlib import Path

import mock

from pyngts.detectors import Detector, default_detector_map
from pyngts.errors import ConfigError, ReportError
from pyngts.harness import (
    PRESETS,
    ExperimentConfig,
    ResultRow,
    ReductionRow,
    run_ber,
    run_complexity,
    run_trace,
)
from pyngts.report import read_csv

base = os.path.dirname(__file__)


def small_config(out, **kwargs):
    options = dict(
        nt=2, nr=2, modulation='16qam', snr_db=(4.0, 10.0), trials=6, iters=12,
        detectors=('conventional_ts', 'qr_ts', 'ngts'), seed=3, out=out,
    )
    options.update(kwargs)
    return ExperimentConfig(**options)


def without_wall_time(rows):
    return [{k: v for k, v in row.items() if k != 'wall_seconds'} for row in rows]


class FailingDetector(Detector):
    def __call__(self, sys):
        raise ConfigError('detector failed')


class TestExperimentConfig(unittest.TestCase):
    def test_defaults(self):
        with self.assertLogs('pyngts.harness', level='WARNING'):
            config = ExperimentConfig(iters=40)
        self.assertEqual(config.tabu, 20)
        self.assertEqual(config.nt, 4)
        self.assertEqual(config.detectors, ('conventional_ts', 'ngts'))
        self.assertEqual(config.bits_per_trial, 8)

    def test_explicit_tabu(self):
        config = ExperimentConfig(iters=40, tabu=7)
        self.assertEqual(config.tabu, 7)
        self.assertEqual(config.options['tabu'], 7)

    def test_class_defaults_untouched(self):
        ExperimentConfig(nt=8, nr=8, tabu=3)
        self.assertEqual(ExperimentConfig.nt, 4)
        self.assertIsNone(ExperimentConfig.tabu)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig(antennas=4)
        self.assertEqual(ctx.exception.code, 402)

    def test_unknown_detector(self):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig(detectors=('ngts', 'magic'), tabu=1)
        self.assertEqual(ctx.exception.code, 401)

    def test_invalid_values(self):
        for kwargs in (dict(nt=0), dict(nt=4, nr=2), dict(snr_db=()), dict(modulation='8psk'),
                       dict(detectors=('ngts', 'ngts')), dict(trials=0)):
            with self.assertRaises(ConfigError, msg=kwargs):
                ExperimentConfig(tabu=1, **kwargs)

    def test_preset(self):
        config = ExperimentConfig(preset='full-64qam-8', trials=2)
        self.assertEqual((config.nt, config.nr, config.iters, config.tabu), (8, 8, 8000, 4000))
        self.assertIn('se_sd', config.detectors)
        self.assertEqual(config.constellation.name, 'QAM64')
        config = ExperimentConfig(preset='full-qpsk-32', iters=10)
        self.assertEqual((config.iters, config.tabu), (10, 5))
        for name in PRESETS:
            ExperimentConfig(preset=name)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig(preset='full-256qam')
        self.assertEqual(ctx.exception.code, 404)

    def test_from_file(self):
        config = ExperimentConfig.from_file(os.path.join(base, './ressources/small_qpsk.cfg'))
        self.assertEqual(config.snr_db, (6.0, 12.0))
        self.assertEqual(config.detectors, ('conventional_ts', 'qr_ts', 'ngts'))
        self.assertEqual((config.trials, config.iters, config.tabu, config.seed), (8, 20, 10, 7))

    def test_from_file_overrides(self):
        config = ExperimentConfig.from_file(
            os.path.join(base, './ressources/small_qpsk.cfg'), iters=30, tabu=None
        )
        self.assertEqual((config.iters, config.tabu), (30, 15))

    def test_from_file_errors(self):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig.from_file(os.path.join(base, './ressources/bad_key.cfg'))
        self.assertEqual(ctx.exception.code, 402)
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig.from_file(os.path.join(base, './ressources/malformed.cfg'))
        self.assertEqual(ctx.exception.code, 403)
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_file(os.path.join(base, './ressources/missing.cfg'))

    def test_custom_detector(self):
        class EchoDetector(Detector):
            def __call__(self, sys):
                return default_detector_map['zf']()(sys)

        config = ExperimentConfig(detectors=('echo',), detector_map={'echo': EchoDetector}, tabu=1)
        self.assertIn('ngts', config.detector_map)
        self.assertNotIn('echo', default_detector_map)
        self.assertIsInstance(config.make_detector('echo'), EchoDetector)

    def test_dump(self):
        config = ExperimentConfig(tabu=2)
        self.assertIn('modulation', config.dump())
        self.assertNotIn('detector_map', config.dump())


class TestRunBer(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, 'ber.csv')

    def tearDown(self):
        self.tmp.cleanup()

    def test_rows_and_csv(self):
        rows = run_ber(small_config(self.out))
        self.assertEqual(len(rows), 6)
        self.assertEqual([(r.detector, r.snr_db) for r in rows[:2]],
                         [('conventional_ts', 4.0), ('conventional_ts', 10.0)])
        written = read_csv(self.out)
        self.assertEqual(list(written[0]), list(ResultRow._fields))
        self.assertEqual(len(written), 6)
        for row in rows:
            self.assertEqual(row.trials, 6)
            self.assertEqual(row.ber, row.bit_errors / (6 * 8))

    def test_equivalent_detectors_agree(self):
        rows = run_ber(small_config(self.out, trials=10))
        by_snr = {}
        for row in rows:
            by_snr.setdefault(row.snr_db, set()).add(row.bit_errors)
        for errors in by_snr.values():
            self.assertEqual(len(errors), 1)

    def test_noiseless(self):
        config = small_config(self.out, detectors=('zf', 'conventional_ts', 'ngts', 'ngts_co', 'se_sd'))
        for row in run_ber(config, noiseless=True):
            self.assertEqual(row.bit_errors, 0, row.detector)

    def test_deterministic(self):
        run_ber(small_config(self.out))
        first = read_csv(self.out)
        run_ber(small_config(self.out))
        self.assertEqual(without_wall_time(first), without_wall_time(read_csv(self.out)))

    def test_workers_do_not_change_results(self):
        single = run_ber(small_config(self.out, workers=1))
        pooled = run_ber(small_config(self.out, workers=3))
        self.assertEqual([r._replace(wall_seconds=0) for r in single],
                         [r._replace(wall_seconds=0) for r in pooled])

    def test_worker_error_reaches_caller(self):
        config = small_config(
            self.out, workers=2, detectors=('zf', 'failing'), detector_map={'failing': FailingDetector}
        )
        with self.assertLogs('pyngts.harness', level='ERROR'):
            with self.assertRaises(ConfigError):
                run_ber(config)

    def test_early_stops_are_counted_per_point(self):
        # 1x1 QPSK has four candidates, a tabu list of four ends every search
        config = small_config(
            self.out, nt=1, nr=1, modulation='qpsk', snr_db=(6.0,), trials=3, iters=10, tabu=4,
            detectors=('conventional_ts',),
        )
        with self.assertLogs('pyngts.harness', level='WARNING') as logs:
            run_ber(config)
        self.assertEqual(len(logs.output), 1)
        self.assertIn('3 of 3 searches stopped early', logs.output[0])

    @mock.patch.object(Path, 'open', side_effect=PermissionError('denied'))
    def test_unwritable_output(self, mock_open):
        with self.assertRaises(ReportError) as ctx:
            run_ber(small_config(self.out, trials=1, snr_db=(10.0,)))
        self.assertEqual(ctx.exception.code, 500)


class TestRunComplexity(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, 'ops.csv')

    def tearDown(self):
        self.tmp.cleanup()

    def test_reduction_table(self):
        config = small_config(self.out, nt=4, nr=4, iters=60, snr_db=(8.0,), trials=3)
        rows = run_complexity(config)
        self.assertEqual(len(rows), 3)
        reductions = read_csv(os.path.join(self.tmp.name, 'ops_reduction.csv'))
        self.assertEqual(list(reductions[0]), list(ReductionRow._fields))
        by_name = {r['detector']: r for r in reductions}
        self.assertEqual(float(by_name['conventional_ts']['reduction_percent']), 0.0)
        self.assertGreater(float(by_name['ngts']['reduction_percent']), 30.0)
        self.assertEqual(by_name['qr_ts']['predicted_iteration_ops'], '')
        self.assertGreater(float(by_name['ngts']['predicted_iteration_ops']), 0.0)

    def test_ordered_detector_row(self):
        config = small_config(
            self.out, nt=4, nr=4, iters=30, snr_db=(8.0,), trials=2, detectors=('ngts', 'ngts_co')
        )
        rows = {r.detector: r for r in run_complexity(config)}
        self.assertEqual(rows['ngts_co'].I, 30)
        self.assertTrue(1.0 <= rows['ngts_co'].mean_dstar <= 8.0)
        self.assertGreater(rows['ngts_co'].mean_K, 0.0)


class TestRunTrace(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, 'trace.csv')

    def tearDown(self):
        self.tmp.cleanup()

    def test_no_divergence(self):
        config = small_config(self.out, iters=25, detectors=('conventional_ts', 'qr_ts', 'ngts', 'ml'))
        result = run_trace(config, instance=2)
        self.assertEqual(sorted(result.paths), ['conventional_ts', 'ngts', 'qr_ts'])
        text = result.diff_path.read_text(encoding='utf-8')
        self.assertIn('conventional_ts vs ngts: no divergence', text)
        self.assertIn('conventional_ts vs qr_ts: no divergence', text)
        self.assertIn('ML', text)
        rows = read_csv(result.paths['ngts'])
        self.assertEqual(len(rows), 26)
        self.assertEqual(rows[0]['dstar'], '')
        self.assertGreaterEqual(min(float(r['metric']) for r in rows), result.ml_metric - 1e-9)

    def test_zero_iterations(self):
        config = small_config(self.out, iters=0, tabu=1, detectors=('ngts',))
        result = run_trace(config)
        self.assertEqual(len(read_csv(result.paths['ngts'])), 1)

    def test_ordered_trace_is_in_antenna_columns(self):
        config = small_config(self.out, iters=10, detectors=('ngts', 'ngts_co'))
        result = run_trace(config, instance=1)
        for row in read_csv(result.paths['ngts_co'])[1:]:
            self.assertIn(int(row['column']), range(1, 5))
        self.assertTrue(result.diff_path.exists())


if __name__ == '__main__':
    unittest.main()
