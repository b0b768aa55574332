# -*- coding: utf8 -*-
import contextlib
import io
import os
import tempfile
import unittest

import mock

from pyngts import cli
from pyngts.report import read_csv

base = os.path.dirname(__file__)


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


class TestCli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_ber(self):
        out = os.path.join(self.tmp.name, 'ber.csv')
        code, stdout, _ = run([
            'ber', '--nt', '2', '--nr', '2', '--mod', '16qam', '--snr', '5,10',
            '--trials', '3', '--iters', '10', '--detectors', 'conventional_ts,ngts', '--out', out,
        ])
        self.assertEqual(code, 0)
        self.assertIn('4 rows', stdout)
        self.assertEqual([r['detector'] for r in read_csv(out)],
                         ['conventional_ts', 'conventional_ts', 'ngts', 'ngts'])

    def test_config_file_with_overrides(self):
        out = os.path.join(self.tmp.name, 'ops.csv')
        code, _, _ = run([
            'complexity', '--config', os.path.join(base, './ressources/small_qpsk.cfg'),
            '--trials', '2', '--snr', '10', '--out', out,
        ])
        self.assertEqual(code, 0)
        rows = read_csv(out)
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[0]['trials'], '2')
        self.assertTrue(os.path.exists(os.path.join(self.tmp.name, 'ops_reduction.csv')))

    def test_trace(self):
        out = os.path.join(self.tmp.name, 'trace.csv')
        code, stdout, _ = run([
            'trace', '--nt', '2', '--nr', '2', '--iters', '8', '--tabu', '4',
            '--detectors', 'conventional_ts,ngts', '--instance', '3', '--out', out,
        ])
        self.assertEqual(code, 0)
        self.assertIn('no divergence', stdout)

    def test_unknown_detector(self):
        code, _, stderr = run(['ber', '--detectors', 'magic', '--tabu', '1'])
        self.assertEqual(code, 2)
        self.assertIn('NgtsError<401>', stderr)

    def test_bad_snr_list(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                cli.main(['ber', '--snr', 'loud'])

    @mock.patch.object(cli, 'selftest')
    def test_selftest_exit_codes(self, mock_selftest):
        mock_selftest.return_value.passed = True
        mock_selftest.return_value.dump.return_value = 'PASS'
        self.assertEqual(run(['selftest'])[0], 0)
        mock_selftest.assert_called_with(report=None, inject_fault=False)

        mock_selftest.return_value.passed = False
        code, stdout, _ = run(['selftest', '--report', 'r.xml', '--inject-fault'])
        self.assertEqual(code, 1)
        mock_selftest.assert_called_with(report='r.xml', inject_fault=True)


if __name__ == '__main__':
    unittest.main()
