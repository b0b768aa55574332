"""
Invariant suites run by `pyngts selftest`.

Every suite counts the instances it checked; a suite passes when none of its
checks failed and it checked at least its documented minimum:

    real-model               50 instances
    qr-reconstruction        50 instances
    trajectory-equivalence   64 instances (4x4 complex, QPSK and 16-QAM)
    tabu-contract            64 searches
    group-best-soundness   2000 random groups
    incremental-integrity   400 audited iterations
    oracle-soundness         60 instances (2x2 complex, QPSK and 16-QAM)
    epsilon-model            64 values of N
"""
import itertools
import logging
from typing import Optional

import numpy as np

from .complexity import epsilon_cdf, expected_epsilon
from .errors import NgtsError, StructuralError
from .linalg import qr_householder
from .model import QAM16, QPSK, draw_instance, to_real, trial_rng
from .ngts import GammaCache, NgtsSearch
from .oracle import brute_force_ml, se_sphere_decode
from .report import write_selftest_report
from .tabu import ConventionalTabuSearch, QrTabuSearch

__all__ = ['selftest', 'SuiteResult', 'SelftestReport', 'FaultyGammaCache']

log = logging.getLogger(__name__)

SELFTEST_SEED = 20240601


class SuiteResult:
    def __init__(self, name: str, minimum: int):
        self.name = name
        self.minimum = minimum
        self.checked = 0
        self.failures: list[str] = []

    def check(self, condition, message: str) -> bool:
        self.checked += 1
        if not condition:
            self.failures.append(f"{self.name}: {message}")
        return bool(condition)

    def fail(self, message: str):
        self.failures.append(f"{self.name}: {message}")

    @property
    def passed(self) -> bool:
        return not self.failures and self.checked >= self.minimum

    def __repr__(self) -> str:
        return "<{} {} {}/{} {}>".format(
            self.__class__.__name__,
            self.name,
            self.checked,
            self.minimum,
            'pass' if self.passed else 'FAIL',
        )


class SelftestReport:
    def __init__(self, suites: list[SuiteResult]):
        self.suites = suites

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def failures(self) -> list[str]:
        return [f for s in self.suites for f in s.failures]

    def __getitem__(self, name: str) -> SuiteResult:
        for suite in self.suites:
            if suite.name == name:
                return suite
        raise KeyError(name)

    def dump(self) -> str:
        """Verbose representation of the object"""
        lines = [
            "{:<24} {:>6} / {:<6} {}".format(
                s.name, s.checked, s.minimum, 'pass' if s.passed else 'FAIL'
            )
            for s in self.suites
        ]
        lines.extend("  " + f.splitlines()[0] for f in self.failures)
        lines.append('PASS' if self.passed else 'FAIL')
        return "\n".join(lines)


class FaultyGammaCache(GammaCache):
    """γ cache that forgets to invalidate partial sums after a move."""

    def mark_move(self, dstar: int):
        self.dstar = int(dstar)


def _systems(rng_seed: int, count: int, nt: int, nr: int, constellation, snr_db: float):
    for i in range(count):
        rng = trial_rng(rng_seed, i)
        yield to_real(draw_instance(nt, nr, constellation, snr_db, rng))


def _real_model(suite: SuiteResult, seed: int):
    for i in range(suite.minimum):
        c_sys = draw_instance(3, 4, QAM16, 10.0, trial_rng(seed, i))
        sys = to_real(c_sys)
        r = c_sys.y - c_sys.H @ c_sys.s
        complex_metric = float(np.vdot(r, r).real)
        real_metric = sys.metric(sys.s)
        suite.check(
            abs(real_metric - complex_metric) <= 1e-10 * max(complex_metric, 1.0),
            f"instance {i}: real metric {real_metric!r} != complex metric {complex_metric!r}",
        )


def _qr_reconstruction(suite: SuiteResult, seed: int):
    for i, sys in enumerate(_systems(seed, suite.minimum, 4, 4, QPSK, 10.0)):
        qr = qr_householder(sys.H)
        err = np.linalg.norm(qr.Q @ qr.R - sys.H)
        suite.check(
            err <= 1e-9 * np.linalg.norm(sys.H) and np.all(np.diag(qr.R) >= 0),
            f"instance {i}: ‖QR − H‖ = {err:.3g}",
        )


def _trajectories(equivalence: SuiteResult, tabu: SuiteResult, seed: int, iters: int, tabu_cap: int):
    per_alphabet = equivalence.minimum // 2
    for constellation in (QPSK, QAM16):
        for i, sys in enumerate(_systems(seed, per_alphabet, 4, 4, constellation, 8.0)):
            conv = ConventionalTabuSearch(sys, iters, tabu_cap).run()
            qrts = QrTabuSearch(sys, iters, tabu_cap).run()
            ngts = NgtsSearch(sys, iters, tabu_cap).run()
            same = (
                conv.trace.moves() == qrts.trace.moves() == ngts.trace.moves() and
                np.array_equal(conv.solution, qrts.solution) and
                np.array_equal(conv.solution, ngts.solution)
            )
            metrics_agree = np.allclose(
                conv.trace.metrics(), ngts.trace.metrics(), rtol=1e-6, atol=1e-9
            )
            equivalence.check(
                same and metrics_agree,
                f"{constellation.name} instance {i}: conventional, QR and grouped searches diverge",
            )

            keys = [c.tobytes() for c in conv.trace.candidates]
            ok = all(
                keys[k] not in keys[max(0, k - tabu_cap):k] for k in range(1, len(keys))
            )
            tabu.check(ok, f"{constellation.name} instance {i}: revisited a tabu candidate")


def _group_best(suite: SuiteResult, seed: int):
    rng = np.random.default_rng(seed)
    delta = 2
    for g in range(suite.minimum):
        M = int(rng.integers(2, 9))
        z = rng.standard_normal(M)
        r = rng.standard_normal(M)
        # members share r and |δ|; signs and count vary
        signs = rng.choice([1, -1], size=int(rng.integers(1, 5)))
        gamma = z @ r
        alphas = [s * gamma for s in signs]
        metrics = [np.sum((z + r * s * delta) ** 2) for s in signs]
        pick = int(np.argmin(alphas))
        suite.check(
            metrics[pick] <= min(metrics) * (1 + 1e-12) + 1e-12,
            f"group {g}: simplified cost picked a member with larger metric",
        )


def _incremental(suite: SuiteResult, seed: int, cache_class, iters: int):
    sys = next(_systems(seed, 1, 8, 8, QAM16, 12.0))

    class _Search(NgtsSearch):
        def audit(self):
            super().audit()
            suite.checked += 1

    search = _Search(sys, iters, iters // 2, audit_every=1, cache_class=cache_class)
    try:
        search.run()
    except StructuralError as e:
        if e.code != 105:
            raise
        suite.fail(str(e))


def _oracle(suite: SuiteResult, seed: int):
    per_alphabet = suite.minimum // 2
    for constellation in (QPSK, QAM16):
        for i, sys in enumerate(_systems(seed, per_alphabet, 2, 2, constellation, 5.0)):
            bf = brute_force_ml(sys)
            sd = se_sphere_decode(sys)
            suite.check(
                np.array_equal(bf.solution, sd.solution) and bf.metric == sd.metric,
                f"{constellation.name} instance {i}: sphere decoder {sd.solution.tolist()} "
                f"!= exhaustive {bf.solution.tolist()}",
            )


def _epsilon(suite: SuiteResult):
    for N in range(1, suite.minimum + 1):
        direct = sum(
            min(a, b) for a, b in itertools.product(range(1, N + 1), repeat=2)
        ) / (N * N)
        from_cdf = sum(i * (epsilon_cdf(i, N) - epsilon_cdf(i - 1, N)) for i in range(1, N + 1))
        closed = expected_epsilon(N)
        suite.check(
            abs(closed - direct) <= 1e-12 and abs(closed - from_cdf) <= 1e-12,
            f"N={N}: E[min] {direct!r}, from CDF {from_cdf!r}, closed form {closed!r}",
        )


def selftest(report: Optional[str] = None, inject_fault: bool = False, seed: int = SELFTEST_SEED) -> SelftestReport:
    """
    Runs the invariant suites at small sizes. With :inject_fault: the
    incremental-integrity suite runs on a γ cache that skips invalidation,
    which must make it fail. With :report: an XML report is written there.
    """
    suites = [
        SuiteResult('real-model', 50),
        SuiteResult('qr-reconstruction', 50),
        SuiteResult('trajectory-equivalence', 64),
        SuiteResult('tabu-contract', 64),
        SuiteResult('group-best-soundness', 2000),
        SuiteResult('incremental-integrity', 400),
        SuiteResult('oracle-soundness', 60),
        SuiteResult('epsilon-model', 64),
    ]
    by_name = {s.name: s for s in suites}
    cache_class = FaultyGammaCache if inject_fault else GammaCache

    steps = [
        ('real-model', lambda: _real_model(by_name['real-model'], seed)),
        ('qr-reconstruction', lambda: _qr_reconstruction(by_name['qr-reconstruction'], seed + 1)),
        ('trajectory-equivalence', lambda: _trajectories(
            by_name['trajectory-equivalence'], by_name['tabu-contract'], seed + 2, 40, 20
        )),
        ('group-best-soundness', lambda: _group_best(by_name['group-best-soundness'], seed + 3)),
        ('incremental-integrity', lambda: _incremental(
            by_name['incremental-integrity'], seed + 4, cache_class, 400
        )),
        ('oracle-soundness', lambda: _oracle(by_name['oracle-soundness'], seed + 5)),
        ('epsilon-model', lambda: _epsilon(by_name['epsilon-model'])),
    ]
    for name, step in steps:
        log.info("selftest: %s", name)
        try:
            step()
        except NgtsError as e:
            by_name[name].fail(f"raised {e}")
            log.exception(e)

    result = SelftestReport(suites)
    for suite in suites:
        if suite.checked < suite.minimum and not suite.failures:
            log.warning(
                "selftest: %s checked %d of %d instances", suite.name, suite.checked, suite.minimum
            )
    if report:
        write_selftest_report(report, suites)
    return result
