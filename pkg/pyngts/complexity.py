"""
Analytic complexity models of the tabu-search detectors, next to the helpers
comparing them with measured OpLedger counts.

N is the number of real dimensions (M = N assumed by the models), L̄ and K̄
the mean number of neighbors and of neighbor groups per iteration, I the
number of iterations.
"""
import logging
from typing import Optional

from .data import OpLedger
from .errors import StructuralError

__all__ = [
    'predict_conventional',
    'predict_conventional_iteration',
    'predict_ngts',
    'predict_ngts_iteration',
    'predict_ngts_iteration_exact',
    'predict_table_one',
    'measured_table_one',
    'epsilon_cdf',
    'expected_epsilon',
    'measured_reduction',
    'TABLE_ONE_STEPS',
]

log = logging.getLogger(__name__)

# algorithm step -> ledger step label
TABLE_ONE_STEPS = {
    '1': 'qr',
    '2': 'norms',
    '4': 'zf',
    '5': 'residual',
    '6': 'metric',
}


def _check_n(N):
    if N < 1:
        raise StructuralError(f"N must be >= 1, got {N}", code=102)


def predict_conventional_iteration(N, L) -> float:
    return 4.0 * L * N - 2.0


def predict_conventional(N, L, I) -> float:
    """2N³/3 + 3N² + N/3 + I(4L̄N − 2)."""
    _check_n(N)
    init = 2.0 * N ** 3 / 3.0 + 3.0 * N ** 2 + N / 3.0
    return init + I * predict_conventional_iteration(N, L)


def predict_ngts_iteration(N, L, K) -> float:
    """3K̄ + 2L̄ + 2L̄N/3 + L̄/(3N)."""
    _check_n(N)
    return 3.0 * K + 2.0 * L + 2.0 * L * N / 3.0 + L / (3.0 * N)


def predict_ngts_iteration_exact(K, L, epsilon) -> float:
    """
    3K̄ + L̄ + 2ε, where :epsilon: is the mean over iterations of
    Σ_l min(d_l, d*), before substituting its uniform-position expectation.
    """
    return 3.0 * K + L + 2.0 * epsilon


def predict_ngts(N, L, K, I) -> float:
    """4N³/3 + 9N²/2 + 3N/2 + I(3K̄ + 2L̄ + 2L̄N/3 + L̄/(3N))."""
    _check_n(N)
    init = 4.0 * N ** 3 / 3.0 + 9.0 * N ** 2 / 2.0 + 3.0 * N / 2.0
    return init + I * predict_ngts_iteration(N, L, K)


def epsilon_cdf(i, N) -> float:
    """
    P(min(d_l, d*) ≤ i) = i(2N − i)/N² for d_l, d* independent and uniform
    on 1..N.
    """
    _check_n(N)
    if i < 0 or i > N:
        raise StructuralError(f"i must lie in [0, {N}], got {i}", code=102)
    return i * (2.0 * N - i) / (N * N)


def expected_epsilon(N) -> float:
    """E[min(d_l, d*)] = N/3 + 1/2 + 1/(6N)."""
    _check_n(N)
    return N / 3.0 + 0.5 + 1.0 / (6.0 * N)


def predict_table_one(N, K, L, epsilon: Optional[float] = None) -> dict:
    """
    Per-step (multiplications, additions) of the NG-TS algorithm for M = N.

    Keys are the step numbers of TABLE_ONE_STEPS plus '12-20' for one
    search iteration, for which :epsilon: defaults to L̄·E[min(d_l, d*)].
    """
    _check_n(N)
    if epsilon is None:
        epsilon = L * expected_epsilon(N)
    return {
        '1': (2.0 * N ** 3 / 3.0, 2.0 * N ** 3 / 3.0),
        '2': (N ** 2 / 4.0 + 1.0, N ** 2 / 4.0 - N / 2.0),
        '4': (N ** 2 / 2.0 + N / 2.0, N ** 2 / 2.0 - N / 2.0),
        '5': (3.0 * N ** 2 / 2.0 + N / 2.0, 3.0 * N ** 2 / 2.0 - N / 2.0),
        '6': (float(N), N - 1.0),
        '12-20': (2.0 * K + L + epsilon, K + epsilon),
    }


def measured_table_one(ledger: OpLedger, per_search: int = 1) -> dict:
    """
    The same layout as `predict_table_one`, read from :ledger:. Counts are
    divided by :per_search: (the number of merged searches) and the
    iteration row by the number of recorded iterations.
    """
    if per_search < 1:
        raise StructuralError(f"per_search must be >= 1, got {per_search}", code=102)
    out = {
        key: (ledger.mults(step=step) / per_search, ledger.adds(step=step) / per_search)
        for key, step in TABLE_ONE_STEPS.items()
    }
    iterations = ledger.iterations or 1
    mults = sum(ledger.mults(step=s) for s in ('gamma', 'group', 'final'))
    adds = sum(ledger.adds(step=s) for s in ('gamma', 'group', 'final'))
    out['12-20'] = (mults / iterations, adds / iterations)
    return out


def measured_reduction(ledger_a: OpLedger, ledger_b: OpLedger, phase: Optional[str] = None) -> float:
    """
    Percentage by which :ledger_b: needs fewer operations than :ledger_a:,
    100·(1 − total(b)/total(a)). :phase: restricts both totals.
    """
    a = ledger_a.total(phase=phase)
    if not a:
        raise StructuralError("Reference ledger has no operations", code=103)
    return 100.0 * (1.0 - ledger_b.total(phase=phase) / a)

