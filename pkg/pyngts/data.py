from collections import Counter
from typing import NamedTuple, Optional

import numpy as np

from .errors import StructuralError

__all__ = [
    'OpLedger',
    'SearchTrace',
    'TraceRow',
    'Detection',
    'INITIALIZATION',
    'ITERATIVE_SEARCH',
]

INITIALIZATION = 'initialization'
ITERATIVE_SEARCH = 'iterative_search'

# step label -> phase. Labels follow the steps of the detection algorithms.
STEP_PHASES = {
    'qr': INITIALIZATION,
    'norms': INITIALIZATION,
    'zf': INITIALIZATION,
    'residual': INITIALIZATION,
    'metric': INITIALIZATION,
    'neighbors': ITERATIVE_SEARCH,
    'gamma': ITERATIVE_SEARCH,
    'group': ITERATIVE_SEARCH,
    'final': ITERATIVE_SEARCH,
    'update': ITERATIVE_SEARCH,
}


class OpLedger:
    """
    Monotone counters of real multiplications and additions.

    Counters are keyed by step label (see STEP_PHASES) and every label belongs
    to one phase, either 'initialization' or 'iterative_search'. Besides the
    counters, the ledger records per-iteration samples of K (number of
    neighbor groups), L (number of neighbors) and d* (1-based difference
    position of the accepted move). Samples are kept as exact integer sums so
    that means are exact and merging is associative.

    Two ledgers merge with `+`, which is an elementwise sum:

        total = sum(ledgers, OpLedger())
    """

    def __init__(self):
        self._mults: Counter = Counter()
        self._adds: Counter = Counter()
        self._samples: Counter = Counter()
        self.gamma_fallbacks = 0

    def charge(self, step: str, mults: int = 0, adds: int = 0):
        """Adds :mults: multiplications and :adds: additions to :step:."""
        if step not in STEP_PHASES:
            raise StructuralError(f"Unknown ledger step '{step}'", code=102)
        if mults < 0 or adds < 0:
            raise StructuralError(
                f"Negative charge on '{step}' ({mults}, {adds})", code=102
            )
        self._mults[step] += int(mults)
        self._adds[step] += int(adds)

    def record_iteration(self, n_groups: int, n_neighbors: int, dstar: Optional[int]):
        """Records the K, L and d* values of one search iteration."""
        self._samples['iterations'] += 1
        self._samples['K'] += int(n_groups)
        self._samples['L'] += int(n_neighbors)
        if dstar is not None:
            self._samples['moves'] += 1
            self._samples['dstar'] += int(dstar)

    def record_fallback(self):
        self.gamma_fallbacks += 1

    def mults(self, phase: Optional[str] = None, step: Optional[str] = None) -> int:
        return self._select(self._mults, phase, step)

    def adds(self, phase: Optional[str] = None, step: Optional[str] = None) -> int:
        return self._select(self._adds, phase, step)

    def total(self, phase: Optional[str] = None, step: Optional[str] = None) -> int:
        return self.mults(phase, step) + self.adds(phase, step)

    def _select(self, counter: Counter, phase, step) -> int:
        if step is not None:
            return counter[step]
        if phase is None:
            return sum(counter.values())
        return sum(v for k, v in counter.items() if STEP_PHASES[k] == phase)

    @property
    def iterations(self) -> int:
        return self._samples['iterations']

    @property
    def mean_K(self) -> float:
        return self._mean('K', 'iterations')

    @property
    def mean_L(self) -> float:
        return self._mean('L', 'iterations')

    @property
    def mean_dstar(self) -> float:
        return self._mean('dstar', 'moves')

    def _mean(self, key: str, count_key: str) -> float:
        count = self._samples[count_key]
        if not count:
            return 0.0
        return self._samples[key] / count

    def ops_per_iteration(self) -> float:
        """Mean iterative-search operations per recorded iteration."""
        if not self.iterations:
            return 0.0
        return self.total(phase=ITERATIVE_SEARCH) / self.iterations

    def steps(self) -> tuple[str, ...]:
        return tuple(sorted(set(self._mults) | set(self._adds)))

    def copy(self) -> 'OpLedger':
        other = OpLedger()
        other._mults = self._mults.copy()
        other._adds = self._adds.copy()
        other._samples = self._samples.copy()
        other.gamma_fallbacks = self.gamma_fallbacks
        return other

    def __add__(self, other: 'OpLedger') -> 'OpLedger':
        if not isinstance(other, OpLedger):
            return NotImplemented
        out = self.copy()
        out._mults.update(other._mults)
        out._adds.update(other._adds)
        out._samples.update(other._samples)
        out.gamma_fallbacks += other.gamma_fallbacks
        return out

    def __radd__(self, other):
        # lets sum() start from 0
        if other == 0:
            return self.copy()
        return self.__add__(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OpLedger):
            return NotImplemented
        return (
            +self._mults == +other._mults and
            +self._adds == +other._adds and
            +self._samples == +other._samples and
            self.gamma_fallbacks == other.gamma_fallbacks
        )

    def __repr__(self) -> str:
        return "<{klass} mults:{m} adds:{a} iterations:{i}>".format(
            klass=self.__class__.__name__,
            m=self.mults(),
            a=self.adds(),
            i=self.iterations,
        )

    def dump(self) -> str:
        """Verbose representation of the object"""
        s = [
            "  {:<10} {:<17} mults:{:>12} adds:{:>12}".format(
                step, STEP_PHASES[step], self._mults[step], self._adds[step]
            )
            for step in self.steps()
        ]
        return "{!r}\n{}".format(self, "\n".join(s))


class TraceRow(NamedTuple):
    """
    One visited candidate. :dstar: is the 1-based difference position in the
    detector's working column order, :column: the same position mapped back
    to antenna order. Both are None on the initial row.
    """
    iteration: int
    dstar: Optional[int]
    column: Optional[int]
    delta: Optional[int]
    metric: float
    n_neighbors: int
    n_groups: int
    ops: int


class SearchTrace:
    """
    Visited candidates of one search, in order, with their metrics.

    Row 0 is the zero-forcing starting point. Candidates are stored in the
    detector's working (possibly permuted) column order; :solution: is in
    antenna order.
    """

    def __init__(self):
        self.rows: list[TraceRow] = []
        self.candidates: list[np.ndarray] = []
        self.solution: Optional[np.ndarray] = None
        self.best_metric = float('inf')
        self.best_iteration = 0
        self.terminated_early = False

    def add(self, row: TraceRow, candidate: np.ndarray):
        self.rows.append(row)
        self.candidates.append(np.array(candidate, copy=True))

    def moves(self) -> list[tuple[int, int]]:
        """(column, δ*) of every accepted move, in antenna order."""
        return [(r.column, r.delta) for r in self.rows[1:]]

    def metrics(self) -> np.ndarray:
        return np.array([r.metric for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def __repr__(self) -> str:
        return "<{klass} rows:{n} best:{b:.6g}@{i}{early}>".format(
            klass=self.__class__.__name__,
            n=len(self.rows),
            b=self.best_metric,
            i=self.best_iteration,
            early=' early-stop' if self.terminated_early else '',
        )


class Detection(NamedTuple):
    """What every detector returns; unpacks as (solution, trace, ledger)."""
    solution: np.ndarray
    trace: Optional[SearchTrace]
    ledger: OpLedger
