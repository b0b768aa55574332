import logging
from collections import Counter, deque
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .data import Detection, OpLedger, SearchTrace, TraceRow
from .errors import StructuralError
from .linalg import QrFactors, apply_qt, back_substitute, qr_householder, unpermute
from .model import Constellation, RealSystem, quantize

__all__ = [
    'TabuList',
    'Neighbor',
    'Neighborhood',
    'SearchState',
    'enumerate_neighbors',
    'TabuSearch',
    'ConventionalTabuSearch',
    'QrTabuSearch',
    'conventional_ts',
    'qr_ts',
]

log = logging.getLogger(__name__)


def _key(v) -> bytes:
    # alphabet points are small odd integers
    return np.asarray(v, dtype=np.int8).tobytes()


class TabuList:
    """FIFO memory of the last :capacity: candidates, with O(1) membership."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise StructuralError(f"Tabu list capacity must be >= 1, got {capacity}", code=102)
        self.capacity = int(capacity)
        self._queue: deque = deque()
        self._count: Counter = Counter()

    def push(self, v):
        """Appends :v:, releasing the oldest entry first when full."""
        if len(self._queue) == self.capacity:
            old = self._queue.popleft()
            self._count[old] -= 1
            if not self._count[old]:
                del self._count[old]
        key = _key(v)
        self._queue.append(key)
        self._count[key] += 1

    def contains_key(self, key: bytes) -> bool:
        return key in self._count

    def __contains__(self, v) -> bool:
        return _key(v) in self._count

    def __len__(self) -> int:
        return len(self._queue)

    def __repr__(self) -> str:
        return "<{} {}/{}>".format(self.__class__.__name__, len(self), self.capacity)


class Neighbor(NamedTuple):
    """
    Single-coordinate move x = c − delta·e_position.

    :position: is 0-based. :delta: follows the metric convention
    δ = c_d − x_d, so that φ(x) = ‖u + h_d δ‖² with u = y − Hc.
    """
    position: int
    delta: int


class Neighborhood:
    """Ordered non-tabu neighbors of a candidate."""

    def __init__(self, entries: list[Neighbor]):
        self.entries = entries
        self.positions = np.array([e.position for e in entries], dtype=np.int64)
        self.deltas = np.array([e.delta for e in entries], dtype=np.int64)

    @property
    def L(self) -> int:
        return len(self.entries)

    def candidate(self, c, index: int) -> np.ndarray:
        x = np.array(c, dtype=np.int64, copy=True)
        e = self.entries[index]
        x[e.position] -= e.delta
        return x

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> Neighbor:
        return self.entries[index]

    def __iter__(self) -> Iterator[Neighbor]:
        return iter(self.entries)

    def __repr__(self) -> str:
        return "<{} L={} {}>".format(
            self.__class__.__name__,
            self.L,
            [(e.position + 1, e.delta) for e in self.entries],
        )


def enumerate_neighbors(c, constellation: Constellation, tabu: Optional[TabuList] = None) -> Neighborhood:
    """
    All in-alphabet, non-tabu vectors one step of |δ| away from :c:.

    Order is by position, then δ = +|δ| before δ = −|δ|. An empty
    neighborhood is a valid result.
    """
    c = np.asarray(c, dtype=np.int64)
    lo = constellation.real_alphabet[0]
    hi = constellation.real_alphabet[-1]
    step = constellation.delta
    work = c.copy()
    entries = []
    for d in range(len(c)):
        for delta in (step, -step):
            value = c[d] - delta
            if value < lo or value > hi:
                continue
            if tabu is not None:
                work[d] = value
                is_tabu = tabu.contains_key(_key(work))
                work[d] = c[d]
                if is_tabu:
                    continue
            entries.append(Neighbor(d, delta))
    return Neighborhood(entries)


class SearchState:
    """
    Mutable state of one search: current candidate and its metric, the tabu
    list and the best candidate visited so far.
    """

    def __init__(self, c, metric: float, tabu_cap: int):
        self.c = np.array(c, dtype=np.int64, copy=True)
        self.metric = float(metric)
        self.tabu = TabuList(tabu_cap)
        self.tabu.push(self.c)
        self.best = self.c.copy()
        self.best_metric = self.metric
        self.iteration = 0

    def accept(self, nb: Neighbor, metric: float) -> bool:
        """
        Moves to :nb: and pushes the new candidate to the tabu list. Returns
        True when the move improved the best-so-far metric.
        """
        self.c[nb.position] -= nb.delta
        self.metric = float(metric)
        self.tabu.push(self.c)
        self.iteration += 1
        if self.metric < self.best_metric:
            self.best_metric = self.metric
            self.best = self.c.copy()
            return True
        return False

    def __repr__(self) -> str:
        return "<{} it:{} φ:{:.6g} best:{:.6g}>".format(
            self.__class__.__name__, self.iteration, self.metric, self.best_metric
        )


class TabuSearch:
    """
    Shared tabu-search driver.

    Subclasses implement how the start point is computed (`initialize`), how
    the best neighbor is found (`select`) and how the running residual is
    moved (`move`). The driver owns the search state and the trace, so every
    variant follows exactly the same rules:

      - start from x_ZF, pushed to the tabu list;
      - move every iteration to the best non-tabu neighbor, ties going to
        the lowest enumeration order;
      - keep the best visited candidate (strict improvement only);
      - stop early, keeping the best so far, when no neighbor is left.

    The metric a subclass maintains may differ from ‖y − Hc‖² by the
    constant `self.metric_offset`; trace rows report the full metric.
    """
    name = 'ts'
    state_class = SearchState

    def __init__(self, sys: RealSystem, iters: int, tabu_cap: int, debug: bool = False):
        if iters < 0:
            raise StructuralError(f"Iteration count must be >= 0, got {iters}", code=102)
        if tabu_cap < 1:
            raise StructuralError(f"Tabu list length must be >= 1, got {tabu_cap}", code=102)
        self.sys = sys
        self.constellation = sys.constellation
        self.iters = int(iters)
        self.tabu_cap = int(tabu_cap)
        self.debug = debug
        self.ledger = OpLedger()
        self.perm = np.arange(sys.M)
        self.metric_offset = 0.0
        self.state: Optional[SearchState] = None

    def initialize(self) -> tuple[np.ndarray, float]:
        """Returns (x_ZF, its metric) and prepares the running residual."""
        raise NotImplementedError

    def make_state(self, c, metric: float) -> SearchState:
        return self.state_class(c, metric, self.tabu_cap)

    def select(self, nbhd: Neighborhood) -> tuple[int, int]:
        """Returns (index of the best neighbor, number of groups examined)."""
        raise NotImplementedError

    def move(self, nbhd: Neighborhood, index: int) -> float:
        """Updates the running residual for the chosen move, returns the new metric."""
        raise NotImplementedError

    def checkpoint(self):
        """Called after every accepted move."""

    def run(self) -> Detection:
        x, metric = self.initialize()
        state = self.state = self.make_state(x, metric)

        trace = SearchTrace()
        trace.add(
            TraceRow(0, None, None, None, state.metric + self.metric_offset, 0, 0, self.ledger.total()),
            state.c,
        )

        for i in range(1, self.iters + 1):
            nbhd = enumerate_neighbors(state.c, self.constellation, state.tabu)
            if not nbhd:
                trace.terminated_early = True
                log.debug(
                    "%s: empty neighborhood at iteration %d, keeping the best so far", self.name, i
                )
                break
            index, n_groups = self.select(nbhd)
            nb = nbhd[index]
            metric = self.move(nbhd, index)
            if state.accept(nb, metric):
                trace.best_iteration = i
            self.ledger.record_iteration(n_groups, len(nbhd), nb.position + 1)
            self.checkpoint()

            trace.add(
                TraceRow(
                    iteration=i,
                    dstar=nb.position + 1,
                    column=int(self.perm[nb.position]) + 1,
                    delta=nb.delta,
                    metric=state.metric + self.metric_offset,
                    n_neighbors=len(nbhd),
                    n_groups=n_groups,
                    ops=self.ledger.total(),
                ),
                state.c,
            )
            if self.debug:
                log.info(
                    "%s it %d: L=%d K=%d d*=%d δ*=%d φ=%.6g",
                    self.name, i, len(nbhd), n_groups, nb.position + 1, nb.delta,
                    state.metric + self.metric_offset,
                )

        solution = unpermute(state.best, self.perm)
        trace.solution = solution
        trace.best_metric = state.best_metric + self.metric_offset
        return Detection(solution=solution, trace=trace, ledger=self.ledger)

    def _zf_start(self, qr: QrFactors, y) -> tuple[np.ndarray, np.ndarray]:
        """(Qᵀy, x_ZF) with their cost charged to 'residual' and 'zf'."""
        qty = apply_qt(qr, y, ledger=self.ledger)
        x = quantize(back_substitute(qr.R, qty, ledger=self.ledger), self.constellation)
        return qty, x


class ConventionalTabuSearch(TabuSearch):
    """
    Tabu search evaluating every neighbor's metric as ‖u + h_d δ_d‖².

    Each neighbor costs N multiplications and N additions for u + h_dδ_d and
    N multiplications and N − 1 additions for the squared norm.
    """
    name = 'conventional_ts'

    def initialize(self) -> tuple[np.ndarray, float]:
        sys = self.sys
        qr = qr_householder(
            sys.H, nt=sys.nt, delta=self.constellation.delta, ledger=self.ledger, energies=False
        )
        _, x = self._zf_start(qr, sys.y)
        N, M = sys.N, sys.M
        self.u = sys.y - sys.H @ x
        self.ledger.charge('residual', mults=N * M, adds=N * M)
        metric = float(self.u @ self.u)
        self.ledger.charge('metric', mults=N, adds=N - 1)
        return x, metric

    def select(self, nbhd: Neighborhood) -> tuple[int, int]:
        N = self.sys.N
        L = len(nbhd)
        self._U = self.u[:, None] + self.sys.H[:, nbhd.positions] * nbhd.deltas[None, :]
        self._metrics = np.einsum('ij,ij->j', self._U, self._U)
        self.ledger.charge('neighbors', mults=2 * N * L, adds=(2 * N - 1) * L)
        return int(np.argmin(self._metrics)), 0

    def move(self, nbhd: Neighborhood, index: int) -> float:
        self.u = self._U[:, index].copy()
        return float(self._metrics[index])


class QrTabuSearch(TabuSearch):
    """
    Tabu search on the QR-reduced cost φ(x) = ‖z + r_d δ_d‖², z = Qᵀy − Rc.

    Only the first d entries of r_d are nonzero, so a neighbor at position d
    changes z on 1..d only: its metric is the stored tail Σ_{n>d} z_n² plus
    the squared norm of the d changed entries (2d multiplications and 2d
    additions). Accepting a move refreshes z_n² on 1..d* and the tail sums
    below d*.
    """
    name = 'qr_ts'

    def __init__(
        self,
        sys: RealSystem,
        iters: int,
        tabu_cap: int,
        qr: Optional[QrFactors] = None,
        debug: bool = False,
    ):
        super().__init__(sys, iters, tabu_cap, debug=debug)
        self.qr = qr

    def initialize(self) -> tuple[np.ndarray, float]:
        sys = self.sys
        if self.qr is None:
            self.qr = qr_householder(
                sys.H, nt=sys.nt, delta=self.constellation.delta, ledger=self.ledger, energies=False
            )
        qr = self.qr
        self.perm = qr.perm
        M = qr.M
        qty, x = self._zf_start(qr, sys.y)
        self.z = qty - qr.R @ x
        self.ledger.charge('residual', mults=M * (M + 1) // 2, adds=M * (M - 1) // 2 + M)

        self.sq = self.z * self.z
        # tail[j] = Σ_{n>j} z_n²
        self.tail = np.zeros(M)
        self.tail[:-1] = np.cumsum(self.sq[::-1])[::-1][1:]
        metric = float(self.tail[0] + self.sq[0])
        self.ledger.charge('metric', mults=M, adds=M - 1)
        self.metric_offset = float(sys.y @ sys.y - qty @ qty)
        return x, metric

    def select(self, nbhd: Neighborhood) -> tuple[int, int]:
        R, z = self.qr.R, self.z
        best_index = -1
        best_metric = float('inf')
        mults = adds = 0
        for index, (j, delta) in enumerate(nbhd):
            m = j + 1
            w = z[:m] + R[:m, j] * delta
            metric = self.tail[j] + w @ w
            mults += 2 * m
            adds += 2 * m
            if metric < best_metric:
                best_metric = metric
                best_index = index
                self._w = w
        self.ledger.charge('neighbors', mults=mults, adds=adds)
        self._best_metric = float(best_metric)
        return best_index, 0

    def move(self, nbhd: Neighborhood, index: int) -> float:
        m = nbhd[index].position + 1
        self.z[:m] = self._w
        self.sq[:m] = self._w * self._w
        for j in range(m - 2, -1, -1):
            self.tail[j] = self.tail[j + 1] + self.sq[j + 1]
        self.ledger.charge('update', mults=m, adds=m - 1)
        return self._best_metric


def conventional_ts(sys: RealSystem, iters: int, tabu_cap: int, debug: bool = False) -> Detection:
    """Conventional tabu search from x_ZF. Returns (solution, trace, ledger)."""
    return ConventionalTabuSearch(sys, iters, tabu_cap, debug=debug).run()


def qr_ts(
    sys: RealSystem,
    qr: Optional[QrFactors],
    iters: int,
    tabu_cap: int,
    debug: bool = False,
) -> Detection:
    """
    QR-reduced tabu search. When :qr: is given its factorization cost is not
    part of the returned ledger; pass None to factorize (and charge) here.
    """
    return QrTabuSearch(sys, iters, tabu_cap, qr=qr, debug=debug).run()
