"""
Neighbor-grouped tabu search.

Neighbors whose difference positions d share the column norm ‖r_d‖ (in the
real model the two columns n and n + Nt of one complex antenna) form a group.
For a neighbor x = c − δ_d e_d the reduced metric expands as

    φ(x) = ‖z‖² + 2δ_d γ_d + |δ|²‖r_d‖²,    γ_d = zᵀr_d,

and since ‖z‖² and |δ|²‖r_d‖² are common to a group, its best member is the
one minimizing sign(δ_d)·γ_d. Group winners are then compared through their
exact metric increments β = 2δγ + f_d with f_d = |δ|²‖r_d‖² precomputed.

The search keeps z = Qᵀy − Rc and the partial sums of every γ_d up to date
incrementally: a move at d* changes z on positions 1..d* only, so γ_d only
needs its first min(d, d*) terms recomputed.
"""
import logging
from typing import NamedTuple, Optional

import numpy as np

from .data import Detection, OpLedger
from .errors import StructuralError
from .linalg import QrFactors, order_columns, qr_householder
from .model import RealSystem
from .tabu import Neighborhood, SearchState, TabuSearch

__all__ = [
    'NeighborGroup',
    'GammaCache',
    'NgtsState',
    'BestMove',
    'group_neighbors',
    'group_best',
    'incremental_gamma',
    'update_z',
    'final_best',
    'NgtsSearch',
    'ngts_detect',
]

log = logging.getLogger(__name__)

# audit tolerances
Z_TOL = 1e-9
GAMMA_TOL = 1e-9
PHI_TOL = 1e-6


class NeighborGroup:
    """
    Neighbors sharing one column norm η = ‖r_d‖.

    :members: are indices into the Neighborhood, in enumeration order.
    :winner: (index into members) and :gamma: are set by `group_best`.
    """

    def __init__(self, key: int, eta: float):
        self.key = key
        self.eta = eta
        self.members: list[int] = []
        self.positions: list[int] = []
        self.deltas: list[int] = []
        self.winner: Optional[int] = None
        self.gamma: Optional[float] = None

    def add(self, index: int, position: int, delta: int):
        self.members.append(index)
        self.positions.append(position)
        self.deltas.append(delta)

    @property
    def winner_index(self) -> int:
        """Neighborhood index of the group winner."""
        return self.members[self.winner]

    def __len__(self) -> int:
        return len(self.members)

    def __repr__(self) -> str:
        return "<{} key:{} η:{:.4g} {}>".format(
            self.__class__.__name__,
            self.key,
            self.eta,
            list(zip([p + 1 for p in self.positions], self.deltas)),
        )


class GammaCache:
    """
    Partial sums of γ_j = Σ_{n≤j} z_n r_{n,j} for every column j.

    tail[k, j] holds Σ_{n=k..j} z_n r_{n,j}; row j + 1 of column j is the
    empty sum. Entries are re-marked, never recomputed, when a move is
    accepted: `valid_from[j]` is the first row of column j that still
    matches the current z. A value past j + 1 marks the column unusable.
    """

    def __init__(self, M: int):
        self.M = M
        self.tail = np.zeros((M + 1, M))
        self.valid_from = np.arange(1, M + 1)
        self.dstar: Optional[int] = None

    @property
    def cold(self) -> bool:
        return self.dstar is None

    def mark_move(self, dstar: int):
        """Invalidates the rows above :dstar: (1-based) after a move."""
        cols = np.arange(self.M)
        self.valid_from = np.minimum(np.maximum(self.valid_from, dstar), cols + 1)
        self.dstar = int(dstar)

    def is_usable(self, column: int) -> bool:
        v = self.valid_from[column]
        return 0 <= v <= column + 1 and self.tail[column + 1, column] == 0.0

    def invalidate(self):
        """Marks every column unusable; the next reads fall back to full sums."""
        self.valid_from = np.full(self.M, self.M + 1)

    def corrupt(self, column: int, value: float):
        """Adds :value: to the cached partial sums of :column:. Test hook."""
        self.tail[:column + 1, column] += value

    def __repr__(self) -> str:
        return "<{} M={} d*={}>".format(self.__class__.__name__, self.M, self.dstar)


class NgtsState(SearchState):
    """SearchState extended with z = Qᵀy − Rc and the γ cache."""

    def __init__(self, c, metric: float, tabu_cap: int, z: np.ndarray, cache: GammaCache):
        super().__init__(c, metric, tabu_cap)
        self.z = np.array(z, dtype=float, copy=True)
        self.cache = cache


class BestMove(NamedTuple):
    candidate: np.ndarray
    position: int
    delta: int
    beta: float
    index: int


def group_neighbors(nbhd: Neighborhood, qr: QrFactors) -> list[NeighborGroup]:
    """
    Partitions :nbhd: by the complex antenna of each position. Groups come in
    the order of their base position, the first position of the pair in the
    working column order, whether or not a move at that position survived
    the tabu list.
    """
    keys, base_positions = np.unique(qr.pair_key, return_index=True)
    base = dict(zip(keys.tolist(), base_positions.tolist()))
    groups: dict[int, NeighborGroup] = {}
    for index, (position, delta) in enumerate(nbhd):
        key = int(qr.pair_key[position])
        group = groups.get(key)
        if group is None:
            eta = float(np.sqrt(qr.f[position])) / qr.delta
            group = groups[key] = NeighborGroup(key, eta)
        group.add(index, position, delta)
    return sorted(groups.values(), key=lambda g: base[g.key])


def incremental_gamma(
    cache: GammaCache,
    z: np.ndarray,
    qr: QrFactors,
    position: int,
    ledger: Optional[OpLedger] = None,
) -> float:
    """
    γ = zᵀr_j for the 0-based :position: j, reusing the cached sum of the
    terms below the last move.

    With d = j + 1 and the last move at d*, the first min(d, d*) terms are
    recomputed (min(d, d*) multiplications, min(d − 1, d*) additions). A
    column left out of earlier iterations is recomputed from its first
    stale row. Before any move, and on an unusable cache entry, the full sum
    is computed; the latter is recorded as a fallback.
    """
    j = position
    m = j + 1
    R = qr.R
    if cache.cold:
        start = m
    elif not cache.is_usable(j):
        start = m
        if ledger is not None:
            ledger.record_fallback()
        log.debug("γ cache fallback at position %d", m)
    else:
        start = max(min(m, cache.dstar), int(cache.valid_from[j]))

    if start == m:
        base = 0.0
        terms = z[:m] * R[:m, j]
        adds = m - 1
    else:
        base = cache.tail[start, j]
        terms = z[:start] * R[:start, j]
        adds = start
    if start:
        cache.tail[:start, j] = np.cumsum(terms[::-1])[::-1] + base
    cache.tail[m, j] = 0.0
    cache.valid_from[j] = 0
    if ledger is not None:
        ledger.charge('gamma', mults=start, adds=adds)
    return float(cache.tail[0, j])


def group_best(
    group: NeighborGroup,
    state: NgtsState,
    qr: QrFactors,
    ledger: Optional[OpLedger] = None,
) -> tuple[int, float]:
    """
    Member minimizing α = sign(δ)·γ, ties going to the earliest member.

    Sets and returns (group.winner, group.gamma).
    """
    best = 0
    best_alpha = float('inf')
    best_gamma = 0.0
    for i, (position, delta) in enumerate(zip(group.positions, group.deltas)):
        gamma = incremental_gamma(state.cache, state.z, qr, position, ledger=ledger)
        alpha = gamma if delta > 0 else -gamma
        if alpha < best_alpha:
            best = i
            best_alpha = alpha
            best_gamma = gamma
    if ledger is not None:
        ledger.charge('group', mults=len(group))
    group.winner = best
    group.gamma = best_gamma
    return best, best_gamma


def final_best(
    groups: list[NeighborGroup],
    state: NgtsState,
    qr: QrFactors,
    ledger: Optional[OpLedger] = None,
) -> BestMove:
    """
    Group winner with the smallest metric increment β = 2δγ + f, ties going
    to the earliest group. φ(x*) = φ(c) + β.
    """
    if not groups:
        raise StructuralError("No neighbor group to choose from", code=104)
    chosen = None
    best_beta = float('inf')
    for group in groups:
        w = group.winner
        position, delta = group.positions[w], group.deltas[w]
        beta = 2.0 * delta * group.gamma + qr.f[position]
        if beta < best_beta:
            best_beta = beta
            chosen = group
    if ledger is not None:
        ledger.charge('final', mults=2 * len(groups), adds=len(groups))

    w = chosen.winner
    position, delta = chosen.positions[w], chosen.deltas[w]
    candidate = np.array(state.c, copy=True)
    candidate[position] -= delta
    return BestMove(
        candidate=candidate,
        position=position,
        delta=delta,
        beta=float(best_beta),
        index=chosen.winner_index,
    )


def update_z(
    state: NgtsState,
    qr: QrFactors,
    position: int,
    delta: int,
    beta: Optional[float] = None,
    ledger: Optional[OpLedger] = None,
):
    """
    z ← z + r_j δ on the first j + 1 entries, j = :position:, then re-marks
    the γ cache. With :beta: the metric is advanced to φ + β.
    """
    if delta == 0:
        raise StructuralError("A move must change one coordinate")
    m = position + 1
    state.z[:m] += qr.R[:m, position] * delta
    state.cache.mark_move(m)
    adds = m
    if beta is not None:
        state.metric += beta
        adds += 1
    if ledger is not None:
        ledger.charge('update', mults=m, adds=adds)


class NgtsSearch(TabuSearch):
    """
    :ordering: sorts the channel columns by ascending norm before QR.
    :audit_every: recomputes z, φ and the valid γ partial sums from scratch
    every that many iterations and raises on drift (0 disables).
    """
    name = 'ngts'
    state_class = NgtsState
    cache_class = GammaCache

    ordering = False
    audit_every = 0

    def __init__(self, sys: RealSystem, iters: int, tabu_cap: int, debug: bool = False, **kwargs):
        super().__init__(sys, iters, tabu_cap, debug=debug)
        for key in ('ordering', 'audit_every', 'cache_class'):
            if key in kwargs:
                setattr(self, key, kwargs.pop(key))
        if kwargs:
            raise StructuralError(f"Unknown options {sorted(kwargs)}", code=102)
        if self.ordering:
            self.name = 'ngts_co'

    def initialize(self) -> tuple[np.ndarray, float]:
        sys = self.sys
        delta = self.constellation.delta
        if self.ordering:
            H, perm, norms = order_columns(
                sys.H, nt=sys.nt, ledger=self.ledger, return_norms=True
            )
            qr = qr_householder(
                H, perm=perm, nt=sys.nt, delta=delta, ledger=self.ledger, column_sq_norms=norms
            )
        else:
            qr = qr_householder(sys.H, nt=sys.nt, delta=delta, ledger=self.ledger)
        self.qr = qr
        self.perm = qr.perm
        M = qr.M

        self.qty, x = self._zf_start(qr, sys.y)
        self._z0 = self.qty - qr.R @ x
        self.ledger.charge('residual', mults=M * (M + 1) // 2, adds=M * (M - 1) // 2 + M)
        metric = float(self._z0 @ self._z0)
        self.ledger.charge('metric', mults=M, adds=M - 1)
        self.metric_offset = float(sys.y @ sys.y - self.qty @ self.qty)
        return x, metric

    def make_state(self, c, metric: float) -> NgtsState:
        return self.state_class(c, metric, self.tabu_cap, self._z0, self.cache_class(self.qr.M))

    def select(self, nbhd: Neighborhood) -> tuple[int, int]:
        groups = group_neighbors(nbhd, self.qr)
        for group in groups:
            group_best(group, self.state, self.qr, ledger=self.ledger)
        self._move = final_best(groups, self.state, self.qr, ledger=self.ledger)
        return self._move.index, len(groups)

    def move(self, nbhd: Neighborhood, index: int) -> float:
        best = self._move
        update_z(self.state, self.qr, best.position, best.delta, beta=best.beta, ledger=self.ledger)
        return self.state.metric

    def checkpoint(self):
        if self.audit_every and self.state.iteration % self.audit_every == 0:
            self.audit()

    def audit(self):
        """Compares the incremental state with direct recomputation."""
        state, qr = self.state, self.qr
        fresh_z = self.qty - qr.R @ state.c

        # γ partial sums: tail[k, j] = Σ_{n=k..M} z_n r_{n,j}
        products = fresh_z[:, None] * qr.R
        fresh_tail = np.cumsum(products[::-1], axis=0)[::-1]
        rows = np.arange(qr.M)[:, None]
        cols = np.arange(qr.M)[None, :]
        cache = state.cache
        checked = (rows >= cache.valid_from[None, :]) & (rows <= cols)
        cached = cache.tail[:qr.M]
        bad = checked & ~np.isclose(cached, fresh_tail, rtol=GAMMA_TOL, atol=GAMMA_TOL)
        if bad.any():
            k, j = np.argwhere(bad)[0]
            raise StructuralError(
                "gamma-drift at iteration {}: cached partial sum [{}, {}] = {!r}, expected {!r}".format(
                    state.iteration, k + 1, j + 1, cached[k, j], fresh_tail[k, j]
                ),
                code=105,
            )
        if not np.allclose(state.z, fresh_z, rtol=Z_TOL, atol=Z_TOL):
            raise StructuralError(
                "z-drift at iteration {}: max deviation {:.3g}".format(
                    state.iteration, float(np.max(np.abs(state.z - fresh_z)))
                ),
                code=105,
            )
        fresh_phi = float(fresh_z @ fresh_z)
        if abs(state.metric - fresh_phi) > PHI_TOL * max(fresh_phi, 1.0):
            raise StructuralError(
                "phi-drift at iteration {}: incremental {!r}, direct {!r}".format(
                    state.iteration, state.metric, fresh_phi
                ),
                code=105,
            )

    def run(self) -> Detection:
        detection = super().run()
        if self.ledger.gamma_fallbacks:
            log.warning(
                "%s: %d γ cache fallbacks to full dot products",
                self.name, self.ledger.gamma_fallbacks,
            )
        return detection


def ngts_detect(
    sys: RealSystem,
    iters: int,
    tabu_cap: int,
    channel_ordering: bool = False,
    audit_every: int = 0,
    debug: bool = False,
) -> Detection:
    """
    NG-TS detection of :sys: with :iters: iterations and a tabu list of
    :tabu_cap: candidates. With :channel_ordering: the search runs on the
    norm-sorted channel and the solution is returned in antenna order.
    """
    search = NgtsSearch(
        sys, iters, tabu_cap, debug=debug, ordering=channel_ordering, audit_every=audit_every
    )
    return search.run()
