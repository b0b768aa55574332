import itertools
import logging
from typing import NamedTuple, Optional

import numpy as np

from .errors import RefusalError
from .linalg import QrFactors, apply_qt, qr_householder, unpermute, zf_solve
from .model import RealSystem

__all__ = [
    'MlResult',
    'brute_force_ml',
    'se_sphere_decode',
    'BRUTE_FORCE_LIMIT',
]

log = logging.getLogger(__name__)

# largest number of candidate vectors brute_force_ml accepts
BRUTE_FORCE_LIMIT = 10 ** 6
_CHUNK = 4096


class MlResult(NamedTuple):
    """Exact ML solution, its metric ‖y − Hx‖² and the number of nodes visited."""
    solution: np.ndarray
    metric: float
    nodes: int


def brute_force_ml(sys: RealSystem) -> MlResult:
    """
    Exhaustive minimization of ‖y − Hx‖² over every alphabet vector.

    Candidates are scanned in lexicographic order and only a strictly smaller
    metric replaces the current best, so ties go to the lexicographically
    smallest vector.
    """
    alphabet = sys.constellation.real_alphabet
    count = len(alphabet) ** sys.M
    if count > BRUTE_FORCE_LIMIT:
        raise RefusalError(
            f"{count} candidates exceed the exhaustive search limit of {BRUTE_FORCE_LIMIT}"
        )
    H, y = sys.H, sys.y
    best = None
    best_metric = float('inf')
    candidates = itertools.product(alphabet.tolist(), repeat=sys.M)
    while True:
        chunk = np.array(list(itertools.islice(candidates, _CHUNK)), dtype=np.int64)
        if not len(chunk):
            break
        residual = y[None, :] - chunk @ H.T
        metrics = np.einsum('ij,ij->i', residual, residual)
        i = int(np.argmin(metrics))
        if metrics[i] < best_metric:
            best_metric = float(metrics[i])
            best = chunk[i].copy()
    return MlResult(solution=best, metric=sys.metric(best), nodes=count)


class _SchnorrEuchner:
    """Depth-first closest-point search on the triangular system (Qᵀy, R)."""

    def __init__(self, R, qty, alphabet):
        self.R = R
        self.qty = qty
        self.alphabet = alphabet
        self.M = R.shape[0]
        self.x = np.zeros(self.M, dtype=np.int64)
        self.best = None
        self.radius = float('inf')
        self.nodes = 0

    def search(self, start, radius):
        self.best = np.array(start, dtype=np.int64, copy=True)
        self.radius = radius
        if self.M:
            self._descend(self.M - 1, 0.0)
        return self.best

    def _descend(self, level, partial):
        R, x = self.R, self.x
        rll = R[level, level]
        center = (self.qty[level] - R[level, level + 1:] @ x[level + 1:]) / rll
        # zig-zag around the center, nearest point first
        order = np.argsort(np.abs(self.alphabet - center), kind='stable')
        for a in self.alphabet[order]:
            e = rll * (center - a)
            d = partial + e * e
            self.nodes += 1
            if d >= self.radius:
                break
            x[level] = a
            if level == 0:
                self.radius = d
                self.best = x.copy()
            else:
                self._descend(level - 1, d)


def se_sphere_decode(sys: RealSystem, qr: Optional[QrFactors] = None) -> MlResult:
    """
    Exact ML detection by Schnorr-Euchner sphere decoding.

    The search starts with the zero-forcing point as incumbent, its reduced
    metric as radius, and shrinks the radius on every better leaf. :qr: may
    be an ordered factorization; the solution is returned in antenna order.
    """
    if qr is None:
        qr = qr_householder(sys.H, nt=sys.nt, delta=sys.constellation.delta, energies=False)
    qty = apply_qt(qr, sys.y)
    x_zf = zf_solve(qr, sys.y, sys.constellation, qty=qty)
    r = qty - qr.R @ x_zf
    decoder = _SchnorrEuchner(qr.R, qty, sys.constellation.real_alphabet)
    best = decoder.search(x_zf, float(r @ r))
    solution = unpermute(best, qr.perm)
    log.debug("sphere decoder visited %d nodes", decoder.nodes)
    return MlResult(solution=solution, metric=sys.metric(solution), nodes=decoder.nodes)
