import logging
from functools import cached_property
from typing import Optional

import numpy as np

from .data import OpLedger
from .errors import SingularityError, StructuralError
from .model import Constellation, quantize

__all__ = [
    'QrFactors',
    'qr_householder',
    'order_columns',
    'apply_qt',
    'back_substitute',
    'zf_solve',
    'unpermute',
    'RANK_TOL',
]

log = logging.getLogger(__name__)

# |r_mm| below RANK_TOL * ‖H‖_F is treated as rank deficiency.
RANK_TOL = 1e-12


class QrFactors:
    """
    Thin Householder QR factorization H[:, perm] = QR of an N×M real channel.

    Besides R, the object keeps the Householder reflectors so that Qᵀy can be
    applied without forming Q (see `apply_qt`). The explicit Q is built on
    first access only.

    :f: holds f_m = |δ|²‖r_m‖², :pair_key: the complex antenna each (permuted)
    column belongs to, so that columns m with equal pair_key share ‖r_m‖.
    """

    def __init__(
        self,
        R: np.ndarray,
        f: np.ndarray,
        perm: np.ndarray,
        pair_key: np.ndarray,
        reflectors: list,
        signs: np.ndarray,
        n_rows: int,
        delta: int = 2,
    ):
        self.R = R
        self.f = f
        self.perm = perm
        self.pair_key = pair_key
        self.reflectors = reflectors
        self.signs = signs
        self.n_rows = n_rows
        self.delta = delta
        for a in (self.R, self.f, self.perm, self.pair_key, self.signs):
            a.setflags(write=False)

    @property
    def M(self) -> int:
        return self.R.shape[0]

    @property
    def N(self) -> int:
        return self.n_rows

    @cached_property
    def Q(self) -> np.ndarray:
        """N×M matrix with orthonormal columns."""
        Q = np.eye(self.n_rows, self.M)
        for k, v, beta in reversed(self.reflectors):
            Q[k:, :] -= beta * np.outer(v, v @ Q[k:, :])
        Q = Q * self.signs[None, :]
        Q.setflags(write=False)
        return Q

    @property
    def column_norms(self) -> np.ndarray:
        """‖r_m‖ for every column of R."""
        return np.linalg.norm(self.R, axis=0)

    def __repr__(self) -> str:
        ordered = not np.array_equal(self.perm, np.arange(self.M))
        return "<{} {}x{}{}>".format(
            self.__class__.__name__, self.N, self.M, ' ordered' if ordered else ''
        )


def _pair_keys(M: int, nt: Optional[int], perm: np.ndarray) -> np.ndarray:
    if nt is None or 2 * nt != M:
        return np.array(perm, dtype=np.int64)
    return np.asarray(perm, dtype=np.int64) % nt


def order_columns(
    H,
    ascending_norms: bool = True,
    nt: Optional[int] = None,
    ledger: Optional[OpLedger] = None,
    return_norms: bool = False,
):
    """
    Sorts the columns of H by increasing squared norm when :ascending_norms:
    is set; ties keep the original order. Returns (H[:, perm], perm).

    When :nt: is given, H is a real model and columns n and n + nt share one
    norm computed once per complex antenna, which keeps the two columns of a
    pair adjacent and in their original order.

    With :return_norms: the squared norms, in permuted order, are returned
    as a third element.
    """
    H = np.asarray(H, dtype=float)
    N, M = H.shape
    if not ascending_norms:
        if return_norms:
            return H.copy(), np.arange(M), np.einsum('ij,ij->j', H, H)
        return H.copy(), np.arange(M)

    if nt is not None and 2 * nt == M:
        norms = np.empty(M)
        for n in range(nt):
            norms[n] = norms[n + nt] = H[:, n] @ H[:, n]
        if ledger is not None:
            ledger.charge('norms', mults=nt * N, adds=nt * (N - 1))
    else:
        norms = np.einsum('ij,ij->j', H, H)
        if ledger is not None:
            ledger.charge('norms', mults=M * N, adds=M * (N - 1))
    perm = np.argsort(norms, kind='stable')
    log.debug("column order %s", perm.tolist())
    if return_norms:
        return H[:, perm], perm, norms[perm]
    return H[:, perm], perm


def qr_householder(
    H,
    perm: Optional[np.ndarray] = None,
    nt: Optional[int] = None,
    delta: int = 2,
    ledger: Optional[OpLedger] = None,
    column_sq_norms: Optional[np.ndarray] = None,
    energies: bool = True,
) -> QrFactors:
    """
    Householder QR of the N×M matrix :H: (N ≥ M), with nonnegative diagonal.

    :H: is taken as already permuted by :perm: (identity by default).
    :column_sq_norms: may carry ‖h_m‖² values computed for ordering, which
    are then reused for f_m instead of reading them off R.
    Detectors that never read f_m pass :energies: False; f is then NaN.

    Charges the triangularization to the 'qr' step and the f_m computation
    to 'norms'. Square roots and sign flips are not counted.
    """
    A = np.array(H, dtype=float, copy=True)
    if A.ndim != 2:
        raise StructuralError(f"Expected a matrix, got shape {A.shape}")
    N, M = A.shape
    if N < M:
        raise StructuralError(f"QR needs N >= M, got {N}x{M}")
    if perm is None:
        perm = np.arange(M)
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(M)):
        raise StructuralError(f"Invalid permutation {perm.tolist()}", code=102)

    threshold = RANK_TOL * np.linalg.norm(A)
    mults = adds = 0
    reflectors = []
    R = np.zeros((M, M))
    for k in range(M):
        x = A[k:, k]
        m = len(x)
        normsq = x @ x
        mults += m
        adds += m - 1
        normx = np.sqrt(normsq)
        if normx <= threshold:
            raise SingularityError(
                f"Rank deficient channel: |r_{k + 1},{k + 1}| = {normx:.3g}"
            )
        if m == 1:
            R[k, k] = x[0]
            continue
        alpha = -normx if x[0] >= 0 else normx
        v = x.copy()
        v[0] -= alpha
        vv = 2.0 * (normsq - alpha * x[0])
        beta = 2.0 / vv
        mults += 3
        adds += 2
        reflectors.append((k, v, beta))
        R[k, k] = alpha

        rest = M - k - 1
        if rest:
            w = v @ A[k:, k + 1:]
            A[k:, k + 1:] -= np.outer(v, beta * w)
            mults += rest * (2 * m + 1)
            adds += rest * (2 * m - 1)
        R[k, k + 1:] = A[k, k + 1:]

    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    R = R * signs[:, None]
    if ledger is not None:
        ledger.charge('qr', mults=mults, adds=adds)

    pair_key = _pair_keys(M, nt, perm)
    if energies:
        f = _column_energies(R, pair_key, delta, ledger, column_sq_norms)
    else:
        f = np.full(M, np.nan)
    return QrFactors(
        R=R,
        f=f,
        perm=perm,
        pair_key=pair_key,
        reflectors=reflectors,
        signs=signs,
        n_rows=N,
        delta=delta,
    )


def _column_energies(R, pair_key, delta, ledger, column_sq_norms) -> np.ndarray:
    """f_m = |δ|²‖r_m‖², one norm per pair of columns sharing pair_key."""
    M = R.shape[0]
    f = np.empty(M)
    mults = 1  # |δ|²
    adds = 0
    dsq = delta * delta
    for key in np.unique(pair_key):
        cols = np.flatnonzero(pair_key == key)
        j = cols.min()
        if column_sq_norms is not None:
            sq = column_sq_norms[j]
        else:
            # r_j has j + 1 nonzero entries
            sq = R[:j + 1, j] @ R[:j + 1, j]
            mults += j + 1
            adds += j
        f[cols] = dsq * sq
        mults += 1
    if ledger is not None:
        ledger.charge('norms', mults=mults, adds=adds)
    return f


def apply_qt(qr: QrFactors, y, ledger: Optional[OpLedger] = None, step: str = 'residual') -> np.ndarray:
    """Qᵀy (length M) by applying the stored reflectors to :y:."""
    b = np.array(y, dtype=float, copy=True)
    if b.shape != (qr.N,):
        raise StructuralError(f"Vector of length {qr.N} expected, got {b.shape}")
    mults = adds = 0
    for k, v, beta in qr.reflectors:
        m = len(v)
        b[k:] -= (beta * (v @ b[k:])) * v
        mults += 2 * m + 1
        adds += 2 * m - 1
    if ledger is not None:
        ledger.charge(step, mults=mults, adds=adds)
    return b[:qr.M] * qr.signs


def back_substitute(R, b, ledger: Optional[OpLedger] = None) -> np.ndarray:
    """Solves Rx = b for upper triangular R."""
    R = np.asarray(R, dtype=float)
    b = np.asarray(b, dtype=float)
    M = R.shape[0]
    if R.shape != (M, M) or b.shape != (M,):
        raise StructuralError(f"Shapes R {R.shape} and b {b.shape} do not match")
    diag = np.abs(np.diag(R))
    if M and diag.min() <= RANK_TOL * max(np.linalg.norm(R), 1e-300):
        raise SingularityError("R is singular")
    x = np.zeros(M)
    for i in range(M - 1, -1, -1):
        x[i] = (b[i] - R[i, i + 1:] @ x[i + 1:]) / R[i, i]
    if ledger is not None:
        ledger.charge('zf', mults=M * (M + 1) // 2, adds=M * (M - 1) // 2)
    return x


def zf_solve(
    qr: QrFactors,
    y,
    constellation: Constellation,
    ledger: Optional[OpLedger] = None,
    qty: Optional[np.ndarray] = None,
) -> np.ndarray:
    """x_ZF = ⌈R⁻¹Qᵀy⌋ in the (possibly permuted) column order of :qr:."""
    if qty is None:
        qty = apply_qt(qr, y, ledger=ledger)
    return quantize(back_substitute(qr.R, qty, ledger=ledger), constellation)


def unpermute(x, perm) -> np.ndarray:
    """Maps a solution of H[:, perm] back to the column order of H."""
    x = np.asarray(x)
    out = np.empty_like(x)
    out[np.asarray(perm)] = x
    return out
