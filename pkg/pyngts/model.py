import logging
import math
from typing import Optional

import numpy as np

from .errors import StructuralError

__all__ = [
    'Constellation',
    'QPSK',
    'QAM16',
    'QAM64',
    'ComplexSystem',
    'RealSystem',
    'to_real',
    'draw_instance',
    'trial_rng',
    'quantize',
    'bit_errors',
]

log = logging.getLogger(__name__)


class Constellation:
    """
    Real-valued alphabet of a square QAM constellation.

    The complex constellation is the cartesian product of :real_alphabet: with
    itself. Points are the unnormalized odd integers, so the minimum spacing
    :delta: is 2 for every alphabet.
    """
    _aliases = {
        'qpsk': 'QPSK',
        '4qam': 'QPSK',
        'qam4': 'QPSK',
        '16qam': 'QAM16',
        'qam16': 'QAM16',
        '64qam': 'QAM64',
        'qam64': 'QAM64',
    }

    def __init__(self, name: str, real_alphabet):
        alphabet = np.asarray(real_alphabet, dtype=np.int64)
        if alphabet.ndim != 1 or len(alphabet) < 2:
            raise StructuralError(f"Alphabet of {name} must hold 2 points or more", code=104)
        if np.any(np.diff(alphabet) <= 0):
            raise StructuralError(f"Alphabet of {name} must be strictly increasing")
        if not np.array_equal(alphabet, -alphabet[::-1]):
            raise StructuralError(f"Alphabet of {name} must be symmetric about 0")
        steps = np.unique(np.diff(alphabet))
        if len(steps) != 1:
            raise StructuralError(f"Alphabet of {name} must be evenly spaced")
        bits = math.log2(len(alphabet))
        if bits != int(bits):
            raise StructuralError(f"Alphabet size of {name} must be a power of 2")

        alphabet.setflags(write=False)
        self.name = name
        self.real_alphabet = alphabet
        self.delta = int(steps[0])
        self.bits_per_dim = int(bits)
        self._midpoints = (alphabet[:-1] + alphabet[1:]) / 2.0
        self._index = {int(a): i for i, a in enumerate(alphabet)}
        # Gray label of the i-th alphabet point, per real dimension.
        self._gray = np.array([i ^ (i >> 1) for i in range(len(alphabet))], dtype=np.int64)
        self._popcount = np.array(
            [bin(i).count('1') for i in range(len(alphabet))], dtype=np.int64
        )

    @classmethod
    def by_name(cls, name: str) -> 'Constellation':
        key = cls._aliases.get(str(name).strip().lower().replace('-', ''))
        if key is None:
            raise StructuralError(f"Unknown modulation '{name}'", code=102)
        return CONSTELLATIONS[key]

    @property
    def size(self) -> int:
        """Number of complex constellation points (Q)."""
        return len(self.real_alphabet) ** 2

    @property
    def mean_power(self) -> float:
        """Mean complex symbol power σ_s² of uniformly drawn symbols."""
        return 2.0 * float(np.mean(self.real_alphabet.astype(float) ** 2))

    @property
    def complex_points(self) -> np.ndarray:
        a = self.real_alphabet
        return (a[:, None] + 1j * a[None, :]).ravel()

    def index_of(self, values) -> np.ndarray:
        """Alphabet indices of :values:, raising on non-alphabet entries."""
        values = np.asarray(values)
        out = np.empty(values.shape, dtype=np.int64)
        for i, v in enumerate(values.ravel()):
            try:
                key = int(v)
                if key != v:
                    raise KeyError(v)
                out.flat[i] = self._index[key]
            except (KeyError, ValueError, TypeError):
                raise StructuralError(
                    f"{v!r} is not a point of the {self.name} alphabet", code=101
                ) from None
        return out

    def contains(self, values) -> bool:
        try:
            self.index_of(values)
        except StructuralError:
            return False
        return True

    def gray_labels(self, values) -> np.ndarray:
        return self._gray[self.index_of(values)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Constellation):
            return NotImplemented
        return np.array_equal(self.real_alphabet, other.real_alphabet)

    def __hash__(self) -> int:
        return hash(tuple(self.real_alphabet.tolist()))

    def __repr__(self) -> str:
        return "<{} {}>".format(self.name, self.real_alphabet.tolist())


QPSK = Constellation('QPSK', [-1, 1])
QAM16 = Constellation('QAM16', [-3, -1, 1, 3])
QAM64 = Constellation('QAM64', [-7, -5, -3, -1, 1, 3, 5, 7])

CONSTELLATIONS = {c.name: c for c in (QPSK, QAM16, QAM64)}


def _frozen(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class ComplexSystem:
    """
    One complex detection instance ỹ = H̃s̃ + ṽ.

    :s: is the transmitted vector (known in simulation only, may be None).
    """

    def __init__(
        self,
        H,
        y,
        constellation: Constellation,
        s=None,
        noise_var: float = 1.0,
        symbol_power: Optional[float] = None,
    ):
        H = np.asarray(H, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if H.ndim != 2:
            raise StructuralError(f"Channel must be a matrix, got shape {H.shape}")
        if y.shape != (H.shape[0],):
            raise StructuralError(
                f"Received vector shape {y.shape} does not match channel {H.shape}"
            )
        if s is not None:
            s = np.asarray(s, dtype=complex)
            if s.shape != (H.shape[1],):
                raise StructuralError(
                    f"Symbol vector shape {s.shape} does not match channel {H.shape}"
                )
        if not noise_var >= 0:
            raise StructuralError(f"Noise variance must be nonnegative, got {noise_var}")

        self.H = _frozen(H)
        self.y = _frozen(y)
        self.s = _frozen(s)
        self.constellation = constellation
        self.noise_var = float(noise_var)
        self.symbol_power = (
            constellation.mean_power if symbol_power is None else float(symbol_power)
        )

    @property
    def nr(self) -> int:
        return self.H.shape[0]

    @property
    def nt(self) -> int:
        return self.H.shape[1]

    def __repr__(self) -> str:
        return "<{} {}x{} {} σv²={:.4g}>".format(
            self.__class__.__name__, self.nt, self.nr, self.constellation.name, self.noise_var
        )


def _check_block_structure(H: np.ndarray, nt: int):
    N, M = H.shape
    if nt < 1 or M != 2 * nt or N % 2:
        raise StructuralError(
            f"A {N}x{M} real channel cannot stack {nt} complex antennas", code=100
        )
    half = N // 2
    re, im = H[:half, :nt], H[half:, :nt]
    tol = 1e-12 * max(float(np.abs(H).max()), 1.0)
    if not (np.allclose(H[half:, nt:], re, rtol=0.0, atol=tol) and
            np.allclose(H[:half, nt:], -im, rtol=0.0, atol=tol)):
        raise StructuralError(
            "Real channel does not have the [Re -Im; Im Re] block structure", code=100
        )


class RealSystem:
    """
    Real-valued equivalent y = Hs + v of a ComplexSystem, with M = 2·nt
    columns and N = 2·nr rows.

    With :nt: given, H must have the block structure [Re −Im; Im Re] of a
    stacked complex channel, and columns n and n + nt are paired. Without it
    the columns are unrelated and every column stands on its own.
    """

    def __init__(self, H, y, constellation: Constellation, s=None, nt: Optional[int] = None):
        H = np.asarray(H, dtype=float)
        y = np.asarray(y, dtype=float)
        if H.ndim != 2 or y.shape != (H.shape[0],):
            raise StructuralError(
                f"Inconsistent real system: H {H.shape}, y {y.shape}"
            )
        if s is not None:
            s = np.asarray(s, dtype=np.int64)
            if s.shape != (H.shape[1],):
                raise StructuralError(f"Symbol vector shape {s.shape} does not match H {H.shape}")
            constellation.index_of(s)
        if nt is not None:
            nt = int(nt)
            _check_block_structure(H, nt)
        self.H = _frozen(H)
        self.y = _frozen(y)
        self.s = _frozen(s)
        self.constellation = constellation
        self.nt = nt

    @property
    def M(self) -> int:
        return self.H.shape[1]

    @property
    def N(self) -> int:
        return self.H.shape[0]

    def metric(self, x) -> float:
        """ML metric ‖y − Hx‖²."""
        r = self.y - self.H @ np.asarray(x, dtype=float)
        return float(r @ r)

    def __repr__(self) -> str:
        return "<{} N={} M={} {}>".format(
            self.__class__.__name__, self.N, self.M, self.constellation.name
        )


def to_real(sys: ComplexSystem) -> RealSystem:
    """Stacks real and imaginary parts into the equivalent real model."""
    Hr, Hi = sys.H.real, sys.H.imag
    H = np.block([[Hr, -Hi], [Hi, Hr]])
    y = np.concatenate([sys.y.real, sys.y.imag])
    s = None
    if sys.s is not None:
        s = np.concatenate([sys.s.real, sys.s.imag])
        if not np.array_equal(s, np.round(s)):
            raise StructuralError("Symbol vector is not alphabet valued", code=101)
        s = s.astype(np.int64)
    return RealSystem(H=H, y=y, s=s, constellation=sys.constellation, nt=sys.nt)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent, reproducible numpy generator of one Monte-Carlo trial."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))
    return np.random.default_rng(seq)


def draw_instance(
    nt: int,
    nr: int,
    constellation: Constellation,
    snr_db: float,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> ComplexSystem:
    """
    Draws H̃ ~ CN(0, 1) entrywise, s̃ uniformly over the constellation and
    ṽ ~ CN(0, σ_v²) with σ_s²/σ_v² = 10^(snr_db/10).

    Draw order is H̃, s̃, ṽ; the noise is always drawn so that the stream
    position after the call does not depend on :noiseless:.
    """
    if nt < 1 or nr < 1:
        raise StructuralError(f"Antenna counts must be positive, got {nt}x{nr}", code=102)
    if not math.isfinite(snr_db):
        raise StructuralError(f"SNR must be finite, got {snr_db}", code=102)

    H = (rng.standard_normal((nr, nt)) + 1j * rng.standard_normal((nr, nt))) / math.sqrt(2.0)
    a = constellation.real_alphabet
    s = a[rng.integers(0, len(a), nt)] + 1j * a[rng.integers(0, len(a), nt)]
    symbol_power = constellation.mean_power
    noise_var = symbol_power / 10 ** (snr_db / 10.0)
    v = (rng.standard_normal(nr) + 1j * rng.standard_normal(nr)) * math.sqrt(noise_var / 2.0)
    if noiseless:
        noise_var = 0.0
        v = np.zeros(nr, dtype=complex)
    return ComplexSystem(
        H=H,
        y=H @ s + v,
        s=s,
        constellation=constellation,
        noise_var=noise_var,
        symbol_power=symbol_power,
    )


def quantize(v, constellation: Constellation) -> np.ndarray:
    """
    Elementwise nearest alphabet point. Exact midpoints go to the larger
    point, values beyond the extremes clip to them.
    """
    v = np.asarray(v, dtype=float)
    idx = np.searchsorted(constellation._midpoints, v, side='right')
    return constellation.real_alphabet[idx]


def bit_errors(s_hat, s, constellation: Constellation) -> int:
    """Hamming distance between the Gray labels of two real symbol vectors."""
    s_hat = np.asarray(s_hat)
    s = np.asarray(s)
    if s_hat.shape != s.shape:
        raise StructuralError(f"Shapes differ: {s_hat.shape} vs {s.shape}")
    diff = constellation.gray_labels(s_hat) ^ constellation.gray_labels(s)
    return int(constellation._popcount[diff].sum())
