import logging

from .data import Detection, OpLedger
from .linalg import qr_householder, unpermute, zf_solve
from .model import RealSystem
from .ngts import GammaCache, NgtsSearch
from .oracle import brute_force_ml, se_sphere_decode
from .tabu import ConventionalTabuSearch, QrTabuSearch

__all__ = ['default_detector_map', 'Detector']

log = logging.getLogger(__name__)

ZF = 'zf'
CONVENTIONAL_TS = 'conventional_ts'
QR_TS = 'qr_ts'
NGTS = 'ngts'
NGTS_CO = 'ngts_co'
SE_SD = 'se_sd'
ML = 'ml'


class Detector:
    """Detector, gets initiated with the search parameters of the experiment"""
    # True for detectors returning the exact ML solution
    exact = False

    def __init__(
        self,
        iters: int = 0,
        tabu: int = 1,
        ordering: bool = False,
        audit_every: int = 0,
        debug: bool = False,
    ):
        self.iters = iters
        self.tabu = tabu
        self.ordering = ordering
        self.audit_every = audit_every
        self.debug = debug

    def __call__(self, sys: RealSystem) -> Detection:
        raise NotImplementedError


class ZfDetector(Detector):
    def __call__(self, sys: RealSystem) -> Detection:
        ledger = OpLedger()
        qr = qr_householder(
            sys.H, nt=sys.nt, delta=sys.constellation.delta, ledger=ledger, energies=False
        )
        x = zf_solve(qr, sys.y, sys.constellation, ledger=ledger)
        return Detection(solution=unpermute(x, qr.perm), trace=None, ledger=ledger)


class ConventionalTsDetector(Detector):
    def __call__(self, sys: RealSystem) -> Detection:
        return ConventionalTabuSearch(sys, self.iters, self.tabu, debug=self.debug).run()


class QrTsDetector(Detector):
    def __call__(self, sys: RealSystem) -> Detection:
        return QrTabuSearch(sys, self.iters, self.tabu, debug=self.debug).run()


class NgtsDetector(Detector):
    """
    NG-TS. `cache_class` may be replaced, on a subclass or an instance, to
    run the search with another γ cache implementation.
    """
    default_ordering = False
    cache_class = GammaCache

    def __call__(self, sys: RealSystem) -> Detection:
        ordering = self.default_ordering or bool(self.ordering)
        search = NgtsSearch(
            sys,
            self.iters,
            self.tabu,
            debug=self.debug,
            ordering=ordering,
            audit_every=self.audit_every,
            cache_class=self.cache_class,
        )
        return search.run()


class NgtsCoDetector(NgtsDetector):
    default_ordering = True


class SphereDecoder(Detector):
    exact = True

    def __call__(self, sys: RealSystem) -> Detection:
        result = se_sphere_decode(sys)
        return Detection(solution=result.solution, trace=None, ledger=OpLedger())


class MlDetector(Detector):
    exact = True

    def __call__(self, sys: RealSystem) -> Detection:
        result = brute_force_ml(sys)
        return Detection(solution=result.solution, trace=None, ledger=OpLedger())


default_detector_map: dict[str, type[Detector]] = {
    ZF: ZfDetector,
    CONVENTIONAL_TS: ConventionalTsDetector,
    QR_TS: QrTsDetector,
    NGTS: NgtsDetector,
    NGTS_CO: NgtsCoDetector,
    SE_SD: SphereDecoder,
    ML: MlDetector,
}
