"""
Monte-Carlo experiment engine: BER and complexity sweeps, single-instance
trace dumps and the self-test entry point.

Every trial t draws one instance from `trial_rng(seed, t)` per SNR point and
hands the same real system to every detector, so the detectors are compared
on common random numbers.
"""
import configparser
import copy
import logging
import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import NamedTuple, Optional

from .complexity import (
    measured_reduction,
    predict_conventional_iteration,
    predict_ngts_iteration,
)
from .data import Detection, OpLedger, TraceRow
from .detectors import ConventionalTsDetector, Detector, NgtsDetector, default_detector_map
from .errors import ConfigError, ReportError, StructuralError
from .model import Constellation, RealSystem, bit_errors, draw_instance, to_real, trial_rng
from .report import write_csv
from .selftest import selftest

__all__ = [
    'ExperimentConfig',
    'ResultRow',
    'ReductionRow',
    'TraceResult',
    'PRESETS',
    'run_ber',
    'run_complexity',
    'run_trace',
    'selftest',
]

log = logging.getLogger(__name__)


PRESETS = {
    'full-qpsk-32': {
        'nt': 32,
        'nr': 32,
        'modulation': 'qpsk',
        'iters': 800,
        'snr_db': (0.0, 2.0, 4.0, 6.0, 8.0, 10.0),
        'detectors': ('conventional_ts', 'qr_ts', 'ngts', 'ngts_co'),
    },
    'full-16qam-16': {
        'nt': 16,
        'nr': 16,
        'modulation': '16qam',
        'iters': 8000,
        'snr_db': (10.0, 12.0, 14.0, 16.0, 18.0, 20.0),
        'detectors': ('conventional_ts', 'qr_ts', 'ngts', 'ngts_co'),
    },
    'full-64qam-8': {
        'nt': 8,
        'nr': 8,
        'modulation': '64qam',
        'iters': 8000,
        'snr_db': (16.0, 18.0, 20.0, 22.0, 24.0, 26.0),
        'detectors': ('conventional_ts', 'qr_ts', 'ngts', 'ngts_co', 'se_sd'),
    },
}

_INT_KEYS = ('nt', 'nr', 'trials', 'iters', 'tabu', 'seed', 'workers', 'audit_every')
_BOOL_KEYS = ('ordering', 'debug')
_STR_KEYS = ('modulation', 'out', 'preset')


class ExperimentConfig:
    """
    Parameters of one experiment. Every class attribute below is a default
    that can be overridden through the constructor:

        ExperimentConfig(nt=8, nr=8, modulation='64qam', iters=8000)

    :tabu: defaults to iters // 2. :preset: names one of PRESETS, whose
    values are applied before the other arguments.
    """
    nt = 4
    nr = 4
    modulation = 'qpsk'
    detectors = ('conventional_ts', 'ngts')
    snr_db = (10.0,)
    trials = 100
    iters = 100
    tabu = None
    ordering = False
    seed = 1
    out = 'results.csv'
    workers = 1
    debug = False
    audit_every = 0
    preset = None
    detector_map = default_detector_map

    option_keys = (
        'nt', 'nr', 'modulation', 'detectors', 'snr_db', 'trials', 'iters', 'tabu',
        'ordering', 'seed', 'out', 'workers', 'debug', 'audit_every', 'preset',
        'detector_map',
    )

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.option_keys)
        if unknown:
            raise ConfigError(f"Unknown configuration keys {sorted(unknown)}", code=402)

        preset = kwargs.get('preset')
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"Unknown preset '{preset}'", code=404)
            kwargs = {**PRESETS[preset], **kwargs}

        self.options = {}
        for key in self.option_keys:
            if key in kwargs:
                base = getattr(self.__class__, key, None)
                # copying default value if the argument is a dict.
                if hasattr(base, 'update'):
                    self.options[key] = copy.copy(base)
                    self.options[key].update(kwargs[key])
                else:
                    self.options[key] = copy.copy(kwargs[key])
            else:
                self.options[key] = copy.copy(getattr(self.__class__, key, None))

        self.options['detectors'] = tuple(self.options['detectors'])
        self.options['snr_db'] = tuple(float(s) for s in self.options['snr_db'])
        if self.options['tabu'] is None:
            self.options['tabu'] = max(1, int(self.options['iters']) // 2)
            log.warning(
                "tabu list length not given, using iters // 2 = %d", self.options['tabu']
            )
        for key, value in self.options.items():
            setattr(self, key, value)
        self.validate()

    @classmethod
    def from_file(cls, path, **overrides) -> 'ExperimentConfig':
        """
        Reads a flat `key = value` file; lists are comma separated and `#`
        starts a comment. :overrides: whose value is None are ignored.
        """
        parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=('#',), comment_prefixes=('#',)
        )
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError(f"Cannot read configuration {path}: {e}") from e
        try:
            parser.read_string('[experiment]\n' + text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"Malformed configuration {path}: {e}", code=403) from e

        values = {}
        for key, raw in parser.items('experiment'):
            values[key] = cls._parse_value(key, raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @staticmethod
    def _parse_value(key: str, raw: str):
        raw = raw.strip()
        try:
            if key in _INT_KEYS:
                return int(raw)
            if key in _BOOL_KEYS:
                lowered = raw.lower()
                if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                    raise ValueError(raw)
                return configparser.ConfigParser.BOOLEAN_STATES[lowered]
            if key == 'snr_db':
                return tuple(float(v) for v in raw.split(',') if v.strip())
            if key == 'detectors':
                return tuple(v.strip() for v in raw.split(',') if v.strip())
            if key in _STR_KEYS:
                return raw
        except ValueError:
            raise ConfigError(f"Invalid value for '{key}': {raw!r}") from None
        raise ConfigError(f"Unknown configuration key '{key}'", code=402)

    def validate(self):
        o = self.options
        for key in ('nt', 'nr', 'trials', 'tabu', 'workers'):
            if int(o[key]) < 1:
                raise ConfigError(f"'{key}' must be >= 1, got {o[key]}")
        if int(o['iters']) < 0 or int(o['audit_every']) < 0:
            raise ConfigError("'iters' and 'audit_every' must be >= 0")
        if o['nr'] < o['nt']:
            raise ConfigError(f"nr ({o['nr']}) must be >= nt ({o['nt']})")
        if not o['detectors']:
            raise ConfigError("At least one detector is needed")
        for name in o['detectors']:
            if name not in o['detector_map']:
                raise ConfigError(f"Unknown detector '{name}'", code=401)
        if len(set(o['detectors'])) != len(o['detectors']):
            raise ConfigError(f"Duplicate detectors in {list(o['detectors'])}")
        if not o['snr_db'] or not all(math.isfinite(s) for s in o['snr_db']):
            raise ConfigError(f"Invalid SNR list {list(o['snr_db'])}")
        self.constellation  # raises on an unknown modulation

    @property
    def constellation(self) -> Constellation:
        try:
            return Constellation.by_name(self.options['modulation'])
        except StructuralError:
            raise ConfigError(f"Unknown modulation '{self.options['modulation']}'") from None

    @property
    def bits_per_trial(self) -> int:
        return 2 * self.nt * self.constellation.bits_per_dim

    def make_detector(self, name: str) -> Detector:
        return self.detector_map[name](
            iters=self.iters,
            tabu=self.tabu,
            ordering=self.ordering,
            audit_every=self.audit_every,
            debug=self.debug,
        )

    def instance(self, trial: int, snr_db: float, noiseless: bool = False) -> RealSystem:
        rng = trial_rng(self.seed, trial)
        return to_real(
            draw_instance(self.nt, self.nr, self.constellation, snr_db, rng, noiseless=noiseless)
        )

    def __repr__(self) -> str:
        return "<{} {}x{} {} I={} P={} {}>".format(
            self.__class__.__name__,
            self.nt,
            self.nr,
            self.modulation,
            self.iters,
            self.tabu,
            ','.join(self.detectors),
        )

    def dump(self) -> str:
        """Verbose representation of the object"""
        s = [
            f"  {key:<12} {self.options[key]!r}"
            for key in self.option_keys if key != 'detector_map'
        ]
        return "{!r}\n{}".format(self, "\n".join(s))


class ResultRow(NamedTuple):
    """One (detector, SNR) point; operation counts are means per trial."""
    detector: str
    nt: int
    nr: int
    modulation: str
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    I: int
    P: int
    mults: float
    adds: float
    ops_total: float
    mean_K: float
    mean_L: float
    mean_dstar: float
    wall_seconds: float


class ReductionRow(NamedTuple):
    detector: str
    snr_db: float
    baseline: str
    reduction_percent: Optional[float]
    iteration_ops: float
    predicted_iteration_ops: Optional[float]


class TraceResult(NamedTuple):
    paths: dict
    diff_path: Path
    detections: dict
    ml_metric: Optional[float]


class _Tally:
    """Merged outcome of one detector at one SNR point."""

    def __init__(self):
        self.bit_errors = 0
        self.trials = 0
        self.early_stops = 0
        self.ledger = OpLedger()
        self.seconds = 0.0

    def add(self, errors: int, ledger: OpLedger, seconds: float, early: bool):
        self.bit_errors += errors
        self.trials += 1
        self.early_stops += int(early)
        self.ledger = self.ledger + ledger
        self.seconds += seconds


def _run_trials(config: ExperimentConfig, trials, snr_db: float, noiseless: bool) -> list[dict]:
    """
    Outcomes of the given trial indices, one dict per trial mapping detector
    names to (bit errors, ledger, seconds, stopped early). Runs in the worker
    processes, so it only takes picklable arguments.
    """
    detectors = {name: config.make_detector(name) for name in config.detectors}
    outcomes = []
    for trial in trials:
        sys = config.instance(trial, snr_db, noiseless=noiseless)
        out = {}
        for name, detector in detectors.items():
            t0 = time.perf_counter()
            detection = detector(sys)
            seconds = time.perf_counter() - t0
            errors = bit_errors(detection.solution, sys.s, sys.constellation)
            early = detection.trace is not None and detection.trace.terminated_early
            out[name] = (errors, detection.ledger, seconds, early)
        outcomes.append(out)
    return outcomes


def _pooled_trials(config: ExperimentConfig, snr_db: float, noiseless: bool, executor: Optional[Executor]):
    """
    Yields the per-trial outcomes of one SNR point. With an :executor: the
    trial indices are dealt round-robin into chunks, a few per worker, and
    outcomes come back in completion order, which is fine since merging is
    order independent.
    """
    if executor is None:
        yield from _run_trials(config, range(config.trials), snr_db, noiseless)
        return

    n_chunks = min(config.trials, 4 * config.workers)
    futures = [
        executor.submit(_run_trials, config, range(i, config.trials, n_chunks), snr_db, noiseless)
        for i in range(n_chunks)
    ]
    try:
        for future in as_completed(futures):
            yield from future.result()
    except Exception as e:
        # any type of exception, hand it to the caller.
        log.error("trial worker failed at %.2f dB: %r", snr_db, e)
        for future in futures:
            future.cancel()
        raise


def _sweep(config: ExperimentConfig, noiseless: bool = False) -> list[tuple[float, dict]]:
    """
    Runs every SNR point. `config.workers` > 1 spreads the trials over that
    many processes; detectors from a custom `detector_map` must then be
    importable classes.
    """
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            return _sweep_points(config, noiseless, executor)
    return _sweep_points(config, noiseless, None)


def _sweep_points(config: ExperimentConfig, noiseless: bool, executor: Optional[Executor]):
    points = []
    for snr_db in config.snr_db:
        tallies = {name: _Tally() for name in config.detectors}
        for outcome in _pooled_trials(config, snr_db, noiseless, executor):
            for name, (errors, ledger, seconds, early) in outcome.items():
                tallies[name].add(errors, ledger, seconds, early)
        if config.debug:
            log.info(
                "%r snr %.2f dB: %s",
                config,
                snr_db,
                ", ".join(f"{n}={t.bit_errors}" for n, t in tallies.items()),
            )
        for name, tally in tallies.items():
            if tally.ledger.gamma_fallbacks:
                log.warning(
                    "%s at %.2f dB: %d γ cache fallbacks", name, snr_db, tally.ledger.gamma_fallbacks
                )
            if tally.early_stops:
                log.warning(
                    "%s at %.2f dB: %d of %d searches stopped early on an empty neighborhood",
                    name, snr_db, tally.early_stops, tally.trials,
                )
        points.append((snr_db, tallies))
    return points


def _rows(config: ExperimentConfig, points) -> list[ResultRow]:
    rows = []
    for snr_db, tallies in points:
        for name, tally in tallies.items():
            ledger = tally.ledger
            n = tally.trials
            rows.append(ResultRow(
                detector=name,
                nt=config.nt,
                nr=config.nr,
                modulation=config.constellation.name,
                snr_db=snr_db,
                trials=n,
                bit_errors=tally.bit_errors,
                ber=tally.bit_errors / (n * config.bits_per_trial),
                I=config.iters,
                P=config.tabu,
                mults=ledger.mults() / n,
                adds=ledger.adds() / n,
                ops_total=ledger.total() / n,
                mean_K=ledger.mean_K,
                mean_L=ledger.mean_L,
                mean_dstar=ledger.mean_dstar,
                wall_seconds=tally.seconds,
            ))
    order = {name: i for i, name in enumerate(config.detectors)}
    rows.sort(key=lambda r: (order[r.detector], r.snr_db))
    return rows


def run_ber(config: ExperimentConfig, noiseless: bool = False) -> list[ResultRow]:
    """
    BER of every detector at every SNR point of :config:, written to
    `config.out`. :noiseless: draws every instance without noise.
    """
    rows = _rows(config, _sweep(config, noiseless=noiseless))
    if config.out:
        write_csv(config.out, ResultRow._fields, rows)
    return rows


def _predicted_iteration_ops(config: ExperimentConfig, name: str, ledger: OpLedger) -> Optional[float]:
    klass = config.detector_map[name]
    if issubclass(klass, ConventionalTsDetector):
        return predict_conventional_iteration(2 * config.nr, ledger.mean_L)
    if issubclass(klass, NgtsDetector):
        return predict_ngts_iteration(2 * config.nt, ledger.mean_L, ledger.mean_K)
    return None


def _reduction_path(out) -> Path:
    path = Path(out)
    return path.with_name(f"{path.stem}_reduction.csv")


def run_complexity(config: ExperimentConfig) -> list[ResultRow]:
    """
    Operation counts of every detector, written to `config.out`, plus
    `<stem>_reduction.csv` comparing each detector with the first listed one.
    """
    points = _sweep(config)
    rows = _rows(config, points)
    reductions = []
    baseline = config.detectors[0]
    for snr_db, tallies in points:
        base = tallies[baseline].ledger
        for name in config.detectors:
            ledger = tallies[name].ledger
            try:
                reduction = measured_reduction(base, ledger)
            except StructuralError:
                log.warning("%s has no counted operations, no reduction reported", baseline)
                reduction = None
            reductions.append(ReductionRow(
                detector=name,
                snr_db=snr_db,
                baseline=baseline,
                reduction_percent=reduction,
                iteration_ops=ledger.ops_per_iteration(),
                predicted_iteration_ops=_predicted_iteration_ops(config, name, ledger),
            ))
    order = {name: i for i, name in enumerate(config.detectors)}
    reductions.sort(key=lambda r: (order[r.detector], r.snr_db))
    if config.out:
        write_csv(config.out, ResultRow._fields, rows)
        write_csv(_reduction_path(config.out), ReductionRow._fields, reductions)
    return rows


def _first_divergence(a: Detection, b: Detection) -> Optional[int]:
    moves_a, moves_b = a.trace.moves(), b.trace.moves()
    for i, (ma, mb) in enumerate(zip(moves_a, moves_b)):
        if ma != mb:
            return i + 1
    if len(moves_a) != len(moves_b):
        return min(len(moves_a), len(moves_b)) + 1
    return None


def run_trace(config: ExperimentConfig, instance: int = 0) -> TraceResult:
    """
    Runs every detector of :config: on trial :instance: at the first SNR point
    and writes one CSV per traced detector (`<stem>_<detector>.csv`) and a
    divergence summary (`<stem>_diff.txt`) comparing each trace with the
    first one.
    """
    snr_db = config.snr_db[0]
    sys = config.instance(instance, snr_db)
    out = Path(config.out or 'trace.csv')
    detections = {}
    paths = {}
    ml_metric = None
    for name in config.detectors:
        detection = config.make_detector(name)(sys)
        detections[name] = detection
        if config.detector_map[name].exact:
            ml_metric = sys.metric(detection.solution)
        if detection.trace is None:
            continue
        path = out.with_name(f"{out.stem}_{name}.csv")
        paths[name] = write_csv(path, TraceRow._fields, detection.trace.rows)

    lines = [
        f"instance {instance} of seed {config.seed}, {config.nt}x{config.nr} "
        f"{config.constellation.name}, {snr_db:g} dB, I={config.iters}, P={config.tabu}"
    ]
    traced = [name for name in config.detectors if detections[name].trace is not None]
    if traced:
        ref = traced[0]
        for name in traced[1:]:
            at = _first_divergence(detections[ref], detections[name])
            if at is None:
                lines.append(f"{ref} vs {name}: no divergence")
            else:
                ma = detections[ref].trace.moves()
                mb = detections[name].trace.moves()
                lines.append(
                    "{} vs {}: first divergence at iteration {}: {} vs {}".format(
                        ref, name, at,
                        ma[at - 1] if at <= len(ma) else 'end',
                        mb[at - 1] if at <= len(mb) else 'end',
                    )
                )
    for name, detection in detections.items():
        metric = sys.metric(detection.solution)
        line = f"{name} final metric {metric!r}"
        if ml_metric is not None:
            line += f" (ML {ml_metric!r}, gap {metric - ml_metric!r})"
        lines.append(line)

    diff_path = out.with_name(f"{out.stem}_diff.txt")
    try:
        diff_path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    except OSError as e:
        raise ReportError(f"Cannot write {diff_path}: {e}") from e
    return TraceResult(paths=paths, diff_path=diff_path, detections=detections, ml_metric=ml_metric)
