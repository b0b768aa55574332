import argparse
import logging
import sys
from typing import Optional

from .errors import NgtsError
from .harness import ExperimentConfig, run_ber, run_complexity, run_trace, selftest

__all__ = ['main', 'build_parser']

log = logging.getLogger(__name__)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(',') if v.strip())


def _add_experiment_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help="flat key = value experiment file")
    parser.add_argument('--preset', help="named full-size configuration")
    parser.add_argument('--nt', type=int, help="transmit antennas")
    parser.add_argument('--nr', type=int, help="receive antennas")
    parser.add_argument('--mod', dest='modulation', help="qpsk, 16qam or 64qam")
    parser.add_argument('--snr', dest='snr_db', type=_float_list, help="SNR points in dB, e.g. 4,8,12")
    parser.add_argument('--trials', type=int, help="trials per SNR point")
    parser.add_argument('--iters', type=int, help="search iterations I")
    parser.add_argument('--tabu', type=int, help="tabu list length P (default iters/2)")
    parser.add_argument('--detectors', type=_name_list, help="comma separated detector names")
    parser.add_argument(
        '--ordering', action='store_true', default=None, help="sort channel columns for ngts"
    )
    parser.add_argument('--seed', type=int, help="master seed")
    parser.add_argument('--out', help="output CSV path")
    parser.add_argument('--workers', type=int, help="worker processes")
    parser.add_argument('--audit-every', dest='audit_every', type=int,
                        help="NG-TS drift audit period (0 disables)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='pyngts',
        description="Tabu-search MIMO detection experiments",
    )
    parser.add_argument('-v', '--verbose', action='count', default=0)
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (
        ('ber', "bit error rate sweep"),
        ('complexity', "operation count sweep with reduction table"),
        ('trace', "per-iteration traces of one instance"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_experiment_arguments(p)
        if name == 'trace':
            p.add_argument('--instance', type=int, default=0, help="trial index of the instance")

    p = sub.add_parser('selftest', help="run the invariant suites")
    p.add_argument('--report', help="write an XML report there")
    p.add_argument('--inject-fault', dest='inject_fault', action='store_true',
                   help=argparse.SUPPRESS)
    return parser


def _config(args) -> ExperimentConfig:
    keys = (
        'preset', 'nt', 'nr', 'modulation', 'snr_db', 'trials', 'iters', 'tabu',
        'detectors', 'ordering', 'seed', 'out', 'workers', 'audit_every',
    )
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.verbose:
        overrides['debug'] = True
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**overrides)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format='%(asctime)s %(name)s %(levelname)s %(message)s',
    )
    try:
        if args.command == 'selftest':
            result = selftest(report=args.report, inject_fault=args.inject_fault)
            print(result.dump())
            return 0 if result.passed else 1

        config = _config(args)
        log.info("%s", config.dump())
        if args.command == 'ber':
            rows = run_ber(config)
            print(f"{len(rows)} rows written to {config.out}")
        elif args.command == 'complexity':
            rows = run_complexity(config)
            print(f"{len(rows)} rows written to {config.out}")
        elif args.command == 'trace':
            result = run_trace(config, instance=args.instance)
            print(result.diff_path.read_text(encoding='utf-8'), end='')
    except NgtsError as e:
        print(str(e), file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
