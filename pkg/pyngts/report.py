import csv
import logging
import math
import numbers
from pathlib import Path
from typing import Iterable, Sequence

from lxml import etree

from .errors import ReportError

__all__ = [
    'write_csv',
    'read_csv',
    'format_cell',
    'write_selftest_report',
    'read_selftest_report',
]

log = logging.getLogger(__name__)


def format_cell(value) -> str:
    """CSV rendering: '.' decimals, shortest round-trip floats, '' for None."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return repr(value)
    return str(value)


def write_csv(path, fieldnames: Sequence[str], rows: Iterable) -> Path:
    """
    Writes :rows: (named tuples or sequences in :fieldnames: order) to :path:
    with a header row.
    """
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        with path.open('w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(fieldnames)
            count = 0
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
                count += 1
    except OSError as e:
        raise ReportError(f"Cannot write {path}: {e}") from e
    log.debug("wrote %d rows to %s", count, path)
    return path


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by `write_csv`, as dicts of strings."""
    try:
        with Path(path).open(encoding='utf-8', newline='') as fh:
            return list(csv.DictReader(fh))
    except OSError as e:
        raise ReportError(f"Cannot read {path}: {e}") from e


def write_selftest_report(path, suites, name: str = 'pyngts-selftest') -> Path:
    """
    Writes a JUnit-like XML report. Each suite needs the attributes `name`,
    `checked`, `minimum` and `failures` (a list of messages).
    """
    suites = list(suites)
    root = etree.Element(
        'testsuites',
        name=name,
        tests=str(len(suites)),
        failures=str(sum(1 for s in suites if s.failures)),
    )
    for suite in suites:
        elem = etree.SubElement(
            root,
            'testsuite',
            name=suite.name,
            checked=str(suite.checked),
            minimum=str(suite.minimum),
            failures=str(len(suite.failures)),
        )
        case = etree.SubElement(elem, 'testcase', name=suite.name, checked=str(suite.checked))
        for message in suite.failures:
            failure = etree.SubElement(case, 'failure', message=message.splitlines()[0])
            failure.text = message
    path = Path(path)
    try:
        etree.ElementTree(root).write(
            str(path), encoding='utf-8', xml_declaration=True, pretty_print=True
        )
    except OSError as e:
        raise ReportError(f"Cannot write {path}: {e}") from e
    return path


def read_selftest_report(path) -> dict:
    """
    Parses a report written by `write_selftest_report` into

        {'passed': bool, 'suites': {name: {'checked', 'minimum', 'failures'}}}
    """
    suites = {}
    current = None
    try:
        with open(path, 'rb') as fh:
            for event, elem in etree.iterparse(fh, events=('start', 'end')):
                if event == 'start' and elem.tag == 'testsuite':
                    try:
                        current = {
                            'checked': int(elem.attrib['checked']),
                            'minimum': int(elem.attrib['minimum']),
                            'failures': [],
                        }
                    except (KeyError, ValueError):
                        raise ReportError(
                            "Badly formatted testsuite element in the report", code=501
                        ) from None
                    suites[elem.attrib.get('name', '')] = current
                elif event == 'end' and elem.tag == 'failure':
                    if current is None:
                        raise ReportError("failure element outside of a testsuite", code=501)
                    current['failures'].append(elem.text or elem.attrib.get('message', ''))
                elif event == 'end' and elem.tag == 'testsuite':
                    current = None
                    elem.clear()
    except etree.XMLSyntaxError as e:
        raise ReportError(f"Malformed report {path}: {e}", code=501) from e
    except OSError as e:
        raise ReportError(f"Cannot read {path}: {e}") from e
    return {
        'passed': all(
            not s['failures'] and s['checked'] >= s['minimum'] for s in suites.values()
        ),
        'suites': suites,
    }
