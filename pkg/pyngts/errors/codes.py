# -*- coding: utf8 -*-

ERROR_CODES = {
    -1: '''Unknown error''',
    100: '''Dimension mismatch''',
    101: '''Value is not a point of the real alphabet''',
    102: '''Index out of range''',
    103: '''Zero denominator''',
    104: '''Empty input''',
    105: '''Incremental state drifted from direct recomputation''',
    200: '''Matrix is singular or rank deficient''',
    300: '''Problem size exceeds the exhaustive search guard''',
    400: '''Invalid configuration value''',
    401: '''Unknown detector name''',
    402: '''Unknown configuration key''',
    403: '''Malformed configuration line''',
    404: '''Unknown preset''',
    500: '''Report or CSV file cannot be written''',
    501: '''Malformed self-test report''',
}
