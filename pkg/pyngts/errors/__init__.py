__all__ = [
    'NgtsError',
    'StructuralError',
    'SingularityError',
    'RefusalError',
    'ConfigError',
    'ReportError',
]


class NgtsError(Exception):
    default_code = -1

    def __init__(self, msg="", code=None):
        self._msg = msg
        self.code = self.default_code if code is None else code
        super().__init__(msg)

    def __str__(self):
        msg = self._msg
        if not self._msg:
            from .codes import ERROR_CODES
            msg = ERROR_CODES.get(self.code, '')
        return "NgtsError<{}>({})".format(self.code, msg or "no message")


class StructuralError(NgtsError):
    default_code = 100


class SingularityError(NgtsError):
    default_code = 200


class RefusalError(NgtsError):
    default_code = 300


class ConfigError(NgtsError):
    default_code = 400


class ReportError(NgtsError):
    default_code = 500
