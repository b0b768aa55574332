__all__ = [
    'ngts_detect',
    'conventional_ts',
    'qr_ts',
    'ExperimentConfig',
    'NgtsError',
]

from .ngts import ngts_detect
from .tabu import conventional_ts, qr_ts
from .harness import ExperimentConfig
from .errors import NgtsError
