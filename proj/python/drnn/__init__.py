"""Deep LSTM language model and fixed-point MAC-array accelerator co-simulation."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
