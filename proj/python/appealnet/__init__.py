"""Two-head approximator/predictor training and edge/cloud routing simulation."""

from ._appealnet import *  # noqa: F401,F403
from ._appealnet import __doc__  # noqa: F401
