"""Joint estimation of multiple directed Gaussian graphical models."""

from jointdag._core import *  # noqa: F401,F403
from jointdag._core import __version__  # noqa: F401
