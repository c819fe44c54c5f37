"""Sequential kernelized independence tests via betting."""

from ._betkit import *  # noqa: F401,F403
from ._betkit import __version__  # noqa: F401
