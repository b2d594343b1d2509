"""Intercity travel demand: nested logit destination/mode choice estimated on
joint RP/SP data, logsum accessibility, Poisson trip generation and scenario
simulation."""

from ._intercity import *  # noqa: F401,F403
from ._intercity import __version__  # noqa: F401
