"""Numerical laboratory for the unnormalised nonlinear-filtering semigroup.

Everything lives in the compiled extension; this package only re-exports it.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__, __version__  # noqa: F401
