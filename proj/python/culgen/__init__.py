"""Culture-aware ad generation toolkit: python surface over the C++ core."""

from culgen._core import *  # noqa: F401,F403
from culgen._core import __doc__ as _core_doc

__doc__ = _core_doc
