"""Zero-shot 3D visual grounding pipeline (C++ core with python bindings)."""

from ._spazer import *  # noqa: F401,F403
from ._spazer import __doc__  # noqa: F401
