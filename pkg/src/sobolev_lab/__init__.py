"""Numerical laboratory for quantitative stability of the Sobolev inequality."""

from .errors import *  # noqa: F401,F403
from .functions import *  # noqa: F401,F403
from .quadrature import *  # noqa: F401,F403
from .sobolev import *  # noqa: F401,F403
from .manifold import *  # noqa: F401,F403
from .inequalities import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .certify import *  # noqa: F401,F403
from .function_spec import *  # noqa: F401,F403

__version__ = "0.1.0"
