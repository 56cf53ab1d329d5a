from ._dispatchd import *  # noqa: F401,F403
from ._dispatchd import __doc__  # noqa: F401
