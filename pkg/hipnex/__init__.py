from .config import RunConfig
from .exceptions import HipnexError
