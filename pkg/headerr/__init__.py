from .units import *  # noqa: F401,F403
from .species import *  # noqa: F401,F403
from .spin_algebra import *  # noqa: F401,F403
from .superop import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .model import *  # noqa: F401,F403
from .spin_temperature import *  # noqa: F401,F403
from .reduction import *  # noqa: F401,F403
from .response import *  # noqa: F401,F403
from .analysis import *  # noqa: F401,F403
from .oracle import *  # noqa: F401,F403
from .validation import *  # noqa: F401,F403
from . import fast_ops, vapor  # noqa: F401,F403
