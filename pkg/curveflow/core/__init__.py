"""Domain models and numerical kernels of curveflow."""

from .errors import *
from .models import *
from .spatial import *
from .geometry import *
from .flows import *
from .integrators import *
from .diagnostics import *
