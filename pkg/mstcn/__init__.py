from .core import *
from . import data
from . import metrics
from . import modules
from . import optimizers
from . import utils
