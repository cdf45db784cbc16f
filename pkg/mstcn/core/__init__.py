from .tensor import *
from .module import *
from .objective import *
from .model import *
from .checkpoint import *
from .train import *
from .crossval import *
