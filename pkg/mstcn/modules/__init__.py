from .conv import *
from .dense import *
from .activations import *
from .dropout import *
from .pooling import *
from .shape import *
from .gradcheck import *
from ..core.module import layer_backward
