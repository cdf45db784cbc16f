from .balanced import *
from .report import *
