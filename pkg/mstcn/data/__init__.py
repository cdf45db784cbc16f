from .preprocess import *
from .dataset import *
from .folds import *
from .batching import *
from .synth import *
