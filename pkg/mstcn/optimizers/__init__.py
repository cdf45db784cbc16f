from .adam import Adam
from .trace import TrainRecord, TrainTrace, read_log
