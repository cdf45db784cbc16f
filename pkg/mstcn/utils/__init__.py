from . import random
from .client import check_client, map_jobs
from threadpoolctl import threadpool_limits, threadpool_info
