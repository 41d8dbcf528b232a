from .base import BridgeInterface
from .callback import CallbackInterface
from .iteration_log import IterationLog
