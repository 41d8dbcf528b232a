import json
import threading

from .base import BridgeInterface
from ..records import IterationRecord



class IterationLog(BridgeInterface):
    """
    Observer that appends every IterationRecord it receives to a
    line-delimited JSON file, one {iter, E_total, E_pen, residual, nu, charge}
    object per line. Other record types are ignored.

    The log can be attached directly to a solver (as a local observer), or to a
    ProgressBridge channel to record a run happening in another process.

    Methods:
        - close()
        - read(path)
    """

    def __init__(self, path, bridge=None, channel=None, append=False):
        """
        Arguments:
            - path: file to write
            - bridge: optional ProgressBridge to listen on
            - channel: channel to listen on (required with a bridge)
            - append: keep existing lines instead of truncating the file
        """
        self._bridge = bridge._unwrapped if bridge is not None else None
        self.path = str(path)
        self._lock = threading.Lock()
        self._count = 0

        with open(self.path, 'a' if append else 'w'):
            pass

        if self._bridge is not None:
            if channel is None:
                e = ValueError("A channel is required to listen on a bridge")
                self.logger.error(f"{self}:  {e}")
                raise e
            self._bridge.register(self, channel)


    def __str__(self):
        if self._bridge is None:
            return f"[{self.__class__.__name__} - {self.path}]"
        return super().__str__()


    def __len__(self):
        return self._count


    def close(self):
        """
        Stop listening on the bridge.
        """
        if self._bridge is not None:
            self._bridge.deregister(self)


    def _receive_record(self, record):
        if not isinstance(record, IterationRecord):
            return

        line = json.dumps(record.log_entry())
        with self._lock:
            with open(self.path, 'a') as f:
                f.write(line + '\n')
            self._count += 1


    @staticmethod
    def read(path):
        """
        Returns the list of entries of an iteration log file.
        """
        with open(path) as f:
            return [json.loads(line) for line in f if line.strip()]
