from collections import defaultdict

from .base import BridgeInterface
from .. import records



class CallbackInterface(BridgeInterface):
    """
    A wrapper around a ProgressBridge that dispatches received records to
    callbacks registered per (channel, record type), instead of to observer objects.

    Methods:
        - register_callback(callback, channel, record_type=None)
        - deregister_callback(callback, channel=None, record_type=None)
        - send(record, channel)
    """

    def __init__(self, bridge):
        """
        Arguments:
            - bridge: a ProgressBridge or BridgeInterface instance
        """
        super().__init__(bridge)
        self._record_processors = defaultdict(list)


    def register_callback(self, callback, channel, record_type=None):
        """
        Register a function to call when a record is received on the given
        channel. A callback is registered at most once per (channel, record_type).

        Arguments:
            - callback: function taking a Record
            - channel: string indicating the name of a channel
            - record_type: Record subclass (or its name) that triggers the callback
                If `None`, all record types are triggers
        """
        if not isinstance(channel, str):
            e = TypeError(f"Expected string instance for channel, not {type(channel)}")
            self.logger.error(f"{self}:  {e}")
            raise e

        if not callable(callback):
            e = TypeError(f"Callback {callback} is not callable")
            self.logger.error(f"{self}:  {e}")
            raise e

        if isinstance(record_type, str):
            if record_type not in records.RECORD_CLASSES:
                e = KeyError(f"Invalid record type: {record_type}")
                self.logger.error(f"{self}:  {e}")
                raise e
            record_type = records.RECORD_CLASSES[record_type]

        if record_type is not None:
            if not isinstance(record_type, type) or records.Record not in record_type.mro():
                e = TypeError(f"Invalid record type: {record_type}")
                self.logger.error(f"{self}:  {e}")
                raise e

        if callback in self._get_processors(channel, record_type):
            self.logger.warning(
                f"{self}:  Attempting to register existing callback for channel {channel}")

        else:
            self._record_processors[channel, record_type].append(callback)

            # Register with the bridge to receive this channel
            self._unwrapped.register(self, channel)


    def deregister_callback(self, callback, channel=None, record_type=None):
        """
        Deregister the callback for the given channel and record type.

        Arguments:
            - callback: previously registered function
            - channel: name of a channel; if `None`, deregister from all channels
            - record_type: Record subclass; if `None`, deregister from all record types
        """
        self.logger.debug(f"{self}:  Deregistering callback {callback}")

        removed = set()
        for c, rt in list(self._record_processors.keys()):
            if channel in {c, None} and record_type in {rt, None}:
                if callback in self._record_processors[c, rt]:
                    self._record_processors[c, rt].remove(callback)
                    removed.add((c, rt))

        # Deregister with the bridge from any unneeded channels
        for c, rt in removed:
            if not self._record_processors[c, rt]:
                del self._record_processors[c, rt]
            if len(self._get_processors(c)) == 0:
                self.logger.info(f"{self}:  Deregistering from channel '{c}' -- no registered callbacks")
                self._unwrapped.deregister(self, channel=c)


    def send(self, *args, **kwargs):
        """
        Publish a record through the bridge. See `ProgressBridge.send()`.
        """
        return self._unwrapped.send(*args, **kwargs)


    def _receive_record(self, record):
        """
        Delegate a received record to the callbacks registered for its channel
        and type. Returns the list of callback return values.

        Arguments:
            - record: PeriodicDiracFock.records.Record instance
        """
        self.logger.debug(f"{self}:  Received {record}")

        processors = self._get_processors(record.channel, type(record))
        if len(processors) == 0:
            self.logger.debug(f"{self}:  No record processors found for {record}")

        return [processor(record) for processor in processors]


    def _get_processors(self, channel, record_type=None):
        """
        Get the callbacks for the given channel and record type.
        """
        if record_type is None:
            return [cb for (c, _), cbs in self._record_processors.items() if c == channel for cb in cbs]
        else:
            return [
                *self._record_processors.get((channel, record_type), []),
                *self._record_processors.get((channel, None), []),
            ]
