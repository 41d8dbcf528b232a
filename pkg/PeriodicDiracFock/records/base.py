import json

from ..utils import uid



class Record:
    """
    Base class for solver progress records.

    A record is a flat bundle of JSON-serializable fields. Subclasses list
    their fields in PROPERTIES; encoding writes those fields plus the class
    name under 'type', decoding restores them.

    Attributes:
        - id: a unique string identifier for this record
        - run: identifier of the solver run that produced the record
        - channel: the channel this record was published on, if any
    """

    # Properties to include in record encoding
    PROPERTIES = ['id', 'run', 'channel']


    def __init__(self, run=None):
        self._id = uid()
        self._run = run
        self._channel = None


    @property
    def id(self):
        """
        Returns the unique string identifier for this record.
        """
        return self._id


    @property
    def run(self):
        return self._run


    @property
    def channel(self):
        """
        Returns the name of the channel this record was published on.
        """
        return self._channel


    def __getitem__(self, key):
        """
        Access record fields as if the record were a dictionary.
        """
        if key in self.PROPERTIES:
            return getattr(self, key)

        raise KeyError(key)


    def __repr__(self):
        """
        Returns a string representation of this record.
        """
        properties = {key: getattr(self, key) for key in self.PROPERTIES}
        properties_repr = ', '.join([f'{k}={v!r}' for k, v in properties.items()])
        return f'<{self.__class__.__name__}: {properties_repr}>'


    def to_dict(self):
        """
        Returns the record fields as a dictionary (without 'type').
        """
        return {key: getattr(self, key) for key in self.PROPERTIES}


    def _encode(self):
        """
        Encode record to JSON string.
        """
        json_data = self.to_dict()
        json_data['type'] = self.__class__.__name__
        return json.dumps(json_data)


    @classmethod
    def _decode(cls, json_data):
        """
        Decode record from JSON dictionary.
        """
        record = cls.__new__(cls)
        record._id = json_data['id']
        record._run = json_data.get('run')
        record._channel = json_data.get('channel')
        for key in cls.PROPERTIES:
            if key not in Record.PROPERTIES:
                setattr(record, key, json_data.get(key))
        return record
