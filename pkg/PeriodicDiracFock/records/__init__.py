import json

from .base import Record
from .scf_records import ConvergenceRecord, IterationRecord, RetractionRecord



RECORD_CLASSES = {
    'Record': Record,
    'IterationRecord': IterationRecord,
    'RetractionRecord': RetractionRecord,
    'ConvergenceRecord': ConvergenceRecord,
}


def decode(message):
    """
    Decode a Record instance from a raw Redis message.

    Arguments:
        - message: dictionary representing the received message.
            The field message['data'] is given as a `bytes` object
            (a `str` is accepted as well).
    """
    raw = message['data']
    json_data = json.loads(raw.decode() if isinstance(raw, bytes) else raw)
    if json_data['type'] in RECORD_CLASSES:
        cls = RECORD_CLASSES[json_data['type']]
        return cls._decode(json_data)
    else:
        raise KeyError(f"Invalid record type '{json_data['type']}'")
