import json
import os
import tempfile
import threading
import unittest

from PeriodicDiracFock.bridge import ProgressBridge
from PeriodicDiracFock.interfaces import CallbackInterface, IterationLog
from PeriodicDiracFock.records import (
    ConvergenceRecord, IterationRecord, Record, RetractionRecord, decode)


TIMEOUT = 5



def iteration_record(iteration=1, run='run0'):
    return IterationRecord(run, iteration, E_total=1.5, E_pen=-2.0, residual=1e-3,
                           delta_E=1e-4, nu=1.01, charge=2.0)



class TestRecords(unittest.TestCase):

    def test_fields(self):
        record = iteration_record()
        self.assertEqual(record['iter'], 1)
        self.assertEqual(record['run'], 'run0')
        self.assertIsNone(record.channel)
        with self.assertRaises(KeyError):
            record['energy']

    def test_decode(self):
        record = RetractionRecord('run0', 3, steps=2, final_residual=1e-11, ratios=[0.1],
                                  bound=0.5, admissible=True)
        decoded = decode({'data': record._encode().encode()})
        self.assertIsInstance(decoded, RetractionRecord)
        self.assertEqual(decoded.id, record.id)
        self.assertEqual(decoded.to_dict(), record.to_dict())

    def test_decode_unknown_type(self):
        with self.assertRaises(KeyError):
            decode({'data': json.dumps({'type': 'PingRecord', 'id': 'x'})})

    def test_log_entry(self):
        self.assertEqual(iteration_record().log_entry(), {
            'iter': 1, 'E_total': 1.5, 'E_pen': -2.0, 'residual': 1e-3, 'nu': 1.01, 'charge': 2.0})

    def test_convergence_record_is_json(self):
        record = ConvergenceRecord('run0', True, 4, {'total': 1.0}, 2.0, 1.01, {'gap_holds': True})
        self.assertEqual(json.loads(record._encode())['type'], 'ConvergenceRecord')



class TestCallbackInterface(unittest.TestCase):

    def setUp(self):
        self.bridge = ProgressBridge(name='test', use_mock_redis_server=True)
        self.interface = CallbackInterface(self.bridge)

    def tearDown(self):
        self.bridge.stop()

    def test_dispatch_by_type(self):
        self.interface.register_callback(lambda r: ('any', r.id), 'progress')
        self.interface.register_callback(lambda r: ('iter', r.iter), 'progress', IterationRecord)
        self.interface.register_callback(lambda r: 'retraction', 'progress', 'RetractionRecord')

        record = iteration_record(7)
        record._channel = 'progress'
        results = self.interface._receive_record(record)
        self.assertCountEqual(results, [('any', record.id), ('iter', 7)])

        elsewhere = iteration_record()
        elsewhere._channel = 'other'
        self.assertEqual(self.interface._receive_record(elsewhere), [])

    def test_registration_subscribes(self):
        callback = lambda r: None
        self.interface.register_callback(callback, 'progress')
        self.assertIn(self.interface, self.bridge._observers['progress'])

        self.interface.deregister_callback(callback)
        self.assertNotIn('progress', self.bridge._observers)

    def test_duplicate_registration(self):
        callback = lambda r: None
        self.interface.register_callback(callback, 'progress')
        self.interface.register_callback(callback, 'progress')
        self.assertEqual(len(self.interface._get_processors('progress')), 1)

    def test_invalid_registration(self):
        with self.assertRaises(TypeError):
            self.interface.register_callback(lambda r: None, 5)
        with self.assertRaises(TypeError):
            self.interface.register_callback('not callable', 'progress')
        with self.assertRaises(KeyError):
            self.interface.register_callback(lambda r: None, 'progress', 'PingRecord')
        with self.assertRaises(TypeError):
            self.interface.register_callback(lambda r: None, 'progress', dict)



class TestProgressBridge(unittest.TestCase):

    def setUp(self):
        self.bridge = ProgressBridge(name='test', use_mock_redis_server=True)

    def tearDown(self):
        self.bridge.stop()

    def test_str(self):
        self.assertEqual(str(self.bridge), '[ProgressBridge - test]')
        self.assertTrue(self.bridge.connected)

    def test_deferred_connection(self):
        bridge = ProgressBridge(name='later', connect_on_creation=False)
        self.assertFalse(bridge.connected)
        bridge.connect(use_mock_redis_server=True)
        self.assertTrue(bridge.connected)
        bridge.stop()

    def test_send_requires_record(self):
        with self.assertRaises(TypeError):
            self.bridge.send({'iter': 1}, 'progress')

    def test_publish_and_receive(self):
        received = []
        done = threading.Event()

        def on_record(record):
            received.append(record)
            done.set()

        self.bridge.register_callback(on_record, 'progress', IterationRecord)
        self.bridge.start()
        record = iteration_record(3)
        record_id = self.bridge.send(record, 'progress')

        self.assertTrue(done.wait(TIMEOUT))
        self.assertEqual(received[0].id, record_id)
        self.assertEqual(received[0].iter, 3)
        self.assertEqual(received[0].channel, 'progress')

    def test_type_filter(self):
        received = []
        done = threading.Event()

        def on_record(record):
            received.append(record)
            if isinstance(record, ConvergenceRecord):
                done.set()

        self.bridge.register_callback(on_record, 'progress', ConvergenceRecord)
        self.bridge.start()
        self.bridge.send(iteration_record(), 'progress')
        self.bridge.send(ConvergenceRecord('run0', True, 1, {}, 2.0, 1.0, {}), 'progress')

        self.assertTrue(done.wait(TIMEOUT))
        self.assertEqual([type(r) for r in received], [ConvergenceRecord])



class TestIterationLog(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'iterations.log')

    def tearDown(self):
        self.tmp.cleanup()

    def test_local_observer(self):
        log = IterationLog(self.path)
        log._receive_record(iteration_record(1))
        log._receive_record(RetractionRecord('run0', 1, 0, 0.0, []))
        log._receive_record(iteration_record(2))

        self.assertEqual(len(log), 2)
        entries = IterationLog.read(self.path)
        self.assertEqual([e['iter'] for e in entries], [1, 2])
        self.assertEqual(set(entries[0]), {'iter', 'E_total', 'E_pen', 'residual', 'nu', 'charge'})
        self.assertEqual(str(log), f'[IterationLog - {self.path}]')

    def test_truncate_and_append(self):
        IterationLog(self.path)._receive_record(iteration_record(1))
        IterationLog(self.path, append=True)._receive_record(iteration_record(2))
        self.assertEqual(len(IterationLog.read(self.path)), 2)
        IterationLog(self.path)
        self.assertEqual(IterationLog.read(self.path), [])

    def test_bridge_requires_channel(self):
        bridge = ProgressBridge(use_mock_redis_server=True)
        try:
            with self.assertRaises(ValueError):
                IterationLog(self.path, bridge=bridge)
        finally:
            bridge.stop()

    def test_remote_run(self):
        bridge = ProgressBridge(name='monitor', use_mock_redis_server=True)
        log = IterationLog(self.path, bridge=bridge, channel='progress')
        done = threading.Event()
        bridge.register_callback(lambda r: done.set(), 'progress', ConvergenceRecord)
        bridge.start()
        try:
            bridge.send(iteration_record(1), 'progress')
            bridge.send(iteration_record(2), 'progress')
            bridge.send(ConvergenceRecord('run0', True, 2, {}, 2.0, 1.0, {}), 'progress')
            self.assertTrue(done.wait(TIMEOUT))
        finally:
            log.close()
            bridge.stop()

        self.assertEqual([e['iter'] for e in IterationLog.read(self.path)], [1, 2])
        self.assertNotIn(log, bridge._observers.get('progress', ()))



if __name__ == '__main__':
    unittest.main()
