# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

"""Fitness cache, checkpoint store and the on-disk run directory.

The cache and the checkpoint store are shared by concurrent evaluation
workers, so every access goes through a lock.
"""

import csv
import dataclasses
import hashlib
import io
import logging
import os
import threading

from oslo_serialization import jsonutils
from oslo_utils import fileutils

from neuroevo import evaluator as evaluator_mod
from neuroevo import exceptions
from neuroevo.nn import checkpoint as checkpoint_file
from neuroevo import version


LOG = logging.getLogger(__name__)

MANIFEST = 'manifest.yaml'
STATE = 'state.json'
HISTORY = 'history.jsonl'
EVENTS = 'events.csv'
CHECKPOINTS = 'checkpoints'
CHECKPOINT_SUFFIX = '.ckpt'

EVENT_FIELDS = ('generation', 'slot', 'key', 'epochs', 'accuracy',
                'wall_seconds', 'fitness', 'cache_hit', 'resumed_from',
                'worker_id', 'status', 'failed')


class FitnessCache:
    """Evaluation records keyed by (canonical key, epochs trained)."""

    def __init__(self, records=()):
        self._lock = threading.Lock()
        self._records = {}
        for record in records:
            self._records[(record.key, record.epochs)] = record

    def get(self, key, epochs):
        with self._lock:
            return self._records.get((key, epochs))

    def put(self, record):
        with self._lock:
            self._records.setdefault((record.key, record.epochs), record)

    def __len__(self):
        with self._lock:
            return len(self._records)

    def to_primitive(self):
        with self._lock:
            return [self._records[k].to_dict()
                    for k in sorted(self._records)]

    @classmethod
    def from_primitive(cls, values):
        return cls(evaluator_mod.EvaluationRecord.from_dict(v)
                   for v in values)


@dataclasses.dataclass(frozen=True)
class CheckpointEntry:
    key: str
    epochs: int
    total_wall_seconds: float
    ref: str = None


class CheckpointStore:
    """Latest partially trained state per genome.

    Without a directory states are kept in memory; with one, states are
    written as checkpoint files and read back on demand. Entries only
    ever move to more epochs. File names carry the epoch count, so a
    newer file never overwrites the one a persisted index refers to.
    """

    def __init__(self, directory=None, entries=()):
        self.directory = directory
        self._lock = threading.Lock()
        self._entries = {entry.key: entry for entry in entries}
        self._states = {}
        if directory:
            fileutils.ensure_tree(directory)

    def _ref(self, key, epochs):
        digest = hashlib.sha1(key.encode('ascii')).hexdigest()
        return '%s-%d%s' % (digest, epochs, CHECKPOINT_SUFFIX)

    def latest(self, key):
        with self._lock:
            return self._entries.get(key)

    def load(self, entry):
        """The resumable :class:`evaluator.Checkpoint` for an entry."""
        if entry.ref is None:
            with self._lock:
                state = self._states.get(entry.key)
            return evaluator_mod.Checkpoint(entry.epochs, state)
        state = checkpoint_file.load(os.path.join(self.directory, entry.ref))
        if state.epochs_completed != entry.epochs:
            raise exceptions.CheckpointFormatError(
                reason='%s holds %d epochs, index says %d'
                       % (entry.ref, state.epochs_completed, entry.epochs))
        return evaluator_mod.Checkpoint(entry.epochs, state)

    def save(self, key, checkpoint, total_wall_seconds):
        """Record a checkpoint unless one with as many epochs exists."""
        with self._lock:
            current = self._entries.get(key)
            if current is not None and current.epochs >= checkpoint.epochs:
                return current
            ref = None
            if checkpoint.state is not None and self.directory:
                ref = self._ref(key, checkpoint.epochs)
                checkpoint_file.save(os.path.join(self.directory, ref),
                                     checkpoint.state)
            elif checkpoint.state is not None:
                self._states[key] = checkpoint.state
            entry = CheckpointEntry(key, checkpoint.epochs,
                                    total_wall_seconds, ref)
            self._entries[key] = entry
            return entry

    def prune(self):
        """Delete checkpoint files no entry refers to.

        Call only once the entries have been persisted: until then a
        superseded file may still be what the saved index points at.
        """
        if not self.directory:
            return 0
        with self._lock:
            live = {entry.ref for entry in self._entries.values()}
            stale = [name for name in os.listdir(self.directory)
                     if name.endswith(CHECKPOINT_SUFFIX) and name not in live]
            for name in stale:
                fileutils.delete_if_exists(os.path.join(self.directory, name))
        if stale:
            LOG.debug('Pruned %d superseded checkpoints', len(stale))
        return len(stale)

    def __len__(self):
        with self._lock:
            return len(self._entries)

    def to_primitive(self):
        with self._lock:
            return [dataclasses.asdict(self._entries[k])
                    for k in sorted(self._entries)]

    @classmethod
    def from_primitive(cls, values, directory=None):
        return cls(directory, [CheckpointEntry(**v) for v in values])


def manifest_digest(data):
    return hashlib.sha256(data).hexdigest()


def _atomic_write(path, data):
    tmp = path + '.tmp'
    with open(tmp, 'w', encoding='utf-8', newline='') as f:
        f.write(data)
    os.replace(tmp, path)


class RunDirectory:
    """Files of one run: manifest copy, state, history and event log.

    The state file is replaced atomically after history and events have
    been appended, so a run killed in between leaves at most a trailing
    generation in the logs, which :meth:`truncate` drops on resume.
    """

    def __init__(self, path):
        self.path = path

    def join(self, *parts):
        return os.path.join(self.path, *parts)

    @property
    def checkpoint_dir(self):
        return self.join(CHECKPOINTS)

    def exists(self):
        return os.path.exists(self.join(STATE))

    def create(self, manifest_bytes):
        fileutils.ensure_tree(self.path)
        if self.exists():
            raise exceptions.CorruptRunState(
                path=self.path, reason='a run already exists here, '
                                       'use resume')
        with open(self.join(MANIFEST), 'wb') as f:
            f.write(manifest_bytes)
        with open(self.join(HISTORY), 'w', encoding='utf-8'):
            pass
        with open(self.join(EVENTS), 'w', encoding='utf-8',
                  newline='') as f:
            csv.writer(f, lineterminator='\n').writerow(EVENT_FIELDS)
        self.write_state({'generation': 0,
                          'manifest_sha256': manifest_digest(manifest_bytes)})

    def read_manifest(self):
        try:
            with open(self.join(MANIFEST), 'rb') as f:
                return f.read()
        except FileNotFoundError as exc:
            raise exceptions.CorruptRunState(
                path=self.path, reason='manifest copy is missing') from exc

    def write_state(self, state):
        state = dict(state, version=version.RUN_STATE_VERSION)
        _atomic_write(self.join(STATE), jsonutils.dumps(state, indent=1))

    def read_state(self):
        try:
            with open(self.join(STATE), encoding='utf-8') as f:
                state = jsonutils.loads(f.read())
            version.check_format('run state', state['version'])
        except FileNotFoundError as exc:
            raise exceptions.CorruptRunState(
                path=self.path, reason='no state file') from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise exceptions.CorruptRunState(path=self.path,
                                             reason=str(exc)) from exc
        return state

    def append_generation(self, stats, events):
        with open(self.join(HISTORY), 'a', encoding='utf-8') as f:
            f.write(jsonutils.dumps(stats) + '\n')
        with open(self.join(EVENTS), 'a', encoding='utf-8',
                  newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            for event in events:
                writer.writerow(['' if event[name] is None else event[name]
                                 for name in EVENT_FIELDS])

    def truncate(self, generation):
        """Drop log entries of generations after ``generation``."""
        history = self.read_history()[:generation]
        _atomic_write(self.join(HISTORY), ''.join(
            jsonutils.dumps(stats) + '\n' for stats in history))
        rows = [row for row in self.read_events()
                if int(row['generation']) <= generation]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=EVENT_FIELDS,
                                lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
        _atomic_write(self.join(EVENTS), buf.getvalue())

    def read_history(self):
        try:
            with open(self.join(HISTORY), encoding='utf-8') as f:
                lines = f.read().splitlines()
        except FileNotFoundError:
            return []
        history = []
        for line in lines:
            try:
                history.append(jsonutils.loads(line))
            except ValueError:
                # a line cut short by an interrupted run
                break
        return history

    def read_events(self):
        try:
            with open(self.join(EVENTS), encoding='utf-8', newline='') as f:
                return list(csv.DictReader(f))
        except FileNotFoundError:
            return []
