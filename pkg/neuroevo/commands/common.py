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

import contextlib
import logging
import shutil

from osc_lib import exceptions as osc_exceptions

from neuroevo import data
from neuroevo import engine
from neuroevo import evaluator as evaluator_mod
from neuroevo import exceptions
from neuroevo.nn import training
from neuroevo import store


LOG = logging.getLogger(__name__)

BEST_FITNESS_KEY = 'best_fitness.key'
BEST_ACCURACY_KEY = 'best_accuracy.key'
BEST_FITNESS_CHECKPOINT = 'best_fitness.ckpt'

SUMMARY_FIELDS = ('name', 'variant', 'generations_completed',
                  'best_fitness_key', 'best_fitness', 'best_fitness_accuracy',
                  'best_accuracy_key', 'best_accuracy', 'wall_hours',
                  'test_accuracy', 'output_dir')


@contextlib.contextmanager
def wrap_domain_errors():
    """Reraise engine errors as CommandError with their message."""

    try:
        yield
    except exceptions.NeuroevoException as exc:
        raise osc_exceptions.CommandError(str(exc)) from exc


def apply_overrides(cfg, options):
    """Global options that take precedence over the manifest."""
    workers = getattr(options, 'workers', None)
    if workers is not None and workers != cfg.worker_count:
        if workers < 1:
            raise osc_exceptions.CommandError(
                '--workers must be at least 1, got %d' % workers)
        LOG.debug('Worker count %d overridden to %d', cfg.worker_count,
                  workers)
        cfg = cfg.replace(worker_count=workers)
    return cfg


def _write_text(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)


def _recorder(run_dir, manifest_sha256):
    def record(state, stats, events):
        run_dir.append_generation(stats.to_dict(), events)
        run_dir.write_state(dict(state.to_primitive(),
                                 manifest_sha256=manifest_sha256))
        state.checkpoints.prune()
    return record


def _final_test_accuracy(state, splits):
    """Test accuracy of the best-by-fitness network, CNN runs only."""
    best = state.best_fitness
    if splits is None or best is None:
        return None
    entry = state.checkpoints.latest(best.key)
    if entry is None:
        return None
    checkpoint = state.checkpoints.load(entry)
    return training.test_accuracy(checkpoint.state, splits['test'])


def _write_best(run_dir, state):
    for name, best in ((BEST_FITNESS_KEY, state.best_fitness),
                       (BEST_ACCURACY_KEY, state.best_accuracy)):
        if best is not None:
            _write_text(run_dir.join(name), best.key + '\n')
    if state.best_fitness is None:
        return
    entry = state.checkpoints.latest(state.best_fitness.key)
    if entry is not None and entry.ref:
        shutil.copyfile(run_dir.join(store.CHECKPOINTS, entry.ref),
                        run_dir.join(BEST_FITNESS_CHECKPOINT))


def load_state(run_dir, values):
    """Rebuild the engine state persisted after the last generation."""
    if not values.get('generation'):
        return engine.RunState(checkpoints=store.CheckpointStore(
            run_dir.checkpoint_dir))
    history = run_dir.read_history()
    generation = values['generation']
    if len(history) != generation:
        raise exceptions.CorruptRunState(
            path=run_dir.path,
            reason='history holds %d generations, state says %d'
                   % (len(history), generation))
    try:
        return engine.RunState.from_primitive(
            values, history, run_dir.checkpoint_dir)
    except (KeyError, TypeError, ValueError) as exc:
        raise exceptions.CorruptRunState(path=run_dir.path,
                                         reason=str(exc)) from exc


def execute(cfg, run_dir, state_values=None):
    """Run or continue the evolution recorded in ``run_dir``.

    :returns: summary mapping with the :data:`SUMMARY_FIELDS`
    """
    values = state_values or run_dir.read_state()
    manifest_sha256 = values['manifest_sha256']
    state = load_state(run_dir, values)

    splits = None
    if cfg.evaluator == evaluator_mod.CNNEvaluator.name:
        splits = data.build_splits(cfg.dataset, cfg.seed)
    evaluator = evaluator_mod.make_evaluator(cfg, splits)

    LOG.info('Running %s experiment %r: %d x %d generations from '
             'generation %d', cfg.variant, cfg.name, cfg.pop_size,
             cfg.generations, state.generation + 1)
    engine.run_evolution(cfg, evaluator, state,
                         recorder=_recorder(run_dir, manifest_sha256))

    test_accuracy = values.get('test_accuracy')
    if test_accuracy is None and cfg.dataset.leak_free:
        test_accuracy = _final_test_accuracy(state, splits)
    run_dir.write_state(dict(state.to_primitive(),
                             manifest_sha256=manifest_sha256,
                             test_accuracy=test_accuracy))
    _write_best(run_dir, state)
    return summarize(cfg, run_dir, state, test_accuracy)


def summarize(cfg, run_dir, state, test_accuracy=None):
    best_fitness = state.best_fitness
    best_accuracy = state.best_accuracy
    return {
        'name': cfg.name,
        'variant': cfg.variant,
        'generations_completed': state.generation,
        'best_fitness_key': best_fitness.key if best_fitness else None,
        'best_fitness': best_fitness.fitness if best_fitness else None,
        'best_fitness_accuracy': (best_fitness.accuracy
                                  if best_fitness else None),
        'best_accuracy_key': best_accuracy.key if best_accuracy else None,
        'best_accuracy': best_accuracy.accuracy if best_accuracy else None,
        'wall_hours': sum(s.wall_seconds for s in state.history)
        / engine.SECONDS_PER_HOUR,
        'test_accuracy': test_accuracy,
        'output_dir': run_dir.path,
    }
