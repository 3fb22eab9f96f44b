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

"""Assemble the layers of a genome into a trainable network."""

import math

import numpy as np

from neuroevo import genome as genome_mod
from neuroevo.nn import layers


def _he_uniform(rng, shape, fan_in):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_params(genome, input_shape, num_classes, rng):
    """Seeded He-uniform weights and zero biases, one dict per layer.

    Pool genes get an empty dict; the classifier is the last entry.
    """
    final = genome_mod.output_shape(genome, input_shape)
    params = []
    channels = input_shape.channels
    for gene in genome.layers:
        if isinstance(gene, genome_mod.PoolGene):
            params.append({})
            continue
        f1, f2 = gene.filters_1, gene.filters_2
        layer = {
            'w1': _he_uniform(rng, (f1, channels, 3, 3), channels * 9),
            'b1': np.zeros(f1),
            'w2': _he_uniform(rng, (f2, f1, 3, 3), f1 * 9),
            'b2': np.zeros(f2),
        }
        if channels != f2:
            layer['wp'] = _he_uniform(rng, (f2, channels), channels)
            layer['bp'] = np.zeros(f2)
        params.append(layer)
        channels = f2
    features = final.size
    params.append({
        'w': _he_uniform(rng, (num_classes, features), features),
        'b': np.zeros(num_classes),
    })
    return params


def _pool_kind(gene):
    return 'max' if gene.kind is genome_mod.PoolKind.MAX else 'average'


def forward(genome, params, x):
    """Class probabilities for a batch, plus the caches for backward."""
    caches = []
    for gene, layer in zip(genome.layers, params):
        if isinstance(gene, genome_mod.SkipGene):
            x, cache = layers.skip_block_forward(x, layer)
        else:
            x, cache = layers.pool2x2_forward(x, _pool_kind(gene))
        caches.append(cache)
    classifier = params[-1]
    probs, cache = layers.classifier_forward(x, classifier['w'],
                                             classifier['b'])
    caches.append(cache)
    return probs, caches


def backward(genome, caches, dlogits):
    """Per-layer gradient dicts shaped like the params."""
    grads = [None] * (len(genome.layers) + 1)
    dx, dw, db = layers.classifier_backward(dlogits, caches[-1])
    grads[-1] = {'w': dw, 'b': db}
    for index in range(len(genome.layers) - 1, -1, -1):
        gene = genome.layers[index]
        if isinstance(gene, genome_mod.SkipGene):
            dx, grads[index] = layers.skip_block_backward(dx, caches[index])
        else:
            dx = layers.pool2x2_backward(dx, caches[index])
            grads[index] = {}
    return grads


def predict(genome, params, images, batch_size=500):
    labels = []
    for start in range(0, images.shape[0], batch_size):
        probs, _caches = forward(genome, params,
                                 images[start:start + batch_size])
        labels.append(probs.argmax(axis=1))
    if not labels:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(labels)
