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

"""Versioned binary checkpoint files.

Layout, all integers and floats little-endian::

    magic      8 bytes  b'NEVOCKPT'
    version    uint16 major, uint16 minor
    key        uint32 length, ASCII canonical genome key
    epochs     uint32 epochs completed
    rng        PCG64 cursor: uint128 state, uint128 increment,
               uint8 has_uint32, uint32 buffered value
    params     uint32 layer count, then per layer: uint16 array count,
               then per array: uint8 name length, name, uint8 ndim,
               uint32 per dim, float64 data in C order
    velocity   same layout as params
"""

import io
import os
import struct

import numpy as np

from neuroevo import exceptions
from neuroevo import genome as genome_mod
from neuroevo.nn import training
from neuroevo import version


MAGIC = b'NEVOCKPT'
_MASK64 = (1 << 64) - 1


def _pack_u128(value):
    return struct.pack('<QQ', value & _MASK64, value >> 64)


def _write_layers(buf, layers):
    buf.write(struct.pack('<I', len(layers)))
    for layer in layers:
        buf.write(struct.pack('<H', len(layer)))
        for name, array in layer.items():
            encoded = name.encode('ascii')
            buf.write(struct.pack('<B', len(encoded)))
            buf.write(encoded)
            buf.write(struct.pack('<B', array.ndim))
            buf.write(struct.pack('<%dI' % array.ndim, *array.shape))
            buf.write(np.ascontiguousarray(array, dtype='<f8').tobytes())


def dumps(state):
    rng_state = state.rng.bit_generator.state
    if rng_state['bit_generator'] != 'PCG64':
        raise exceptions.CheckpointFormatError(
            reason='unsupported bit generator %s'
                   % rng_state['bit_generator'])
    major, minor = (int(v) for v in version.CHECKPOINT_VERSION.split('.'))
    key = state.genome.key.encode('ascii')
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack('<HH', major, minor))
    buf.write(struct.pack('<I', len(key)))
    buf.write(key)
    buf.write(struct.pack('<I', state.epochs_completed))
    buf.write(_pack_u128(rng_state['state']['state']))
    buf.write(_pack_u128(rng_state['state']['inc']))
    buf.write(struct.pack('<BI', rng_state['has_uint32'],
                          rng_state['uinteger']))
    _write_layers(buf, state.params)
    _write_layers(buf, state.velocity)
    return buf.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise exceptions.CheckpointFormatError(
                reason='truncated at byte %d' % self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u128(self):
        low, high = self.unpack('<QQ')
        return low | (high << 64)

    def layers(self):
        (count,) = self.unpack('<I')
        result = []
        for _layer in range(count):
            (arrays,) = self.unpack('<H')
            layer = {}
            for _array in range(arrays):
                (name_len,) = self.unpack('<B')
                name = self.take(name_len).decode('ascii')
                (ndim,) = self.unpack('<B')
                shape = self.unpack('<%dI' % ndim)
                size = int(np.prod(shape, dtype=np.int64)) * 8
                layer[name] = np.frombuffer(
                    self.take(size), dtype='<f8').astype(
                        np.float64).reshape(shape)
            result.append(layer)
        return result


def loads(data):
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise exceptions.CheckpointFormatError(reason='bad magic number')
    major, minor = reader.unpack('<HH')
    try:
        version.check_format('checkpoint', '%d.%d' % (major, minor))
    except ValueError as exc:
        raise exceptions.CheckpointFormatError(reason=str(exc)) from exc
    (key_len,) = reader.unpack('<I')
    key = reader.take(key_len).decode('ascii')
    try:
        genome = genome_mod.parse_key(key)
    except ValueError as exc:
        raise exceptions.CheckpointFormatError(reason=str(exc)) from exc
    (epochs,) = reader.unpack('<I')
    rng = np.random.Generator(np.random.PCG64())
    state_value = reader.u128()
    inc = reader.u128()
    has_uint32, uinteger = reader.unpack('<BI')
    rng.bit_generator.state = {
        'bit_generator': 'PCG64',
        'state': {'state': state_value, 'inc': inc},
        'has_uint32': has_uint32,
        'uinteger': uinteger,
    }
    params = reader.layers()
    velocity = reader.layers()
    if reader.offset != len(data):
        raise exceptions.CheckpointFormatError(
            reason='%d trailing bytes' % (len(data) - reader.offset))
    if len(params) != len(genome) + 1 or len(velocity) != len(params):
        raise exceptions.CheckpointFormatError(
            reason='layer count does not match genome %s' % key)
    return training.ModelState(genome=genome, params=params,
                               velocity=velocity, epochs_completed=epochs,
                               rng=rng)


def save(path, state):
    """Write a checkpoint atomically."""
    tmp = path + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(dumps(state))
    os.replace(tmp, path)


def load(path):
    with open(path, 'rb') as f:
        return loads(f.read())
