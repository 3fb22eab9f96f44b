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

"""Forward and backward passes of the layer types a genome can express.

Tensors are ``numpy`` arrays laid out (batch, channel, height, width).
Every ``*_forward`` returns ``(output, cache)`` and the matching
``*_backward`` takes the upstream gradient and that cache.
"""

import numpy as np
from numpy.lib import stride_tricks

from neuroevo import exceptions


def _windows3x3(x):
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # (N, C, H, W, 3, 3) view, no copy
    return stride_tricks.sliding_window_view(padded, (3, 3), axis=(2, 3))


def conv3x3_forward(x, weights, bias):
    """Same-padded, unit-stride 3x3 cross-correlation."""
    if weights.ndim != 4 or weights.shape[2:] != (3, 3):
        raise exceptions.ShapeMismatch(
            reason='conv weights must be (C_out, C_in, 3, 3), got %s'
                   % (weights.shape,))
    if x.ndim != 4 or x.shape[1] != weights.shape[1]:
        raise exceptions.ShapeMismatch(
            reason='input %s does not match conv weights %s'
                   % (x.shape, weights.shape))
    windows = _windows3x3(x)
    out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out), (windows, weights)


def conv3x3_backward(dout, cache):
    """Gradients w.r.t. input, weights and bias."""
    windows, weights = cache
    dbias = dout.sum(axis=(0, 2, 3))
    dweights = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    flipped = weights[:, :, ::-1, ::-1]
    dx = np.tensordot(_windows3x3(dout), flipped,
                      axes=([1, 4, 5], [0, 2, 3]))
    return np.ascontiguousarray(dx.transpose(0, 3, 1, 2)), dweights, dbias


def conv1x1_forward(x, weights, bias):
    if weights.ndim != 2 or x.shape[1] != weights.shape[1]:
        raise exceptions.ShapeMismatch(
            reason='input %s does not match projection %s'
                   % (x.shape, weights.shape))
    out = np.einsum('nchw,oc->nohw', x, weights) + bias[None, :, None, None]
    return out, (x, weights)


def conv1x1_backward(dout, cache):
    x, weights = cache
    dbias = dout.sum(axis=(0, 2, 3))
    dweights = np.einsum('nohw,nchw->oc', dout, x)
    dx = np.einsum('nohw,oc->nchw', dout, weights)
    return dx, dweights, dbias


def relu_forward(x):
    return np.maximum(x, 0.0), x


def relu_backward(dout, cache):
    return dout * (cache > 0.0)


def pool2x2_forward(x, kind):
    """Stride-2 2x2 max or average pooling.

    An odd trailing row or column is dropped.

    :param kind: ``'max'`` or ``'average'``
    """
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise exceptions.ShapeMismatch(
            reason='cannot pool a %dx%d feature map' % (h, w))
    ho, wo = h // 2, w // 2
    blocks = x[:, :, :2 * ho, :2 * wo].reshape(n, c, ho, 2, wo, 2)
    # (N, C, Ho, Wo, 4) in row-major window order
    cells = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    if kind == 'max':
        argmax = cells.argmax(axis=-1)
        out = np.take_along_axis(cells, argmax[..., None], axis=-1)[..., 0]
        return out, (x.shape, kind, argmax)
    if kind == 'average':
        return cells.mean(axis=-1), (x.shape, kind, None)
    raise ValueError('unknown pool kind %r' % kind)


def pool2x2_backward(dout, cache):
    shape, kind, argmax = cache
    n, c, h, w = shape
    ho, wo = dout.shape[2:]
    if kind == 'max':
        # argmax keeps the first maximum, so ties route to one cell
        cells = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(cells, argmax[..., None], dout[..., None], axis=-1)
    else:
        cells = np.repeat(dout[..., None] / 4.0, 4, axis=-1)
    blocks = cells.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(shape)
    dx[:, :, :2 * ho, :2 * wo] = blocks.reshape(n, c, 2 * ho, 2 * wo)
    return dx


def skip_block_forward(x, params):
    """Residual block: conv -> ReLU -> conv, plus shortcut, then ReLU.

    ``params`` holds ``w1, b1, w2, b2`` and, when the input channels differ
    from the output channels, a 1x1 projection ``wp, bp`` for the shortcut.
    """
    h1, conv1 = conv3x3_forward(x, params['w1'], params['b1'])
    a1, relu1 = relu_forward(h1)
    h2, conv2 = conv3x3_forward(a1, params['w2'], params['b2'])
    if 'wp' in params:
        shortcut, proj = conv1x1_forward(x, params['wp'], params['bp'])
    else:
        if x.shape[1] != h2.shape[1]:
            raise exceptions.ShapeMismatch(
                reason='identity shortcut needs %d channels, got %d'
                       % (h2.shape[1], x.shape[1]))
        shortcut, proj = x, None
    out, relu2 = relu_forward(h2 + shortcut)
    return out, (conv1, relu1, conv2, proj, relu2)


def skip_block_backward(dout, cache):
    conv1, relu1, conv2, proj, relu2 = cache
    dsum = relu_backward(dout, relu2)
    grads = {}
    da1, grads['w2'], grads['b2'] = conv3x3_backward(dsum, conv2)
    dh1 = relu_backward(da1, relu1)
    dx, grads['w1'], grads['b1'] = conv3x3_backward(dh1, conv1)
    if proj is not None:
        dx_short, grads['wp'], grads['bp'] = conv1x1_backward(dsum, proj)
    else:
        dx_short = dsum
    return dx + dx_short, grads


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def classifier_forward(features, weights, bias):
    """Flatten, one linear layer, softmax. Returns class probabilities."""
    flat = features.reshape(features.shape[0], -1)
    if flat.shape[1] != weights.shape[1]:
        raise exceptions.ShapeMismatch(
            reason='classifier expects %d features, got %d'
                   % (weights.shape[1], flat.shape[1]))
    probs = softmax(flat @ weights.T + bias)
    return probs, (features.shape, flat, weights)


def cross_entropy(probs, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    n = probs.shape[0]
    picked = probs[np.arange(n), labels]
    loss = -np.mean(np.log(np.maximum(picked, np.finfo(probs.dtype).tiny)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def classifier_backward(dlogits, cache):
    shape, flat, weights = cache
    dweights = dlogits.T @ flat
    dbias = dlogits.sum(axis=0)
    dfeatures = (dlogits @ weights).reshape(shape)
    return dfeatures, dweights, dbias
