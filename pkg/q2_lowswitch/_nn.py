# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import dataclasses

import numpy as np

from ._core import NumericalDivergenceError, ProtocolError

_MAGIC = b'LSMLP\x00\x01\x00'


def init_parameters(layer_sizes, rng):
    '''Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.'''
    chunks = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
        chunks.append(rng.uniform(-bound, bound, size=n_out))
    return np.concatenate(chunks)


class Mlp:
    '''Fully connected ReLU network over a flat float64 parameter vector.

    Layer ``i`` contributes a row-major ``(n_in, n_out)`` weight block
    followed by its ``n_out`` biases. Hidden layers use ReLU, the output is
    linear. ``forward`` returns the output together with the last hidden
    activation (the input itself for a network without hidden layers) and
    caches what ``backward`` needs.
    '''

    def __init__(self, layer_sizes, params=None, rng=None):
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError('An MLP needs at least an input and an output '
                             'layer of positive width, got %r.' % (sizes,))
        self.layer_sizes = sizes
        self._shapes = list(zip(sizes[:-1], sizes[1:]))
        self.n_params = sum((n_in + 1) * n_out for n_in, n_out in self._shapes)
        if params is None:
            if rng is None:
                rng = np.random.default_rng(0)
            params = init_parameters(sizes, rng)
        params = np.array(params, dtype=np.float64)
        self._check_params(params)
        self.params = params
        self._cache = None

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    @property
    def feature_dim(self):
        return self.layer_sizes[-2]

    def _check_params(self, params):
        if params.shape != (self.n_params,):
            raise ValueError('Expected %d parameters for layers %r, got shape '
                             '%r.' % (self.n_params, self.layer_sizes,
                                      params.shape))

    def unpack(self, params=None):
        if params is None:
            params = self.params
        params = np.asarray(params, dtype=np.float64)
        self._check_params(params)
        layers = []
        offset = 0
        for n_in, n_out in self._shapes:
            weights = params[offset:offset + n_in * n_out].reshape(n_in,
                                                                   n_out)
            offset += n_in * n_out
            layers.append((weights, params[offset:offset + n_out]))
            offset += n_out
        return layers

    def forward(self, x, params=None):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        inputs = np.atleast_2d(x)
        if inputs.shape[1] != self.input_dim:
            raise ValueError('Input dimension %d does not match the first '
                             'layer width %d.'
                             % (inputs.shape[1], self.input_dim))
        layers = self.unpack(params)
        activations = [inputs]
        pre_activations = []
        h = inputs
        last = len(layers) - 1
        for i, (weights, biases) in enumerate(layers):
            z = h @ weights + biases
            pre_activations.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            activations.append(h)
        self._cache = (inputs.copy(), layers, activations, pre_activations,
                       single)
        output, feature = activations[-1], activations[-2]
        if single:
            return output[0], feature[0]
        return output, feature

    def backward(self, x, output_gradient, input_gradient=False):
        '''Gradient of sum(output * output_gradient) w.r.t. the parameters.

        Must follow a ``forward`` on the same ``x``. With ``input_gradient``
        the gradient w.r.t. ``x`` is returned as well.
        '''
        if self._cache is None:
            raise ProtocolError('backward() requires a cached forward pass.')
        inputs, layers, activations, pre_activations, single = self._cache
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape != inputs.shape or not np.array_equal(x, inputs):
            raise ProtocolError('backward() input does not match the cached '
                                'forward pass.')
        delta = np.atleast_2d(np.asarray(output_gradient, dtype=np.float64))
        if delta.shape != activations[-1].shape:
            raise ValueError('Output gradient shape %r does not match the '
                             'output shape %r.'
                             % (delta.shape, activations[-1].shape))
        chunks = []
        for i in range(len(layers) - 1, -1, -1):
            weights, _ = layers[i]
            chunks.append(delta.sum(axis=0))
            chunks.append((activations[i].T @ delta).ravel())
            delta = delta @ weights.T
            if i > 0:
                delta = delta * (pre_activations[i - 1] > 0)
        grads = np.concatenate(chunks[::-1])
        if input_gradient:
            return grads, delta[0] if single else delta
        return grads

    def to_bytes(self):
        header = np.array((len(self.layer_sizes),) + self.layer_sizes,
                          dtype='<u4').tobytes()
        return _MAGIC + header + self.params.astype('<f8').tobytes()

    @classmethod
    def from_bytes(cls, blob):
        if blob[:len(_MAGIC)] != _MAGIC:
            raise ValueError('Not a serialized MLP: bad header.')
        offset = len(_MAGIC)
        n_layers = int(np.frombuffer(blob, dtype='<u4', count=1,
                                     offset=offset)[0])
        offset += 4
        sizes = np.frombuffer(blob, dtype='<u4', count=n_layers,
                              offset=offset)
        offset += 4 * n_layers
        params = np.frombuffer(blob, dtype='<f8', offset=offset)
        return cls(sizes.tolist(), params=params.astype(np.float64))


@dataclasses.dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    learning_rate: float = 1e-3
    epsilon: float = 1e-8
    beta1: float = 0.9
    beta2: float = 0.999

    @classmethod
    def zeros(cls, n_params, **hyperparameters):
        return cls(m=np.zeros(n_params), v=np.zeros(n_params),
                   **hyperparameters)


def adam_step(params, grads, state):
    '''One Adam update. ``state`` is advanced in place.'''
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError('Parameter, gradient and optimizer shapes differ: '
                         '%r, %r, %r.'
                         % (params.shape, grads.shape, state.m.shape))
    if not np.all(np.isfinite(grads)):
        raise NumericalDivergenceError('Non-finite gradient passed to the '
                                       'Adam update.')
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = state.m / (1 - state.beta1 ** state.t)
    v_hat = state.v / (1 - state.beta2 ** state.t)
    updated = params - state.learning_rate * m_hat / (np.sqrt(v_hat) +
                                                      state.epsilon)
    return updated, state


def numerical_gradient(func, params, h=1e-6):
    params = np.array(params, dtype=np.float64)
    grads = np.zeros_like(params)
    for i in range(len(params)):
        original = params[i]
        params[i] = original + h
        upper = func(params)
        params[i] = original - h
        lower = func(params)
        params[i] = original
        grads[i] = (upper - lower) / (2 * h)
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    '''Largest per-entry |a - n| / (|a| + |n|), the denominator floored.'''
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))
