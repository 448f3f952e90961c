# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import collections

import numpy as np

# Projection matrices are drawn from the run seed plus a fixed offset so the
# exploration counter and the switching criteria never share a matrix.
EXPLORATION_SEED_OFFSET = 0x5EED0001
CRITERION_SEED_OFFSET = 0x5EED0002

EXPLORATION_PROJECTION_DIM = 16
INFO_PROJECTION_DIM = 8

_MAX_PATTERN_BITS = 63


def projection_seed(run_seed, offset):
    return (int(run_seed) + offset) % (1 << 63)


def pack_pattern(pattern):
    '''Injective map from a +-1 sign pattern to a non-negative int.'''
    bits = np.atleast_2d(np.asarray(pattern) > 0)
    if bits.shape[1] > _MAX_PATTERN_BITS:
        raise ValueError('Sign patterns longer than %d bits cannot be packed.'
                         % _MAX_PATTERN_BITS)
    weights = np.left_shift(np.int64(1), np.arange(bits.shape[1],
                                                   dtype=np.int64))
    keys = bits.astype(np.int64) @ weights
    return int(keys[0]) if np.ndim(pattern) == 1 else keys


class RandomProjection:
    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2:
            raise ValueError('A projection matrix must be two dimensional.')
        matrix.setflags(write=False)
        self.matrix = matrix

    @classmethod
    def from_seed(cls, input_dim, projection_dim, seed):
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((projection_dim, input_dim)))

    @property
    def projection_dim(self):
        return self.matrix.shape[0]

    @property
    def input_dim(self):
        return self.matrix.shape[1]

    def project(self, states):
        '''sign(A x) with sign(0) = +1, for one state or a batch.'''
        states = np.asarray(states, dtype=np.float64)
        if states.shape[-1] != self.input_dim:
            raise ValueError('State dimension %d does not match the '
                             'projection input dimension %d.'
                             % (states.shape[-1], self.input_dim))
        z = states @ self.matrix.T
        return np.where(z >= 0, 1, -1).astype(np.int8)

    def key(self, states):
        return pack_pattern(self.project(states))


def action_key(action):
    if np.ndim(action) == 0:
        return int(action)
    return pack_pattern(np.where(np.asarray(action) >= 0, 1, -1))


class HashedCounter:
    '''Visit counts over projected states, optionally paired with actions.'''

    def __init__(self, projection):
        self.projection = projection
        self.table = collections.Counter()
        self.total = 0

    def _key(self, state, action=None):
        key = self.projection.key(state)
        if action is None:
            return key
        return key, action_key(action)

    def observe(self, state, action=None):
        key = self._key(state, action)
        self.table[key] += 1
        self.total += 1
        return self.table[key]

    def count(self, state, action=None):
        return self.table.get(self._key(state, action), 0)

    def counts(self, states):
        keys = self.projection.key(np.atleast_2d(states))
        return np.array([self.table.get(int(k), 0) for k in keys])


def psi(projection, state, action, n_actions=None):
    '''Projected state signs concatenated with a one-hot (or raw) action.'''
    signs = projection.project(state).astype(np.float64)
    if n_actions is None:
        encoded = np.asarray(action, dtype=np.float64).reshape(-1)
    else:
        encoded = np.zeros(n_actions)
        encoded[int(action)] = 1.0
    return np.concatenate([signs, encoded])
