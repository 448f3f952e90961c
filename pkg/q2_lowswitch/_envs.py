# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import dataclasses
import functools
from typing import Optional, Tuple

import numpy as np

from ._core import ConfigurationError, ProtocolError


@dataclasses.dataclass(frozen=True)
class EnvironmentSpec:
    state_dim: int
    max_steps: int
    reward_range: Tuple[float, float]
    n_actions: Optional[int] = None
    action_low: Optional[Tuple[float, ...]] = None
    action_high: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.state_dim < 1:
            raise ValueError('state_dim must be positive.')
        if self.max_steps < 1:
            raise ValueError('max_steps must be positive.')
        if self.reward_range[0] > self.reward_range[1]:
            raise ValueError('reward_range must be ordered (low, high).')
        if self.n_actions is None:
            if self.action_low is None or self.action_high is None:
                raise ValueError('A continuous action space needs bounds.')
            if len(self.action_low) != len(self.action_high):
                raise ValueError('Action bounds differ in dimension.')
            if any(lo >= hi for lo, hi in zip(self.action_low,
                                               self.action_high)):
                raise ValueError('Each action lower bound must be below its '
                                 'upper bound.')
        elif self.n_actions < 1:
            raise ValueError('n_actions must be positive.')

    @property
    def discrete(self):
        return self.n_actions is not None

    @property
    def action_dim(self):
        return 1 if self.discrete else len(self.action_low)


class Environment:
    '''Episodic environment with a hard time limit.

    Subclasses provide ``spec``, ``_reset(rng)`` and ``_step(action)``. This
    base class enforces the reset/step protocol, validates actions and cuts
    episodes at ``spec.max_steps``; a cut sets ``truncated``.
    '''
    spec = None

    def __init__(self):
        self._steps = 0
        self._done = True
        self.truncated = False

    def reset(self, rng):
        self._steps = 0
        self._done = False
        self.truncated = False
        return self._reset(rng)

    def step(self, action):
        if self._done:
            raise ProtocolError('step() was called on a finished episode; '
                                'call reset() first.')
        action = self._check_action(action)
        next_state, reward, terminal = self._step(action)
        self._steps += 1
        if not terminal and self._steps >= self.spec.max_steps:
            terminal = True
            self.truncated = True
        self._done = terminal
        return next_state, float(reward), bool(terminal)

    def _check_action(self, action):
        if self.spec.discrete:
            if np.ndim(action) != 0 or int(action) != action:
                raise ValueError('Expected an integer action, got %r.'
                                 % (action,))
            action = int(action)
            if not 0 <= action < self.spec.n_actions:
                raise ValueError('Action %d is outside [0, %d).'
                                 % (action, self.spec.n_actions))
            return action
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.spec.action_dim,):
            raise ValueError('Expected an action of dimension %d, got shape '
                             '%r.' % (self.spec.action_dim, action.shape))
        if (np.any(action < self.spec.action_low) or
                np.any(action > self.spec.action_high)):
            raise ValueError('Action %r is outside the bounds [%r, %r].'
                             % (action.tolist(), self.spec.action_low,
                                self.spec.action_high))
        return action

    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


def _one_hot(index, size):
    state = np.zeros(size)
    state[index] = 1.0
    return state


class GridWorld(Environment):
    # up, right, down, left
    _moves = ((-1, 0), (0, 1), (1, 0), (0, -1))

    def __init__(self, size=5, max_steps=50):
        super().__init__()
        self.size = size
        self.goal = (size - 1, size - 1)
        self.spec = EnvironmentSpec(state_dim=size * size,
                                    max_steps=max_steps,
                                    reward_range=(0.0, 1.0),
                                    n_actions=4)
        self.position = (0, 0)

    def _observe(self):
        row, col = self.position
        return _one_hot(row * self.size + col, self.size * self.size)

    def _reset(self, rng):
        self.position = (0, 0)
        return self._observe()

    def _step(self, action):
        d_row, d_col = self._moves[action]
        row = min(max(self.position[0] + d_row, 0), self.size - 1)
        col = min(max(self.position[1] + d_col, 0), self.size - 1)
        self.position = (row, col)
        if self.position == self.goal:
            return self._observe(), 1.0, True
        return self._observe(), 0.0, False


class ChainMDP(Environment):
    '''Deep-exploration chain: only walking right all the way pays off.

    Action 0 moves left and action 1 moves right. Reaching the last state
    pays 1 and ends the episode; pushing left at the first state pays a
    small distractor reward.
    '''

    def __init__(self, n=10, distractor=0.01, max_steps=None):
        super().__init__()
        if n < 2:
            raise ValueError('A chain needs at least two states.')
        self.n = n
        self.distractor = distractor
        self.spec = EnvironmentSpec(state_dim=n,
                                    max_steps=max_steps or 2 * n,
                                    reward_range=(0.0, 1.0),
                                    n_actions=2)
        self.position = 0

    def _reset(self, rng):
        self.position = 0
        return _one_hot(0, self.n)

    def _step(self, action):
        if action == 1:
            self.position += 1
            if self.position == self.n - 1:
                return _one_hot(self.position, self.n), 1.0, True
            return _one_hot(self.position, self.n), 0.0, False
        if self.position == 0:
            return _one_hot(0, self.n), self.distractor, False
        self.position -= 1
        return _one_hot(self.position, self.n), 0.0, False


class CartPoleLite(Environment):
    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * np.pi / 360
    x_threshold = 2.4

    def __init__(self, max_steps=200):
        super().__init__()
        self.total_mass = self.masspole + self.masscart
        self.polemass_length = self.masspole * self.length
        self.spec = EnvironmentSpec(state_dim=4, max_steps=max_steps,
                                    reward_range=(0.0, 1.0), n_actions=2)
        self.state = np.zeros(4)

    def _reset(self, rng):
        self.state = rng.uniform(-0.05, 0.05, size=4)
        return self.state.copy()

    def _step(self, action):
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if action == 1 else -self.force_mag
        costheta = np.cos(theta)
        sintheta = np.sin(theta)

        temp = (force + self.polemass_length * theta_dot ** 2 * sintheta
                ) / self.total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta ** 2 /
                           self.total_mass))
        xacc = temp - self.polemass_length * thetaacc * costheta / \
            self.total_mass

        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self.state = np.array([x, x_dot, theta, theta_dot])

        failed = bool(abs(x) > self.x_threshold or
                      abs(theta) > self.theta_threshold)
        return self.state.copy(), 0.0 if failed else 1.0, failed


def _angle_normalize(x):
    return ((x + np.pi) % (2 * np.pi)) - np.pi


class PendulumLite(Environment):
    max_speed = 8.0
    max_torque = 2.0
    dt = 0.05
    g = 10.0
    m = 1.0
    l = 1.0  # noqa: E741

    def __init__(self, max_steps=200):
        super().__init__()
        worst = np.pi ** 2 + 0.1 * self.max_speed ** 2 + \
            0.001 * self.max_torque ** 2
        self.spec = EnvironmentSpec(state_dim=3, max_steps=max_steps,
                                    reward_range=(-worst, 0.0),
                                    action_low=(-self.max_torque,),
                                    action_high=(self.max_torque,))
        self.state = np.zeros(2)

    def _observe(self):
        theta, theta_dot = self.state
        return np.array([np.cos(theta), np.sin(theta), theta_dot])

    def _reset(self, rng):
        self.state = np.array([rng.uniform(-np.pi, np.pi),
                               rng.uniform(-1.0, 1.0)])
        return self._observe()

    def _step(self, action):
        theta, theta_dot = self.state
        u = float(action[0])
        cost = _angle_normalize(theta) ** 2 + 0.1 * theta_dot ** 2 + \
            0.001 * u ** 2

        theta_dot = theta_dot + (
            3 * self.g / (2 * self.l) * np.sin(theta) +
            3.0 / (self.m * self.l ** 2) * u) * self.dt
        theta_dot = np.clip(theta_dot, -self.max_speed, self.max_speed)
        theta = theta + theta_dot * self.dt
        self.state = np.array([theta, theta_dot])
        return self._observe(), -cost, False


ENVIRONMENTS = {
    'gridworld5': functools.partial(GridWorld, size=5),
    'chain10': functools.partial(ChainMDP, n=10),
    'cartpole_lite': CartPoleLite,
    'pendulum_lite': PendulumLite,
}

DEFAULT_HIDDEN_SIZES = {
    'gridworld5': (64, 64),
    'chain10': (64, 64),
    'cartpole_lite': (128, 128),
    'pendulum_lite': (128, 128),
}


def make_environment(environment_id):
    try:
        factory = ENVIRONMENTS[environment_id]
    except KeyError:
        raise ConfigurationError(
            'Unknown environment %r. Valid environments are: %s.'
            % (environment_id, ', '.join(sorted(ENVIRONMENTS))))
    return factory()
