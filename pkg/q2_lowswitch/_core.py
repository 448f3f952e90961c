# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import dataclasses
import logging
from typing import List, Optional, Tuple, Union

import numpy as np

_logger = logging.getLogger(__name__)


class LowSwitchError(Exception):
    pass


class ConfigurationError(LowSwitchError, ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))


class NumericalDivergenceError(LowSwitchError, ArithmeticError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = 'Numerical divergence at step %d: %s' % (step, message)
        super().__init__(message)


class ProtocolError(LowSwitchError, RuntimeError):
    pass


class DegenerateSampleError(LowSwitchError, ValueError):
    pass


Action = Union[int, np.ndarray]


@dataclasses.dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: Action
    reward: float
    next_state: np.ndarray
    terminal: bool
    step_index: int


@dataclasses.dataclass(frozen=True)
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    step_indices: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def transitions(self):
        for i in range(len(self)):
            action = self.actions[i]
            yield Transition(self.states[i],
                             int(action) if action.ndim == 0 else action,
                             float(self.rewards[i]), self.next_states[i],
                             bool(self.terminals[i]),
                             int(self.step_indices[i]))


class ReplayBuffer:
    '''Fixed-capacity FIFO store of transitions.

    Records live in preallocated ring arrays; once ``capacity`` records have
    been inserted every new record overwrites the oldest one. ``action_dim``
    of ``None`` stores integer (discrete) actions.
    '''

    def __init__(self, capacity, state_dim, action_dim=None):
        if capacity < 1:
            raise ValueError('Replay buffer capacity must be positive, got '
                             '%r.' % capacity)
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.action_dim = action_dim
        self._states = np.zeros((self.capacity, self.state_dim))
        self._next_states = np.zeros((self.capacity, self.state_dim))
        if action_dim is None:
            self._actions = np.zeros(self.capacity, dtype=np.int64)
        else:
            self._actions = np.zeros((self.capacity, int(action_dim)))
        self._rewards = np.zeros(self.capacity)
        self._terminals = np.zeros(self.capacity, dtype=bool)
        self._step_indices = np.zeros(self.capacity, dtype=np.int64)
        self.insert_count = 0

    def __len__(self):
        return min(self.insert_count, self.capacity)

    def add(self, transition):
        i = self.insert_count % self.capacity
        self._states[i] = transition.state
        self._next_states[i] = transition.next_state
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._terminals[i] = transition.terminal
        self._step_indices[i] = transition.step_index
        self.insert_count += 1

    def _positions(self, ages):
        # age 0 is the most recent record
        return (self.insert_count - 1 - np.asarray(ages)) % self.capacity

    def _gather(self, positions):
        return TransitionBatch(states=self._states[positions],
                               actions=self._actions[positions],
                               rewards=self._rewards[positions],
                               next_states=self._next_states[positions],
                               terminals=self._terminals[positions],
                               step_indices=self._step_indices[positions])

    @property
    def records(self):
        '''All stored transitions, oldest first.'''
        ages = np.arange(len(self) - 1, -1, -1)
        return list(self._gather(self._positions(ages)).transitions())


def sample_recent(buffer, window, count, rng):
    if count < 1:
        raise ValueError('Sample count must be positive, got %r.' % count)
    if window < 1:
        raise ValueError('Recency window must be positive, got %r.' % window)
    size = len(buffer)
    if size == 0:
        raise ValueError('Cannot sample from an empty replay buffer.')
    ages = rng.integers(0, min(window, size), size=count)
    return buffer._gather(buffer._positions(ages))


@dataclasses.dataclass(frozen=True)
class PolicySnapshot:
    parameters: np.ndarray
    version: int
    created_at_step: int

    def __post_init__(self):
        params = np.array(self.parameters, dtype=np.float64, copy=True)
        params.setflags(write=False)
        object.__setattr__(self, 'parameters', params)


_run_defaults = {
    'environment': 'gridworld5',
    'agent': 'dqn_lite',
    'criterion': 'none',
    'total_steps': 50000,
    'seed': 0,
    'gamma': 0.99,
    'buffer_capacity': 100000,
    'batch_size': 32,
    'update_period': 1,
    'updates_per_event': 1,
    'warmup_steps': 1000,
    'bonus': 0.01,
    'hidden_sizes': None,
    'learning_rate': 1e-3,
    'adam_epsilon': 1.5e-4,
    'target_period': 200,
    'tau': 0.005,
    'alpha': 0.2,
    'reward_clip': True,
    'criterion_window': 10000,
    'criterion_batch': 512,
}

# Values that differ from _run_defaults for a given learner.
_dqn_defaults = {}

_sac_defaults = {
    'batch_size': 128,
    'update_period': 50,
    'updates_per_event': 50,
    'warmup_steps': 2000,
    'bonus': 0.0,
    'adam_epsilon': 1e-8,
    'reward_clip': False,
}

_agent_defaults = {'dqn_lite': _dqn_defaults, 'sac_lite': _sac_defaults}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    environment: str = _run_defaults['environment']
    agent: str = _run_defaults['agent']
    criterion: str = _run_defaults['criterion']
    total_steps: int = _run_defaults['total_steps']
    seed: int = _run_defaults['seed']
    gamma: float = _run_defaults['gamma']
    buffer_capacity: int = _run_defaults['buffer_capacity']
    batch_size: int = _run_defaults['batch_size']
    update_period: int = _run_defaults['update_period']
    updates_per_event: int = _run_defaults['updates_per_event']
    warmup_steps: int = _run_defaults['warmup_steps']
    bonus: float = _run_defaults['bonus']
    hidden_sizes: Optional[Tuple[int, ...]] = _run_defaults['hidden_sizes']
    learning_rate: float = _run_defaults['learning_rate']
    adam_epsilon: float = _run_defaults['adam_epsilon']
    target_period: int = _run_defaults['target_period']
    tau: float = _run_defaults['tau']
    alpha: float = _run_defaults['alpha']
    reward_clip: bool = _run_defaults['reward_clip']
    criterion_window: int = _run_defaults['criterion_window']
    criterion_batch: int = _run_defaults['criterion_batch']

    def __post_init__(self):
        if self.hidden_sizes is not None:
            object.__setattr__(self, 'hidden_sizes',
                               tuple(int(n) for n in self.hidden_sizes))

    @classmethod
    def for_agent(cls, agent=_run_defaults['agent'], **overrides):
        values = dict(_agent_defaults.get(agent, {}))
        values.update(overrides)
        return cls(agent=agent, **values)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        errors = []
        if self.total_steps < 1:
            errors.append('total_steps must be positive, got %r.'
                          % self.total_steps)
        if self.warmup_steps < 0:
            errors.append('warmup_steps must be non-negative, got %r.'
                          % self.warmup_steps)
        if self.total_steps <= self.warmup_steps:
            errors.append('total_steps (%r) must exceed warmup_steps (%r).'
                          % (self.total_steps, self.warmup_steps))
        if self.update_period < 1:
            errors.append('update_period must be at least 1, got %r.'
                          % self.update_period)
        if self.updates_per_event < 1:
            errors.append('updates_per_event must be at least 1, got %r.'
                          % self.updates_per_event)
        if not 0.0 <= self.gamma < 1.0:
            errors.append('gamma must lie in [0, 1), got %r.' % self.gamma)
        if self.seed < 0:
            errors.append('seed must be non-negative, got %r.' % self.seed)
        if self.bonus < 0:
            errors.append('bonus must be non-negative, got %r.' % self.bonus)
        for name in ('buffer_capacity', 'batch_size', 'target_period',
                     'criterion_window', 'criterion_batch'):
            if getattr(self, name) < 1:
                errors.append('%s must be positive, got %r.'
                              % (name, getattr(self, name)))
        if self.learning_rate <= 0:
            errors.append('learning_rate must be positive, got %r.'
                          % self.learning_rate)
        if not 0.0 < self.tau <= 1.0:
            errors.append('tau must lie in (0, 1], got %r.' % self.tau)
        if self.alpha < 0:
            errors.append('alpha must be non-negative, got %r.' % self.alpha)
        if self.hidden_sizes is not None and (
                len(self.hidden_sizes) == 0 or min(self.hidden_sizes) < 1):
            errors.append('hidden_sizes must be a non-empty sequence of '
                          'positive widths, got %r.' % (self.hidden_sizes,))
        if errors:
            raise ConfigurationError(errors)

    def to_dict(self):
        data = dataclasses.asdict(self)
        if data['hidden_sizes'] is not None:
            data['hidden_sizes'] = list(data['hidden_sizes'])
        return data


@dataclasses.dataclass
class RunRecord:
    rewards: np.ndarray
    episode_returns: List[float]
    episode_end_steps: List[int]
    switch_steps: List[int]
    switching_cost: int
    final_version: int
    deployed_versions: np.ndarray
    losses: List[float] = dataclasses.field(default_factory=list)
    config: dict = dataclasses.field(default_factory=dict)

    @property
    def total_steps(self):
        return len(self.rewards)

    @property
    def criterion(self):
        return self.config.get('criterion')

    @property
    def seed(self):
        return self.config.get('seed')


@dataclasses.dataclass
class SwitchContext:
    '''What a switching criterion may look at when it is consulted.

    ``step`` counts completed environment steps. ``episode_reset`` is true
    when at least one episode ended since the previous update event.
    ``episode_step``, ``state`` and ``action`` describe the transition that
    was just collected.
    '''
    agent: object
    buffer: ReplayBuffer
    rng: np.random.Generator
    deployed: Optional[PolicySnapshot] = None
    step: int = 0
    episode_step: int = 0
    state: Optional[np.ndarray] = None
    action: Optional[Action] = None
    episode_reset: bool = False
    steps_since_switch: int = 0
    switch_count: int = 0


def _check_compatible(env, agent):
    errors = []
    if env.spec.state_dim != agent.state_dim:
        errors.append('Environment state dimension %d does not match the '
                      'agent input dimension %d.'
                      % (env.spec.state_dim, agent.state_dim))
    if env.spec.discrete != agent.discrete:
        errors.append('Environment action space is %s but the agent expects '
                      'a %s action space.'
                      % ('discrete' if env.spec.discrete else 'continuous',
                         'discrete' if agent.discrete else 'continuous'))
    if errors:
        raise ConfigurationError(errors)


def run_training(config, env, agent, criterion):
    config.validate()
    _check_compatible(env, agent)

    env_rng, act_rng, sample_rng, criterion_rng = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(config.seed).spawn(4)]

    buffer = ReplayBuffer(
        config.buffer_capacity, env.spec.state_dim,
        None if env.spec.discrete else env.spec.action_dim)
    context = SwitchContext(agent=agent, buffer=buffer, rng=criterion_rng)

    total_steps = config.total_steps
    rewards = np.zeros(total_steps)
    deployed_versions = np.zeros(total_steps, dtype=np.int64)
    episode_returns, episode_end_steps = [], []
    switch_steps, losses = [], []

    deployed = agent.snapshot(version=0, step=0)
    state = env.reset(env_rng)
    episode_step = 0
    episode_return = 0.0
    steps_since_switch = 0
    reset_since_event = False

    _logger.info('Starting run: environment=%s agent=%s criterion=%s '
                 'steps=%d seed=%d', config.environment, config.agent,
                 config.criterion, total_steps, config.seed)

    for k in range(total_steps):
        action = agent.act(deployed, state, act_rng)
        next_state, reward, terminal = env.step(action)
        buffer.add(Transition(state, action, reward, next_state,
                              terminal and not env.truncated, k))
        agent.observe(next_state)

        deployed_versions[k] = deployed.version
        rewards[k] = reward
        episode_return += reward
        steps_since_switch += 1

        context.deployed = deployed
        context.step = k + 1
        context.episode_step = episode_step
        context.state = state
        context.action = action
        criterion.observe(context)

        if terminal:
            episode_returns.append(episode_return)
            episode_end_steps.append(k)
            reset_since_event = True
            state = env.reset(env_rng)
            episode_step = 0
            episode_return = 0.0
        else:
            state = next_state
            episode_step += 1

        completed = k + 1
        if (completed > config.warmup_steps and
                (completed - config.warmup_steps) %
                config.update_period == 0):
            event_losses = []
            for _ in range(config.updates_per_event):
                batch = sample_recent(buffer, config.buffer_capacity,
                                      config.batch_size, sample_rng)
                try:
                    event_losses.append(agent.train_step(batch))
                except NumericalDivergenceError as err:
                    raise NumericalDivergenceError(str(err), step=k) from err
            losses.append(float(np.mean(event_losses)))

            context.episode_reset = reset_since_event
            context.steps_since_switch = steps_since_switch
            context.switch_count = len(switch_steps)
            if criterion.decide(context):
                deployed = agent.snapshot(version=deployed.version + 1,
                                          step=completed)
                switch_steps.append(k)
                steps_since_switch = 0
                context.deployed = deployed
                context.switch_count = len(switch_steps)
                criterion.on_switch(context)
            reset_since_event = False

    _logger.info('Finished run: %d episodes, %d switches',
                 len(episode_returns), len(switch_steps))

    return RunRecord(rewards=rewards,
                     episode_returns=episode_returns,
                     episode_end_steps=episode_end_steps,
                     switch_steps=switch_steps,
                     switching_cost=len(switch_steps),
                     final_version=deployed.version,
                     deployed_versions=deployed_versions,
                     losses=losses,
                     config=config.to_dict())
