# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import abc

import numpy as np

from ._core import (ConfigurationError, NumericalDivergenceError,
                    PolicySnapshot, ProtocolError)
from ._envs import DEFAULT_HIDDEN_SIZES
from ._hashing import (EXPLORATION_PROJECTION_DIM, EXPLORATION_SEED_OFFSET,
                       HashedCounter, RandomProjection, projection_seed)
from ._nn import AdamState, Mlp, adam_step

LOG_STD_BOUNDS = (-20.0, 2.0)
_SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)


class Agent(abc.ABC):
    discrete = True

    def __init__(self, env_spec):
        self.env_spec = env_spec
        self.state_dim = env_spec.state_dim

    @abc.abstractmethod
    def online_parameters(self):
        '''A copy of the parameters a snapshot would freeze.'''

    def snapshot(self, version, step):
        return PolicySnapshot(self.online_parameters(), version, step)

    def uniform_action(self, rng):
        if self.env_spec.discrete:
            return int(rng.integers(self.env_spec.n_actions))
        return rng.uniform(self.env_spec.action_low,
                           self.env_spec.action_high)

    def observe(self, next_state):
        pass

    @abc.abstractmethod
    def act(self, snapshot, state, rng):
        pass

    @abc.abstractmethod
    def train_step(self, batch):
        '''Run one gradient update and return a scalar loss.'''

    @abc.abstractmethod
    def features(self, params, states):
        '''Last hidden layer activations under the given parameters.'''


class DqnAgent(Agent):
    def __init__(self, env_spec, hidden_sizes=(64, 64), gamma=0.99,
                 bonus=0.01, learning_rate=1e-3, adam_epsilon=1.5e-4,
                 target_period=200, reward_clip=True, seed=0):
        if not env_spec.discrete:
            raise ConfigurationError('dqn_lite needs a discrete action '
                                     'space.')
        super().__init__(env_spec)
        self.n_actions = env_spec.n_actions
        self.gamma = gamma
        self.bonus = bonus
        self.target_period = target_period
        self.reward_clip = reward_clip
        rng = np.random.default_rng(seed)
        self.q_net = Mlp((self.state_dim,) + tuple(hidden_sizes) +
                         (self.n_actions,), rng=rng)
        self.target_params = self.q_net.params.copy()
        self.optimizer = AdamState.zeros(self.q_net.n_params,
                                         learning_rate=learning_rate,
                                         epsilon=adam_epsilon)
        self.counter = HashedCounter(RandomProjection.from_seed(
            self.state_dim, EXPLORATION_PROJECTION_DIM,
            projection_seed(seed, EXPLORATION_SEED_OFFSET)))
        self.update_count = 0

    def online_parameters(self):
        return self.q_net.params.copy()

    def observe(self, next_state):
        self.counter.observe(next_state)

    def act(self, snapshot, state, rng):
        if snapshot.version == 0:
            return self.uniform_action(rng)
        return dqn_select_action(self, snapshot, state)

    def greedy_actions(self, params, states):
        q, _ = self.q_net.forward(np.atleast_2d(states), params)
        return np.argmax(q, axis=1)

    def features(self, params, states):
        _, feature = self.q_net.forward(np.atleast_2d(states), params)
        return feature

    def train_step(self, batch):
        return dqn_update(self, batch)


def dqn_select_action(agent, snapshot, state):
    '''Greedy action under the snapshot; ties go to the lowest index.'''
    if snapshot.parameters.shape != (agent.q_net.n_params,):
        raise ValueError('Snapshot holds %d parameters but the Q-network '
                         'needs %d.' % (snapshot.parameters.size,
                                        agent.q_net.n_params))
    q, _ = agent.q_net.forward(state, snapshot.parameters)
    return int(np.argmax(q))


def exploration_bonus(counter, state, beta=0.01):
    n = counter.count(state)
    if n == 0:
        raise ProtocolError('Exploration bonus requested for a state that '
                            'has not been counted yet.')
    return beta / np.sqrt(n)


def dqn_td_target(reward, bonus, next_state, terminal, target_net, gamma,
                  target_params=None):
    if terminal:
        return float(reward + bonus)
    q_next, _ = target_net.forward(next_state, target_params)
    return float(reward + bonus + gamma * np.max(q_next))


def _batch_bonuses(agent, next_states):
    if agent.bonus == 0:
        return np.zeros(len(next_states))
    counts = agent.counter.counts(next_states)
    if np.any(counts == 0):
        raise ProtocolError('Exploration bonus requested for a state that '
                            'has not been counted yet.')
    return agent.bonus / np.sqrt(counts)


def dqn_update(agent, batch):
    size = len(batch)
    if size == 0:
        raise ValueError('Cannot update on an empty batch.')
    rewards = batch.rewards
    if agent.reward_clip:
        rewards = np.clip(rewards, -1.0, 1.0)
    bonuses = _batch_bonuses(agent, batch.next_states)

    q_next, _ = agent.q_net.forward(batch.next_states, agent.target_params)
    targets = rewards + bonuses + agent.gamma * np.max(q_next, axis=1) * \
        ~batch.terminals

    q, _ = agent.q_net.forward(batch.states)
    rows = np.arange(size)
    errors = q[rows, batch.actions] - targets
    loss = float(np.mean(errors ** 2))
    if not np.isfinite(loss):
        raise NumericalDivergenceError('TD loss is %r.' % loss)

    output_gradient = np.zeros_like(q)
    output_gradient[rows, batch.actions] = 2.0 * errors / size
    grads = agent.q_net.backward(batch.states, output_gradient)
    agent.q_net.params, _ = adam_step(agent.q_net.params, grads,
                                      agent.optimizer)

    agent.update_count += 1
    if agent.update_count % agent.target_period == 0:
        agent.target_params = agent.q_net.params.copy()
    return loss


class SacAgent(Agent):
    '''Soft actor-critic with a single Q network and a squashed Gaussian.

    Snapshot parameters are the actor parameters followed by the Q-network
    parameters. Features are the Q-network's last hidden layer evaluated at
    the state and the policy's mean action.
    '''
    discrete = False

    def __init__(self, env_spec, hidden_sizes=(128, 128), gamma=0.99,
                 alpha=0.2, tau=0.005, learning_rate=1e-3, adam_epsilon=1e-8,
                 seed=0, log_std_bounds=LOG_STD_BOUNDS):
        if env_spec.discrete:
            raise ConfigurationError('sac_lite needs a continuous action '
                                     'space.')
        super().__init__(env_spec)
        self.action_dim = env_spec.action_dim
        self.gamma = gamma
        self.alpha = alpha
        self.tau = tau
        self.log_std_bounds = log_std_bounds
        low = np.asarray(env_spec.action_low, dtype=np.float64)
        high = np.asarray(env_spec.action_high, dtype=np.float64)
        self.action_scale = (high - low) / 2.0
        self.action_center = (high + low) / 2.0

        init_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_seed)
        hidden = tuple(hidden_sizes)
        self.actor = Mlp((self.state_dim,) + hidden + (2 * self.action_dim,),
                         rng=rng)
        self.q_net = Mlp((self.state_dim + self.action_dim,) + hidden + (1,),
                         rng=rng)
        self.target_q_params = self.q_net.params.copy()
        self.actor_optimizer = AdamState.zeros(self.actor.n_params,
                                               learning_rate=learning_rate,
                                               epsilon=adam_epsilon)
        self.q_optimizer = AdamState.zeros(self.q_net.n_params,
                                           learning_rate=learning_rate,
                                           epsilon=adam_epsilon)
        self.rng = np.random.default_rng(noise_seed)

    def online_parameters(self):
        return np.concatenate([self.actor.params, self.q_net.params])

    def split_parameters(self, params):
        params = np.asarray(params)
        expected = self.actor.n_params + self.q_net.n_params
        if params.shape != (expected,):
            raise ValueError('Expected %d actor-critic parameters, got shape '
                             '%r.' % (expected, params.shape))
        return params[:self.actor.n_params], params[self.actor.n_params:]

    def squash(self, u):
        return self.action_center + self.action_scale * np.tanh(u)

    def _moments(self, actor_params, states):
        out, _ = self.actor.forward(states, actor_params)
        raw_log_std = out[:, self.action_dim:]
        log_std = np.clip(raw_log_std, *self.log_std_bounds)
        return out[:, :self.action_dim], log_std, raw_log_std

    def gaussian_moments(self, params, states):
        '''Pre-squash mean and log standard deviation of a snapshot.'''
        actor_params, _ = self.split_parameters(params)
        mean, log_std, _ = self._moments(actor_params,
                                         np.atleast_2d(states))
        return mean, log_std

    def _sample(self, actor_params, states, noise):
        mean, log_std, _ = self._moments(actor_params, states)
        u = mean + np.exp(log_std) * noise
        t = np.tanh(u)
        jacobian = self.action_scale * (1 - t ** 2) + _SQUASH_EPS
        log_prob = np.sum(-0.5 * noise ** 2 - log_std - _HALF_LOG_2PI -
                          np.log(jacobian), axis=1)
        return self.action_center + self.action_scale * t, log_prob

    def sample_actions(self, params, states, rng):
        actor_params, _ = self.split_parameters(params)
        states = np.atleast_2d(states)
        noise = rng.standard_normal((len(states), self.action_dim))
        return self._sample(actor_params, states, noise)

    def deterministic_actions(self, params, states):
        actor_params, _ = self.split_parameters(params)
        mean, _, _ = self._moments(actor_params, np.atleast_2d(states))
        return self.squash(mean)

    def act(self, snapshot, state, rng):
        if snapshot.version == 0:
            return self.uniform_action(rng)
        actions, _ = self.sample_actions(snapshot.parameters, state, rng)
        return actions[0]

    def features(self, params, states):
        states = np.atleast_2d(states)
        _, q_params = self.split_parameters(params)
        actions = self.deterministic_actions(params, states)
        _, feature = self.q_net.forward(np.hstack([states, actions]),
                                        q_params)
        return feature

    def q_targets(self, rewards, next_states, terminals, noise,
                  alpha=None, gamma=None):
        alpha = self.alpha if alpha is None else alpha
        gamma = self.gamma if gamma is None else gamma
        next_actions, log_prob = self._sample(self.actor.params, next_states,
                                              noise)
        q_next, _ = self.q_net.forward(np.hstack([next_states, next_actions]),
                                       self.target_q_params)
        soft_value = q_next[:, 0] - alpha * log_prob
        return rewards + gamma * soft_value * ~np.asarray(terminals)

    def actor_objective(self, actor_params, states, noise):
        '''mean(alpha * log pi(a|x) - Q(x, a)) and its actor gradient.

        Actions are reparameterized as squash(mean + std * noise) with the
        noise held fixed.
        '''
        size = len(states)
        mean, log_std, raw_log_std = self._moments(actor_params, states)
        std = np.exp(log_std)
        u = mean + std * noise
        t = np.tanh(u)
        squash_slope = self.action_scale * (1 - t ** 2)
        jacobian = squash_slope + _SQUASH_EPS
        log_prob = np.sum(-0.5 * noise ** 2 - log_std - _HALF_LOG_2PI -
                          np.log(jacobian), axis=1)
        actions = self.action_center + self.action_scale * t

        sa = np.hstack([states, actions])
        q, _ = self.q_net.forward(sa)
        _, dq_dsa = self.q_net.backward(sa, np.ones((size, 1)),
                                        input_gradient=True)
        dq_da = dq_dsa[:, self.state_dim:]
        loss = float(np.mean(self.alpha * log_prob - q[:, 0]))

        dlogdet_du = 2 * self.action_scale * t * (1 - t ** 2) / jacobian
        dloss_du = (self.alpha * dlogdet_du - dq_da * squash_slope) / size
        dloss_dlog_std = -self.alpha / size + dloss_du * std * noise
        low, high = self.log_std_bounds
        dloss_dlog_std = dloss_dlog_std * ((raw_log_std >= low) &
                                           (raw_log_std <= high))
        output_gradient = np.hstack([dloss_du, dloss_dlog_std])
        # re-run so the actor cache matches these states and parameters
        self.actor.forward(states, actor_params)
        grads = self.actor.backward(states, output_gradient)
        return loss, grads

    def train_step(self, batch):
        q_loss, actor_loss = sac_update(self, batch)
        return q_loss


def sac_q_target(reward, next_state, terminal, agent, alpha, gamma, rng,
                 deterministic=False):
    next_state = np.atleast_2d(next_state)
    if deterministic:
        noise = np.zeros((1, agent.action_dim))
    else:
        noise = rng.standard_normal((1, agent.action_dim))
    target = agent.q_targets(np.array([reward]), next_state,
                             np.array([terminal]), noise, alpha=alpha,
                             gamma=gamma)
    return float(target[0])


def sac_update(agent, batch):
    size = len(batch)
    if size == 0:
        raise ValueError('Cannot update on an empty batch.')
    actions = np.asarray(batch.actions, dtype=np.float64).reshape(
        size, agent.action_dim)

    noise = agent.rng.standard_normal((size, agent.action_dim))
    targets = agent.q_targets(batch.rewards, batch.next_states,
                              batch.terminals, noise)
    sa = np.hstack([batch.states, actions])
    q, _ = agent.q_net.forward(sa)
    errors = q[:, 0] - targets
    q_loss = float(np.mean(errors ** 2))
    if not np.isfinite(q_loss):
        raise NumericalDivergenceError('Q loss is %r.' % q_loss)
    grads = agent.q_net.backward(sa, (2.0 * errors / size)[:, None])
    agent.q_net.params, _ = adam_step(agent.q_net.params, grads,
                                      agent.q_optimizer)

    noise = agent.rng.standard_normal((size, agent.action_dim))
    actor_loss, grads = agent.actor_objective(agent.actor.params,
                                              batch.states, noise)
    if not np.isfinite(actor_loss):
        raise NumericalDivergenceError('Actor loss is %r.' % actor_loss)
    agent.actor.params, _ = adam_step(agent.actor.params, grads,
                                      agent.actor_optimizer)

    agent.target_q_params = agent.tau * agent.q_net.params + \
        (1 - agent.tau) * agent.target_q_params
    return q_loss, actor_loss


AGENTS = {'dqn_lite': DqnAgent, 'sac_lite': SacAgent}


def make_agent(config, env_spec):
    if config.agent not in AGENTS:
        raise ConfigurationError('Unknown agent %r. Valid agents are: %s.'
                                 % (config.agent, ', '.join(sorted(AGENTS))))
    hidden_sizes = config.hidden_sizes or DEFAULT_HIDDEN_SIZES.get(
        config.environment, (64, 64))
    if config.agent == 'dqn_lite':
        return DqnAgent(env_spec, hidden_sizes=hidden_sizes,
                        gamma=config.gamma, bonus=config.bonus,
                        learning_rate=config.learning_rate,
                        adam_epsilon=config.adam_epsilon,
                        target_period=config.target_period,
                        reward_clip=config.reward_clip, seed=config.seed)
    return SacAgent(env_spec, hidden_sizes=hidden_sizes, gamma=config.gamma,
                    alpha=config.alpha, tau=config.tau,
                    learning_rate=config.learning_rate,
                    adam_epsilon=config.adam_epsilon, seed=config.seed)
