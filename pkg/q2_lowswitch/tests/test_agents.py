# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import unittest

import numpy as np
import numpy.testing as npt

from q2_lowswitch._agents import (DqnAgent, SacAgent, dqn_select_action,
                                  dqn_td_target, dqn_update,
                                  exploration_bonus, make_agent,
                                  sac_q_target, sac_update)
from q2_lowswitch._core import (ConfigurationError, PolicySnapshot,
                                ProtocolError, RunConfig, TransitionBatch)
from q2_lowswitch._envs import make_environment
from q2_lowswitch._hashing import HashedCounter, RandomProjection
from q2_lowswitch._nn import Mlp, numerical_gradient, relative_error


def _batch(states, actions, rewards, next_states, terminals):
    return TransitionBatch(np.asarray(states, dtype=np.float64),
                           np.asarray(actions),
                           np.asarray(rewards, dtype=np.float64),
                           np.asarray(next_states, dtype=np.float64),
                           np.asarray(terminals, dtype=bool),
                           np.arange(len(rewards)))


class DqnTargetTests(unittest.TestCase):

    def setUp(self):
        # zero weights: Q is the bias vector whatever the input
        self.net = Mlp([2, 2], params=[0, 0, 0, 0, 2.0, 1.0])

    def test_terminal(self):
        target = dqn_td_target(1.0, 0.5, np.zeros(2), True, self.net, 0.9)
        self.assertEqual(target, 1.5)

    def test_bootstrap(self):
        target = dqn_td_target(0.0, 0.0, np.ones(2), False, self.net, 0.9)
        self.assertAlmostEqual(target, 1.8)

    def test_explicit_target_parameters(self):
        target = dqn_td_target(0.5, 0.0, np.ones(2), False, self.net, 0.5,
                               target_params=[0, 0, 0, 0, -1.0, 4.0])
        self.assertAlmostEqual(target, 2.5)

    def test_bonus_and_discount(self):
        target = dqn_td_target(0.0, 0.01, np.ones(2), False, self.net, 0.99)
        self.assertAlmostEqual(target, 1.99)


class ExplorationBonusTests(unittest.TestCase):

    def setUp(self):
        self.counter = HashedCounter(RandomProjection(np.eye(2)))

    def test_bonus(self):
        for _ in range(4):
            self.counter.observe([1.0, 1.0])

        self.assertAlmostEqual(exploration_bonus(self.counter, [1.0, 1.0]),
                               0.005)
        self.assertAlmostEqual(
            exploration_bonus(self.counter, [1.0, 1.0], beta=1.0), 0.5)

    def test_uncounted_state(self):
        with self.assertRaises(ProtocolError):
            exploration_bonus(self.counter, [-1.0, 1.0])


class DqnAgentTests(unittest.TestCase):

    def setUp(self):
        self.spec = make_environment('chain10').spec
        self.agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.0,
                              learning_rate=1e-2, seed=1)
        self.rng = np.random.default_rng(0)

    def test_ties_go_to_lowest_action(self):
        snapshot = PolicySnapshot(np.zeros(self.agent.q_net.n_params), 1, 0)

        action = dqn_select_action(self.agent, snapshot, np.eye(10)[3])

        self.assertEqual(action, 0)

    def test_version_zero_is_uniform(self):
        snapshot = self.agent.snapshot(0, 0)
        actions = {self.agent.act(snapshot, np.eye(10)[0], self.rng)
                   for _ in range(50)}
        self.assertEqual(actions, {0, 1})

    def test_snapshot_size_mismatch(self):
        with self.assertRaisesRegex(ValueError, 'parameters'):
            dqn_select_action(self.agent, PolicySnapshot(np.zeros(3), 1, 0),
                              np.eye(10)[0])

    def test_loss_decreases_on_terminal_targets(self):
        states = np.eye(10)[:4]
        batch = _batch(states, [0, 1, 0, 1], [1.0, 0.0, 0.5, -0.5], states,
                       [True] * 4)

        losses = [dqn_update(self.agent, batch) for _ in range(300)]

        self.assertLess(losses[-1], 0.1 * losses[0])

    def test_regresses_to_reward_without_discount(self):
        agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.0, gamma=0.0,
                         learning_rate=1e-3, seed=3)
        batch = _batch([np.eye(10)[2]], [1], [0.7], [np.eye(10)[3]], [False])

        for _ in range(3000):
            dqn_update(agent, batch)

        q, _ = agent.q_net.forward(np.eye(10)[2])
        self.assertAlmostEqual(q[1], 0.7, delta=1e-3)

    def test_reward_clipping(self):
        agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.0, seed=1)
        agent.q_net.params = np.zeros(agent.q_net.n_params)
        batch = _batch([np.eye(10)[0]], [0], [5.0], [np.eye(10)[1]], [True])

        self.assertEqual(dqn_update(agent, batch), 1.0)

        agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.0, seed=1,
                         reward_clip=False)
        agent.q_net.params = np.zeros(agent.q_net.n_params)
        self.assertEqual(dqn_update(agent, batch), 25.0)

    def test_target_sync(self):
        agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.0,
                         target_period=3, seed=1)
        initial = agent.target_params.copy()
        batch = _batch([np.eye(10)[0]], [1], [1.0], [np.eye(10)[1]], [False])

        dqn_update(agent, batch)
        dqn_update(agent, batch)
        npt.assert_array_equal(agent.target_params, initial)

        dqn_update(agent, batch)
        npt.assert_array_equal(agent.target_params, agent.q_net.params)
        self.assertEqual(agent.update_count, 3)

    def test_bonus_needs_counted_states(self):
        agent = DqnAgent(self.spec, hidden_sizes=(8,), bonus=0.01, seed=1)
        batch = _batch([np.eye(10)[0]], [1], [0.0], [np.eye(10)[1]], [False])

        with self.assertRaises(ProtocolError):
            dqn_update(agent, batch)

        agent.observe(np.eye(10)[1])
        self.assertTrue(np.isfinite(dqn_update(agent, batch)))

    def test_features(self):
        features = self.agent.features(self.agent.online_parameters(),
                                       np.eye(10)[:3])
        self.assertEqual(features.shape, (3, 8))
        self.assertTrue(np.all(features >= 0))


class SacAgentTests(unittest.TestCase):

    def setUp(self):
        self.spec = make_environment('pendulum_lite').spec
        self.agent = SacAgent(self.spec, hidden_sizes=(8,), seed=0)
        self.rng = np.random.default_rng(5)
        self.states = self.rng.uniform(-1, 1, size=(6, 3))

    def test_actor_gradient_vanishes_without_action_signal(self):
        params = self.agent.q_net.params.copy()
        # zero the weight row that reads the action input
        params[3 * 8:4 * 8] = 0.0
        self.agent.q_net.params = params
        self.agent.alpha = 0.0
        noise = self.rng.standard_normal((6, 1))

        _, grads = self.agent.actor_objective(self.agent.actor.params,
                                              self.states, noise)

        npt.assert_allclose(grads, 0.0, atol=1e-12)

    def test_actor_gradient_check(self):
        noise = self.rng.standard_normal((6, 1))
        actor_params = self.agent.actor.params.copy()

        _, analytic = self.agent.actor_objective(actor_params, self.states,
                                                 noise)
        numeric = numerical_gradient(
            lambda p: self.agent.actor_objective(p, self.states, noise)[0],
            actor_params)

        self.assertLess(relative_error(analytic, numeric), 1e-4)

    def test_deterministic_q_target(self):
        next_state = self.states[0]
        params = self.agent.online_parameters()
        mean, log_std = self.agent.gaussian_moments(params, next_state)
        action = self.agent.squash(mean)
        log_prob = np.sum(-log_std - 0.5 * np.log(2 * np.pi) -
                          np.log(self.agent.action_scale *
                                 (1 - np.tanh(mean) ** 2) + 1e-6))
        q, _ = self.agent.q_net.forward(np.hstack([next_state, action[0]]),
                                        self.agent.target_q_params)
        expected = 0.5 + 0.9 * (q[0] - 0.1 * log_prob)

        target = sac_q_target(0.5, next_state, False, self.agent, 0.1, 0.9,
                              self.rng, deterministic=True)

        self.assertAlmostEqual(target, expected)
        self.assertEqual(sac_q_target(0.5, next_state, True, self.agent, 0.1,
                                      0.9, self.rng), 0.5)

    def test_saturated_log_prob_is_finite(self):
        actor_params = np.zeros(self.agent.actor.n_params)
        actor_params[-2] = 50.0
        params = np.concatenate([actor_params, self.agent.q_net.params])

        actions, log_prob = self.agent.sample_actions(params, self.states,
                                                      self.rng)

        self.assertTrue(np.all(np.isfinite(log_prob)))
        self.assertTrue(np.all(actions <= 2.0))

    def test_actions_within_bounds(self):
        snapshot = self.agent.snapshot(1, 0)
        for state in self.states:
            action = self.agent.act(snapshot, state, self.rng)
            self.assertEqual(action.shape, (1,))
            self.assertTrue(-2.0 <= action[0] <= 2.0)

    def test_update_moves_target_by_tau(self):
        batch = _batch(self.states, self.rng.uniform(-2, 2, size=(6, 1)),
                       self.rng.uniform(-1, 0, size=6),
                       self.rng.uniform(-1, 1, size=(6, 3)), [False] * 6)
        old_target = self.agent.target_q_params.copy()

        q_loss, actor_loss = sac_update(self.agent, batch)

        npt.assert_allclose(self.agent.target_q_params,
                            0.005 * self.agent.q_net.params +
                            0.995 * old_target)
        self.assertTrue(np.isfinite(q_loss))
        self.assertTrue(np.isfinite(actor_loss))

    def test_features(self):
        features = self.agent.features(self.agent.online_parameters(),
                                       self.states)
        self.assertEqual(features.shape, (6, 8))


class MakeAgentTests(unittest.TestCase):

    def test_dqn_on_continuous_actions(self):
        config = RunConfig(agent='dqn_lite', environment='pendulum_lite')
        with self.assertRaisesRegex(ConfigurationError, 'discrete'):
            make_agent(config, make_environment('pendulum_lite').spec)

    def test_sac_on_discrete_actions(self):
        config = RunConfig.for_agent('sac_lite', environment='chain10')
        with self.assertRaisesRegex(ConfigurationError, 'continuous'):
            make_agent(config, make_environment('chain10').spec)

    def test_default_hidden_sizes(self):
        config = RunConfig(environment='chain10')
        agent = make_agent(config, make_environment('chain10').spec)
        self.assertEqual(agent.q_net.layer_sizes, (10, 64, 64, 2))

    def test_default_hidden_sizes_for_control_tasks(self):
        config = RunConfig(environment='cartpole_lite')
        agent = make_agent(config, make_environment('cartpole_lite').spec)
        self.assertEqual(agent.q_net.layer_sizes, (4, 128, 128, 2))

        config = RunConfig.for_agent('sac_lite', environment='pendulum_lite')
        agent = make_agent(config, make_environment('pendulum_lite').spec)
        self.assertEqual(agent.q_net.layer_sizes, (4, 128, 128, 1))
        self.assertEqual(agent.actor.layer_sizes, (3, 128, 128, 2))


if __name__ == '__main__':
    unittest.main()
