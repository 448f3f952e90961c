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

from q2_lowswitch._core import ConfigurationError, ProtocolError
from q2_lowswitch._envs import (CartPoleLite, ChainMDP, EnvironmentSpec,
                                GridWorld, PendulumLite, make_environment)

UP, RIGHT, DOWN, LEFT = range(4)


class GridWorldTests(unittest.TestCase):

    def setUp(self):
        self.env = GridWorld()
        self.state = self.env.reset(np.random.default_rng(0))

    def test_reset(self):
        self.assertEqual(self.state.shape, (25,))
        self.assertEqual(self.state[0], 1.0)
        self.assertEqual(self.state.sum(), 1.0)

    def test_move_into_wall(self):
        state, reward, terminal = self.env.step(LEFT)

        npt.assert_array_equal(state, self.state)
        self.assertEqual(reward, 0.0)
        self.assertFalse(terminal)

    def test_reach_goal(self):
        for action in [RIGHT] * 4 + [DOWN] * 3:
            _, reward, terminal = self.env.step(action)
            self.assertEqual(reward, 0.0)
            self.assertFalse(terminal)

        state, reward, terminal = self.env.step(DOWN)

        self.assertEqual(reward, 1.0)
        self.assertTrue(terminal)
        self.assertFalse(self.env.truncated)
        self.assertEqual(np.argmax(state), 24)

    def test_time_limit(self):
        for _ in range(49):
            _, _, terminal = self.env.step(UP)
            self.assertFalse(terminal)

        _, reward, terminal = self.env.step(UP)

        self.assertTrue(terminal)
        self.assertTrue(self.env.truncated)
        self.assertEqual(reward, 0.0)

    def test_step_after_terminal(self):
        for _ in range(50):
            self.env.step(UP)
        with self.assertRaises(ProtocolError):
            self.env.step(UP)

    def test_step_before_reset(self):
        with self.assertRaises(ProtocolError):
            GridWorld().step(UP)

    def test_invalid_action(self):
        with self.assertRaisesRegex(ValueError, 'outside'):
            self.env.step(4)
        with self.assertRaisesRegex(ValueError, 'integer'):
            self.env.step(1.5)


class ChainMDPTests(unittest.TestCase):

    def setUp(self):
        self.env = ChainMDP(n=10)
        self.env.reset(np.random.default_rng(0))

    def test_walk_right(self):
        for _ in range(8):
            _, reward, terminal = self.env.step(1)
            self.assertEqual(reward, 0.0)
        state, reward, terminal = self.env.step(1)

        self.assertEqual(reward, 1.0)
        self.assertTrue(terminal)
        self.assertEqual(np.argmax(state), 9)

    def test_distractor(self):
        state, reward, terminal = self.env.step(0)

        self.assertEqual(reward, 0.01)
        self.assertFalse(terminal)
        self.assertEqual(np.argmax(state), 0)

    def test_time_limit(self):
        self.assertEqual(self.env.spec.max_steps, 20)
        for _ in range(20):
            _, _, terminal = self.env.step(0)

        self.assertTrue(terminal)
        self.assertTrue(self.env.truncated)


class CartPoleLiteTests(unittest.TestCase):

    def setUp(self):
        self.env = CartPoleLite()
        self.state = self.env.reset(np.random.default_rng(1))

    def test_reset_range(self):
        self.assertEqual(self.state.shape, (4,))
        self.assertTrue(np.all(np.abs(self.state) <= 0.05))

    def test_upright_step_by_hand(self):
        self.env.state = np.zeros(4)

        state, reward, terminal = self.env.step(1)

        # from rest: temp = F / M, the pole tips against the push
        temp = 10.0 / 1.1
        thetaacc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1))
        xacc = temp - 0.05 * thetaacc / 1.1
        npt.assert_allclose(state, [0.0, 0.02 * xacc, 0.0, 0.02 * thetaacc])
        self.assertEqual(reward, 1.0)
        self.assertFalse(terminal)

    def test_pole_falls(self):
        self.env.state = np.array([0.0, 0.0, 0.21, 0.0])

        _, reward, terminal = self.env.step(0)

        self.assertTrue(terminal)
        self.assertFalse(self.env.truncated)
        self.assertEqual(reward, 0.0)

    def test_invalid_action(self):
        with self.assertRaises(ValueError):
            self.env.step(2)


class PendulumLiteTests(unittest.TestCase):

    def setUp(self):
        self.env = PendulumLite()
        self.obs = self.env.reset(np.random.default_rng(2))

    def test_observation(self):
        theta, theta_dot = self.env.state
        npt.assert_allclose(self.obs,
                            [np.cos(theta), np.sin(theta), theta_dot])
        self.assertTrue(-np.pi <= theta <= np.pi)
        self.assertTrue(-1.0 <= theta_dot <= 1.0)

    def test_step_by_hand(self):
        self.env.state = np.array([np.pi / 2, 1.0])

        obs, reward, terminal = self.env.step(np.array([1.0]))

        expected_cost = (np.pi / 2) ** 2 + 0.1 + 0.001
        theta_dot = 1.0 + (15.0 + 3.0) * 0.05
        theta = np.pi / 2 + theta_dot * 0.05
        self.assertAlmostEqual(reward, -expected_cost)
        npt.assert_allclose(obs, [np.cos(theta), np.sin(theta), theta_dot])
        self.assertFalse(terminal)

    def test_speed_is_clipped(self):
        self.env.state = np.array([np.pi / 2, 7.9])

        obs, _, _ = self.env.step(np.array([2.0]))

        self.assertEqual(obs[2], 8.0)

    def test_action_bounds(self):
        with self.assertRaisesRegex(ValueError, 'bounds'):
            self.env.step(np.array([3.0]))
        with self.assertRaisesRegex(ValueError, 'dimension'):
            self.env.step(np.array([0.0, 0.0]))

    def test_time_limit(self):
        for _ in range(199):
            _, _, terminal = self.env.step(np.array([0.0]))
            self.assertFalse(terminal)
        _, _, terminal = self.env.step(np.array([0.0]))

        self.assertTrue(terminal)
        self.assertTrue(self.env.truncated)

    def test_reward_range(self):
        low, high = self.env.spec.reward_range
        for _ in range(50):
            _, reward, _ = self.env.step(np.array([-2.0]))
            self.assertTrue(low <= reward <= high)


class RegistryTests(unittest.TestCase):

    def test_known_ids(self):
        self.assertEqual(make_environment('gridworld5').spec.state_dim, 25)
        self.assertEqual(make_environment('chain10').spec.n_actions, 2)
        self.assertTrue(make_environment('cartpole_lite').spec.discrete)
        spec = make_environment('pendulum_lite').spec
        self.assertFalse(spec.discrete)
        self.assertEqual(spec.action_dim, 1)

    def test_unknown_id(self):
        with self.assertRaisesRegex(ConfigurationError, 'gridworld5'):
            make_environment('atari')

    def test_spec_validation(self):
        with self.assertRaisesRegex(ValueError, 'bounds'):
            EnvironmentSpec(state_dim=1, max_steps=1, reward_range=(0, 1))
        with self.assertRaisesRegex(ValueError, 'lower bound'):
            EnvironmentSpec(state_dim=1, max_steps=1, reward_range=(0, 1),
                            action_low=(1.0,), action_high=(1.0,))


def _rollout(environment_id, seed, actions):
    env = make_environment(environment_id)
    rng = np.random.default_rng(seed)
    trajectory = [env.reset(rng)]
    for action in actions:
        state, reward, terminal = env.step(action)
        trajectory.append(np.append(state, [reward, terminal]))
        if terminal:
            trajectory.append(env.reset(rng))
    return trajectory


class DeterminismTests(unittest.TestCase):

    def test_same_seed_same_trajectory(self):
        for environment_id in ('gridworld5', 'chain10', 'cartpole_lite',
                               'pendulum_lite'):
            spec = make_environment(environment_id).spec
            action_rng = np.random.default_rng(11)
            if spec.discrete:
                actions = [int(a) for a in
                           action_rng.integers(spec.n_actions, size=120)]
            else:
                actions = list(action_rng.uniform(
                    spec.action_low, spec.action_high, size=(120, 1)))

            first = _rollout(environment_id, 4, actions)
            second = _rollout(environment_id, 4, actions)

            self.assertEqual(len(first), len(second), environment_id)
            for a, b in zip(first, second):
                npt.assert_array_equal(a, b)

    def test_pendulum_reset_twice(self):
        env = PendulumLite()

        first = env.reset(np.random.default_rng(9))
        second = env.reset(np.random.default_rng(9))

        npt.assert_array_equal(first, second)


if __name__ == '__main__':
    unittest.main()
