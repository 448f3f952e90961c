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

from q2_lowswitch._agents import DqnAgent, make_agent
from q2_lowswitch._core import (ConfigurationError, NumericalDivergenceError,
                                PolicySnapshot, ReplayBuffer, RunConfig,
                                Transition, run_training, sample_recent)
from q2_lowswitch._criteria import make_criterion
from q2_lowswitch._envs import make_environment
from q2_lowswitch._metrics import switching_cost_from_versions


def _transition(i, state_dim=2):
    return Transition(state=np.full(state_dim, float(i)), action=i % 2,
                      reward=float(i), next_state=np.full(state_dim, i + 1.0),
                      terminal=False, step_index=i)


def _fill(buffer, n):
    for i in range(n):
        buffer.add(_transition(i, buffer.state_dim))


class ReplayBufferTests(unittest.TestCase):

    def test_fifo_eviction(self):
        buffer = ReplayBuffer(3, state_dim=2)
        _fill(buffer, 5)

        self.assertEqual(len(buffer), 3)
        self.assertEqual(buffer.insert_count, 5)
        self.assertEqual([t.step_index for t in buffer.records], [2, 3, 4])

    def test_below_capacity_keeps_everything(self):
        buffer = ReplayBuffer(10, state_dim=2)
        _fill(buffer, 4)

        self.assertEqual([t.step_index for t in buffer.records], [0, 1, 2, 3])
        self.assertEqual(buffer.records[1].action, 1)

    def test_invalid_capacity(self):
        with self.assertRaisesRegex(ValueError, 'capacity'):
            ReplayBuffer(0, state_dim=2)

    def test_continuous_actions(self):
        buffer = ReplayBuffer(4, state_dim=1, action_dim=2)
        buffer.add(Transition(np.zeros(1), np.array([0.5, -0.5]), 1.0,
                              np.ones(1), True, 0))

        npt.assert_array_equal(buffer.records[0].action, [0.5, -0.5])
        self.assertTrue(buffer.records[0].terminal)


class SampleRecentTests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_window_of_one_returns_newest(self):
        buffer = ReplayBuffer(10, state_dim=2)
        _fill(buffer, 7)

        batch = sample_recent(buffer, window=1, count=5, rng=self.rng)

        npt.assert_array_equal(batch.step_indices, [6] * 5)
        self.assertEqual(len(batch), 5)

    def test_window_restricts_ages(self):
        buffer = ReplayBuffer(100, state_dim=2)
        _fill(buffer, 60)

        batch = sample_recent(buffer, window=10, count=500, rng=self.rng)

        self.assertTrue(np.all(batch.step_indices >= 50))
        self.assertTrue(np.all(batch.step_indices <= 59))

    def test_window_larger_than_buffer(self):
        buffer = ReplayBuffer(100, state_dim=2)
        _fill(buffer, 50)

        batch = sample_recent(buffer, window=100, count=1000, rng=self.rng)

        self.assertTrue(np.all(batch.step_indices < 50))
        self.assertEqual(len(np.unique(batch.step_indices)), 50)

    def test_wraparound(self):
        buffer = ReplayBuffer(5, state_dim=2)
        _fill(buffer, 12)

        batch = sample_recent(buffer, window=3, count=200, rng=self.rng)

        self.assertEqual(set(batch.step_indices), {9, 10, 11})
        npt.assert_array_equal(batch.states[:, 0], batch.step_indices)

    def test_zero_count(self):
        buffer = ReplayBuffer(5, state_dim=2)
        _fill(buffer, 2)
        with self.assertRaisesRegex(ValueError, 'count'):
            sample_recent(buffer, window=5, count=0, rng=self.rng)

    def test_empty_buffer(self):
        with self.assertRaisesRegex(ValueError, 'empty'):
            sample_recent(ReplayBuffer(5, state_dim=2), window=5, count=1,
                          rng=self.rng)


class PolicySnapshotTests(unittest.TestCase):

    def test_parameters_are_frozen_copies(self):
        source = np.arange(4.0)
        snapshot = PolicySnapshot(source, version=1, created_at_step=10)
        source[0] = 100.0

        self.assertEqual(snapshot.parameters[0], 0.0)
        with self.assertRaises(ValueError):
            snapshot.parameters[1] = 5.0


class RunConfigTests(unittest.TestCase):

    def test_defaults_validate(self):
        RunConfig().validate()
        RunConfig.for_agent('sac_lite', environment='pendulum_lite').validate()

    def test_agent_defaults(self):
        config = RunConfig.for_agent('sac_lite', batch_size=64)

        self.assertEqual(config.update_period, 50)
        self.assertEqual(config.updates_per_event, 50)
        self.assertEqual(config.batch_size, 64)

    def test_collects_all_errors(self):
        config = RunConfig(total_steps=10, warmup_steps=20, gamma=1.5,
                           update_period=0)

        with self.assertRaises(ConfigurationError) as cm:
            config.validate()

        self.assertEqual(len(cm.exception.errors), 3)
        self.assertIn('gamma', str(cm.exception))

    def test_to_dict(self):
        data = RunConfig(hidden_sizes=(8, 8)).to_dict()

        self.assertEqual(data['hidden_sizes'], [8, 8])
        self.assertEqual(data['criterion'], 'none')


def _config(criterion, **kwargs):
    values = dict(environment='chain10', total_steps=200, warmup_steps=50,
                  batch_size=8, hidden_sizes=(8,), criterion=criterion,
                  seed=3)
    values.update(kwargs)
    return RunConfig(**values)


def _train(config, agent=None):
    env = make_environment(config.environment)
    if agent is None:
        agent = make_agent(config, env.spec)
    criterion = make_criterion(config.criterion, env.spec, seed=config.seed)
    return run_training(config, env, agent, criterion)


class RunTrainingTests(unittest.TestCase):

    def test_never_switches(self):
        record = _train(_config('never'))

        self.assertEqual(record.switching_cost, 0)
        self.assertEqual(record.final_version, 0)
        npt.assert_array_equal(record.deployed_versions, 0)

    def test_none_switches_at_every_update_event(self):
        record = _train(_config('none', update_period=3))

        self.assertEqual(record.switching_cost, (200 - 50) // 3)
        self.assertEqual(record.switch_steps[0], 52)
        self.assertEqual(len(record.losses), record.switching_cost)

    def test_fix_switch_steps(self):
        record = _train(_config('fix:n=10'))

        self.assertEqual(record.switch_steps, list(range(59, 200, 10)))
        self.assertEqual(record.switching_cost, 15)
        self.assertEqual(record.final_version, 15)

    def test_deployed_policy_changes_only_at_switches(self):
        record = _train(_config('fix:n=10'))
        versions = record.deployed_versions
        inside = [k for k in record.switch_steps
                  if k < record.total_steps - 1]

        npt.assert_array_equal(np.flatnonzero(np.diff(versions)), inside)
        self.assertEqual(switching_cost_from_versions(versions), len(inside))
        self.assertTrue(np.all(np.diff(versions) >= 0))

    def test_deterministic(self):
        first = _train(_config('feature:sigma=0.99'))
        second = _train(_config('feature:sigma=0.99'))

        npt.assert_array_equal(first.rewards, second.rewards)
        self.assertEqual(first.switch_steps, second.switch_steps)
        self.assertEqual(first.losses, second.losses)

    def test_episode_bookkeeping(self):
        record = _train(_config('never'))

        self.assertEqual(len(record.episode_returns),
                         len(record.episode_end_steps))
        self.assertGreater(len(record.episode_returns), 0)
        ends = [-1] + record.episode_end_steps
        for ret, start, end in zip(record.episode_returns, ends, ends[1:]):
            self.assertAlmostEqual(ret,
                                   record.rewards[start + 1:end + 1].sum())
        self.assertEqual(record.config['criterion'], 'never')

    def test_divergence_names_the_step(self):
        config = _config('none')
        env = make_environment(config.environment)

        class DivergingAgent(DqnAgent):
            def train_step(self, batch):
                raise NumericalDivergenceError('loss is nan')

        agent = DivergingAgent(env.spec, hidden_sizes=(4,))
        with self.assertRaises(NumericalDivergenceError) as cm:
            _train(config, agent=agent)

        self.assertEqual(cm.exception.step, 50)
        self.assertIn('step 50', str(cm.exception))

    def test_incompatible_agent(self):
        config = _config('none')
        agent = make_agent(config, make_environment('gridworld5').spec)

        with self.assertRaisesRegex(ConfigurationError, 'dimension'):
            _train(config, agent=agent)

    def test_invalid_config(self):
        with self.assertRaises(ConfigurationError):
            _train(_config('none', total_steps=40))


if __name__ == '__main__':
    unittest.main()
