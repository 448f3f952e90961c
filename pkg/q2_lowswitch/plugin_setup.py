# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import importlib

from qiime2.plugin import (Bool, Choices, Float, Int, List, Range, Str,
                           Citations, Plugin)

import q2_lowswitch
import q2_lowswitch._experiment
import q2_lowswitch._summarize
from q2_lowswitch._examples import train_chain
from q2_lowswitch._agents import AGENTS
from q2_lowswitch._core import _run_defaults
from q2_lowswitch._envs import ENVIRONMENTS
from q2_lowswitch._type import SwitchingRun, SwitchingMetrics
from q2_lowswitch._format import (RunRecordFmt, RunRecordDirFmt,
                                  MetricsReportFmt, MetricsReportDirFmt)

citations = Citations.load('citations.bib', package='q2_lowswitch')
plugin = Plugin(
    name='lowswitch',
    version=q2_lowswitch.__version__,
    website='https://github.com/q2-lowswitch/q2-lowswitch',
    package='q2_lowswitch',
    user_support_text=None,
    short_description='Plugin for deployment-efficient reinforcement '
                      'learning.',
    description=('This plugin trains small value-based and actor-critic '
                 'agents while a switching criterion decides when the '
                 'deployed policy is replaced, and reports the reward and '
                 'switching cost each criterion achieves.'),
    citations=[citations['xu2021benchmark'], citations['mnih2015human'],
               citations['haarnoja2018soft']]
)

plugin.register_formats(RunRecordFmt, RunRecordDirFmt,
                        MetricsReportFmt, MetricsReportDirFmt)

plugin.register_semantic_types(SwitchingRun, SwitchingMetrics)
plugin.register_semantic_type_to_format(
    SwitchingRun,
    artifact_format=RunRecordDirFmt)
plugin.register_semantic_type_to_format(
    SwitchingMetrics,
    artifact_format=MetricsReportDirFmt)

plugin.methods.register_function(
    function=q2_lowswitch._experiment.train,
    inputs={},
    parameters={
        'environment': Str % Choices(sorted(ENVIRONMENTS)),
        'agent': Str % Choices(sorted(AGENTS)),
        'criterion': Str,
        'total_steps': Int % Range(1, None),
        'seed': Int % Range(0, None),
        'warmup_steps': Int % Range(0, None),
        'update_period': Int % Range(1, None),
        'updates_per_event': Int % Range(1, None),
        'batch_size': Int % Range(1, None),
        'buffer_capacity': Int % Range(1, None),
        'gamma': Float % Range(0, 1, inclusive_start=True,
                               inclusive_end=False),
        'learning_rate': Float % Range(0, None, inclusive_start=False),
        'bonus': Float % Range(0, None),
    },
    outputs=[
        ('run', SwitchingRun),
    ],
    parameter_descriptions={
        'environment': 'The environment to train in.',
        'agent': ('The learner. dqn_lite needs a discrete action space, '
                  'sac_lite a continuous one.'),
        'criterion': ('The switching criterion, e.g. "none", "fix:n=1000", '
                      '"feature:sigma=0.97" or "info:lambda=1.0,mode=det".'),
        'total_steps': 'The number of environment steps to train for.',
        'seed': 'The seed every random stream of the run derives from.',
        'warmup_steps': ('Steps collected by the uniform-random warmup '
                         'policy before the first update. Defaults to %d '
                         'for dqn_lite and to 2000 for sac_lite.'
                         % _run_defaults['warmup_steps']),
        'update_period': 'Environment steps between update events.',
        'updates_per_event': 'Gradient steps run at each update event.',
        'batch_size': 'Transitions sampled for each gradient step.',
        'buffer_capacity': 'The replay buffer capacity.',
        'gamma': 'The discount factor.',
        'learning_rate': 'The Adam learning rate.',
        'bonus': ('The coefficient of the count-based exploration bonus '
                  'added to the rewards of dqn_lite.'),
    },
    output_descriptions={
        'run': ('Per-step rewards, episode returns and the steps at which '
                'the deployed policy was replaced.'),
    },
    name='Train an agent under a switching criterion.',
    description=('Train one agent in one environment for a fixed number of '
                 'steps. Data is always collected by the deployed policy; '
                 'the switching criterion decides at every update event '
                 'whether the online policy replaces it.'),
    examples={'train_chain': train_chain}
)

plugin.methods.register_function(
    function=q2_lowswitch._experiment.aggregate_runs,
    inputs={
        'runs': List[SwitchingRun],
    },
    parameters={
        'baseline': Str,
        'sigma_rsi': Float % Range(0, 1, inclusive_start=True,
                                   inclusive_end=False),
    },
    outputs=[
        ('metrics', SwitchingMetrics),
    ],
    input_descriptions={
        'runs': ('Training runs, grouped by the criterion recorded in each '
                 'run.'),
    },
    parameter_descriptions={
        'baseline': ('The criterion RSI is measured against. RSI is left '
                     'empty when no run used it.'),
        'sigma_rsi': 'The tolerated relative reward loss for RSI.',
    },
    output_descriptions={
        'metrics': ('Final reward and switching cost per criterion, RSI, '
                    'and pairwise Welch t-tests.'),
    },
    name='Aggregate training runs.',
    description=('Summarize final reward and switching cost per criterion '
                 'and compare criteria against a baseline.')
)

plugin.visualizers.register_function(
    function=q2_lowswitch._summarize.summarize,
    inputs={
        'metrics': SwitchingMetrics,
    },
    parameters={
        'show_sweep': Bool,
    },
    input_descriptions={
        'metrics': 'Aggregated switching metrics.',
    },
    parameter_descriptions={
        'show_sweep': 'Include the RSI table over a range of tolerances.',
    },
    name='Summarize switching metrics.',
    description='Tabulate reward, switching cost, RSI and t-tests.',
)

importlib.import_module('q2_lowswitch._transformer')
