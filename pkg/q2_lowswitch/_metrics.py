# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import collections
import dataclasses
import itertools
import logging

import numpy as np
import pandas as pd
from scipy.special import betainc

from ._core import ConfigurationError, DegenerateSampleError

_logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ['criterion', 'seed_count', 'reward_mean', 'reward_std',
                   'cost_mean', 'cost_std', 'rsi']
REPORT_COLUMNS = SUMMARY_COLUMNS + ['rsi_nolog']
SWEEP_COLUMNS = ['criterion', 'sigma', 'rsi', 'rsi_nolog']
PAIRWISE_COLUMNS = ['metric', 'criterion_a', 'criterion_b', 't', 'df', 'p']
SWEEP_SIGMAS = tuple(np.round(np.arange(0.0, 1.0, 0.1), 1))

WelchResult = collections.namedtuple('WelchResult', ['t', 'df', 'p'])


@dataclasses.dataclass(frozen=True)
class RsiInput:
    baseline_reward: float
    baseline_cost: float
    reward: float
    cost: float
    sigma: float = 0.2

    def __post_init__(self):
        if self.baseline_cost < 1 or self.cost < 1:
            raise ValueError('Switching costs must be at least 1, got %r and '
                             '%r.' % (self.baseline_cost, self.cost))
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError('sigma must lie in [0, 1), got %r.' % self.sigma)


def rsi(inputs, log=True):
    '''Reduced switching cost, gated on keeping enough of the reward.

    Zero unless the reward beats (1 - sign(R) sigma) R of the baseline;
    otherwise ln max(C_baseline / C, 1), or the bare ratio when ``log`` is
    false.
    '''
    baseline = inputs.baseline_reward
    threshold = (1 - np.sign(baseline) * inputs.sigma) * baseline
    if not inputs.reward > threshold:
        return 0.0
    ratio = max(inputs.baseline_cost / inputs.cost, 1.0)
    return float(np.log(ratio)) if log else float(ratio)


def rsi_sweep(baseline_reward, baseline_cost, reward, cost,
              sigmas=SWEEP_SIGMAS, log=True):
    return [rsi(RsiInput(baseline_reward, baseline_cost, reward, cost, s),
                log=log) for s in sigmas]


def switching_cost(record):
    return len(record.switch_steps)


def switching_cost_from_versions(versions):
    return int(np.count_nonzero(np.diff(np.asarray(versions))))


def final_reward(record, fraction=0.1):
    '''Mean return of episodes that end in the last ``fraction`` of steps.'''
    cutoff = record.total_steps - int(np.ceil(fraction * record.total_steps))
    returns = [r for r, end in zip(record.episode_returns,
                                   record.episode_end_steps) if end >= cutoff]
    if returns:
        return float(np.mean(returns))
    if record.episode_returns:
        return float(record.episode_returns[-1])
    _logger.warning('Run with criterion %r and seed %r completed no '
                    'episode; its final reward is 0.', record.criterion,
                    record.seed)
    return 0.0


def student_t_two_sided_p(t, df):
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def welch_t_test(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateSampleError('Welch t-test needs at least two values '
                                    'per sample, got %d and %d.'
                                    % (len(a), len(b)))
    var_a = np.var(a, ddof=1) / len(a)
    var_b = np.var(b, ddof=1) / len(b)
    if var_a == 0 and var_b == 0:
        raise DegenerateSampleError('Both samples have zero variance.')
    t = (np.mean(a) - np.mean(b)) / np.sqrt(var_a + var_b)
    df = (var_a + var_b) ** 2 / (var_a ** 2 / (len(a) - 1) +
                                 var_b ** 2 / (len(b) - 1))
    return WelchResult(float(t), float(df), student_t_two_sided_p(t, df))


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


@dataclasses.dataclass
class MetricsReport:
    '''Per-criterion summary, pairwise reward tests and the RSI sweep.

    ``rsi`` is the log variant, ``rsi_nolog`` the bare cost ratio.
    '''
    summary: pd.DataFrame
    pairwise: pd.DataFrame
    sweep: pd.DataFrame
    baseline: str = 'none'
    sigma: float = 0.2

    def summary_table(self):
        return self.summary[SUMMARY_COLUMNS]

    def to_dict(self):
        return {
            'baseline': self.baseline,
            'sigma_rsi': self.sigma,
            'summary': _records(self.summary),
            'pairwise': _records(self.pairwise),
            'sweep': _records(self.sweep),
        }

    @classmethod
    def from_dict(cls, data):
        summary = pd.DataFrame(data['summary'], columns=REPORT_COLUMNS)
        summary = summary.astype({c: float for c in REPORT_COLUMNS[2:]})
        return cls(summary=summary,
                   pairwise=pd.DataFrame(data.get('pairwise', []),
                                         columns=PAIRWISE_COLUMNS),
                   sweep=pd.DataFrame(data.get('sweep', []),
                                      columns=SWEEP_COLUMNS),
                   baseline=data['baseline'], sigma=data['sigma_rsi'])


def _records(df):
    # NaN is written as null
    return [{key: (None if isinstance(value, float) and np.isnan(value)
                   else value) for key, value in row.items()}
            for row in df.to_dict(orient='records')]


def aggregate(records, baseline='none', sigma=0.2, rsi_enabled=True):
    '''Summarize run records grouped by criterion.

    ``records`` maps a criterion string to its runs, one per seed.
    '''
    if not records:
        raise ValueError('No run records to aggregate.')
    if rsi_enabled and baseline not in records:
        raise ConfigurationError(
            'RSI needs baseline criterion %r, but only %s were run.'
            % (baseline, ', '.join(sorted(records))))

    rewards, costs = {}, {}
    for criterion in sorted(records):
        rewards[criterion] = [final_reward(r) for r in records[criterion]]
        costs[criterion] = [switching_cost(r) for r in records[criterion]]

    rows, sweep_rows = [], []
    for criterion in sorted(records):
        row = {'criterion': criterion,
               'seed_count': len(records[criterion]),
               'reward_mean': float(np.mean(rewards[criterion])),
               'reward_std': _std(rewards[criterion]),
               'cost_mean': float(np.mean(costs[criterion])),
               'cost_std': _std(costs[criterion]),
               'rsi': np.nan,
               'rsi_nolog': np.nan}
        if rsi_enabled:
            args = (float(np.mean(rewards[baseline])),
                    max(float(np.mean(costs[baseline])), 1.0),
                    row['reward_mean'], max(row['cost_mean'], 1.0))
            row['rsi'] = rsi(RsiInput(*args, sigma))
            row['rsi_nolog'] = rsi(RsiInput(*args, sigma), log=False)
            sweep_rows.extend(
                {'criterion': criterion, 'sigma': float(s), 'rsi': value,
                 'rsi_nolog': bare}
                for s, value, bare in zip(SWEEP_SIGMAS,
                                          rsi_sweep(*args),
                                          rsi_sweep(*args, log=False)))
        rows.append(row)

    pairwise_rows = []
    for metric, samples in (('cost', costs), ('reward', rewards)):
        for a, b in itertools.combinations(sorted(records), 2):
            try:
                result = welch_t_test(samples[a], samples[b])
            except DegenerateSampleError as err:
                _logger.info('No %s t-test for %s vs %s: %s', metric, a, b,
                             err)
                result = WelchResult(np.nan, np.nan, np.nan)
            pairwise_rows.append({'metric': metric, 'criterion_a': a,
                                  'criterion_b': b, 't': result.t,
                                  'df': result.df, 'p': result.p})

    return MetricsReport(
        summary=pd.DataFrame(rows, columns=REPORT_COLUMNS),
        pairwise=pd.DataFrame(pairwise_rows, columns=PAIRWISE_COLUMNS),
        sweep=pd.DataFrame(sweep_rows, columns=SWEEP_COLUMNS),
        baseline=baseline, sigma=sigma)
