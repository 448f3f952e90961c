# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import json
import platform

import numpy as np

from . import __version__
from ._core import RunRecord
from ._metrics import MetricsReport

RECORD_KINDS = ('config', 'versions', 'episode', 'switch', 'rewards',
                'losses', 'summary')


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def record_lines(record):
    yield {'kind': 'config', 'config': record.config}
    yield {'kind': 'versions', 'q2-lowswitch': __version__,
           'numpy': np.__version__, 'python': platform.python_version()}
    for i, (ret, end) in enumerate(zip(record.episode_returns,
                                       record.episode_end_steps)):
        yield {'kind': 'episode', 'index': i, 'step': int(end),
               'return': float(ret)}
    for i, step in enumerate(record.switch_steps):
        yield {'kind': 'switch', 'index': i, 'step': int(step),
               'version': i + 1}
    yield {'kind': 'rewards', 'values': [float(r) for r in record.rewards]}
    yield {'kind': 'losses', 'values': [float(x) for x in record.losses]}
    yield {'kind': 'summary', 'total_steps': record.total_steps,
           'switching_cost': record.switching_cost,
           'final_version': record.final_version,
           'episodes': len(record.episode_returns)}


def write_record(record, fh):
    for line in record_lines(record):
        fh.write(_dumps(line))
        fh.write('\n')


def read_record(fh):
    config, rewards, losses, summary = {}, None, [], None
    episodes, switches = [], []
    for number, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as err:
            raise ValueError('Line %d is not valid JSON: %s' % (number, err))
        kind = entry.get('kind')
        if kind == 'config':
            config = entry['config']
        elif kind == 'episode':
            episodes.append((entry['index'], entry['step'], entry['return']))
        elif kind == 'switch':
            switches.append((entry['index'], entry['step']))
        elif kind == 'rewards':
            rewards = np.array(entry['values'], dtype=np.float64)
        elif kind == 'losses':
            losses = list(entry['values'])
        elif kind == 'summary':
            summary = entry
        elif kind not in RECORD_KINDS:
            raise ValueError('Line %d has unknown kind %r.' % (number, kind))
    if summary is None:
        raise ValueError('Run record has no summary line.')
    if rewards is None:
        rewards = np.zeros(summary['total_steps'])

    episodes.sort()
    switch_steps = [step for _, step in sorted(switches)]
    versions = np.zeros(summary['total_steps'], dtype=np.int64)
    for version, step in enumerate(switch_steps, start=1):
        versions[step + 1:] = version
    return RunRecord(rewards=rewards,
                     episode_returns=[float(r) for _, _, r in episodes],
                     episode_end_steps=[int(s) for _, s, _ in episodes],
                     switch_steps=switch_steps,
                     switching_cost=summary['switching_cost'],
                     final_version=summary['final_version'],
                     deployed_versions=versions,
                     losses=losses,
                     config=config)


def write_report(report, fh):
    json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
    fh.write('\n')


def read_report(fh):
    return MetricsReport.from_dict(json.load(fh))
