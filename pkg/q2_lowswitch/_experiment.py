# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import collections
import dataclasses
import glob
import hashlib
import json
import logging
import os
from multiprocessing import Pool
from typing import Optional, Tuple

import pandas as pd
import yaml

from ._agents import AGENTS, make_agent
from ._core import (ConfigurationError, NumericalDivergenceError, RunConfig,
                    RunRecord, _agent_defaults, _run_defaults, run_training)
from ._criteria import canonical_criterion, make_criterion
from ._envs import ENVIRONMENTS, make_environment
from ._metrics import MetricsReport, aggregate
from ._serialization import read_record, write_record, write_report

_logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1

_experiment_defaults = {
    'seeds': [0],
    'criteria': None,
    'output': None,
    'jobs': 1,
    'rsi': None,
    'sigma_rsi': 0.2,
    'baseline': 'none',
}

OUTPUT_ROOT_ENV = 'LOWSWITCH_OUTPUT_ROOT'
DEFAULT_OUTPUT_DIR = 'lowswitch-results'


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    runs: Tuple[RunConfig, ...]
    criteria: Tuple[str, ...]
    seeds: Tuple[int, ...]
    output_dir: Optional[str] = None
    jobs: int = 1
    rsi: bool = True
    sigma_rsi: float = 0.2
    baseline: str = 'none'


@dataclasses.dataclass(frozen=True, order=True)
class Cell:
    template: int
    criterion: str
    seed_index: int
    seed: int
    config: RunConfig = dataclasses.field(compare=False)


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_run_seed(seed, criterion, seed_index):
    digest = hashlib.blake2b(('%s|%d' % (criterion, seed_index)).encode(),
                             digest_size=8).digest()
    return _splitmix64(seed ^ int.from_bytes(digest, 'little'))


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _coerce_run_value(key, value, errors):
    default = _run_defaults[key]
    if key == 'hidden_sizes':
        if value is None:
            return None
        if (isinstance(value, list) and value and
                all(_is_int(v) and v > 0 for v in value)):
            return tuple(value)
        errors.append('run.hidden_sizes must be a list of positive integers, '
                      'got %r.' % (value,))
    elif isinstance(default, bool):
        if isinstance(value, bool):
            return value
        errors.append('run.%s must be true or false, got %r.' % (key, value))
    elif isinstance(default, int):
        if _is_int(value):
            return value
        errors.append('run.%s must be an integer, got %r.' % (key, value))
    elif isinstance(default, float):
        if _is_int(value) or isinstance(value, float):
            return float(value)
        errors.append('run.%s must be a number, got %r.' % (key, value))
    elif isinstance(value, str):
        return value
    else:
        errors.append('run.%s must be a string, got %r.' % (key, value))
    return default


def _parse_run(index, section, errors):
    label = 'runs[%d]' % index
    if not isinstance(section, dict):
        errors.append('%s must be a mapping, got %r.' % (label, section))
        return None
    values = {}
    for key, value in section.items():
        if key == 'seed':
            errors.append('%s.seed is derived per cell; list base seeds '
                          'under experiment.seeds instead.' % label)
        elif key not in _run_defaults:
            errors.append('%s has unknown key %r. Valid keys are: %s.'
                          % (label, key, ', '.join(sorted(_run_defaults))))
        else:
            values[key] = _coerce_run_value(key, value, errors)

    environment = values.get('environment', _run_defaults['environment'])
    agent = values.pop('agent', _run_defaults['agent'])
    if environment not in ENVIRONMENTS:
        errors.append('%s.environment %r is unknown. Valid environments are: '
                      '%s.' % (label, environment,
                               ', '.join(sorted(ENVIRONMENTS))))
        return None
    if agent not in AGENTS:
        errors.append('%s.agent %r is unknown. Valid agents are: %s.'
                      % (label, agent, ', '.join(sorted(AGENTS))))
        return None
    discrete = make_environment(environment).spec.discrete
    if discrete != AGENTS[agent].discrete:
        errors.append('%s: agent %s cannot act in %s, which has a %s action '
                      'space.' % (label, agent, environment,
                                  'discrete' if discrete else 'continuous'))
        return None
    config = RunConfig.for_agent(agent, **values)
    try:
        config.validate()
    except ConfigurationError as err:
        errors.extend('%s: %s' % (label, e) for e in err.errors)
        return None
    return config


def parse_config(text, seeds=None, criteria=None, jobs=None, output_dir=None):
    '''Parse a YAML experiment description into an ExperimentSpec.

    Keyword arguments override the matching ``experiment`` entries. Every
    problem found is reported in one ConfigurationError.
    '''
    try:
        data = yaml.load(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as err:
        raise ConfigurationError('Malformed YAML: %s' % err)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError('The configuration must be a mapping with '
                                 '"experiment" and "run" sections.')

    errors = []
    unknown = set(data) - {'experiment', 'run', 'runs'}
    if unknown:
        errors.append('Unknown top-level section(s): %s.'
                      % ', '.join(sorted(map(str, unknown))))
    if 'run' in data and 'runs' in data:
        errors.append('Use either "run" or "runs", not both.')

    experiment = dict(_experiment_defaults)
    section = data.get('experiment') or {}
    if not isinstance(section, dict):
        errors.append('"experiment" must be a mapping.')
        section = {}
    for key, value in section.items():
        if key not in _experiment_defaults:
            errors.append('experiment has unknown key %r. Valid keys are: %s.'
                          % (key, ', '.join(sorted(_experiment_defaults))))
        else:
            experiment[key] = value
    for key, value in (('seeds', seeds), ('criteria', criteria),
                       ('jobs', jobs), ('output', output_dir)):
        if value is not None:
            experiment[key] = value

    run_sections = data.get('runs')
    if run_sections is None:
        run_sections = [data.get('run') or {}]
    if not isinstance(run_sections, list) or not run_sections:
        errors.append('"runs" must be a non-empty list.')
        run_sections = []
    templates = [_parse_run(i, s, errors) for i, s in enumerate(run_sections)]

    seed_list = experiment['seeds']
    if (not isinstance(seed_list, list) or not seed_list or
            not all(_is_int(s) and s >= 0 for s in seed_list)):
        errors.append('experiment.seeds must be a non-empty list of '
                      'non-negative integers, got %r.' % (seed_list,))
        seed_list = []
    else:
        duplicates = sorted(s for s, n in
                            collections.Counter(seed_list).items() if n > 1)
        if duplicates:
            errors.append('experiment.seeds contains duplicates: %s.'
                          % ', '.join(map(str, duplicates)))

    criterion_list = experiment['criteria']
    if criterion_list is None:
        criterion_list = sorted({t.criterion for t in templates if t})
    if not isinstance(criterion_list, list) or not criterion_list:
        errors.append('experiment.criteria must be a non-empty list of '
                      'criterion strings.')
        criterion_list = []
    canonical = []
    for text in criterion_list:
        try:
            canonical.append(canonical_criterion(text))
        except ConfigurationError as err:
            errors.extend(err.errors)
    if len(set(canonical)) != len(canonical):
        errors.append('experiment.criteria lists the same criterion more '
                      'than once.')

    if not _is_int(experiment['jobs']) or experiment['jobs'] < 1:
        errors.append('experiment.jobs must be a positive integer, got %r.'
                      % (experiment['jobs'],))
    sigma = experiment['sigma_rsi']
    if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or \
            not 0.0 <= sigma < 1.0:
        errors.append('experiment.sigma_rsi must lie in [0, 1), got %r.'
                      % (sigma,))
    baseline = experiment['baseline']
    try:
        baseline = canonical_criterion(baseline)
    except ConfigurationError as err:
        errors.extend(err.errors)
    rsi = experiment['rsi']
    if rsi is None:
        rsi = baseline in canonical
    elif not isinstance(rsi, bool):
        errors.append('experiment.rsi must be true or false, got %r.'
                      % (rsi,))
    elif rsi and baseline not in canonical:
        errors.append('RSI is enabled but the baseline criterion %r is not '
                      'among the criteria.' % baseline)

    if errors:
        raise ConfigurationError(errors)
    return ExperimentSpec(runs=tuple(templates), criteria=tuple(canonical),
                          seeds=tuple(seed_list),
                          output_dir=experiment['output'],
                          jobs=experiment['jobs'], rsi=rsi,
                          sigma_rsi=float(sigma), baseline=baseline)


def build_cells(spec):
    cells = []
    for template, config in enumerate(spec.runs):
        for criterion in spec.criteria:
            for seed_index, seed in enumerate(spec.seeds):
                run_seed = derive_run_seed(seed, criterion, seed_index)
                cells.append(Cell(template, criterion, seed_index, seed,
                                  config.replace(criterion=criterion,
                                                 seed=run_seed)))
    return sorted(cells)


def train_run(config):
    config.validate()
    env = make_environment(config.environment)
    agent = make_agent(config, env.spec)
    criterion = make_criterion(config.criterion, env.spec, seed=config.seed,
                               window=config.criterion_window,
                               batch_size=config.criterion_batch)
    return run_training(config, env, agent, criterion)


def _run_cell(cell):
    config = cell.config
    print('Running training cell: env=%s, agent=%s, criterion=%s, seed=%d'
          % (config.environment, config.agent, config.criterion, cell.seed),
          flush=True)
    try:
        record = train_run(config)
    except NumericalDivergenceError as err:
        _logger.error('Cell %s/seed %d failed: %s', cell.criterion,
                      cell.seed, err)
        return cell, None, str(err)
    record.config['base_seed'] = cell.seed
    return cell, record, None


def _slug(text):
    return text.replace(':', '_').replace(',', '_').replace('=', '-')


def _template_dirs(spec, output_dir):
    if len(spec.runs) == 1:
        return [output_dir]
    return [os.path.join(output_dir, '%d-%s-%s' % (i, c.environment, c.agent))
            for i, c in enumerate(spec.runs)]


def curves_frame(records):
    rows = []
    for criterion in sorted(records):
        for record in records[criterion]:
            seed = record.config.get('base_seed', record.seed)
            rows.extend({'step': step, 'reward': ret,
                         'criterion': criterion, 'seed': seed}
                        for step, ret in zip(record.episode_end_steps,
                                             record.episode_returns))
    return pd.DataFrame(rows, columns=['step', 'reward', 'criterion', 'seed'])


def write_summaries(directory, records, baseline='none', sigma=0.2,
                    rsi_enabled=True):
    '''Write summary.csv, curves.csv and metrics.json for grouped records.'''
    report = aggregate(records, baseline=baseline, sigma=sigma,
                       rsi_enabled=rsi_enabled)
    report.summary_table().to_csv(os.path.join(directory, 'summary.csv'),
                                  index=False)
    curves_frame(records).to_csv(os.path.join(directory, 'curves.csv'),
                                 index=False)
    with open(os.path.join(directory, 'metrics.json'), 'w') as fh:
        write_report(report, fh)
    return report


def run_experiment(spec):
    '''Run every cell and write the results. Returns the exit status.'''
    output_dir = (spec.output_dir or os.environ.get(OUTPUT_ROOT_ENV) or
                  DEFAULT_OUTPUT_DIR)
    cells = build_cells(spec)
    _logger.info('Running %d cells with %d job(s) into %s', len(cells),
                 spec.jobs, output_dir)

    if spec.jobs > 1:
        with Pool(processes=min(spec.jobs, len(cells))) as pool:
            results = pool.map(_run_cell, cells)
            pool.close()
    else:
        results = [_run_cell(cell) for cell in cells]

    status = 0
    for template, directory in enumerate(_template_dirs(spec, output_dir)):
        runs_dir = os.path.join(directory, 'runs')
        os.makedirs(runs_dir, exist_ok=True)
        records = collections.defaultdict(list)
        failures = []
        for cell, record, failure in results:
            if cell.template != template:
                continue
            if record is None:
                failures.append({'criterion': cell.criterion,
                                 'seed': cell.seed, 'error': failure})
                continue
            name = '%s__seed%d.jsonl' % (_slug(cell.criterion), cell.seed)
            with open(os.path.join(runs_dir, name), 'w') as fh:
                write_record(record, fh)
            records[cell.criterion].append(record)

        if failures:
            status = 2
            with open(os.path.join(directory, 'failures.json'), 'w') as fh:
                json.dump(failures, fh, sort_keys=True, indent=2)
        if not records:
            continue
        rsi_enabled = spec.rsi and spec.baseline in records
        if spec.rsi and not rsi_enabled:
            _logger.error('Every baseline run failed in %s; RSI is left '
                          'empty.', directory)
        write_summaries(directory, records, baseline=spec.baseline,
                        sigma=spec.sigma_rsi, rsi_enabled=rsi_enabled)
    return status


def load_records(directory):
    records = collections.defaultdict(list)
    paths = sorted(glob.glob(os.path.join(directory, 'runs', '*.jsonl')))
    for path in paths:
        with open(path) as fh:
            record = read_record(fh)
        records[record.criterion].append(record)
    for criterion in records:
        records[criterion].sort(
            key=lambda r: r.config.get('base_seed', r.seed))
    return dict(records)


def report(directory, baseline='none', sigma=0.2):
    records = load_records(directory)
    if not records:
        raise ConfigurationError('No run records found under %s.'
                                 % os.path.join(directory, 'runs'))
    return write_summaries(directory, records, baseline=baseline,
                           sigma=sigma, rsi_enabled=baseline in records)


def train(environment: str = _run_defaults['environment'],
          agent: str = _run_defaults['agent'],
          criterion: str = _run_defaults['criterion'],
          total_steps: int = _run_defaults['total_steps'],
          seed: int = _run_defaults['seed'],
          warmup_steps: int = None,
          update_period: int = None,
          updates_per_event: int = None,
          batch_size: int = None,
          buffer_capacity: int = _run_defaults['buffer_capacity'],
          gamma: float = _run_defaults['gamma'],
          learning_rate: float = _run_defaults['learning_rate'],
          bonus: float = None) -> RunRecord:
    if agent not in _agent_defaults:
        raise ConfigurationError('Unknown agent %r. Valid agents are: %s.'
                                 % (agent, ', '.join(sorted(AGENTS))))
    optional = {'warmup_steps': warmup_steps, 'update_period': update_period,
                'updates_per_event': updates_per_event,
                'batch_size': batch_size, 'bonus': bonus}
    config = RunConfig.for_agent(
        agent, environment=environment,
        criterion=canonical_criterion(criterion), total_steps=total_steps,
        seed=seed, buffer_capacity=buffer_capacity, gamma=gamma,
        learning_rate=learning_rate,
        **{k: v for k, v in optional.items() if v is not None})
    return train_run(config)


def aggregate_runs(runs: RunRecord,
                   baseline: str = 'none',
                   sigma_rsi: float = 0.2) -> MetricsReport:
    records = collections.defaultdict(list)
    for record in runs:
        records[record.criterion].append(record)
    baseline = canonical_criterion(baseline)
    return aggregate(dict(records), baseline=baseline, sigma=sigma_rsi,
                     rsi_enabled=baseline in records)
