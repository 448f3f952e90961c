# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import dataclasses
import logging

import numpy as np

from ._core import (ConfigurationError, NumericalDivergenceError,
                    ProtocolError, sample_recent)
from ._hashing import (CRITERION_SEED_OFFSET, EXPLORATION_PROJECTION_DIM,
                       INFO_PROJECTION_DIM, HashedCounter, RandomProjection,
                       projection_seed, psi)

_logger = logging.getLogger(__name__)

_criterion_defaults = {
    'none': {},
    'never': {},
    'fix': {'n': 1000},
    'adaptive': {'n': 100, 'm': 10000},
    'policy': {'sigma': None, 'reset': True, 'force': 10000},
    'feature': {'sigma': None, 'reset': True, 'force': 10000},
    'visitation': {'proj': EXPLORATION_PROJECTION_DIM},
    'info': {'lambda': 1.0, 'mode': 'eig', 'proj': INFO_PROJECTION_DIM},
}

# (discrete, continuous)
_sigma_defaults = {'policy': (0.5, 1.0), 'feature': (0.97, 0.8)}

_integer_params = {'n', 'm', 'force', 'proj'}
_boolean_params = {'reset'}
_choice_params = {'mode': ('eig', 'det')}


def _parse_value(kind, key, text):
    if key in _boolean_params:
        lowered = text.lower()
        if lowered not in ('true', 'false'):
            raise ValueError('%s:%s must be true or false, got %r.'
                             % (kind, key, text))
        return lowered == 'true'
    if key in _choice_params:
        if text not in _choice_params[key]:
            raise ValueError('%s:%s must be one of %s, got %r.'
                             % (kind, key, ', '.join(_choice_params[key]),
                                text))
        return text
    try:
        return int(text) if key in _integer_params else float(text)
    except ValueError:
        raise ValueError('%s:%s expects a number, got %r.' % (kind, key, text))


def _parse(text):
    '''Split ``kind[:key=value,...]`` into the kind and its parameters.

    Unset parameters take their defaults; ``sigma`` stays ``None`` until the
    action space is known.
    '''
    kind, _, rest = str(text).strip().partition(':')
    if kind not in _criterion_defaults:
        raise ConfigurationError(
            'Unknown switching criterion %r. Valid criteria are: %s.'
            % (kind, ', '.join(sorted(_criterion_defaults))))
    params = dict(_criterion_defaults[kind])
    given = []
    errors = []
    for item in filter(None, (p.strip() for p in rest.split(','))):
        key, sep, value = item.partition('=')
        key = key.strip()
        if not sep or key not in params:
            errors.append('Unknown parameter %r for criterion %r. Valid '
                          'parameters are: %s.'
                          % (key, kind, ', '.join(sorted(params)) or 'none'))
            continue
        try:
            params[key] = _parse_value(kind, key, value.strip())
            given.append(key)
        except ValueError as err:
            errors.append(str(err))
    errors.extend(_check_params(kind, params))
    if errors:
        raise ConfigurationError(errors)
    return kind, params, given


def parse_criterion(text):
    kind, params, _ = _parse(text)
    return kind, params


def _check_params(kind, params):
    errors = []
    for key in ('n', 'm', 'force', 'proj'):
        if key in params and params[key] < 1:
            errors.append('%s:%s must be at least 1, got %r.'
                          % (kind, key, params[key]))
    if kind == 'feature' and params['sigma'] is not None and \
            not 0.0 <= params['sigma'] <= 1.0:
        errors.append('feature:sigma must lie in [0, 1], got %r.'
                      % params['sigma'])
    if kind == 'policy' and params['sigma'] is not None and \
            params['sigma'] < 0:
        errors.append('policy:sigma must be non-negative, got %r.'
                      % params['sigma'])
    if kind == 'visitation' and params['proj'] > 63:
        errors.append('visitation:proj must be at most 63, got %r.'
                      % params['proj'])
    if kind == 'info' and params['lambda'] <= 0:
        errors.append('info:lambda must be positive, got %r.'
                      % params['lambda'])
    return errors


def canonical_criterion(text):
    '''Normalized spelling: explicit parameters only, sorted by name.'''
    kind, params, given = _parse(text)
    if not given:
        return kind
    return '%s:%s' % (kind, ','.join(
        '%s=%s' % (key, str(params[key]).lower()
                   if isinstance(params[key], bool) else params[key])
        for key in sorted(set(given))))


def fix_decide(step, n):
    if n < 1:
        raise ValueError('The switching period must be at least 1, got %r.'
                         % n)
    return step % n == 0


def adaptive_interval(switch_count, n, m):
    return min((switch_count + 1) * n, m)


def action_mismatch_ratio(deployed_actions, online_actions):
    deployed_actions = np.asarray(deployed_actions)
    if deployed_actions.size == 0:
        raise ValueError('Cannot compare policies on an empty batch.')
    return float(np.mean(deployed_actions != np.asarray(online_actions)))


def gaussian_kl(mean_p, log_std_p, mean_q, log_std_q):
    '''KL(p || q) between diagonal Gaussians, summed over dimensions.'''
    var_p = np.exp(2 * np.asarray(log_std_p))
    var_q = np.exp(2 * np.asarray(log_std_q))
    kl = (np.asarray(log_std_q) - np.asarray(log_std_p) +
          (var_p + (np.asarray(mean_p) - np.asarray(mean_q)) ** 2) /
          (2 * var_q) - 0.5)
    return np.sum(kl, axis=-1)


def policy_divergence(agent, deployed_params, online_params, states):
    states = np.atleast_2d(states)
    if len(states) == 0 or states.size == 0:
        raise ValueError('Cannot compare policies on an empty batch.')
    if agent.discrete:
        return action_mismatch_ratio(
            agent.greedy_actions(deployed_params, states),
            agent.greedy_actions(online_params, states))
    mean_d, log_std_d = agent.gaussian_moments(deployed_params, states)
    mean_o, log_std_o = agent.gaussian_moments(online_params, states)
    return float(np.mean(gaussian_kl(mean_d, log_std_d, mean_o, log_std_o)))


def policy_decide(agent, deployed, online_params, states, sigma_p):
    return policy_divergence(agent, deployed.parameters, online_params,
                             states) >= sigma_p


def feature_similarity(deployed_features, online_features, step=None):
    '''Mean cosine similarity over rows where both features are non-zero.

    Returns 1.0 when every row is excluded. ``step`` only labels the
    warning that counts excluded rows.
    '''
    deployed_features = np.atleast_2d(deployed_features)
    online_features = np.atleast_2d(online_features)
    norms_d = np.linalg.norm(deployed_features, axis=1)
    norms_o = np.linalg.norm(online_features, axis=1)
    valid = (norms_d > 0) & (norms_o > 0)
    excluded = int(np.count_nonzero(~valid))
    if excluded:
        where = '' if step is None else ' at step %d' % step
        _logger.warning('Excluded %d zero-norm feature pair(s) from the '
                        'similarity mean%s.', excluded, where)
    if not np.any(valid):
        return 1.0
    dots = np.sum(deployed_features[valid] * online_features[valid], axis=1)
    cosines = dots / (norms_d[valid] * norms_o[valid])
    return float(np.clip(np.mean(cosines), -1.0, 1.0))


def feature_decide(similarity, sigma_f):
    if not 0.0 <= sigma_f <= 1.0:
        raise ValueError('The similarity threshold must lie in [0, 1], got '
                         '%r.' % sigma_f)
    return similarity <= sigma_f


def reset_check_wrapper(inner_decide, episode_reset, steps_since_switch,
                        force_after=10000):
    '''Only let ``inner_decide`` run at episode boundaries.

    ``inner_decide`` is called lazily. A switch is forced once
    ``force_after`` steps have passed since the last one.
    '''
    if force_after < 1:
        raise ValueError('force_after must be at least 1, got %r.'
                         % force_after)
    if steps_since_switch >= force_after:
        return True
    if not episode_reset:
        return False
    return bool(inner_decide())


def is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


def visitation_decide(counter, state, action):
    n = counter.count(state, action)
    if n == 0:
        raise ProtocolError('Visitation decided before the pair was '
                            'counted.')
    return is_power_of_two(n)


@dataclasses.dataclass
class InfoMatrixState:
    matrices: np.ndarray
    reference: np.ndarray
    lam: float = 1.0
    mode: str = 'eig'

    @classmethod
    def create(cls, horizon, dim, lam=1.0, mode='eig'):
        if lam <= 0:
            raise ValueError('The regularizer must be positive, got %r.'
                             % lam)
        if mode not in _choice_params['mode']:
            raise ValueError('Unknown information matrix mode %r.' % mode)
        matrices = np.tile(lam * np.eye(dim), (horizon, 1, 1))
        if mode == 'eig':
            reference = np.full(horizon, float(lam))
        else:
            reference = np.full(horizon, dim * np.log(lam))
        return cls(matrices=matrices, reference=reference, lam=lam,
                   mode=mode)

    @property
    def horizon(self):
        return self.matrices.shape[0]


def info_matrix_update_and_decide(state, h, feature):
    '''Add feature feature^T to the step-h matrix; report a doubling.

    In ``eig`` mode a doubling of the smallest eigenvalue against the value
    at the last trigger fires; ``det`` mode compares log-determinants.
    '''
    if not 0 <= h < state.horizon:
        raise ValueError('Episode step %r is outside [0, %d).'
                         % (h, state.horizon))
    feature = np.asarray(feature, dtype=np.float64)
    if not np.all(np.isfinite(feature)):
        raise NumericalDivergenceError('Non-finite feature vector for the '
                                       'information matrix.')
    matrix = state.matrices[h]
    matrix += np.outer(feature, feature)
    if state.mode == 'eig':
        value = np.linalg.eigvalsh(matrix)[0]
        fired = value >= 2 * state.reference[h]
    else:
        _, value = np.linalg.slogdet(matrix)
        fired = value >= state.reference[h] + np.log(2)
    if fired:
        state.reference[h] = value
    return bool(fired)


class Criterion:
    '''Decides when the online policy replaces the deployed one.

    ``observe`` sees every collected transition, ``decide`` runs at update
    events and ``on_switch`` follows each deployment.
    '''
    kind = None

    def observe(self, context):
        pass

    def decide(self, context):
        raise NotImplementedError

    def on_switch(self, context):
        pass


class NoneCriterion(Criterion):
    kind = 'none'

    def decide(self, context):
        return True


class NeverCriterion(Criterion):
    kind = 'never'

    def decide(self, context):
        return False


class FixCriterion(Criterion):
    kind = 'fix'

    def __init__(self, n):
        if n < 1:
            raise ValueError('The switching period must be at least 1.')
        self.n = n

    def decide(self, context):
        return fix_decide(context.step, self.n)


class AdaptiveCriterion(Criterion):
    kind = 'adaptive'

    def __init__(self, n, m):
        self.n = n
        self.m = m

    def decide(self, context):
        return context.steps_since_switch >= adaptive_interval(
            context.switch_count, self.n, self.m)


class _SampledCriterion(Criterion):
    def __init__(self, sigma, window, batch_size):
        self.sigma = sigma
        self.window = window
        self.batch_size = batch_size
        self.last_value = None

    def _states(self, context):
        return sample_recent(context.buffer, self.window, self.batch_size,
                             context.rng).states


class PolicyCriterion(_SampledCriterion):
    kind = 'policy'

    def decide(self, context):
        self.last_value = policy_divergence(
            context.agent, context.deployed.parameters,
            context.agent.online_parameters(), self._states(context))
        return self.last_value >= self.sigma


class FeatureCriterion(_SampledCriterion):
    kind = 'feature'

    def __init__(self, sigma, window, batch_size):
        feature_decide(0.0, sigma)
        super().__init__(sigma, window, batch_size)

    def decide(self, context):
        states = self._states(context)
        agent = context.agent
        self.last_value = feature_similarity(
            agent.features(context.deployed.parameters, states),
            agent.features(agent.online_parameters(), states),
            step=context.step)
        return feature_decide(self.last_value, self.sigma)


class _LatchedCriterion(Criterion):
    # triggers seen by observe() are held until the next decide()
    def __init__(self):
        self.pending = False

    def decide(self, context):
        fired, self.pending = self.pending, False
        return fired


class VisitationCriterion(_LatchedCriterion):
    kind = 'visitation'

    def __init__(self, projection):
        super().__init__()
        self.counter = HashedCounter(projection)

    def observe(self, context):
        self.counter.observe(context.state, context.action)
        if visitation_decide(self.counter, context.state, context.action):
            self.pending = True


class InfoMatrixCriterion(_LatchedCriterion):
    kind = 'info'

    def __init__(self, projection, horizon, n_actions=None, action_dim=1,
                 lam=1.0, mode='eig'):
        super().__init__()
        self.projection = projection
        self.n_actions = n_actions
        dim = projection.projection_dim + (
            n_actions if n_actions is not None else action_dim)
        self.state = InfoMatrixState.create(horizon, dim, lam=lam, mode=mode)

    def observe(self, context):
        feature = psi(self.projection, context.state, context.action,
                      self.n_actions)
        if info_matrix_update_and_decide(self.state, context.episode_step,
                                         feature):
            self.pending = True


class ResetChecking(Criterion):
    def __init__(self, inner, force_after=10000):
        reset_check_wrapper(lambda: False, False, 0, force_after)
        self.inner = inner
        self.force_after = force_after

    @property
    def kind(self):
        return self.inner.kind

    def observe(self, context):
        self.inner.observe(context)

    def decide(self, context):
        return reset_check_wrapper(lambda: self.inner.decide(context),
                                   context.episode_reset,
                                   context.steps_since_switch,
                                   self.force_after)

    def on_switch(self, context):
        self.inner.on_switch(context)


def make_criterion(text, env_spec, seed=0, window=10000, batch_size=512):
    kind, params = parse_criterion(text)
    if kind == 'none':
        return NoneCriterion()
    if kind == 'never':
        return NeverCriterion()
    if kind == 'fix':
        return FixCriterion(params['n'])
    if kind == 'adaptive':
        return AdaptiveCriterion(params['n'], params['m'])
    if kind in ('policy', 'feature'):
        sigma = params['sigma']
        if sigma is None:
            sigma = _sigma_defaults[kind][0 if env_spec.discrete else 1]
        cls = PolicyCriterion if kind == 'policy' else FeatureCriterion
        criterion = cls(sigma, window, batch_size)
        if params['reset']:
            criterion = ResetChecking(criterion, params['force'])
        return criterion
    projection = RandomProjection.from_seed(
        env_spec.state_dim, params['proj'],
        projection_seed(seed, CRITERION_SEED_OFFSET))
    if kind == 'visitation':
        return VisitationCriterion(projection)
    return InfoMatrixCriterion(
        projection, env_spec.max_steps,
        n_actions=env_spec.n_actions, action_dim=env_spec.action_dim,
        lam=params['lambda'], mode=params['mode'])


def half_rectifier(z):
    '''ReLU that outputs 0.5 at exactly zero.'''
    z = np.asarray(z, dtype=np.float64)
    return np.where(z > 0, z, np.where(z == 0, 0.5, 0.0))


@dataclasses.dataclass(frozen=True)
class TheoremConstruction:
    '''Basis-vector tasks on a signed rectifier feature layer.

    Row i of a representation V is +e_i or -e_i and maps x to the feature
    2 half_rectifier(<v_i, x>) - 1, so a basis input e_j yields +-1 at
    coordinate j and 0 elsewhere. Predictions sum the features (w is all
    ones). Task one holds e_1 .. e_(1-alpha)k and task two the remaining
    alpha*k basis vectors, every label 1; the identity is the true
    representation.
    '''
    k: int
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError('alpha must lie in (0, 1), got %r.' % self.alpha)
        if self.k < 2 or self.k % 2:
            raise ValueError('k must be a positive even integer, got %r.'
                             % self.k)
        if not float(self.alpha * self.k).is_integer():
            raise ValueError('alpha * k must be an integer, got %r.'
                             % (self.alpha * self.k))

    @property
    def split(self):
        return self.k - int(round(self.alpha * self.k))

    @property
    def weights(self):
        return np.ones(self.k)

    def task_one(self):
        return np.eye(self.k)[:self.split], np.ones(self.split)

    def task_two(self):
        return np.eye(self.k)[self.split:], np.ones(self.k - self.split)

    def features(self, v, x):
        return 2.0 * half_rectifier(np.asarray(x) @ v.T) - 1.0

    def predict(self, v, x):
        return self.features(v, x) @ self.weights

    def risk(self, v, x, y):
        '''Squared error scaled to [0, 1] for labels and predictions +-1.'''
        return float(np.mean((y - self.predict(v, x)) ** 2) / 4.0)

    def fit(self, x, y, tie=1.0):
        '''Empirical risk minimizer over the sign of each row.

        The risk separates over rows on basis inputs, so each sign is chosen
        on its own; rows the data leaves undetermined take ``tie``.
        '''
        v = tie * np.eye(self.k)
        for i in range(self.k):
            risks = {}
            for sign in (tie, -tie):
                v[i, i] = sign
                risks[sign] = self.risk(v, x, y)
            v[i, i] = min(risks, key=lambda s: (risks[s], s != tie))
        return v


def theorem1_check(k, alpha, flip=True):
    '''Compare a first-task fit with the joint fit on both tasks.

    The joint fit f12 is the risk minimizer on both tasks and recovers the
    identity. The first-task fit f1 minimizes risk on task one only; the
    rows for task two are unconstrained, and with ``flip`` they take the
    wrong sign. Returns the fraction of rows f1 shares with f12 and the
    prediction error of f1 on both tasks.
    '''
    construction = TheoremConstruction(k, alpha)
    x1, y1 = construction.task_one()
    x2, y2 = construction.task_two()
    x12 = np.vstack([x1, x2])
    y12 = np.concatenate([y1, y2])

    joint = construction.fit(x12, y12)
    if not np.array_equal(joint, np.eye(k)):
        raise AssertionError('The joint fit does not recover the identity.')
    first = construction.fit(x1, y1, tie=-1.0 if flip else 1.0)
    if construction.risk(first, x1, y1) != 0.0:
        raise AssertionError('The first-task fit has non-zero risk on task '
                             'one.')

    similarity = float(np.mean(np.all(first == joint, axis=1)))
    return similarity, construction.risk(first, x12, y12)
