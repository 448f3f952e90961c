# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from ._criteria import (InfoMatrixState, info_matrix_update_and_decide,
                        theorem1_check, visitation_decide)
from ._hashing import HashedCounter, RandomProjection
from ._metrics import RsiInput, rsi, welch_t_test, student_t_two_sided_p
from ._nn import Mlp, numerical_gradient, relative_error


def check_rsi():
    return (abs(rsi(RsiInput(100.0, 1000.0, 100.0, 1.0)) - 6.91) <= 0.01 and
            abs(rsi(RsiInput(100.0, 15152.0, 100.0, 1.0)) - 9.63) <= 0.01 and
            rsi(RsiInput(100.0, 15152.0, 100.0, 1.0), log=False) == 15152.0)


def check_theorem1():
    return (theorem1_check(4, 0.5) == (0.5, 0.5) and
            theorem1_check(8, 0.25)[1] == 0.25)


def check_visitation(visits=1000):
    counter = HashedCounter(RandomProjection.from_seed(4, 8, seed=0))
    state = np.array([0.3, -1.0, 2.0, 0.5])
    switches = 0
    for _ in range(visits):
        counter.observe(state, 1)
        switches += visitation_decide(counter, state, 1)
    return switches == int(np.floor(np.log2(visits))) + 1


def check_gradients(cases=100, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        depth = int(rng.integers(0, 3))
        sizes = [int(n) for n in rng.integers(1, 6, size=depth + 2)]
        net = Mlp(sizes, rng=rng)
        x = rng.standard_normal((int(rng.integers(1, 4)), sizes[0]))
        weights = rng.standard_normal((len(x), sizes[-1]))

        def loss(params):
            out, _ = net.forward(x, params)
            return float(np.sum(out * weights))

        numeric = numerical_gradient(loss, net.params)
        net.forward(x)
        analytic = net.backward(x, weights)
        worst = max(worst, relative_error(analytic, numeric))
    return worst < 1e-4


def smallest_eigenvalue_3x3(matrix):
    '''Closed-form smallest root of the characteristic cubic.'''
    a = np.asarray(matrix, dtype=np.float64)
    q = np.trace(a) / 3.0
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    p2 = np.sum((np.diag(a) - q) ** 2) + 2.0 * p1
    if p2 == 0:
        return q
    p = np.sqrt(p2 / 6.0)
    r = np.linalg.det((a - q * np.eye(3)) / p) / 2.0
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    return q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)


def check_eigen_oracle(cases=1000, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(cases):
        state = InfoMatrixState.create(horizon=1, dim=3)
        # three or more updates keep the spectrum simple
        for _ in range(int(rng.integers(3, 6))):
            info_matrix_update_and_decide(state, 0, rng.standard_normal(3))
        matrix = state.matrices[0]
        computed = np.linalg.eigvalsh(matrix)[0]
        if abs(computed - smallest_eigenvalue_3x3(matrix)) > 1e-8:
            return False
    return True


def student_t_p_by_quadrature(t, df):
    log_norm = gammaln((df + 1) / 2.0) - gammaln(df / 2.0) - \
        0.5 * np.log(df * np.pi)

    def density(x):
        return np.exp(log_norm - (df + 1) / 2.0 * np.log1p(x * x / df))

    tail, _ = integrate.quad(density, abs(t), np.inf)
    return 2.0 * tail


def check_t_test():
    reference = student_t_p_by_quadrature(2.0, 10.0)
    same = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    return (abs(student_t_two_sided_p(2.0, 10.0) - reference) < 1e-3 and
            same.p == 1.0)


CHECKS = (
    ('RSI arithmetic', check_rsi),
    ('two-task representation construction', check_theorem1),
    ('visitation switch bound', check_visitation),
    ('MLP gradient check', check_gradients),
    ('information matrix eigenvalue oracle', check_eigen_oracle),
    ('Welch t-test p-value oracle', check_t_test),
)


def run_selftest():
    failed = 0
    for name, check in CHECKS:
        passed = check()
        print('%s: %s' % ('PASS' if passed else 'FAIL', name))
        failed += not passed
    return failed == 0
