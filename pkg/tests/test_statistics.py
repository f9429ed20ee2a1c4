# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

import math
import pickle

import pytest
import numpy as np
from hypothesis import assume, given, settings, strategies as st

from besstat.statistics import *
from besstat.distributions import DistributionSpec, sample


def test_student_T():
    assert student_T([1.0, 2.0, 3.0]) == pytest.approx(3 * math.sqrt(2))
    assert student_T([-1.0, 1.0]) == 0
    with pytest.raises(ModelError):
        student_T([1.0])


def test_pearson_R():
    assert pearson_R([(1, 2), (2, 3), (3, 1)]) == pytest.approx(-0.5)
    assert pearson_R([(1, 1), (2, 2), (3, 3)]) == pytest.approx(1.0)
    with pytest.raises(ModelError):
        pearson_R([(1, 2)])
    with pytest.raises(ModelError):
        pearson_R([1, 2, 3])


def test_hotelling_T2():
    assert hotelling_T2([[1], [2], [3]]) == pytest.approx(18.0)
    assert hotelling_T2([(1, 1), (3, 1), (1, 3), (3, 3)]) == pytest.approx(32.0)
    with pytest.raises(ModelError):
        hotelling_T2([(1, 2), (3, 4)])


def test_undefined_statistics():
    assert student_T([2.0, 2.0, 2.0]) is UNDEFINED
    assert pearson_R([(1, 5), (1, 6), (1, 7)]) is UNDEFINED
    assert hotelling_T2([(1, 1), (2, 2), (3, 3)]) is UNDEFINED


def test_undefined_sentinel():
    assert not UNDEFINED
    assert repr(UNDEFINED) == 'UNDEFINED'
    assert pickle.loads(pickle.dumps(UNDEFINED)) is UNDEFINED


def test_batch_statistics():
    samples = np.array([[1.0, 2.0, 3.0], [2.0, 2.0, 2.0]])
    result = student_T_batch(samples)
    assert result[0] == pytest.approx(3 * math.sqrt(2))
    assert math.isnan(result[1])
    result = pearson_R_batch(np.array([[(1, 2), (2, 3), (3, 1)]] * 2))
    assert result == pytest.approx([-0.5, -0.5])
    result = hotelling_T2_batch(np.array([[[1.0], [2.0], [3.0]]]))
    assert result == pytest.approx([18.0])


@settings(derandomize=True, deadline=None, max_examples=50)
@given(
    st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=20),
    st.floats(0.01, 100))
def test_student_scale_invariance(values, scale):
    x = np.array(values)
    assume(np.ptp(x) > 1e-3)
    assert student_T(scale * x) == pytest.approx(student_T(x), rel=1e-6, abs=1e-9)


@settings(derandomize=True, deadline=None, max_examples=50)
@given(
    st.lists(st.tuples(st.floats(-10, 10, allow_nan=False),
                       st.floats(-10, 10, allow_nan=False)),
             min_size=3, max_size=20),
    st.floats(0.1, 10), st.floats(-10, 10), st.floats(0.1, 10))
def test_pearson_affine_invariance(pairs, a, b, c):
    xy = np.array(pairs)
    assume(np.ptp(xy[:, 0]) > 1e-2 and np.ptp(xy[:, 1]) > 1e-2)
    moved = np.column_stack([a * xy[:, 0] + b, c * xy[:, 1] - b])
    assert pearson_R(moved) == pytest.approx(pearson_R(xy), abs=1e-6)


def test_build_model_student(student_model):
    assert student_model.kind == 'student'
    assert student_model.dimension == 2
    assert student_model.sigma1 == pytest.approx(math.sqrt(1.5))
    assert student_model.norm_L == pytest.approx(math.sqrt(1.25))
    assert student_model.M > 0
    assert student_model.v_norm(2) == pytest.approx(math.sqrt(3))
    assert student_model.require_nondegenerate() is student_model
    assert set(student_model.as_dict()) == {
        'kind', 'params', 'sigma1', 'epsilon', 'M', 'norm_L', 'norm_L_exact'}


def test_build_model_norm_L():
    model = build_model('student', {'mu': 2.0}, DistributionSpec.gaussian(2.0),
                        certify_points=2000)
    assert model.norm_L == pytest.approx(math.sqrt(2))


def test_build_model_student_centered():
    model = build_model('student', {'mu': 0.0}, DistributionSpec.gaussian(),
                        certify_points=2000)
    assert model.sigma1 == pytest.approx(1.0)
    assert model.L([[1.0, 5.0]]) == pytest.approx([1.0])


def test_build_model_hotelling():
    spec = DistributionSpec.gaussian([1.0, 2.0], np.eye(2))
    model = build_model('hotelling', {'mu': [1.0, 2.0]}, spec,
                        certify_points=1000)
    assert model.dimension == 6
    assert model.norm_L == pytest.approx(model.norm_L_exact)
    assert model.norm_L == pytest.approx(math.sqrt(5) * 3)
    assert model.sigma1 > 0


def test_build_model_errors(signs):
    with pytest.raises(ModelError):
        build_model('median', {}, signs)
    with pytest.raises(ModelError):
        build_model('student', {'mu': 'one'}, signs)
    with pytest.raises(ModelError):
        build_model('student', {'mu': 0.0, 'nu': 1.0}, signs)
    with pytest.raises(ModelError):
        build_model('pearson', {'rho': 1.5}, signs)
    with pytest.raises(ModelError):
        build_model('hotelling', {'mu': []}, signs)
    with pytest.raises(ModelError):
        build_model('student', {'mu': 0.0},
                    DistributionSpec.gaussian([0.0, 0.0], np.eye(2)))


def test_build_model_infinite_sixth_moment():
    with pytest.raises(ModelError) as exc:
        build_model('student', {'mu': 0.0}, DistributionSpec.heavy_tail(4.0))
    assert 'sixth moment' in str(exc.value)


def test_build_model_not_centered():
    with pytest.raises(ModelError) as exc:
        build_model('student', {'mu': 0.0}, DistributionSpec.gaussian(1.0))
    assert 'standardized' in str(exc.value)


def test_degeneracy_student():
    params, spec = degenerate_student_spec(0.3)
    assert params['mu'] == pytest.approx(2 * math.sqrt(0.21) / 0.4)
    report = degeneracy_check('student', params, spec)
    assert report.degenerate
    assert report.structural
    assert report.sigma1 == pytest.approx(0.0, abs=1e-7)
    model = build_model('student', params, spec, certify_points=1000)
    with pytest.raises(DegeneracyError) as exc:
        model.require_nondegenerate()
    assert exc.value.report.degenerate
    with pytest.raises(ModelError):
        degenerate_student_spec(0.5)


def test_degeneracy_student_regular(signs):
    report = degeneracy_check('student', {'mu': 0.0}, signs)
    assert not report.degenerate
    assert report.structural is False
    assert report.sigma1 == pytest.approx(1.0)
    report = degeneracy_check('student', {'mu': 0.0}, DistributionSpec.gaussian())
    assert not report.degenerate
    assert report.structural is None
    assert set(report.as_dict()) == {
        'sigma1', 'degenerate', 'witness', 'scale', 'structural'}


@pytest.mark.parametrize('kappa', [0.0, 0.5])
def test_degeneracy_pearson(kappa):
    params, spec = degenerate_pearson_spec(1.0, 2.0, kappa)
    assert params['rho'] == pytest.approx(2 * kappa / (kappa ** 2 + 1))
    report = degeneracy_check('pearson', params, spec)
    assert report.degenerate
    assert report.structural
    with pytest.raises(ModelError):
        degenerate_pearson_spec(0.0, 1.0)


def test_degeneracy_hotelling():
    params, spec = degenerate_hotelling_spec(1.0)
    report = degeneracy_check('hotelling', params, spec)
    assert report.degenerate
    assert report.structural
    with pytest.raises(ModelError):
        degenerate_hotelling_spec(0.0)


def test_smoothness_quadratic():
    model = user_model(lambda x: x[:, 0] + x[:, 0] ** 2, [1.0], epsilon=1.0,
                       certify_points=2000)
    assert model.M == pytest.approx(2.0, rel=1e-4)
    m_hat, violations = smoothness_certify(model, n_points=2000)
    assert m_hat == pytest.approx(2.0, rel=1e-4)
    assert violations == 0


def test_smoothness_student():
    model = build_model('student', {'mu': 0.0}, DistributionSpec.gaussian(),
                        certify_points=2000)
    m_hat, violations = smoothness_certify(model, n_points=2000)
    assert violations == 0
    assert model.M == pytest.approx(1.1 * m_hat)


def test_smoothness_pearson():
    spec = DistributionSpec.gaussian([0.0, 0.0], np.eye(2))
    model = build_model('pearson', {'rho': 0.0}, spec, certify_points=1000)
    m_hat, violations = smoothness_certify(model, n_points=1000)
    assert violations == 0


def test_smoothness_error():
    with pytest.raises(SmoothnessError):
        user_model(lambda x: np.log1p(x[:, 0]), [1.0], epsilon=2.0,
                   certify_points=1000)


def test_user_model():
    model = user_model(lambda x: x[:, 0] * x[:, 1], [0.0, 0.0], M=1.0)
    assert model.kind == 'user'
    assert model.M == 1.0
    assert model.dimension == 2
    with pytest.raises(ModelError):
        user_model(lambda x: x[:, 0] + 1, [1.0], M=1.0)
    with pytest.raises(ModelError):
        model.v_profile([2])


def test_identity_student():
    x = sample(DistributionSpec.gaussian(1.0), 400, seed=1)[:, 0]
    assert linearization_identity_check('student', {'mu': 1.0}, x) is True
    assert linearization_identity_check('student', {'mu': 1.0}, x + 10) is None


def test_identity_pearson():
    spec = DistributionSpec.gaussian([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]])
    xy = sample(spec, 400, seed=2)
    assert linearization_identity_check('pearson', {'rho': 0.5}, xy) is True


def test_identity_hotelling():
    spec = DistributionSpec.gaussian([1.0, 0.0], np.eye(2))
    x = sample(spec, 400, seed=3)
    assert linearization_identity_check(
        'hotelling', {'mu': [1.0, 0.0]}, x, rtol=1e-8) is True


def test_standardize(student_model):
    n = 100
    values = np.array([10.0, 10.0 + student_model.sigma1])
    assert student_model.standardize(values, n) == pytest.approx([0.0, 1.0])
    assert standardize('student', values, n, student_model) == pytest.approx(
        [0.0, 1.0])
    with pytest.raises(ModelError):
        standardize('student', values, n, student_model.replace(sigma1=0.0))
    with pytest.raises(ModelError):
        standardize('median', values, n, student_model)


def test_statistic(student_model):
    assert student_model.statistic([1.0, 2.0, 3.0]) == pytest.approx(
        3 * math.sqrt(2))
    assert student_model.replace(M=7.0).M == 7.0
