# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

import csv
import json
import math
import typing as t

import pytest
from hypothesis import given, settings, strategies as st

from besstat.bounds import *
from besstat.bounds import iid_p3_range
from besstat.distributions import (
    DistributionSpec,
    Family,
    InfiniteMomentError,
    MomentProfile,
    moment_profile,
)


class FakeModel(t.NamedTuple):
    kind: str
    sigma1: float
    M: float
    epsilon: float
    norm_L: float
    V: dict

    def v_norm(self, alpha):
        return self.V[alpha]


@pytest.fixture()
def fake_model():
    # C1 = 1, |V|_2 = 1, |V|_3 = 1.2
    return FakeModel('fake', 1.0, 2.0, 1.0, 1.0, {2: 1.0, 3: 1.2})


def test_report_build():
    report = BoundReport.build('test', [('a', 1.0, 'x'), ('b', 0.5, 'y')])
    assert report.total_modulo_constant == 1.5
    assert report.total == 1.5
    assert report.term('b') == 0.5
    assert 'a' in report
    assert 'c' not in report
    with pytest.raises(KeyError):
        report.term('c')
    assert report.scaled(2).total == 3.0
    assert report.scaled(2).total_modulo_constant == 1.5
    assert report.constant_caveat


def test_report_rejects_negative():
    with pytest.raises(BoundError):
        BoundReport.build('test', [('a', -1e-3, 'x')])
    with pytest.raises(BoundError):
        BoundReport.build('test', [('a', math.nan, 'x')])


def test_report_serialization():
    report = BoundReport.build(
        'test', [('a', 0.1, 'x')], z=2.0, valid_z_range=(1.0, 3.0),
        notes=('hello',))
    data = json.loads(report.to_json())
    assert data['title'] == 'test'
    assert data['terms'] == [{'label': 'a', 'value': 0.1, 'equation_tag': 'x'}]
    assert data['valid_z_range'] == [1.0, 3.0]
    assert data['notes'] == ['hello']
    assert data['total'] == 0.1
    rows = list(csv.reader(report.to_csv().splitlines()))
    assert rows == [['label', 'value', 'equation_tag'], ['a', '0.1', 'x']]


def test_required_alphas():
    assert required_alphas(3) == pytest.approx([1.5, 2, 3])
    assert required_alphas(2.5) == pytest.approx([5 / 3, 2, 2.5, 3, 10 / 3])


def test_linearization_scalars_signs(signs):
    scalars = linearization_scalars(Family.iid(signs, 1))
    assert scalars.delta == pytest.approx(0.5, abs=1e-9)
    assert scalars.delta >= 0.5
    assert scalars.beta == pytest.approx(1.0)
    assert scalars.sigma_p == pytest.approx(1.0)


def test_linearization_scalars_halves(half_signs):
    scalars = linearization_scalars(Family.iid(half_signs, 4))
    assert scalars.delta == pytest.approx(0.25, abs=1e-9)
    assert scalars.beta == pytest.approx(0.5)
    assert scalars.sigma_p == pytest.approx(0.5 ** (1 / 3))
    assert linearization_scalars([half_signs] * 4) == scalars


def test_linearization_scalars_checks(signs):
    with pytest.raises(BoundError):
        linearization_scalars([DistributionSpec.atoms([0.0, 2.0], [0.5, 0.5])])
    with pytest.raises(BoundError):
        linearization_scalars(Family.iid(signs, 2))


def test_lambda_alpha(signs):
    inputs = BoundInputs(
        norm_L=2.0, sigma=0.1, M=1.0, epsilon=1.0,
        profile=moment_profile(signs, [2, 3], n=100))
    assert lambda_alpha(inputs, 3) == pytest.approx(2 / 100 ** (1 / 6))
    assert inputs.lam(2) == pytest.approx(2.0)
    with pytest.raises(DegenerateLinearization):
        lambda_alpha(inputs._replace(sigma=0.0), 3)


def test_compute_uv(fixture_inputs):
    assert compute_uv(fixture_inputs) == pytest.approx((0.2, 0.1))
    inputs = fixture_inputs._replace(
        p=2.5, profile=MomentProfile.from_values({2: 0.1, 2.5: 0.2}))
    u, v = compute_uv(inputs)
    assert u == pytest.approx(0.2 ** 0.75)
    assert v == pytest.approx(0.1 + 0.2 ** 2.5)
    with pytest.raises(BoundError):
        compute_uv(fixture_inputs._replace(p=2.0))


def test_gamma_terms(fixture_inputs):
    assert fixture_inputs.C1 == 1
    assert fixture_inputs.q == 1.5
    assert fixture_inputs.q_tilde == 3
    gamma, gamma1 = gamma_terms(fixture_inputs)
    assert gamma == pytest.approx(0.061)
    assert gamma1 == pytest.approx(0.0706)


def test_gamma_infinite_moment(fixture_inputs):
    inputs = fixture_inputs._replace(
        profile=MomentProfile.from_values({3: math.inf, 1.5: 0.05, 2: 0.1}))
    with pytest.raises(InfiniteMomentError):
        gamma_terms(inputs)


def test_uniform_bound(fixture_inputs):
    report = uniform_fS_bound(fixture_inputs, prob_S_exceeds_eps=0.003)
    assert [term.label for term in report.terms] == [
        'P(|S| > eps)', 'lambda_{p^3}^{p^3}', 'G_X(sigma/|L|)', 'Gamma']
    assert report.term('lambda_{p^3}^{p^3}') == pytest.approx(0.008)
    assert report.total_modulo_constant == pytest.approx(0.072)
    assert report.notes == ()
    assert uniform_fS_bound(
        fixture_inputs, 0.003, user_constant=10).total == pytest.approx(0.72)
    with pytest.raises(BoundError):
        uniform_fS_bound(fixture_inputs, prob_S_exceeds_eps=1.5)


def test_uniform_bound_chebyshev(fixture_inputs):
    report = uniform_fS_bound(fixture_inputs._replace(epsilon=0.5))
    assert report.term('P(|S| > eps)') == pytest.approx(0.04)
    assert report.term('Gamma') == pytest.approx(0.122)
    assert report.notes


def test_uniform_bound_degenerate(fixture_inputs):
    with pytest.raises(DegenerateLinearization):
        uniform_fS_bound(fixture_inputs._replace(sigma=0.0))


def test_nonuniform_bound(fixture_inputs):
    assert nonuniform_range(fixture_inputs) == (1.0, 3.0)
    report = nonuniform_fS_bound(fixture_inputs, 3.0)
    assert report.z == 3.0
    assert report.valid_z_range == (1.0, 3.0)
    assert [term.value for term in report.terms] == pytest.approx(
        [0.0, 1e-6 / 27, 0.0, 0.0706 / math.e])
    assert nonuniform_fS_bound(fixture_inputs, -3.0).total == report.total


def test_nonuniform_bound_range(fixture_inputs):
    with pytest.raises(RangeViolation) as exc:
        nonuniform_fS_bound(fixture_inputs, 5.0)
    assert exc.value.z == 5.0
    assert exc.value.interval == (1.0, 3.0)
    with pytest.raises(RangeViolation):
        nonuniform_fS_bound(fixture_inputs, 0.5)


def test_nonuniform_bound_gate(fixture_inputs):
    inputs = fixture_inputs._replace(profile=MomentProfile.from_values(
        {3: 0.2, 1.5: 0.05, 2: 0.1}, tail=lambda z: 1.0))
    report = nonuniform_fS_bound(inputs, 2.0)
    assert len(report.terms) == 2
    assert 'Gamma1 e^{-|z|/3}' not in report
    assert report.notes == ('indicator closed; gated terms omitted',)


def test_linear_BE_bound(signs, half_signs):
    report = linear_BE_bound(Family.iid(half_signs, 4), 0.0)
    assert report.term('B1') == pytest.approx(0.5)
    assert report.term('B2') == pytest.approx(4.0)
    assert linear_BE_bound(Family.iid(signs, 1), 1.0).term('B1') == pytest.approx(0.125)
    report = linear_BE_bound(Family.iid(half_signs, 4), 4.0)
    assert report.term('B2') == pytest.approx(0.5 * math.exp(-2))


def test_linear_BE_bound_pairs():
    pairs = DistributionSpec.atoms([[1.0, 0.5], [-1.0, -0.5]], [0.5, 0.5])
    with pytest.raises(BoundError):
        linear_BE_bound(Family.iid(pairs, 1), 0.0)
    pairs = DistributionSpec.atoms([[0.5, 1.0], [-0.5, -1.0]], [0.5, 0.5])
    report = linear_BE_bound([pairs] * 4, 0.0)
    assert report.term('B1') == pytest.approx(0.5)
    with pytest.raises(BoundError):
        linear_BE_bound([DistributionSpec.gaussian()], 0.0)
    with pytest.raises(BoundError):
        linear_BE_bound([pairs], 0.0, p=1.5)


def test_linear_fS_bound(fixture_inputs):
    report = linear_fS_bound(fixture_inputs, 0.0)
    assert report.term('B1') == pytest.approx(0.008)
    assert report.term('B2') == pytest.approx(0.008)


def test_general_uniform_bound():
    scalars = LinearizationScalars(0.5, 1.0, 1.0)
    reports = general_uniform_bound(scalars, 0.1, 0.2, 0.05)
    assert [r.total for r in reports] == pytest.approx([2.35, 2.35, 6.45])
    assert [r.terms[0].label for r in reports] == ['4 delta', '2 beta', '6.1 beta']
    assert all(r.constant_caveat == '' for r in reports)
    with pytest.raises(BoundError):
        general_uniform_bound(scalars, 0.1, 0.2, 1.5)


def test_tau_term():
    scalars = LinearizationScalars(0.5, 1.0, 1.0)
    assert tau_term(scalars, 0.1, [(0.2, 0.3), (0.4, 0.2)]) == pytest.approx(1.34)
    assert tau_term(scalars, 0.0, []) == pytest.approx(1.0)


def test_general_nonuniform_bound():
    report = general_nonuniform_bound(
        2.0, tau=1.0, prob_delta_exceeds=0.1, xi_tail=lambda x: 0.0,
        cross_sum=0.05)
    assert report.total == pytest.approx(0.15 + math.exp(-2 / 3))
    with pytest.raises(BoundError):
        general_nonuniform_bound(2.0, 1.0, -0.1, lambda x: 0.0, 0.0)


def test_corollary_nonuniform_bound():
    report = corollary_nonuniform_bound(
        3.0, p=3, tau=1.0, prob_delta_exceeds=0.01, eta_tail=lambda x: 0.0)
    assert len(report.terms) == 4
    assert report.term('tau e^{-|z|/3}') == pytest.approx(math.exp(-1))
    report = corollary_nonuniform_bound(
        3.0, p=3, tau=1.0, prob_delta_exceeds=0.01, eta_tail=lambda x: 1.0)
    assert len(report.terms) == 2
    assert report.total == pytest.approx(1.01)
    with pytest.raises(RangeViolation):
        corollary_nonuniform_bound(0.5, 3, 1.0, 0.0, lambda x: 0.0)


def test_iid_p3_constants(fake_model):
    A1, A2 = iid_p3_constants(fake_model, 4)
    assert A1 == pytest.approx(1.978)
    assert A2 == pytest.approx(6.9696)
    with pytest.raises(DegenerateLinearization):
        iid_p3_constants(fake_model._replace(sigma1=0.0), 4)


def test_iid_p3_uniform(fake_model):
    report = iid_p3_uniform(fake_model, 4)
    assert report.term('A2/sqrt(n)') == pytest.approx(3.4848)
    assert report.total == pytest.approx(3.7348)


def test_iid_p3_shape(fake_model):
    assert iid_p3_range(fake_model, 4) == pytest.approx((1.0, 6.0))
    assert iid_p3_shape(fake_model, 4, 3.0) == pytest.approx(
        (1.978 / 27 + 6.9696 / math.e) / 2)
    with pytest.raises(RangeViolation):
        iid_p3_shape(fake_model, 4, 7.0)


def test_iid_nonuniform_bound(fake_model, fixture_inputs):
    report = iid_nonuniform_bound(
        fake_model, 4, 3.0, profile=fixture_inputs.profile)
    assert report.title == 'non-uniform i.i.d. bound (n = 4)'
    assert report.valid_z_range == pytest.approx((1.0, 6.0))


def test_iid_inputs_model(student_model):
    inputs = iid_inputs(student_model, 100)
    assert inputs.sigma == pytest.approx(student_model.sigma1 / 10)
    assert inputs.profile.n == 100
    report = iid_p3_uniform(student_model, 100)
    assert 0 < report.total < math.inf


def test_suboptimal_exp_bound():
    norms = {'V2': 1.0, 'Vp': 1.5, 'LV': 1.2, 'sigma1': 1.0}
    report = suboptimal_exp_bound(100, 3, norms, M=2.0, epsilon=1.0)
    assert report.constant_caveat == ''
    assert report.term('exponential') == pytest.approx(1 / 100)
    assert report.term('|V|_2^2/(n eps^2)') == pytest.approx(1 / 100)
    assert report.term('classical BE') == pytest.approx(0.56 * 1.728 / 10)


def test_suboptimal_exp_bound_trivial():
    norms = {'V2': 1.0, 'Vp': 1.5, 'LV': 1.2, 'sigma1': 1.0}
    report = suboptimal_exp_bound(10, 3, norms, M=2.0, epsilon=1.0, D=5.0)
    assert [(term.label, term.value) for term in report.terms] == [('trivial', 1.0)]
    assert 'mean check failed' in report.notes


def test_suboptimal_exp_bound_errors():
    norms = {'V2': 1.0, 'Vp': 1.5, 'LV': 1.2, 'sigma1': 1.0}
    with pytest.raises(BoundError):
        suboptimal_exp_bound(2, 3, norms, 2.0, 1.0)
    with pytest.raises(BoundError):
        suboptimal_exp_bound(100, 2, norms, 2.0, 1.0)
    with pytest.raises(BoundError):
        suboptimal_exp_bound(100, 3, {'V2': 1.0}, 2.0, 1.0)
    with pytest.raises(InfiniteMomentError):
        suboptimal_exp_bound(100, 3, dict(norms, Vp=math.inf), 2.0, 1.0)
    with pytest.raises(DegenerateLinearization):
        suboptimal_exp_bound(100, 3, dict(norms, sigma1=0.0), 2.0, 1.0)


def test_scale_inputs_errors(fixture_inputs):
    with pytest.raises(BoundError):
        scale_inputs(fixture_inputs, 0.0, 2)


@settings(derandomize=True, deadline=None, max_examples=50)
@given(st.floats(0.1, 10), st.integers(1, 3))
def test_scale_invariance(c, d):
    inputs = BoundInputs(
        norm_L=1.3, sigma=0.7, M=2.5, epsilon=0.8, p=3.0,
        profile=MomentProfile.from_values(
            {1.5: 0.05, 2: 0.1, 3: 0.2}, tail=lambda z: min(1.0, 0.01 / z ** 2)))
    scaled = scale_inputs(inputs, c, d)
    for alpha in (1.5, 2, 3):
        assert scaled.lam(alpha) == pytest.approx(inputs.lam(alpha))
    assert gamma_terms(scaled) == pytest.approx(gamma_terms(inputs))
    assert uniform_fS_bound(scaled).total == pytest.approx(
        uniform_fS_bound(inputs).total)
