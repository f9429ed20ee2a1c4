# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Evaluation of the explicit Berry-Esseen bound expressions.

Every bound is returned as a :class:`BoundReport`: the additive terms of the
right-hand side, each labelled, with the total *modulo* the unspecified
absolute constant :math:`A(p)` that the inequalities carry. Nothing here
samples; the Monte Carlo ingredients some bounds accept are computed by
:mod:`besstat.simulation`.
"""

import io
import csv
import json
import math
import logging
import typing as t

import numpy as np

from .const import DELTA_TOL, MOMENT_TOL, MC_SIGMAS, BE_CONSTANT
from .distributions import InfiniteMomentError, Family

__all__ = [
    'BoundError',
    'RangeViolation',
    'DegenerateLinearization',
    'LinearizationScalars',
    'BoundInputs',
    'Term',
    'BoundReport',
    'required_alphas',
    'linearization_scalars',
    'lambda_alpha',
    'compute_uv',
    'gamma_terms',
    'uniform_fS_bound',
    'nonuniform_range',
    'nonuniform_fS_bound',
    'linear_BE_bound',
    'linear_fS_bound',
    'general_uniform_bound',
    'tau_term',
    'general_nonuniform_bound',
    'corollary_nonuniform_bound',
    'iid_inputs',
    'iid_p3_constants',
    'iid_p3_uniform',
    'iid_p3_shape',
    'iid_nonuniform_bound',
    'suboptimal_exp_bound',
    'scale_inputs',
]


logger = logging.getLogger('besstat.bounds')

CAVEAT = (
    'total is stated modulo a positive factor A(p) depending only on p, '
    'which is not specified')


class BoundError(ValueError):
    "Base class for bound evaluation errors"


class RangeViolation(BoundError):
    "Exception raised when z lies outside the range a bound is valid for"
    def __init__(self, z, interval):
        super().__init__(
            f'|z| = {abs(z):g} lies outside the valid range '
            f'[{interval[0]:g}, {interval[1]:g}]')
        self.z = z
        self.interval = interval


class DegenerateLinearization(BoundError):
    "Exception raised when the linear part has zero variance"
    def __init__(self, msg='sigma is 0; the linearization is degenerate '
                 '(see degeneracy_check)'):
        super().__init__(msg)


class LinearizationScalars(t.NamedTuple):
    """
    The scalars of the linear statistic :math:`W = \\sum_i \\xi_i`: the
    minimal *delta* with :math:`\\sum_i E|\\xi_i|(\\delta \\wedge |\\xi_i|)
    \\ge 1/2`, *beta* :math:`= \\sum_i E(\\xi_i^2 \\wedge |\\xi_i|^3)`, and
    *sigma_p* :math:`= (\\sum_i E|\\xi_i|^p)^{1/p}` for the exponent *p*.
    """
    delta: float
    beta: float
    sigma_p: float
    p: float = 3.0


class BoundInputs(t.NamedTuple):
    """
    The quantities entering the bounds for :math:`f(S)`: the norm of the
    derivative *norm_L*, the standard deviation *sigma* of :math:`L(S)`,
    the smoothness constant *M* on the ball of radius *epsilon*, the type-2
    constant *D* (1 in Euclidean spaces), the exponent *p*, and the
    :class:`~besstat.distributions.MomentProfile` of the summands.
    """
    norm_L: float
    sigma: float
    M: float
    epsilon: float
    D: float = 1.0
    p: float = 3.0
    profile: t.Any = None

    @property
    def C1(self):
        return max(self.M / 2, self.norm_L / self.epsilon)

    @property
    def q(self):
        return self.p / (self.p - 1)

    @property
    def q_tilde(self):
        return self.p / (self.p - 2)

    def lam(self, alpha):
        return lambda_alpha(self, alpha)

    def tail(self, z):
        return self.profile.tail(z)


class Term(t.NamedTuple):
    label: str
    value: float
    equation_tag: str


class BoundReport(t.NamedTuple):
    """
    Itemized right-hand side of one bound. The *total_modulo_constant* is
    the sum of the term values; :attr:`total` applies the optional
    *user_constant*.
    """
    title: str
    terms: tuple
    z: t.Optional[float] = None
    valid_z_range: t.Optional[tuple] = None
    constant_caveat: str = CAVEAT
    user_constant: float = 1.0
    notes: tuple = ()

    @classmethod
    def build(cls, title, terms, **kwargs):
        terms = tuple(Term(*term) for term in terms)
        for term in terms:
            if not term.value >= 0:
                raise BoundError(
                    f'{title}: term {term.label} is {term.value!r}, not >= 0')
        return cls(title, terms, **kwargs)

    @property
    def total_modulo_constant(self):
        return math.fsum(term.value for term in self.terms)

    @property
    def total(self):
        return self.user_constant * self.total_modulo_constant

    def term(self, label):
        for term in self.terms:
            if term.label == label:
                return term.value
        raise KeyError(label)

    def __contains__(self, label):
        return any(term.label == label for term in self.terms)

    def scaled(self, user_constant):
        "Return the report with *user_constant* applied to the total"
        return self._replace(user_constant=float(user_constant))

    def as_dict(self):
        return {
            'title': self.title,
            'terms': [term._asdict() for term in self.terms],
            'total_modulo_constant': self.total_modulo_constant,
            'user_constant': self.user_constant,
            'total': self.total,
            'z': self.z,
            'valid_z_range': (
                None if self.valid_z_range is None else
                list(self.valid_z_range)),
            'constant_caveat': self.constant_caveat,
            'notes': list(self.notes),
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def to_csv_rows(self):
        yield ['label', 'value', 'equation_tag']
        for term in self.terms:
            yield [term.label, repr(term.value), term.equation_tag]

    def to_csv(self):
        out = io.StringIO()
        csv.writer(out, lineterminator='\n').writerows(self.to_csv_rows())
        return out.getvalue()


def required_alphas(p):
    "Return the moment exponents the f(S) bounds need for exponent *p*"
    p = float(p)
    q = p / (p - 1)
    return sorted({2.0, 3.0, p, min(p, 3.0), q, 2 * q})


def _check_p(p):
    if not p > 2:
        raise BoundError(f'p must exceed 2, not {p}')


def _check_sigma(inputs):
    if not inputs.sigma > 0:
        raise DegenerateLinearization()


def _check_family(family, mode, seed):
    mean = family.expect_sum(lambda x: x[:, 0], mode=mode, seed=seed)
    variance = family.expect_sum(lambda x: x[:, 0] ** 2, mode=mode, seed=seed)
    # Monte Carlo families get the usual allowance in standard errors
    tol = MOMENT_TOL + MC_SIGMAS * mean.stderr
    if abs(mean.value) > tol:
        raise BoundError('the xi family must be centered')
    if abs(variance.value - 1) > MOMENT_TOL + MC_SIGMAS * variance.stderr:
        raise BoundError(
            f'the xi family must have unit total variance, not '
            f'{variance.value!r}')


def linearization_scalars(family, p=3.0, mode=None, seed=0):
    """
    Compute :class:`LinearizationScalars` for a :class:`Family` of real
    summands :math:`\\xi_i`. Expectations are exact when every member has
    atoms or a closed form, Monte Carlo otherwise (the same draws serve every
    bisection step, so the map stays monotone). *delta* is the upper end of
    the final bracket, so the defining sum there is at least 1/2.
    """
    if not isinstance(family, Family):
        family = Family.of(*family)
    if mode is None:
        mode = ('exact' if all(spec.law.exact for spec, _ in family.members)
                else 'monte-carlo')
    _check_family(family, mode, seed)

    def moment(func):
        return family.expect_sum(func, mode=mode, seed=seed).value

    def spread(delta):
        return moment(
            lambda x: np.abs(x[:, 0]) * np.minimum(delta, np.abs(x[:, 0])))

    lo, hi = 0.0, 1.0
    while spread(hi) < 0.5:
        hi *= 2
    while hi - lo > DELTA_TOL:
        mid = 0.5 * (lo + hi)
        if spread(mid) >= 0.5:
            hi = mid
        else:
            lo = mid
    beta = moment(lambda x: np.minimum(x[:, 0] ** 2, np.abs(x[:, 0]) ** 3))
    sigma_p = moment(lambda x: np.abs(x[:, 0]) ** p) ** (1 / p)
    logger.debug('delta=%.12g beta=%.12g sigma_%g=%.12g', hi, beta, p, sigma_p)
    return LinearizationScalars(hi, beta, sigma_p, p)


def lambda_alpha(inputs, alpha):
    """
    Return :math:`\\lambda_\\alpha = \\|L\\| s_\\alpha / \\sigma`. For i.i.d.
    profiles this equals :math:`\\|L\\|\\|V\\|_\\alpha/(\\sigma_1
    n^{1/2-1/\\alpha})`. An infinite :math:`s_\\alpha` raises
    :exc:`~besstat.distributions.InfiniteMomentError`.
    """
    _check_sigma(inputs)
    return inputs.norm_L * inputs.profile.s(alpha) / inputs.sigma


def compute_uv(inputs):
    "Return the pair ``(u, v)`` of the uniform f(S) bound"
    p = inputs.p
    _check_p(p)
    if p >= 3:
        u = inputs.lam(2 * inputs.q)
        v = inputs.D * inputs.lam(2)
    else:
        lp = inputs.lam(p)
        u = lp ** ((p - 1) / 2)
        v = inputs.D * inputs.lam(2) + lp ** p
    return u, v


def gamma_terms(inputs):
    "Return ``(Gamma, Gamma1)``; Gamma1 adds the truncation remainder"
    u, v = compute_uv(inputs)
    lp = inputs.lam(inputs.p)
    lq = inputs.lam(inputs.q)
    gamma = (
        inputs.C1 * inputs.sigma / inputs.norm_L ** 2 *
        ((u ** 2 + v ** 2) * (1 + lp) + lp * lq * v))
    gamma1 = gamma + lp ** inputs.q_tilde * (1 + lp)
    return gamma, gamma1


def _check_probability(name, value):
    if not 0 <= value <= 1:
        raise BoundError(f'{name} must be a probability, not {value!r}')


def uniform_fS_bound(inputs, prob_S_exceeds_eps=None, tail_at_sigma_over_L=None,
                     user_constant=1.0):
    """
    Uniform bound on :math:`|P(f(S)/\\sigma \\le z) - P(L(S)/\\sigma \\le z)|`.

    Without *prob_S_exceeds_eps* the Chebyshev fallback
    :math:`D^2 s_2^2/\\epsilon^2` is used; without *tail_at_sigma_over_L* the
    profile's tail sum at :math:`\\sigma/\\|L\\|` is.
    """
    _check_sigma(inputs)
    _check_p(inputs.p)
    notes = []
    if prob_S_exceeds_eps is None:
        first = (inputs.D * inputs.profile.s(2) / inputs.epsilon) ** 2
        first_tag = 'chebyshev:D^2 s_2^2/eps^2'
        notes.append('P(|S| > eps) replaced by its Chebyshev bound')
    else:
        _check_probability('P(|S| > eps)', prob_S_exceeds_eps)
        first = prob_S_exceeds_eps
        first_tag = 'fS-uniform:outside-ball'
    if tail_at_sigma_over_L is None:
        tail_at_sigma_over_L = inputs.tail(inputs.sigma / inputs.norm_L)
    r = min(inputs.p, 3.0)
    gamma, _ = gamma_terms(inputs)
    return BoundReport.build('uniform f(S) bound', [
        ('P(|S| > eps)', first, first_tag),
        ('lambda_{p^3}^{p^3}', inputs.lam(r) ** r, 'fS-uniform:lyapunov'),
        ('G_X(sigma/|L|)', tail_at_sigma_over_L, 'fS-uniform:truncation'),
        ('Gamma', gamma, 'fS-uniform:gamma'),
    ], user_constant=user_constant, notes=tuple(notes))


def nonuniform_range(inputs):
    return (1.0, 3 * inputs.C1 * inputs.epsilon ** 2 / inputs.sigma)


def nonuniform_fS_bound(inputs, z, user_constant=1.0):
    """
    Non-uniform bound on :math:`|P(f(S)/\\sigma \\le z) - P(L(S)/\\sigma \\le
    z)|`, valid for :math:`1 \\le |z| \\le 3C_1\\epsilon^2/\\sigma`. The last
    two terms are present only when :math:`|z|^p G_X(2\\sigma|z|/(3p\\|L\\|))
    < 1`.
    """
    _check_sigma(inputs)
    _check_p(inputs.p)
    valid = nonuniform_range(inputs)
    a = abs(z)
    if not valid[0] <= a <= valid[1]:
        raise RangeViolation(z, valid)
    p, C1, sigma = inputs.p, inputs.C1, inputs.sigma
    terms = [
        ('G_X(sigma|z|/(6pC1 eps))',
         inputs.tail(sigma * a / (6 * p * C1 * inputs.epsilon)),
         'fS-nonuniform:tail'),
        ('(D^2 C1 s_2^2/sigma)^p/|z|^p',
         (inputs.D ** 2 * C1 * inputs.profile.s(2) ** 2 / sigma) ** p / a ** p,
         'fS-nonuniform:remainder'),
    ]
    notes = []
    if a ** p * inputs.tail(2 * sigma * a / (3 * p * inputs.norm_L)) < 1:
        _, gamma1 = gamma_terms(inputs)
        terms.extend([
            ('G_X(sigma/|L|)/|z|^p',
             inputs.tail(sigma / inputs.norm_L) / a ** p,
             'fS-nonuniform:gated-tail'),
            ('Gamma1 e^{-|z|/3}', gamma1 * math.exp(-a / 3),
             'fS-nonuniform:gated-gamma1'),
        ])
    else:
        notes.append('indicator closed; gated terms omitted')
    return BoundReport.build(
        'non-uniform f(S) bound', terms, z=z, valid_z_range=valid,
        user_constant=user_constant, notes=tuple(notes))


def _pairs(family):
    """
    Yield ``(values, probs, count)`` for a family whose members are
    discrete; one-dimensional members give :math:`\\eta = \\xi`, two
    dimensional ones the pair :math:`(\\xi, \\eta)` in their columns.
    """
    for spec, count in family.members:
        atoms = spec.law.atoms()
        if atoms is None:
            raise BoundError(f'{spec.kind} members have no atoms')
        values, probs = atoms
        if values.shape[1] == 1:
            values = np.hstack([values, values])
        elif values.shape[1] != 2:
            raise BoundError('members must be xi or (xi, eta) atoms')
        if (np.abs(values[:, 0]) > np.abs(values[:, 1]) * (1 + 1e-12)).any():
            raise BoundError('|xi| <= |eta| is violated on the atoms')
        yield values, probs, count


def linear_BE_bound(family, z, p=3.0):
    """
    Return the report of :math:`B_1(z)`, :math:`B_2(z, p)` and their minimum
    for the linear statistic :math:`W = \\sum_i \\xi_i` built from a discrete
    :class:`Family` of :math:`\\xi_i` (or :math:`(\\xi_i, \\eta_i)`) atoms.
    """
    if p < 2:
        raise BoundError(f'p must be at least 2, not {p}')
    if not isinstance(family, Family):
        family = Family.of(*family)
    a = abs(z) + 1
    b1, g_eta, g_xi, sigma3 = [], [], [], []
    for values, probs, count in _pairs(family):
        xi, eta = np.abs(values[:, 0]), np.abs(values[:, 1])
        r = xi / a
        b1.append(count * math.fsum(probs * np.minimum(r ** 2, r ** 3)))
        g_eta.append(count * math.fsum(probs[eta > a / (p / 2 + 1)]))
        g_xi.append(count * math.fsum(probs[xi > 1]))
        sigma3.append(count * math.fsum(probs * xi ** 3))
    B1 = math.fsum(b1)
    G_eta = math.fsum(g_eta)
    B2 = G_eta
    if a ** p * G_eta < 1:
        B2 += math.fsum(g_xi) / a ** p + math.fsum(sigma3) / math.exp(abs(z) / 2)
    return BoundReport.build('linear Berry-Esseen bound', [
        ('B1', B1, 'linear:B1'),
        ('B2', B2, 'linear:B2'),
    ], z=z, notes=(f'B = min(B1, B2) = {min(B1, B2)!r}',))


def linear_fS_bound(inputs, z):
    """
    :math:`B_1` and :math:`B_2` for :math:`L(S)/\\sigma` from the profile
    alone, via :math:`\\xi_i = L(X_i)/\\sigma` and :math:`\\eta_i =
    \\|L\\|\\|X_i\\|/\\sigma`. :math:`B_1` uses the moment envelope
    :math:`\\min(\\lambda_2^2/(|z|+1)^2, \\lambda_3^3/(|z|+1)^3)`.
    """
    _check_sigma(inputs)
    p = inputs.p
    a = abs(z) + 1
    scale = inputs.sigma / inputs.norm_L
    B1 = min((inputs.lam(2) / a) ** 2, (inputs.lam(3) / a) ** 3)
    G_eta = inputs.tail(scale * a / (p / 2 + 1))
    B2 = G_eta
    if a ** p * G_eta < 1:
        B2 += (inputs.tail(scale) / a ** p
               + inputs.lam(3) ** 3 / math.exp(abs(z) / 2))
    return BoundReport.build('linear Berry-Esseen bound for L(S)', [
        ('B1', B1, 'linear-LS:B1'),
        ('B2', B2, 'linear-LS:B2'),
    ], z=z, notes=(f'B = min(B1, B2) = {min(B1, B2)!r}',))


def general_uniform_bound(scalars, expect_w_delta_bar, expect_xi_delta_sum,
                          prob_eta_exceeds_one):
    """
    Return the three uniform bounds for a statistic :math:`T` approximated
    by :math:`W`, given the expectations :math:`E|W\\bar\\Delta|` and
    :math:`\\sum_i E|\\xi_i(\\bar\\Delta - \\Delta_i)|` and
    :math:`P(\\max_i|\\eta_i| > 1)`. These carry explicit constants, so
    the reports have no caveat.
    """
    _check_probability('P(max |eta| > 1)', prob_eta_exceeds_one)
    common = [
        ('E|W Delta_bar|', expect_w_delta_bar, 'ub:cross'),
        ('sum E|xi (Delta_bar - Delta_i)|', expect_xi_delta_sum, 'ub:leave-one-out'),
        ('P(max |eta| > 1)', prob_eta_exceeds_one, 'ub:truncation'),
    ]
    return (
        BoundReport.build('uniform T vs W bound (delta form)',
                          [('4 delta', 4 * scalars.delta, 'ub:delta')] + common,
                          constant_caveat=''),
        BoundReport.build('uniform T vs W bound (beta form)',
                          [('2 beta', 2 * scalars.beta, 'ub:beta')] + common,
                          constant_caveat=''),
        BoundReport.build('uniform T vs normal bound',
                          [('6.1 beta', 6.1 * scalars.beta, 'ub:normal')] + common,
                          constant_caveat=''),
    )


def tau_term(scalars, norm_delta_bar_q, xi_delta_pairs):
    """
    Return :math:`\\tau = (\\|\\bar\\Delta\\|_q + \\delta)(1 + \\sigma_p) +
    \\sum_i \\|\\xi_i\\|_p \\|\\bar\\Delta - \\Delta_i\\|_q` where
    *xi_delta_pairs* iterates over :math:`(\\|\\xi_i\\|_p,
    \\|\\bar\\Delta-\\Delta_i\\|_q)`.
    """
    return (
        (norm_delta_bar_q + scalars.delta) * (1 + scalars.sigma_p) +
        math.fsum(xi * delta for xi, delta in xi_delta_pairs))


def general_nonuniform_bound(z, tau, prob_delta_exceeds, xi_tail, cross_sum):
    """
    The non-uniform bound :math:`\\gamma_z + \\tau e^{-|z|/3}`, with
    :math:`\\gamma_z` itemized as :math:`P(|\\Delta| > (|z|+1)/3)`
    (*prob_delta_exceeds*), :math:`G_\\xi((|z|+1)/3)` (from *xi_tail*) and
    the leave-one-out sum *cross_sum* (see
    :func:`besstat.simulation.gamma_z_estimate`).
    """
    _check_probability('P(|Delta| > (|z|+1)/3)', prob_delta_exceeds)
    a = abs(z)
    return BoundReport.build('non-uniform T vs W bound', [
        ('P(|Delta| > (|z|+1)/3)', prob_delta_exceeds, 'nub:delta-tail'),
        ('G_xi((|z|+1)/3)', xi_tail((a + 1) / 3), 'nub:xi-tail'),
        ('sum P(|W - xi_i| > (|z|-2)/3) P(|eta_i| > 1)', cross_sum,
         'nub:cross'),
        ('tau e^{-|z|/3}', tau * math.exp(-a / 3), 'nub:tau'),
    ], z=z)


def corollary_nonuniform_bound(z, p, tau, prob_delta_exceeds, eta_tail):
    """
    The simplified non-uniform bound for :math:`|z| \\ge 1`:
    :math:`P(|\\Delta| > |z|/3) + G_\\eta(2|z|/(3p))` plus, when
    :math:`|z|^p G_\\eta(2|z|/(3p)) < 1`, :math:`G_\\eta(1)/|z|^p + \\tau
    e^{-|z|/3}`.
    """
    a = abs(z)
    if a < 1:
        raise RangeViolation(z, (1.0, math.inf))
    _check_probability('P(|Delta| > |z|/3)', prob_delta_exceeds)
    g = eta_tail(2 * a / (3 * p))
    terms = [
        ('P(|Delta| > |z|/3)', prob_delta_exceeds, 'nub2:delta-tail'),
        ('G_eta(2|z|/(3p))', g, 'nub2:eta-tail'),
    ]
    if a ** p * g < 1:
        terms.extend([
            ('G_eta(1)/|z|^p', eta_tail(1.0) / a ** p, 'nub2:gated-tail'),
            ('tau e^{-|z|/3}', tau * math.exp(-a / 3), 'nub2:gated-tau'),
        ])
    return BoundReport.build(
        'non-uniform T vs W bound (|z| >= 1)', terms, z=z,
        valid_z_range=(1.0, math.inf))


def _model_C1(model):
    return max(model.M / 2, model.norm_L / model.epsilon)


def _check_model(model):
    if not model.sigma1 > 0:
        raise DegenerateLinearization(
            f'{model.kind} model has sigma1 = {model.sigma1!r}; degenerate')


def iid_inputs(model, n, p=3.0, profile=None, mode=None, seed=0):
    """
    Return the :class:`BoundInputs` for :math:`f(\\bar V)` with *n* i.i.d.
    observations: :math:`X_i = V_i/n` and :math:`\\sigma = \\sigma_1/\\sqrt n`.
    The profile defaults to the model's own V-profile.
    """
    _check_model(model)
    if profile is None:
        profile = model.v_profile(required_alphas(p), n, mode=mode, seed=seed)
    return BoundInputs(
        norm_L=model.norm_L,
        sigma=model.sigma1 / math.sqrt(n),
        M=model.M,
        epsilon=model.epsilon,
        D=1.0,
        p=p,
        profile=profile)


def iid_p3_constants(model, n):
    """
    Return ``(A1, A2)`` of the i.i.d. non-uniform bound with three moments:
    :math:`|P(\\cdot \\le z) - \\Phi(z)| \\le A(A_1/|z|^3 +
    A_2e^{-|z|/3})/\\sqrt n`.
    """
    _check_model(model)
    C1 = _model_C1(model)
    eps, s1, norm_L = model.epsilon, model.sigma1, model.norm_L
    V2, V3 = model.v_norm(2), model.v_norm(3)
    A1 = ((C1 * eps) ** 3 * V3 ** 3 + C1 ** 3 * V2 ** 6 / n) / s1 ** 3
    A2 = ((C1 * V3 ** 2 / s1 + norm_L ** 3 * V3 ** 3 / s1 ** 3)
          * (1 + norm_L * V3 / s1))
    return A1, A2


def iid_p3_uniform(model, n, user_constant=1.0):
    "Uniform i.i.d. bound :math:`(A_2 + \\|V\\|_2^2/(\\sqrt n\\epsilon^2))/\\sqrt n`"
    _, A2 = iid_p3_constants(model, n)
    root = math.sqrt(n)
    return BoundReport.build('uniform i.i.d. bound (p = 3)', [
        ('A2/sqrt(n)', A2 / root, 'iid3:uniform-A2'),
        ('|V|_2^2/(n eps^2)', model.v_norm(2) ** 2 / (n * model.epsilon ** 2),
         'iid3:uniform-ball'),
    ], user_constant=user_constant)


def iid_p3_range(model, n):
    return (1.0, 3 * _model_C1(model) * model.epsilon ** 2 * math.sqrt(n)
            / model.sigma1)


def iid_p3_shape(model, n, z):
    """
    Return :math:`(A_1/|z|^3 + A_2e^{-|z|/3})/\\sqrt n`, raising
    :exc:`RangeViolation` outside :math:`1 \\le |z| \\le
    3C_1\\epsilon^2\\sqrt n/\\sigma_1`.
    """
    A1, A2 = iid_p3_constants(model, n)
    valid = iid_p3_range(model, n)
    a = abs(z)
    if not valid[0] <= a <= valid[1]:
        raise RangeViolation(z, valid)
    return (A1 / a ** 3 + A2 * math.exp(-a / 3)) / math.sqrt(n)


def iid_nonuniform_bound(model, n, z, p=3.0, profile=None, user_constant=1.0):
    "Non-uniform f(S) bound for the i.i.d. mean of *n* observations"
    inputs = iid_inputs(model, n, p, profile)
    report = nonuniform_fS_bound(inputs, z, user_constant=user_constant)
    return report._replace(title=f'non-uniform i.i.d. bound (n = {n})')


def suboptimal_exp_bound(n, p, norms, M, epsilon, be_constant=BE_CONSTANT,
                         D=1.0):
    """
    Uniform i.i.d. bound from the exponential inequality for truncated sums.
    *norms* maps ``'V2'``, ``'Vp'``, ``'LV'`` (:math:`\\|L(V)\\|_{p\\wedge3}`)
    and ``'sigma1'`` to their values. When the truncated-sum mean check
    :math:`2D\\sqrt n\\|V\\|_2 + n\\|V\\|_2^2/y \\le x/2` fails, the
    bound is trivial and reported as 1.
    """
    _check_p(p)
    if n < 3:
        raise BoundError(f'n must be at least 3, not {n}')
    try:
        V2, Vp, LV, s1 = (norms[key] for key in ('V2', 'Vp', 'LV', 'sigma1'))
    except KeyError as e:
        raise BoundError(f'missing norm {e.args[0]}')
    if math.isinf(Vp):
        raise InfiniteMomentError(p)
    if not s1 > 0:
        raise DegenerateLinearization()
    log_n = math.log(n)
    if p >= 3:
        x = 2 * math.e * V2 * math.sqrt(n * log_n)
        y = math.e * V2 * math.sqrt(n / log_n)
    else:
        x = 2 * math.e * V2 * n ** ((5 - p) / 4)
        y = math.e * V2 * math.sqrt(n)
    delta = M * x ** 2 / (2 * s1 * n ** 1.5)
    r = min(p, 3.0)
    notes = (f'x = {x!r}', f'y = {y!r}', f'delta = {delta!r}')
    if 2 * D * math.sqrt(n) * V2 + n * V2 ** 2 / y > x / 2:
        logger.warning('truncated-sum mean check fails at n=%d; bound is trivial', n)
        return BoundReport.build(
            'suboptimal exponential bound', [('trivial', 1.0, 'subexp:trivial')],
            constant_caveat='', notes=notes + ('mean check failed',))
    return BoundReport.build('suboptimal exponential bound', [
        ('delta/sqrt(2 pi)', delta / math.sqrt(2 * math.pi), 'subexp:smoothing'),
        ('classical BE', be_constant * LV ** r / (n ** ((r - 2) / 2) * s1 ** r),
         'subexp:berry-esseen'),
        ('|V|_2^2/(n eps^2)', V2 ** 2 / (n * epsilon ** 2), 'subexp:ball'),
        ('|V|_p^p n/y^p', Vp ** p * n / y ** p, 'subexp:truncation'),
        ('exponential', (2 * math.e * n * V2 ** 2 / (x * y)) ** (x / (2 * y)),
         'subexp:exponential'),
    ], constant_caveat='', notes=notes)


def scale_inputs(inputs, c, d):
    """
    Return *inputs* after the change of units :math:`X \\mapsto cX` for a
    statistic of dimension *d*.
    """
    if not c > 0:
        raise BoundError(f'scale must be positive, not {c}')
    return inputs._replace(
        norm_L=c ** (d - 1) * inputs.norm_L,
        sigma=c ** d * inputs.sigma,
        epsilon=c * inputs.epsilon,
        M=c ** (d - 2) * inputs.M,
        profile=inputs.profile.scaled(c))


