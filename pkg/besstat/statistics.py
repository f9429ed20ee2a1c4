# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
The application statistics (Student's T, Pearson's R and Hotelling's
:math:`T^2`) and their representation as smooth functions :math:`f(\\bar V)`
of the mean of centered vectors :math:`V_i`.

A :class:`SmoothStatisticModel` carries the embedding :math:`X \\mapsto V`,
the function *f*, the gradient of its derivative *L* at 0, the standard
deviation :math:`\\sigma_1` of :math:`L(V)`, and a numerically certified
smoothness constant *M* on the ball of radius :math:`\\epsilon`.
"""

import json
import math
import logging
import typing as t

import numpy as np

from .const import (
    EPSILON,
    SAFETY_FACTOR,
    CERTIFY_POINTS,
    COND_LIMIT,
    MC_SIGMAS,
    MOMENT_TOL,
    DEGENERACY_RTOL,
    ZERO_VARIANCE_RTOL,
)
from .distributions import (
    DistributionError,
    DistributionSpec,
    generator,
    expect,
    default_mode,
    moment_profile,
)

__all__ = [
    'KINDS',
    'UNDEFINED',
    'ModelError',
    'DegeneracyError',
    'SmoothnessError',
    'student_T',
    'pearson_R',
    'hotelling_T2',
    'student_T_batch',
    'pearson_R_batch',
    'hotelling_T2_batch',
    'SmoothStatisticModel',
    'DegeneracyReport',
    'build_model',
    'user_model',
    'degeneracy_check',
    'smoothness_certify',
    'linearization_identity_check',
    'degenerate_student_spec',
    'degenerate_pearson_spec',
    'degenerate_hotelling_spec',
    'standardize',
]


logger = logging.getLogger('besstat.statistics')

KINDS = ('student', 'pearson', 'hotelling')


class ModelError(ValueError):
    "Base class for statistic model errors"


class DegeneracyError(ModelError):
    "Exception raised when the linearized statistic has zero variance"
    def __init__(self, report):
        super().__init__(
            f'the linearization is degenerate (sigma1 = {report.sigma1:.3g}); '
            f'{report.witness}')
        self.report = report


class SmoothnessError(ModelError):
    "Exception raised when f cannot be evaluated inside the smoothness ball"


class Undefined:
    """
    Type of the :data:`UNDEFINED` sentinel returned by the scalar statistics
    when their denominator vanishes.
    """
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'UNDEFINED'

    def __bool__(self):
        return False

    def __reduce__(self):
        return (Undefined, ())


UNDEFINED = Undefined()


def _scalar(value):
    return UNDEFINED if math.isnan(value) else float(value)


def student_T_batch(samples):
    """
    Return Student's statistic :math:`\\sqrt n\\bar X/S` (with the 1/n
    empirical deviation *S*) for each row of the ``(r, n)`` array *samples*.
    Rows with zero empirical variance give NaN.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[-1]
    mean = x.mean(axis=-1)
    var = ((x - mean[..., np.newaxis]) ** 2).mean(axis=-1)
    undefined = var <= ZERO_VARIANCE_RTOL * (x ** 2).mean(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        result = math.sqrt(n) * mean / np.sqrt(var)
    return np.where(undefined, np.nan, result)


def pearson_R_batch(samples):
    """
    Return Pearson's product-moment correlation for each ``(n, 2)`` block of
    the ``(r, n, 2)`` array *samples*; NaN where a marginal variance is 0.
    """
    xy = np.asarray(samples, dtype=float)
    centered = xy - xy.mean(axis=-2, keepdims=True)
    dx, dy = centered[..., 0], centered[..., 1]
    vx = (dx ** 2).mean(axis=-1)
    vy = (dy ** 2).mean(axis=-1)
    scale = (xy ** 2).mean(axis=-2)
    undefined = (
        (vx <= ZERO_VARIANCE_RTOL * scale[..., 0]) |
        (vy <= ZERO_VARIANCE_RTOL * scale[..., 1]))
    with np.errstate(divide='ignore', invalid='ignore'):
        result = np.clip((dx * dy).mean(axis=-1) / np.sqrt(vx * vy), -1, 1)
    return np.where(undefined, np.nan, result)


def hotelling_T2_batch(samples):
    """
    Return Hotelling's :math:`n\\bar X^\\top (S^2)^{-1}\\bar X` for each
    ``(n, k)`` block of *samples*, with :math:`S^2` the 1/n empirical
    covariance. Blocks whose covariance has condition number beyond
    :data:`~besstat.const.COND_LIMIT` give NaN.
    """
    x = np.asarray(samples, dtype=float)
    n, k = x.shape[-2:]
    mean = x.mean(axis=-2)
    centered = x - mean[..., np.newaxis, :]
    cov = np.einsum('...ni,...nj->...ij', centered, centered) / n
    with np.errstate(divide='ignore', invalid='ignore'):
        cond = np.linalg.cond(cov)
    undefined = ~(cond <= COND_LIMIT)
    safe = np.where(undefined[..., np.newaxis, np.newaxis], np.eye(k), cov)
    solved = np.linalg.solve(safe, mean[..., np.newaxis])[..., 0]
    result = n * np.einsum('...i,...i->...', mean, solved)
    return np.where(undefined, np.nan, result)


def _sample_array(sample, columns=None):
    x = np.asarray(sample, dtype=float)
    if columns == 1:
        x = x.reshape(-1)
    elif x.ndim != 2 or (columns is not None and x.shape[1] != columns):
        raise ModelError(f'sample must be a list of {columns or "k"}-vectors')
    return x


def student_T(sample):
    "Return Student's T of *sample*, or :data:`UNDEFINED` if it is constant"
    x = _sample_array(sample, 1)
    if len(x) < 2:
        raise ModelError('student_T needs at least 2 observations')
    return _scalar(student_T_batch(x))


def pearson_R(sample):
    "Return Pearson's R of *sample* (pairs), or :data:`UNDEFINED`"
    xy = _sample_array(sample, 2)
    if len(xy) < 2:
        raise ModelError('pearson_R needs at least 2 observations')
    return _scalar(pearson_R_batch(xy))


def hotelling_T2(sample):
    "Return Hotelling's T^2 of *sample* (k-vectors), or :data:`UNDEFINED`"
    x = _sample_array(sample)
    n, k = x.shape
    if n < k + 1:
        raise ModelError(f'hotelling_T2 needs at least {k + 1} observations')
    return _scalar(hotelling_T2_batch(x))


BATCH_STATISTICS = {
    'student': lambda samples: student_T_batch(samples[..., 0]),
    'pearson': pearson_R_batch,
    'hotelling': hotelling_T2_batch,
}


# Each kind maps params to (embed, f, gradient); embed takes (m, k)
# observations and f takes (m, d) points, both vectorized over rows.

def _student_parts(params):
    mu = params['mu']

    def embed(x):
        y = x[:, 0] - mu
        return np.column_stack([y, y ** 2 - 1])

    def f(x):
        return (x[:, 0] + mu) / np.sqrt(x[:, 1] + 1 - x[:, 0] ** 2) - mu

    return embed, f, np.array([1.0, -mu / 2])


def _pearson_parts(params):
    rho = params['rho']

    def embed(xy):
        x, y = xy[:, 0], xy[:, 1]
        return np.column_stack([x, y, x ** 2 - 1, y ** 2 - 1, x * y - rho])

    def f(v):
        x1, x2, x3, x4, x5 = v.T
        return (
            (x5 + rho - x1 * x2) /
            (np.sqrt(x3 + 1 - x1 ** 2) * np.sqrt(x4 + 1 - x2 ** 2)) - rho)

    return embed, f, np.array([0.0, 0.0, -rho / 2, -rho / 2, 1.0])


def _hotelling_parts(params):
    mu = np.asarray(params['mu'], dtype=float)
    k = len(mu)
    eye = np.eye(k)

    def embed(x):
        y = x - mu
        outer = y[:, :, np.newaxis] * y[:, np.newaxis, :] - eye
        return np.hstack([y, outer.reshape(len(x), k * k)])

    def f(v):
        x1 = v[:, :k]
        x2 = v[:, k:].reshape(len(v), k, k)
        a = eye + x2 - x1[:, :, np.newaxis] * x1[:, np.newaxis, :]
        b = x1 + mu
        solved = np.linalg.solve(a, b[:, :, np.newaxis])[:, :, 0]
        return np.einsum('ij,ij->i', b, solved) - mu @ mu

    gradient = np.concatenate([2 * mu, -np.outer(mu, mu).reshape(-1)])
    return embed, f, gradient


PARTS = {
    'student': _student_parts,
    'pearson': _pearson_parts,
    'hotelling': _hotelling_parts,
}


def _check_params(kind, params, observation):
    errors = []
    if kind not in PARTS:
        raise ModelError(f'unknown statistic kind {kind!r}')
    if kind == 'student':
        unknown = set(params) - {'mu'}
        if not isinstance(params.get('mu'), (int, float)):
            errors.append('student requires a real mu')
        if observation is not None and observation.dimension != 1:
            errors.append('student observations must be one-dimensional')
    elif kind == 'pearson':
        unknown = set(params) - {'rho'}
        rho = params.get('rho')
        if not isinstance(rho, (int, float)) or not -1 < rho < 1:
            errors.append('pearson requires -1 < rho < 1')
        if observation is not None and observation.dimension != 2:
            errors.append('pearson observations must be two-dimensional')
    else:
        unknown = set(params) - {'mu'}
        mu = params.get('mu')
        if not isinstance(mu, (list, tuple)) or not mu:
            errors.append('hotelling requires mu as a list of reals')
        elif observation is not None and observation.dimension != len(mu):
            errors.append(
                f'hotelling observations must have dimension {len(mu)}')
    if unknown:
        errors.append(f'unknown {kind} parameter(s): {", ".join(sorted(unknown))}')
    if errors:
        raise ModelError('; '.join(errors))


def _sixth_moment_infinite(spec):
    if spec.kind == 'heavy-tail-logcorrected':
        return spec.params['p'] < 6
    if spec.kind == 'product-of-marginals':
        return any(
            _sixth_moment_infinite(DistributionSpec.from_dict(m))
            for m in spec.params['marginals'])
    return False


def _moment(spec, func, mode, seed):
    try:
        return expect(spec, func, mode=mode, seed=seed)
    except DistributionError as e:
        raise ModelError(str(e))


def _check_centered(kind, embed, observation, mode, seed):
    d = embed(np.zeros((1, observation.dimension))).shape[1]
    problems = []
    for i in range(d):
        est = _moment(observation, lambda x: embed(x)[:, i], mode, seed)
        if abs(est.value) > MOMENT_TOL + MC_SIGMAS * est.stderr:
            problems.append(f'E V[{i}] = {est.value:.3g}')
    if problems:
        raise ModelError(
            f'observations are not standardized as {kind} requires '
            f'({", ".join(problems)})')


def _sigma1(embed, gradient, observation, mode, seed):
    second = _moment(
        observation, lambda x: (embed(x) @ gradient) ** 2, mode, seed).value
    scale = math.sqrt(_moment(
        observation, lambda x: np.einsum('ij,ij->i', embed(x), embed(x)),
        mode, seed).value) * np.linalg.norm(gradient)
    return math.sqrt(max(second, 0.0)), scale


class DegeneracyReport(t.NamedTuple):
    """
    Result of :func:`degeneracy_check`. *scale* is
    :math:`\\|L\\|\\|V\\|_2`, the Cauchy-Schwarz bound on :math:`\\sigma_1`
    the degeneracy tolerance is relative to; *structural* records the
    support test on atoms (None when the law has no atoms).
    """
    sigma1: float
    degenerate: bool
    witness: str
    scale: float = 1.0
    structural: t.Optional[bool] = None

    def as_dict(self):
        return self._asdict()


class SmoothStatisticModel:
    """
    A statistic written as :math:`f(\\bar V)` with :math:`E V = 0`,
    :math:`f(0) = 0` and :math:`|f(x) - L(x)| \\le (M/2)\\|x\\|^2` on
    :math:`\\|x\\| \\le \\epsilon`.

    *norm_L* is the value fed to the bounds (for Hotelling the closed-form
    upper bound :math:`\\|\\mu\\|\\sqrt{4+\\|\\mu\\|^2}`); *norm_L_exact* is
    the Euclidean norm of the gradient.
    """
    def __init__(self, kind, params, embed, f, gradient, sigma1, epsilon, M,
                 *, observation=None, mode=None, seed=0):
        self.kind = kind
        self.params = params
        self.embed = embed
        self.f = f
        self.gradient = np.asarray(gradient, dtype=float)
        self.sigma1 = sigma1
        self.epsilon = epsilon
        self.M = M
        self.observation = observation
        self.mode = mode
        self.seed = seed
        self._v_norms = {}

    def __repr__(self):
        return (
            f'<SmoothStatisticModel kind={self.kind} params={self.params} '
            f'sigma1={self.sigma1:.6g} M={self.M:.6g}>')

    @property
    def dimension(self):
        return len(self.gradient)

    @property
    def norm_L_exact(self):
        return float(np.linalg.norm(self.gradient))

    @property
    def norm_L(self):
        if self.kind == 'hotelling':
            mu = np.linalg.norm(self.params['mu'])
            return float(mu * math.sqrt(4 + mu ** 2))
        return self.norm_L_exact

    def L(self, x):
        return np.asarray(x, dtype=float) @ self.gradient

    def replace(self, **kwargs):
        attrs = dict(
            kind=self.kind, params=self.params, embed=self.embed, f=self.f,
            gradient=self.gradient, sigma1=self.sigma1, epsilon=self.epsilon,
            M=self.M, observation=self.observation, mode=self.mode,
            seed=self.seed)
        attrs.update(kwargs)
        return SmoothStatisticModel(**attrs)

    def _observation(self):
        if self.observation is None:
            raise ModelError(f'{self.kind} model has no observation law')
        return self.observation

    def v_profile(self, alphas, n=1, mode=None, seed=None):
        "Return the :class:`MomentProfile` of :math:`X_i = V_i/n`"
        observation = self._observation()
        return moment_profile(
            observation, alphas, n,
            mode=mode or self.mode or default_mode(observation),
            transform=self.embed,
            seed=self.seed if seed is None else seed)

    def v_norm(self, alpha):
        "Return :math:`\\|V\\|_\\alpha = (E\\|V\\|^\\alpha)^{1/\\alpha}`"
        alpha = float(alpha)
        try:
            return self._v_norms[alpha]
        except KeyError:
            value = self.v_profile([alpha]).norm_V(alpha)
            self._v_norms[alpha] = value
            return value

    def statistic(self, sample):
        return {
            'student': student_T,
            'pearson': pearson_R,
            'hotelling': hotelling_T2,
        }[self.kind](sample)

    def standardize(self, values, n):
        return standardize(self.kind, values, n, self)

    def require_nondegenerate(self):
        "Raise :exc:`DegeneracyError` unless sigma1 is clear of zero"
        if self.observation is None:
            if not self.sigma1 > 0:
                raise DegeneracyError(
                    DegeneracyReport(self.sigma1, True, 'sigma1 is not positive'))
            return self
        report = degeneracy_check(
            self.kind, self.params, self.observation, mode=self.mode,
            seed=self.seed)
        if report.degenerate:
            raise DegeneracyError(report)
        return self

    def as_dict(self):
        return {
            'kind': self.kind,
            'params': self.params,
            'sigma1': self.sigma1,
            'epsilon': self.epsilon,
            'M': self.M,
            'norm_L': self.norm_L,
            'norm_L_exact': self.norm_L_exact,
        }


def _structure(kind, params, values):
    """
    Test the support characterization of degeneracy on the atoms *values*;
    returns ``(holds, witness)``.
    """
    if kind == 'student':
        mu = params['mu']
        if mu == 0:
            return False, 'L(V) = X - mu cannot vanish when Var X = 1'
        root = math.sqrt(1 + mu ** 2)
        points = np.array([mu + (1 + root) / mu, mu + (1 - root) / mu])
        holds = bool(np.isclose(
            values[:, 0, np.newaxis], points, rtol=1e-9, atol=1e-12
        ).any(axis=1).all())
        return holds, (
            f'X is a two-point law on {{{points[0]:.6g}, {points[1]:.6g}}}'
            if holds else 'support is not the two-point degenerate set')
    elif kind == 'pearson':
        rho = params['rho']
        x, y = values[:, 0], values[:, 1]
        residual = x * y - rho / 2 * (x ** 2 + y ** 2)
        holds = bool((np.abs(residual) <= 1e-9 * (x ** 2 + y ** 2 + 1e-300)).all())
        kappa = 0.0 if rho == 0 else (1 - math.sqrt(1 - rho ** 2)) / rho
        lines = (
            'the coordinate axes' if kappa == 0 else
            f'the lines with slopes {kappa:.6g} and {1 / kappa:.6g}')
        return holds, (
            f'(X, Y) lies on {lines}' if holds else
            f'(X, Y) does not lie on {lines}')
    else:
        mu = np.asarray(params['mu'], dtype=float)
        m2 = mu @ mu
        root = math.sqrt(1 + m2)
        levels = np.array([1 + m2 + root, 1 + m2 - root])
        holds = bool(np.isclose(
            (values @ mu)[:, np.newaxis], levels, rtol=1e-9, atol=1e-12
        ).any(axis=1).all())
        return holds, (
            f'X lies on the hyperplanes X.mu in {{{levels[0]:.6g}, '
            f'{levels[1]:.6g}}}' if holds else
            'X does not lie on the two degenerate hyperplanes')


def degeneracy_check(kind, params, observation, mode=None, seed=0):
    """
    Compute :math:`\\sigma_1` for the statistic *kind* under *observation*
    and report whether the linearization is degenerate. For laws with atoms
    the support characterization is tested as well.
    """
    _check_params(kind, params, observation)
    embed, _, gradient = PARTS[kind](params)
    mode = mode or default_mode(observation)
    sigma1, scale = _sigma1(embed, gradient, observation, mode, seed)
    degenerate = sigma1 < DEGENERACY_RTOL * scale
    atoms = observation.law.atoms()
    structural = None
    if atoms is not None:
        values, probs = atoms
        structural, witness = _structure(kind, params, values[probs > 0])
    elif degenerate:
        witness = 'sigma1 vanishes numerically'
    else:
        witness = 'sigma1 is positive'
    if structural is not None and structural != degenerate:
        logger.warning(
            '%s degeneracy: sigma1 test says %s but support test says %s',
            kind, degenerate, structural)
    logger.info('%s %s: sigma1=%.6g (%s)', kind, params, sigma1,
                'degenerate' if degenerate else 'non-degenerate')
    return DegeneracyReport(sigma1, degenerate, witness, scale, structural)


def _ball_points(rng, n, d, epsilon):
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = epsilon * rng.random(n) ** (1 / d)
    return direction * radius[:, np.newaxis]


def _hessians(f, x, h):
    m, d = x.shape
    step = np.eye(d) * h
    centre = f(x)
    hess = np.empty((m, d, d))
    for i in range(d):
        hess[:, i, i] = (f(x + 2 * step[i]) - 2 * centre + f(x - 2 * step[i]))
        for j in range(i + 1, d):
            hess[:, i, j] = hess[:, j, i] = (
                f(x + step[i] + step[j]) - f(x + step[i] - step[j]) -
                f(x - step[i] + step[j]) + f(x - step[i] - step[j]))
    return centre, hess / (4 * h ** 2)


def smoothness_certify(model, epsilon=None, n_points=CERTIFY_POINTS, seed=0,
                       chunk=10_000):
    """
    Estimate the smoothness constant of *model* on the ball of radius
    *epsilon*. Returns ``(M_hat, violations)``: the largest central
    difference Hessian operator norm over *n_points* uniform points of the
    ball (step :math:`10^{-4}\\epsilon`), and the number of those points
    where :math:`|f(x) - L(x)| > (\\hat M/2)\\|x\\|^2(1 + 10^{-6})`.
    """
    epsilon = model.epsilon if epsilon is None else epsilon
    rng = generator(seed, 0)
    d = model.dimension
    h = 1e-4 * epsilon
    m_hat = 0.0
    ratios = []
    with np.errstate(all='ignore'):
        for start in range(0, n_points, chunk):
            x = _ball_points(rng, min(chunk, n_points - start), d, epsilon)
            try:
                values, hess = _hessians(model.f, x, h)
            except np.linalg.LinAlgError as e:
                raise SmoothnessError(f'f fails inside the ball: {e}')
            if not (np.isfinite(values).all() and np.isfinite(hess).all()):
                raise SmoothnessError(
                    f'f is not finite inside the ball of radius {epsilon}')
            m_hat = max(m_hat, float(np.linalg.norm(hess, 2, axis=(1, 2)).max()))
            sq = np.einsum('ij,ij->i', x, x)
            keep = sq > 0
            ratios.append(np.abs(values - model.L(x))[keep] / sq[keep])
    ratios = np.concatenate(ratios)
    violations = int((ratios > m_hat / 2 * (1 + 1e-6)).sum())
    logger.info('certified %s: M_hat=%.9g over %d points, %d violations',
                getattr(model, 'kind', 'f'), m_hat, n_points, violations)
    return m_hat, violations


_certified = {}


def _certified_M(kind, params, parts, epsilon, certify_points, seed):
    key = (kind, json.dumps(params, sort_keys=True), float(epsilon),
           certify_points, seed)
    try:
        return _certified[key]
    except KeyError:
        embed, f, gradient = parts
        probe = SmoothStatisticModel(
            kind, params, embed, f, gradient, math.nan, epsilon, math.nan)
        m_hat, violations = smoothness_certify(
            probe, epsilon, certify_points, seed)
        if violations:
            logger.warning('%s: %d smoothness violations at M_hat=%g',
                           kind, violations, m_hat)
        _certified[key] = SAFETY_FACTOR * m_hat
        return _certified[key]


def build_model(kind, params, observation, *, epsilon=EPSILON,
                certify_points=CERTIFY_POINTS, seed=0, mode=None):
    """
    Construct the :class:`SmoothStatisticModel` for *kind* (``student``,
    ``pearson`` or ``hotelling``) with *params* (``mu`` or ``rho``) under the
    observation law *observation*.

    The observations must be standardized as the statistic requires, which
    is the same as :math:`E V = 0`; an infinite sixth moment is refused.
    *M* is the certified Hessian bound inflated by
    :data:`~besstat.const.SAFETY_FACTOR`, cached per (kind, params,
    epsilon).
    """
    _check_params(kind, params, observation)
    if _sixth_moment_infinite(observation):
        raise ModelError(
            f'{observation.kind} has an infinite sixth moment; the {kind} '
            f'bounds need it finite')
    parts = PARTS[kind](params)
    embed, f, gradient = parts
    mode = mode or default_mode(observation)
    _check_centered(kind, embed, observation, mode, seed)
    sigma1, _ = _sigma1(embed, gradient, observation, mode, seed)
    M = _certified_M(kind, params, parts, epsilon, certify_points, seed)
    logger.info('built %s model: sigma1=%.9g M=%.6g', kind, sigma1, M)
    return SmoothStatisticModel(
        kind, params, embed, f, gradient, sigma1, epsilon, M,
        observation=observation, mode=mode, seed=seed)


def user_model(f, gradient, epsilon=EPSILON, *, M=None, embed=None,
               observation=None, sigma1=None, certify_points=CERTIFY_POINTS,
               seed=0):
    """
    Wrap a user-supplied vectorized *f* (mapping ``(m, d)`` arrays to ``m``
    values) with derivative *gradient* at 0. Without *M* the constant is
    certified numerically (without safety inflation).
    """
    gradient = np.atleast_1d(np.asarray(gradient, dtype=float))
    model = SmoothStatisticModel(
        'user', {}, embed, f, gradient,
        math.nan if sigma1 is None else sigma1, epsilon,
        math.nan if M is None else M, observation=observation, seed=seed)
    if abs(float(f(np.zeros((1, len(gradient))))[0])) > 1e-12:
        raise ModelError('f(0) must be 0')
    if M is None:
        m_hat, _ = smoothness_certify(model, epsilon, certify_points, seed)
        model = model.replace(M=m_hat)
    return model


def linearization_identity_check(kind, params, sample, rtol=1e-10):
    """
    Check that :math:`f(\\bar V)` reproduces the statistic of *sample*
    (:math:`T/\\sqrt n - \\mu`, :math:`R - \\rho` or :math:`(T^2 -
    n\\mu^\\top\\mu)/n`). Returns None when :math:`\\|\\bar V\\| > 1/2`, where
    the identity is not claimed.
    """
    _check_params(kind, params, None)
    embed, f, _ = PARTS[kind](params)
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    n = len(x)
    v_bar = embed(x).mean(axis=0)
    if np.linalg.norm(v_bar) > 0.5:
        return None
    lhs = float(f(v_bar[np.newaxis])[0])
    if kind == 'student':
        rhs = student_T(x[:, 0]) / math.sqrt(n) - params['mu']
    elif kind == 'pearson':
        rhs = pearson_R(x) - params['rho']
    else:
        mu = np.asarray(params['mu'], dtype=float)
        rhs = (hotelling_T2(x) - n * mu @ mu) / n
    return math.isclose(lhs, rhs, rel_tol=rtol, abs_tol=rtol * 1e-2)


def degenerate_student_spec(p=0.3):
    """
    Return ``(params, spec)`` for the two-point law making Student's
    linearization degenerate: a standardized Bernoulli(*p*) shifted to mean
    :math:`\\mu = 2\\sqrt{pq}/(1-2p)`.
    """
    if p == 0.5:
        raise ModelError('p = 1/2 gives mu = infinity')
    mu = 2 * math.sqrt(p * (1 - p)) / (1 - 2 * p)
    return {'mu': mu}, DistributionSpec.bernoulli_shift(p, mu)


def degenerate_pearson_spec(x=1.0, y=1.0, kappa=0.0):
    """
    Return ``(params, spec)`` for the four-point law on the lines with slopes
    *kappa* and :math:`1/\\kappa` through the origin; the marginals are
    standardized and :math:`\\rho = 2\\kappa/(\\kappa^2+1)`.
    """
    if x == 0 or y == 0:
        raise ModelError('x and y must be nonzero')
    c = math.sqrt((x ** -2 + y ** -2) / (kappa ** 2 + 1))
    p = y ** 2 / (x ** 2 + y ** 2)
    q = 1 - p
    values = [
        (c * x, kappa * c * x), (-c * x, -kappa * c * x),
        (kappa * c * y, c * y), (-kappa * c * y, -c * y)]
    rho = 2 * kappa / (kappa ** 2 + 1)
    return {'rho': rho}, DistributionSpec.atoms(values, [p / 2, p / 2, q / 2, q / 2])


def degenerate_hotelling_spec(m=1.0):
    """
    Return ``(params, spec)`` for :math:`\\mu = (m, 0)` and :math:`X` with a
    shifted Bernoulli first coordinate on the two degenerate hyperplanes and
    an independent Rademacher second coordinate.
    """
    if not m > 0:
        raise ModelError('m must be positive')
    p = 0.5 * (1 - 1 / math.sqrt(1 + m ** 2))
    first = DistributionSpec.bernoulli_shift(p, m)
    second = DistributionSpec.atoms([-1.0, 1.0], [0.5, 0.5])
    return {'mu': [m, 0.0]}, DistributionSpec.product(first, second)


def standardize(kind, values, n, model):
    """
    Center and scale the statistic values as the normal approximation
    states: :math:`(T - \\sqrt n\\mu)/\\sigma_1`, :math:`\\sqrt n(R -
    \\rho)/\\sigma_1` or :math:`(T^2 - n\\mu^\\top\\mu)/(\\sqrt n\\sigma_1)`.
    """
    values = np.asarray(values, dtype=float)
    sigma1 = model.sigma1
    if not sigma1 > 0:
        raise ModelError('cannot standardize by sigma1 = 0')
    root = math.sqrt(n)
    if kind == 'student':
        return (values - root * model.params['mu']) / sigma1
    elif kind == 'pearson':
        return root * (values - model.params['rho']) / sigma1
    elif kind == 'hotelling':
        mu = np.asarray(model.params['mu'], dtype=float)
        return (values - n * mu @ mu) / (root * sigma1)
    raise ModelError(f'no standardization for {kind!r} statistics')
