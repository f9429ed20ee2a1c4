# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Distribution specifications for observations and summand families.

A :class:`DistributionSpec` is a small, serializable record naming a *kind*
of distribution and its parameters. The kind-specific behaviour (sampling,
exact expectations, closed-form tails) lives in the :class:`Law` classes
behind :attr:`DistributionSpec.law`. A :class:`MomentProfile` condenses a
family of summands into the scalars every bound formula consumes: the
moment sums :math:`s_\\alpha` and the tail sum :math:`G_X`.
"""

import math
import logging
import itertools
import importlib
import typing as t
from functools import lru_cache

import numpy as np
from scipy import optimize, special, stats, integrate

from .const import PROB_TOL

__all__ = [
    'KINDS',
    'DistributionError',
    'InfiniteMomentError',
    'Estimate',
    'Moment',
    'DistributionSpec',
    'Family',
    'MomentProfile',
    'generator',
    'sample',
    'expect',
    'moment_profile',
    'family_profile',
    'tail_sum',
    'heavy_tail_shape',
]


logger = logging.getLogger('besstat.distributions')

KINDS = (
    'discrete-atoms',
    'gaussian',
    'standardized-exponential',
    'two-point-bernoulli-shift',
    'heavy-tail-logcorrected',
    'product-of-marginals',
    'user-sampler',
)

MC_DRAWS = 100_000


class DistributionError(ValueError):
    "Base class for invalid distribution specifications"


class InfiniteMomentError(DistributionError):
    "Exception raised when a requested moment of a distribution is infinite"
    def __init__(self, alpha, kind='distribution'):
        super().__init__(f'moment of order {alpha:g} is infinite for {kind}')
        self.alpha = alpha


class Estimate(t.NamedTuple):
    "A computed expectation with its standard error (0 when exact)"
    value: float
    stderr: float = 0.0


class Moment(t.NamedTuple):
    """
    A norm :math:`\\|X\\|_\\alpha` (or moment sum :math:`s_\\alpha`), with its
    standard error and an explicit *finite* flag. Infinite moments carry
    :data:`math.nan` as *value* so that they can never be used by accident.
    """
    value: float
    stderr: float = 0.0
    finite: bool = True

    @classmethod
    def infinite(cls):
        return cls(math.nan, 0.0, False)


def generator(seed, *key):
    """
    Return a counter-based :class:`numpy.random.Generator` for *seed* and the
    integer *key* (replicate index, sample size, batch number...). Identical
    arguments always produce identical streams, regardless of which process
    asks for them.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def _norms(x):
    return np.sqrt(np.einsum('ij,ij->i', x, x))


def _as_rows(values, dimension):
    rows = np.asarray(values, dtype=float)
    if rows.ndim == 1 and dimension == 1:
        rows = rows[:, np.newaxis]
    return rows


class DistributionSpec(t.NamedTuple):
    """
    Serializable description of a distribution on :math:`\\mathbb{R}^k`.

    The *params* mapping is kind-specific:

    ``discrete-atoms``
        ``values`` (list of atoms; scalars when *dimension* is 1) and
        ``probs`` (parallel list of probabilities)

    ``gaussian``
        ``mean`` and ``cov`` (scalars when *dimension* is 1)

    ``standardized-exponential``
        ``shift``: the mean of ``shift + E - 1`` with ``E`` standard
        exponential

    ``two-point-bernoulli-shift``
        ``p`` and optional ``shift``; the law of ``shift + B_p`` with
        ``B_p`` a standardized Bernoulli(p). The default shift places the
        support on the degenerate two points of the Student statistic.

    ``heavy-tail-logcorrected``
        ``p`` > 2; symmetric, unit variance, density proportional to
        :math:`|v|^{-p-1}\\ln^{-2}|v|` outside :math:`(-v_0, v_0)`

    ``product-of-marginals``
        ``marginals``: list of one-dimensional spec mappings

    ``user-sampler``
        ``sampler`` (``"package.module:function"``) and ``args``; the
        function is called as ``function(rng, n, **args)``
    """
    kind: str
    params: dict
    dimension: int = 1

    @classmethod
    def atoms(cls, values, probs):
        rows = np.asarray(values, dtype=float)
        dimension = 1 if rows.ndim == 1 else rows.shape[1]
        return cls('discrete-atoms', {
            'values': rows.tolist(),
            'probs': [float(p) for p in probs],
        }, dimension)

    @classmethod
    def gaussian(cls, mean=0.0, cov=1.0):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls('gaussian', {
            'mean': mean.tolist() if mean.size > 1 else float(mean[0]),
            'cov': np.asarray(cov, dtype=float).tolist(),
        }, mean.size)

    @classmethod
    def standardized_exponential(cls, shift=0.0):
        return cls('standardized-exponential', {'shift': float(shift)})

    @classmethod
    def bernoulli_shift(cls, p, shift=None):
        params = {'p': float(p)}
        if shift is not None:
            params['shift'] = float(shift)
        return cls('two-point-bernoulli-shift', params)

    @classmethod
    def heavy_tail(cls, p):
        return cls('heavy-tail-logcorrected', {'p': float(p)})

    @classmethod
    def product(cls, *marginals):
        return cls('product-of-marginals', {
            'marginals': [m.as_dict() for m in marginals],
        }, len(marginals))

    @classmethod
    def user_sampler(cls, sampler, dimension=1, **args):
        return cls('user-sampler', {'sampler': sampler, 'args': args},
                   dimension)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise DistributionError('distribution must be a table')
        unknown = set(data) - set(cls._fields)
        if unknown:
            raise DistributionError(
                f'unknown distribution key(s): {", ".join(sorted(unknown))}')
        try:
            kind = data['kind']
        except KeyError:
            raise DistributionError('distribution requires a kind')
        return cls(
            kind=kind,
            params=dict(data.get('params', {})),
            dimension=data.get('dimension', 1)).validate()

    def as_dict(self):
        return {
            'kind': self.kind,
            'params': self.params,
            'dimension': self.dimension,
        }

    def validate(self):
        """
        Check the spec, raising :exc:`DistributionError` which lists every
        problem found. Returns the spec itself for chaining.
        """
        try:
            law_class = LAWS[self.kind]
        except KeyError:
            raise DistributionError(f'unknown distribution kind {self.kind!r}')
        errors = []
        if not isinstance(self.dimension, int) or isinstance(self.dimension, bool) \
                or self.dimension < 1:
            errors.append(f'dimension must be a positive integer, not '
                          f'{self.dimension!r}')
        else:
            errors.extend(law_class.check(self))
        if errors:
            raise DistributionError('; '.join(errors))
        return self

    @property
    def law(self):
        "The :class:`Law` implementing this spec"
        return LAWS[self.validate().kind](self)


class Law:
    """
    Base class for the kind-specific behaviour of a :class:`DistributionSpec`.

    Laws with :attr:`exact` set compute expectations without sampling;
    :meth:`norm_tail` returns :data:`None` when no closed form exists.
    """
    exact = False

    def __init__(self, spec):
        self.spec = spec
        self.dimension = spec.dimension

    @staticmethod
    def check(spec):
        return []

    def draw(self, rng, n):
        raise NotImplementedError

    def expect(self, func):
        raise NotImplementedError

    def abs_moment(self, alpha):
        return self.expect(lambda x: _norms(x) ** alpha)

    def norm_tail(self, z):
        return None

    def atoms(self):
        "Return ``(values, probs)`` for finitely supported laws, else None"
        return None


class DiscreteAtoms(Law):
    exact = True

    def __init__(self, spec):
        super().__init__(spec)
        self.values = _as_rows(spec.params['values'], spec.dimension)
        self.probs = np.asarray(spec.params['probs'], dtype=float)

    @staticmethod
    def check(spec):
        errors = []
        try:
            values = _as_rows(spec.params['values'], spec.dimension)
            probs = np.asarray(spec.params['probs'], dtype=float)
        except KeyError as e:
            return [f'discrete-atoms requires {e.args[0]}']
        except (TypeError, ValueError):
            return ['discrete-atoms values and probs must be numeric arrays']
        if values.ndim != 2 or values.shape[1] != spec.dimension:
            errors.append(f'atoms must be {spec.dimension}-vectors')
        if probs.ndim != 1 or len(probs) != len(values):
            errors.append('values and probs must be parallel arrays')
        elif (probs < 0).any():
            errors.append('atom probabilities must be nonnegative')
        elif abs(math.fsum(probs) - 1) > PROB_TOL:
            errors.append(
                f'atom probabilities sum to {math.fsum(probs)!r}, not 1')
        if not np.isfinite(values).all():
            errors.append('atoms must be finite')
        return errors

    def draw(self, rng, n):
        return self.values[rng.choice(len(self.probs), size=n, p=self.probs)]

    def expect(self, func):
        return math.fsum(self.probs * func(self.values))

    def norm_tail(self, z):
        return math.fsum(self.probs[_norms(self.values) > z])

    def atoms(self):
        return self.values, self.probs


class BernoulliShift(DiscreteAtoms):
    def __init__(self, spec):
        Law.__init__(self, spec)
        p = float(spec.params['p'])
        q = 1 - p
        scale = math.sqrt(p * q)
        shift = spec.params.get('shift')
        if shift is None:
            shift = 2 * scale / (1 - 2 * p)
        self.values = np.array([[shift + q / scale], [shift - p / scale]])
        self.probs = np.array([p, q])

    @staticmethod
    def check(spec):
        errors = []
        if spec.dimension != 1:
            errors.append('two-point-bernoulli-shift is one-dimensional')
        p = spec.params.get('p')
        if not isinstance(p, (int, float)) or not 0 < p < 1:
            errors.append('two-point-bernoulli-shift requires 0 < p < 1')
        elif spec.params.get('shift') is None and p == 0.5:
            errors.append('p = 1/2 has no default shift; give one')
        return errors


class Gaussian(Law):
    exact = True
    # Gauss-Hermite nodes per axis are capped so the tensor grid stays small
    max_nodes = 20_000

    def __init__(self, spec):
        super().__init__(spec)
        k = spec.dimension
        self.mean = np.broadcast_to(
            np.asarray(spec.params.get('mean', 0.0), dtype=float), (k,)).copy()
        self.cov = np.asarray(spec.params.get('cov', 1.0), dtype=float).reshape(k, k)
        self.chol = np.linalg.cholesky(self.cov)

    @staticmethod
    def check(spec):
        k = spec.dimension
        try:
            mean = np.asarray(spec.params.get('mean', 0.0), dtype=float)
            cov = np.asarray(spec.params.get('cov', 1.0), dtype=float)
        except (TypeError, ValueError):
            return ['gaussian mean and cov must be numeric']
        errors = []
        if mean.size not in (1, k) or cov.size != k * k:
            errors.append(f'gaussian mean/cov do not match dimension {k}')
        else:
            cov = cov.reshape(k, k)
            if not np.allclose(cov, cov.T):
                errors.append('gaussian cov must be symmetric')
            else:
                try:
                    np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    errors.append('gaussian cov must be positive definite')
        return errors

    def draw(self, rng, n):
        return self.mean + rng.standard_normal((n, self.dimension)) @ self.chol.T

    def rule(self):
        k = self.dimension
        m = min(60, int(self.max_nodes ** (1 / k)))
        nodes, weights = np.polynomial.hermite_e.hermegauss(m)
        weights = weights / math.sqrt(2 * math.pi)
        z = np.array(list(itertools.product(nodes, repeat=k)))
        w = np.prod(np.array(list(itertools.product(weights, repeat=k))), axis=1)
        return self.mean + z @ self.chol.T, w

    def expect(self, func):
        if self.dimension == 1:
            frozen = stats.norm(self.mean[0], math.sqrt(self.cov[0, 0]))
            return frozen.expect(lambda x: float(func(np.array([[x]]))[0]))
        nodes, weights = self.rule()
        return math.fsum(weights * func(nodes))

    def norm_tail(self, z):
        if self.dimension == 1:
            frozen = stats.norm(self.mean[0], math.sqrt(self.cov[0, 0]))
            return float(frozen.sf(z) + frozen.cdf(-z))
        return None


class StandardizedExponential(Law):
    exact = True

    def __init__(self, spec):
        super().__init__(spec)
        self.shift = float(spec.params.get('shift', 0.0))
        self.frozen = stats.expon(loc=self.shift - 1)

    @staticmethod
    def check(spec):
        if spec.dimension != 1:
            return ['standardized-exponential is one-dimensional']
        if not isinstance(spec.params.get('shift', 0.0), (int, float)):
            return ['standardized-exponential shift must be a number']
        return []

    def draw(self, rng, n):
        return (self.shift - 1 + rng.standard_exponential(n))[:, np.newaxis]

    def expect(self, func):
        return self.frozen.expect(lambda x: float(func(np.array([[x]]))[0]))

    def norm_tail(self, z):
        return float(self.frozen.sf(z) + self.frozen.cdf(-z))


@lru_cache(maxsize=None)
def heavy_tail_shape(p):
    """
    Return ``(v0, h, c)`` for the heavy-tail kind with tail exponent *p*:
    density *h* on :math:`(-v_0, v_0)` and
    :math:`c|v|^{-p-1}\\ln^{-2}|v|` beyond.

    For fixed :math:`v_0` the unit-mass and unit-variance constraints are
    linear in *h* and *c*. Unit variance forces :math:`1 < v_0 < \\sqrt3`;
    within that interval :math:`v_0` is the root of density continuity at
    :math:`v_0`.
    """
    if p <= 2:
        raise DistributionError('heavy-tail-logcorrected requires p > 2')

    def coefficients(v0):
        ell = math.log(v0)
        i0 = special.expn(2, p * ell) / ell
        i2 = special.expn(2, (p - 2) * ell) / ell
        c = (3 / v0 ** 2 - 1) / (6 * i2 / v0 ** 2 - 2 * i0)
        h = (1 - 2 * c * i0) / (2 * v0)
        return h, c

    def jump(v0):
        h, c = coefficients(v0)
        return c * v0 ** (-p - 1) / math.log(v0) ** 2 - h

    v0 = optimize.brentq(jump, 1 + 1e-6, math.sqrt(3) - 1e-9, xtol=1e-15)
    h, c = coefficients(v0)
    logger.debug('heavy tail p=%g: v0=%.12g h=%.12g c=%.12g', p, v0, h, c)
    return v0, h, c


class HeavyTail(Law):
    exact = True

    def __init__(self, spec):
        super().__init__(spec)
        self.p = float(spec.params['p'])
        self.v0, self.h, self.c = heavy_tail_shape(self.p)
        self.ell0 = math.log(self.v0)
        self.tail_mass = 2 * self.c * special.expn(2, self.p * self.ell0) / self.ell0

    @staticmethod
    def check(spec):
        if spec.dimension != 1:
            return ['heavy-tail-logcorrected is one-dimensional']
        p = spec.params.get('p')
        if not isinstance(p, (int, float)) or p <= 2:
            return ['heavy-tail-logcorrected requires p > 2']
        return []

    def pdf(self, v):
        a = np.abs(np.asarray(v, dtype=float))
        with np.errstate(divide='ignore', invalid='ignore'):
            outer = self.c * a ** (-self.p - 1) / np.log(a) ** 2
        return np.where(a < self.v0, self.h, outer)

    def norm_tail(self, z):
        "Return P(|V| > z), vectorized over *z*"
        z = np.asarray(z, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            ell = np.log(np.maximum(z, self.v0))
            outer = 2 * self.c * special.expn(2, self.p * ell) / ell
        result = np.where(z < self.v0, 1 - 2 * self.h * np.maximum(z, 0), outer)
        return float(result) if result.ndim == 0 else result

    def sf(self, x):
        "Return P(V > x), vectorized over real *x*"
        x = np.asarray(x, dtype=float)
        half = 0.5 * self.norm_tail(np.abs(x))
        return np.where(x >= 0, half, 1 - half)

    def abs_moment(self, alpha):
        if alpha > self.p:
            raise InfiniteMomentError(alpha, self.spec.kind)
        # E_2(0) = 1 covers alpha == p
        outer = special.expn(2, (self.p - alpha) * self.ell0) / self.ell0
        return (2 * self.h * self.v0 ** (alpha + 1) / (alpha + 1)
                + 2 * self.c * outer)

    def expect(self, func):
        f = lambda v: float(func(np.array([[v]]))[0])
        inner, _ = integrate.quad(f, -self.v0, self.v0)
        outer, _ = integrate.quad(
            lambda v: self.pdf(v) * (f(v) + f(-v)), self.v0, np.inf, limit=200)
        return self.h * inner + outer

    def inverse_norm_tail(self, s):
        """
        Return the |V| quantiles with survival probabilities *s* in (0, 1].
        The tail branch inverts :math:`2cE_2(p\\ell)/\\ell = s` in
        :math:`\\ell = \\ln|v|` by vectorized bisection.
        """
        s = np.asarray(s, dtype=float)
        result = (1 - s) / (2 * self.h)
        tail = s <= self.tail_mass
        if tail.any():
            target = s[tail]
            lo = np.full_like(target, self.ell0)
            hi = self.ell0 + 1 + np.maximum(
                0, np.log(2 * self.c / (self.p * self.ell0 ** 2 * target)) / self.p)
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                above = 2 * self.c * special.expn(2, self.p * mid) / mid > target
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
            result[tail] = np.exp(0.5 * (lo + hi))
        return result

    def draw(self, rng, n):
        s = 1 - rng.random(n)
        signs = 2 * rng.integers(0, 2, n) - 1
        return (signs * self.inverse_norm_tail(s))[:, np.newaxis]


class Product(Law):
    def __init__(self, spec):
        super().__init__(spec)
        self.marginals = [
            DistributionSpec.from_dict(m).law for m in spec.params['marginals']]
        self.exact = all(m.atoms() is not None for m in self.marginals)

    @staticmethod
    def check(spec):
        marginals = spec.params.get('marginals')
        if not isinstance(marginals, list) or not marginals:
            return ['product-of-marginals requires a list of marginals']
        errors = []
        if len(marginals) != spec.dimension:
            errors.append('product-of-marginals dimension must equal the '
                          'number of marginals')
        for index, marginal in enumerate(marginals):
            try:
                m = DistributionSpec.from_dict(marginal)
            except DistributionError as e:
                errors.append(f'marginal {index}: {e}')
            else:
                if m.dimension != 1:
                    errors.append(f'marginal {index} must be one-dimensional')
        return errors

    def draw(self, rng, n):
        return np.hstack([m.draw(rng, n) for m in self.marginals])

    def atoms(self):
        if not self.exact:
            return None
        parts = [m.atoms() for m in self.marginals]
        values = np.array([
            np.concatenate(combo)
            for combo in itertools.product(*(v for v, _ in parts))])
        probs = np.array([
            math.prod(combo)
            for combo in itertools.product(*(p for _, p in parts))])
        return values, probs

    def expect(self, func):
        values, probs = self.atoms()
        return math.fsum(probs * func(values))

    def norm_tail(self, z):
        if self.exact:
            values, probs = self.atoms()
            return math.fsum(probs[_norms(values) > z])
        return None


class UserSampler(Law):
    def __init__(self, spec):
        super().__init__(spec)
        module, _, name = spec.params['sampler'].partition(':')
        try:
            self.func = getattr(importlib.import_module(module), name)
        except (ImportError, AttributeError) as e:
            raise DistributionError(
                f'cannot import sampler {spec.params["sampler"]!r}: {e}')
        self.args = dict(spec.params.get('args', {}))

    @staticmethod
    def check(spec):
        sampler = spec.params.get('sampler')
        if not isinstance(sampler, str) or ':' not in sampler:
            return ['user-sampler requires sampler = "module:function"']
        return []

    def draw(self, rng, n):
        rows = np.asarray(self.func(rng, n, **self.args), dtype=float)
        return rows.reshape(n, self.dimension)


LAWS = {
    'discrete-atoms': DiscreteAtoms,
    'gaussian': Gaussian,
    'standardized-exponential': StandardizedExponential,
    'two-point-bernoulli-shift': BernoulliShift,
    'heavy-tail-logcorrected': HeavyTail,
    'product-of-marginals': Product,
    'user-sampler': UserSampler,
}


def sample(spec, n, seed, replicate=0):
    """
    Draw *n* i.i.d. vectors from *spec* as an ``(n, k)`` array. The stream is
    fully determined by *seed* and *replicate*.
    """
    if n < 1:
        raise DistributionError(f'sample size must be positive, not {n}')
    return spec.law.draw(generator(seed, replicate), n)


def expect(spec, func, mode='exact', seed=0, draws=MC_DRAWS):
    """
    Return the :class:`Estimate` of ``E func(X)`` for X distributed as
    *spec*. *func* maps an ``(m, k)`` array of observations to *m* values.
    """
    law = spec.law
    if mode == 'exact':
        if not law.exact:
            raise DistributionError(
                f'{spec.kind} has no exact expectation; use monte-carlo')
        return Estimate(float(law.expect(func)))
    elif mode == 'monte-carlo':
        values = func(law.draw(generator(seed), draws))
        return Estimate(
            float(values.mean()), float(values.std(ddof=1) / math.sqrt(draws)))
    raise DistributionError(f'unknown moment mode {mode!r}')


def default_mode(spec):
    return 'exact' if spec.law.exact else 'monte-carlo'


class MomentProfile:
    """
    The scalar summary of a summand family :math:`(X_i)`: the sums
    :math:`s_\\alpha = (\\sum_i E\\|X_i\\|^\\alpha)^{1/\\alpha}` for tracked
    exponents, and the tail sum :math:`G_X(z) = \\sum_i P(\\|X_i\\| > z)`.

    In i.i.d. mode (*n* given) the norms :math:`\\|V\\|_\\alpha` of the
    underlying observations are kept as well. Profiles are immutable.
    """
    def __init__(self, s_alpha, tail, *, n=None, norm_V_alpha=None,
                 mode='exact'):
        self._s = {float(a): m for a, m in s_alpha.items()}
        self._norm_V = (
            None if norm_V_alpha is None else
            {float(a): m for a, m in norm_V_alpha.items()})
        self._tail = tail
        self.n = n
        self.mode = mode

    def __repr__(self):
        moments = ', '.join(
            f'{a:g}: {m.value:.6g}' if m.finite else f'{a:g}: inf'
            for a, m in sorted(self._s.items()))
        return f'<MomentProfile(n={self.n}, s={{{moments}}})>'

    @classmethod
    def from_values(cls, s_alpha, tail=None, *, n=None, norm_V_alpha=None):
        """
        Build a profile from plain numbers; :data:`math.inf` marks an
        infinite moment. Without *tail* every tail sum is 0.
        """
        def moment(value):
            return Moment.infinite() if math.isinf(value) else Moment(float(value))
        return cls(
            {a: moment(v) for a, v in s_alpha.items()},
            tail or (lambda z: 0.0),
            n=n,
            norm_V_alpha=None if norm_V_alpha is None else
                {a: moment(v) for a, v in norm_V_alpha.items()},
            mode='given')

    @property
    def alphas(self):
        return sorted(self._s)

    def _lookup(self, table, alpha):
        alpha = float(alpha)
        try:
            return table[alpha]
        except KeyError:
            for key, value in table.items():
                if math.isclose(key, alpha, rel_tol=1e-12):
                    return value
        raise DistributionError(f'moment of order {alpha:g} is not tracked')

    def moment(self, alpha):
        return self._lookup(self._s, alpha)

    def finite(self, alpha):
        return self.moment(alpha).finite

    def s(self, alpha):
        "Return :math:`s_\\alpha`; raises :exc:`InfiniteMomentError`"
        m = self.moment(alpha)
        if not m.finite:
            raise InfiniteMomentError(alpha)
        return m.value

    def norm_V(self, alpha):
        "Return :math:`\\|V\\|_\\alpha` (i.i.d. mode only)"
        if self._norm_V is None:
            raise DistributionError('profile was not built in i.i.d. mode')
        m = self._lookup(self._norm_V, alpha)
        if not m.finite:
            raise InfiniteMomentError(alpha)
        return m.value

    def tail(self, z):
        return float(self._tail(z))

    def scaled(self, c):
        "Return the profile of the summands :math:`cX_i`"
        scale = lambda table: None if table is None else {
            a: m._replace(value=c * m.value, stderr=c * m.stderr)
            for a, m in table.items()}
        return MomentProfile(
            scale(self._s), lambda z: self._tail(z / c), n=self.n,
            norm_V_alpha=scale(self._norm_V), mode=self.mode)


def tail_sum(profile, z):
    "Return :math:`G_X(z) = \\sum_i P(\\|X_i\\| > z)` for *z* ≥ 0"
    if z < 0:
        raise DistributionError(f'tail sums need z >= 0, not {z}')
    return profile.tail(z)


def _markov_envelope(norms):
    finite = {a: m.value for a, m in norms.items() if m.finite}

    def envelope(z):
        if z <= 0:
            return 1.0
        return min([1.0] + [(v / z) ** a for a, v in finite.items()])
    return envelope


def _single_moments(spec, alphas, mode, transform, seed, draws):
    """
    Return ``(norms, tail)`` for one summand: the norms as :class:`Moment`
    keyed by alpha, and ``tail(z) = P(||X|| > z)``.
    """
    law = spec.law
    norms = {}
    if mode == 'exact':
        if not law.exact:
            raise DistributionError(
                f'exact moments are unavailable for {spec.kind}; '
                f'use monte-carlo')
        for alpha in alphas:
            try:
                if transform is None:
                    value = law.abs_moment(alpha)
                else:
                    value = law.expect(lambda x: _norms(transform(x)) ** alpha)
            except InfiniteMomentError:
                logger.info('moment %g of %s is infinite', alpha, spec.kind)
                norms[alpha] = Moment.infinite()
            else:
                norms[alpha] = Moment(value ** (1 / alpha))
        atoms = law.atoms()
        if transform is None and atoms is None:
            tail = law.norm_tail
        elif atoms is not None:
            values, probs = atoms
            r = _norms(values if transform is None else transform(values))
            tail = lambda z: math.fsum(probs[r > z])
        else:
            tail = _markov_envelope(norms)
    elif mode == 'monte-carlo':
        x = law.draw(generator(seed), draws)
        if transform is not None:
            x = transform(x)
        r = np.sort(_norms(x))
        for alpha in alphas:
            if isinstance(law, HeavyTail) and alpha > law.p:
                norms[alpha] = Moment.infinite()
                continue
            powers = r ** alpha
            mean = powers.mean()
            stderr = powers.std(ddof=1) / math.sqrt(draws)
            value = mean ** (1 / alpha)
            # delta method for the 1/alpha power
            norms[alpha] = Moment(
                value, stderr * value / (alpha * mean) if mean > 0 else 0.0)
        tail = lambda z: (draws - np.searchsorted(r, z, side='right')) / draws
    else:
        raise DistributionError(f'unknown moment mode {mode!r}')
    return norms, tail


def _check_alphas(alphas):
    alphas = sorted({float(a) for a in alphas})
    if not alphas or alphas[0] < 1:
        raise DistributionError('moment exponents must be >= 1')
    return alphas


def moment_profile(spec, alphas, n=1, mode='exact', *, normalize=True,
                   transform=None, seed=0, draws=MC_DRAWS):
    """
    Return the i.i.d. :class:`MomentProfile` of *n* copies of *spec*.

    With *normalize* (the default) the summands are :math:`X_i = V_i/n`, so
    :math:`s_\\alpha = \\|V\\|_\\alpha/n^{1-1/\\alpha}` and
    :math:`G_X(z) = nP(\\|V\\| > nz)`; otherwise the copies themselves are
    the summands. *transform* maps observations to V (for instance a
    statistic's embedding) before norms are taken.
    """
    if n < 1:
        raise DistributionError(f'sample size must be positive, not {n}')
    alphas = _check_alphas(alphas)
    norms, tail = _single_moments(spec, alphas, mode, transform, seed, draws)
    scale = 1 / n if normalize else 1.0
    s_alpha = {
        a: m._replace(
            value=m.value * scale * n ** (1 / a),
            stderr=m.stderr * scale * n ** (1 / a))
        for a, m in norms.items()
    }
    return MomentProfile(
        s_alpha, lambda z: n * tail(z / scale),
        n=n, norm_V_alpha=norms, mode=mode)


class Family(t.NamedTuple):
    """
    A family of independent summands given as ``(spec, count)`` pairs, so
    that long i.i.d. runs never need expanding.
    """
    members: tuple

    @classmethod
    def iid(cls, spec, n):
        return cls(((spec, int(n)),))

    @classmethod
    def of(cls, *specs):
        return cls(tuple((spec, 1) for spec in specs))

    @property
    def n(self):
        return sum(count for _, count in self.members)

    @property
    def dimension(self):
        return self.members[0][0].dimension

    def expand(self):
        for spec, count in self.members:
            for _ in range(count):
                yield spec

    def is_discrete(self):
        return all(spec.law.atoms() is not None for spec, _ in self.members)

    def expect_sum(self, func, mode='exact', seed=0, draws=MC_DRAWS):
        "Return the :class:`Estimate` of :math:`\\sum_i E func(X_i)`"
        value = []
        variance = 0.0
        for index, (spec, count) in enumerate(self.members):
            est = expect(spec, func, mode=mode,
                         seed=int(generator(seed, index).integers(2**63)),
                         draws=draws)
            value.append(count * est.value)
            variance += (count * est.stderr) ** 2
        return Estimate(math.fsum(value), math.sqrt(variance))


def family_profile(family, alphas, mode='exact', seed=0, draws=MC_DRAWS):
    """
    Return the :class:`MomentProfile` of a (not necessarily identically
    distributed) :class:`Family` of summands.
    """
    alphas = _check_alphas(alphas)
    parts = [
        (count, _single_moments(spec, alphas, mode, None,
                                int(generator(seed, index).integers(2**63)),
                                draws))
        for index, (spec, count) in enumerate(family.members)
    ]
    s_alpha = {}
    for alpha in alphas:
        if all(norms[alpha].finite for _, (norms, _) in parts):
            total = math.fsum(
                count * norms[alpha].value ** alpha for count, (norms, _) in parts)
            s_alpha[alpha] = Moment(total ** (1 / alpha))
        else:
            s_alpha[alpha] = Moment.infinite()
    return MomentProfile(
        s_alpha,
        lambda z: math.fsum(count * tail(z) for count, (_, tail) in parts),
        mode=mode)
