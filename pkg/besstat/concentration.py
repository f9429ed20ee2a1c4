# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Constructive inequality devices for sums of independent summands: a
Hoeffding-type tail bound, the exponential (Cramer) tilt of a discrete
family, the maximal inequality for symmetric summands, the tail bound for
:math:`\\|S\\|` used by the non-uniform bounds, and Rosenthal envelopes.

Discrete families are handled exactly by enumerating the law of the sum.
"""

import math
import logging
import typing as t

import numpy as np
from scipy.special import logsumexp

from .const import ENUMERATION_LIMIT, MC_SIGMAS, PROB_TOL
from .distributions import (
    Family,
    DistributionSpec,
    MC_DRAWS,
    generator,
)
from .bounds import RangeViolation, nonuniform_range

__all__ = [
    'ConcentrationError',
    'AsymmetryError',
    'hoeffding_tail',
    'sum_distribution',
    'upper_tail',
    'TiltedDistribution',
    'tilt',
    'MaxSumResult',
    'max_sum_check',
    'SumTailResult',
    'sum_tail_bound',
    'rosenthal_envelope',
    'rosenthal_tail',
]


logger = logging.getLogger('besstat.concentration')


class ConcentrationError(ValueError):
    "Base class for errors in the inequality devices"


class AsymmetryError(ConcentrationError):
    "Exception raised when a summand is not symmetric about 0"


def hoeffding_tail(z, t, tail_G):
    """
    Return :math:`G_\\xi(t) + (e/(1+zt))^{z/t}`, an upper bound for
    :math:`P(W \\ge z)` when :math:`\\sum_i E\\xi_i^2 = 1`. *tail_G* is the
    tail sum :math:`t \\mapsto \\sum_i P(|\\xi_i| > t)`.
    """
    if not t > 0:
        raise ConcentrationError(f't must be positive, not {t}')
    if z < 0:
        raise ConcentrationError(f'z must be nonnegative, not {z}')
    return float(tail_G(t)) + (math.e / (1 + z * t)) ** (z / t)


def _member_atoms(spec):
    atoms = spec.law.atoms()
    if atoms is None:
        raise ConcentrationError(f'{spec.kind} summands have no atoms')
    values, probs = atoms
    keep = probs > 0
    return values[keep], probs[keep]


def _atom_count(family):
    return math.prod(
        len(_member_atoms(spec)[1]) ** count for spec, count in family.members)


def sum_distribution(family):
    """
    Return ``(values, probs)``, the exact law of :math:`S = \\sum_i X_i` for
    a discrete :class:`~besstat.distributions.Family`, by iterated
    convolution of the atoms. Equal sums are merged.
    """
    if not isinstance(family, Family):
        family = Family.of(*family)
    if _atom_count(family) > ENUMERATION_LIMIT:
        raise ConcentrationError(
            f'more than {ENUMERATION_LIMIT} joint atoms; too many to enumerate')
    values = np.zeros((1, family.dimension))
    probs = np.ones(1)
    for spec in family.expand():
        atoms, weights = _member_atoms(spec)
        sums = (values[:, np.newaxis, :] + atoms[np.newaxis, :, :]).reshape(
            -1, family.dimension)
        joint = (probs[:, np.newaxis] * weights[np.newaxis, :]).reshape(-1)
        values, inverse = np.unique(sums, axis=0, return_inverse=True)
        probs = np.bincount(inverse.reshape(-1), weights=joint)
    return values, probs


def upper_tail(family, z):
    "Return the exact :math:`P(W \\ge z)` for a discrete real family"
    values, probs = sum_distribution(family)
    return math.fsum(probs[values[:, 0] >= z])


class TiltedDistribution(t.NamedTuple):
    """
    The family :math:`\\hat\\xi` with :math:`P(\\hat\\xi \\in A) = E
    e^{c\\bar W}1\\{\\xi \\in A\\}/E e^{c\\bar W}`, where :math:`\\bar W =
    \\sum_i \\xi_i 1\\{\\xi_i \\le 1\\}`. Tilting factorizes, so each member
    of *base* is reweighted separately; *tilted* holds the parallel
    ``(values, probs, log_normalizer)`` triples.
    """
    base: Family
    c: float
    tilted: tuple

    @property
    def family(self):
        "The tilted summands as a :class:`~besstat.distributions.Family`"
        return Family(tuple(
            (DistributionSpec.atoms(values[:, 0], probs), count)
            for (values, probs, _), (_, count) in zip(self.tilted, self.base.members)))

    @property
    def log_normalizer(self):
        return math.fsum(
            count * log_norm
            for (_, _, log_norm), (_, count) in zip(self.tilted, self.base.members))

    @property
    def normalizer(self):
        ":math:`E e^{c\\bar W}`"
        return math.exp(self.log_normalizer)

    def check_identity(self):
        """
        Return the largest relative deviation from
        :math:`P(\\hat\\xi_i = a)E e^{c\\bar\\xi_i} = P(\\xi_i = a)e^{c\\bar
        \\xi_i(a)}` over every atom of every member.
        """
        worst = 0.0
        for (spec, _), (values, probs, log_norm) in zip(
                self.base.members, self.tilted):
            _, base_probs = _member_atoms(spec)
            lhs = probs * math.exp(log_norm)
            rhs = base_probs * np.exp(self.c * _truncate(values[:, 0]))
            scale = np.maximum(np.abs(rhs), np.finfo(float).tiny)
            worst = max(worst, float((np.abs(lhs - rhs) / scale).max()))
        return worst

    def moment_bounds(self, p):
        """
        Check, member by member, :math:`E|\\hat\\xi_i|^p \\le e^{2c}
        E|\\xi_i|^p` and :math:`|E\\hat\\xi_i| \\le ce^{2c}E\\xi_i^2`, plus
        :math:`E e^{c\\bar W} \\ge e^{-c}`. Returns a list of
        ``(name, holds)`` pairs.
        """
        results = []
        bound = math.exp(2 * self.c)
        tol = 1 + 1e-12
        for index, ((spec, _), (values, probs, _)) in enumerate(
                zip(self.base.members, self.tilted)):
            base_values, base_probs = _member_atoms(spec)
            x, y = base_values[:, 0], values[:, 0]
            results.append((
                f'member {index}: E|xi^|^p <= e^(2c) E|xi|^p',
                math.fsum(probs * np.abs(y) ** p)
                <= bound * math.fsum(base_probs * np.abs(x) ** p) * tol))
            results.append((
                f'member {index}: |E xi^| <= c e^(2c) E xi^2',
                abs(math.fsum(probs * y))
                <= self.c * bound * math.fsum(base_probs * x ** 2) * tol
                + PROB_TOL))
        results.append((
            'E e^(c W_bar) >= e^(-c)',
            self.log_normalizer >= -self.c - 1e-12))
        return results


def _truncate(x):
    return np.where(x <= 1, x, 0.0)


def tilt(base, c):
    """
    Return the :class:`TiltedDistribution` of the discrete real family
    *base* under the tilt parameter *c* ≥ 0 (``c = 0`` is the identity).
    Weights are normalized in log space.
    """
    if not isinstance(base, Family):
        base = Family.of(*base)
    if c < 0:
        raise ConcentrationError(f'the tilt parameter must be >= 0, not {c}')
    if base.dimension != 1:
        raise ConcentrationError('tilting needs real summands')
    tilted = []
    for spec, _ in base.members:
        values, probs = _member_atoms(spec)
        log_weights = np.log(probs) + c * _truncate(values[:, 0])
        log_norm = float(logsumexp(log_weights))
        tilted.append((values, np.exp(log_weights - log_norm), log_norm))
    logger.debug('tilted %d members by c=%g', len(tilted), c)
    return TiltedDistribution(base, float(c), tuple(tilted))


class MaxSumResult(t.NamedTuple):
    lhs: float
    mid: float
    rhs: float
    holds: bool
    exact: bool = True


def _check_symmetric(spec):
    values, probs = _member_atoms(spec)
    order = np.lexsort(values.T[::-1])
    mirrored = np.lexsort((-values).T[::-1])
    if not (np.allclose(values[order], -values[mirrored], rtol=0, atol=1e-12)
            and np.allclose(probs[order], probs[mirrored], rtol=0, atol=PROB_TOL)):
        raise AsymmetryError(f'{spec.kind} summand is not symmetric about 0')


def max_sum_check(family, x, draws=MC_DRAWS, seed=0):
    """
    Evaluate the maximal inequality for independent symmetric summands:
    :math:`P(\\|S\\| > x) \\ge \\frac12 P(\\max_i\\|X_i\\| > x) \\ge
    \\frac12\\sum_i P_i/(1 + \\sum_i P_i)` with :math:`P_i = P(\\|X_i\\| >
    x)`. The left-hand side is exact when the joint atoms can be enumerated
    and a Monte Carlo estimate otherwise.
    """
    if not isinstance(family, Family):
        family = Family.of(*family)
    tails = []
    for spec, count in family.members:
        _check_symmetric(spec)
        values, probs = _member_atoms(spec)
        tails.append((math.fsum(probs[np.linalg.norm(values, axis=1) > x]), count))
    survive = math.prod((1 - p) ** count for p, count in tails)
    total = math.fsum(p * count for p, count in tails)
    mid = 0.5 * (1 - survive)
    rhs = 0.5 * total / (1 + total)
    if _atom_count(family) <= ENUMERATION_LIMIT:
        values, probs = sum_distribution(family)
        lhs = math.fsum(probs[np.linalg.norm(values, axis=1) > x])
        slack = 1e-12
        exact = True
    else:
        rng = generator(seed, 0)
        s = sum(spec.law.draw(rng, draws) for spec in family.expand())
        hits = np.linalg.norm(s, axis=1) > x
        lhs = float(hits.mean())
        slack = MC_SIGMAS * math.sqrt(max(lhs * (1 - lhs), 1 / draws) / draws)
        exact = False
    holds = lhs >= mid - slack and mid >= rhs - 1e-12
    return MaxSumResult(lhs, mid, rhs, holds, exact)


class SumTailResult(t.NamedTuple):
    x: float
    Lambda1: float
    bound: float
    Lambda2: float
    Lambda3: float


def sum_tail_bound(inputs, z):
    """
    Return the tail bound for the sum used by the non-uniform f(S) bound:
    with :math:`x = \\sqrt{\\sigma|z|/(3C_1)}` and :math:`\\Lambda_1 =
    12epC_1D^2s_2^2/\\sigma`, the bound is :math:`G_X(x/(2p)) +
    \\Lambda_1^p/|z|^p`. The companion constants :math:`\\Lambda_2 =
    24pC_1s_2^2/\\sigma` and :math:`\\Lambda_3 = 48C_1D^2s_2^2/\\sigma` are
    reported alongside.
    """
    valid = nonuniform_range(inputs)
    a = abs(z)
    if not valid[0] <= a <= valid[1]:
        raise RangeViolation(z, valid)
    p, C1, sigma, D = inputs.p, inputs.C1, inputs.sigma, inputs.D
    s2 = inputs.profile.s(2)
    x = math.sqrt(sigma * a / (3 * C1))
    lambda1 = 12 * math.e * p * C1 * D ** 2 * s2 ** 2 / sigma
    bound = inputs.tail(x / (2 * p)) + lambda1 ** p / a ** p
    return SumTailResult(
        x, lambda1, bound,
        24 * p * C1 * s2 ** 2 / sigma,
        48 * C1 * D ** 2 * s2 ** 2 / sigma)


def rosenthal_envelope(profile, p, D=1.0, user_constant=1.0):
    """
    Return the Rosenthal-type envelope :math:`A(s_p + Ds_2)` of
    :math:`\\|S\\|_p`, with the absolute factor *A* supplied as
    *user_constant*.
    """
    if p < 2:
        raise ConcentrationError(f'p must be at least 2, not {p}')
    return user_constant * (profile.s(p) + D * profile.s(2))


def rosenthal_tail(profile, p, epsilon, D=1.0, user_constant=1.0):
    """
    Return :math:`A(s_p^p + D^ps_2^p)/\\epsilon^p`, the Markov bound on
    :math:`P(\\|S\\| > \\epsilon)` from the Rosenthal envelope.
    """
    if p < 2:
        raise ConcentrationError(f'p must be at least 2, not {p}')
    return user_constant * (
        profile.s(p) ** p + D ** p * profile.s(2) ** p) / epsilon ** p
