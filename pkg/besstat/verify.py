# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
The verification suites run by the ``verify`` command. Each suite checks an
inequality or invariant exactly (by enumeration or closed-form arithmetic)
or against a Monte Carlo oracle, on fixed fixtures and on fuzzed families
drawn from a seeded generator.
"""

import math
import logging
import typing as t

import numpy as np

from .const import MC_SIGMAS, PROB_TOL
from .bounds import (
    BoundInputs,
    gamma_terms,
    iid_p3_constants,
    lambda_alpha,
    nonuniform_fS_bound,
    required_alphas,
    scale_inputs,
    suboptimal_exp_bound,
    uniform_fS_bound,
)
from .concentration import (
    hoeffding_tail,
    max_sum_check,
    rosenthal_envelope,
    rosenthal_tail,
    sum_distribution,
    sum_tail_bound,
    tilt,
)
from .distributions import (
    DistributionSpec,
    Family,
    MomentProfile,
    family_profile,
    generator,
)
from .statistics import (
    PARTS,
    SmoothStatisticModel,
    degeneracy_check,
    degenerate_hotelling_spec,
    degenerate_pearson_spec,
    degenerate_student_spec,
    hotelling_T2,
    linearization_identity_check,
    pearson_R,
    smoothness_certify,
    student_T,
    user_model,
)


__all__ = [
    'SUITES',
    'SuiteResult',
    'Manifest',
    'fuzz_family',
    'fuzz_symmetric_family',
    'run_suites',
]


logger = logging.getLogger('besstat.verify')

EXACT_RTOL = 1e-9


class SuiteResult(t.NamedTuple):
    name: str
    status: str
    checks: int
    failures: int
    detail: str = ''

    @property
    def passed(self):
        return self.status == 'pass'

    def as_dict(self):
        return self._asdict()


class Manifest(t.NamedTuple):
    digest: str
    seed: int
    suites: tuple

    @property
    def passed(self):
        return all(suite.passed for suite in self.suites)

    def as_dict(self):
        return {
            'digest': self.digest,
            'seed': self.seed,
            'passed': self.passed,
            'suites': [suite.as_dict() for suite in self.suites],
        }


class _Tally:
    "Counts checks and keeps the first few failure descriptions"
    def __init__(self):
        self.checks = 0
        self.failures = []

    def check(self, holds, description):
        self.checks += 1
        if not holds:
            self.failures.append(description)

    def close(self, expected, actual, description, rtol=EXACT_RTOL):
        self.check(
            math.isclose(expected, actual, rel_tol=rtol, abs_tol=rtol * 1e-3),
            f'{description}: expected {expected!r}, got {actual!r}')


def fuzz_family(rng, n_max=8, atoms_max=3):
    """
    Return a random discrete real :class:`~besstat.distributions.Family` of
    at most *n_max* independent centered summands with
    :math:`\\sum_i E\\xi_i^2 = 1`.
    """
    n = int(rng.integers(1, n_max + 1))
    members = []
    for _ in range(n):
        k = int(rng.integers(2, atoms_max + 1))
        values = rng.standard_normal(k) * rng.exponential()
        probs = rng.dirichlet(np.ones(k))
        values = values - probs @ values
        members.append((values, probs))
    scale = math.sqrt(math.fsum(probs @ values ** 2 for values, probs in members))
    return Family.of(*(
        DistributionSpec.atoms(values / scale, probs)
        for values, probs in members))


def fuzz_symmetric_family(rng, n_max=8, atoms_max=3, dimension=1):
    "Return a random family of at most *n_max* summands symmetric about 0"
    n = int(rng.integers(1, n_max + 1))
    specs = []
    for _ in range(n):
        k = int(rng.integers(1, atoms_max + 1))
        half = rng.standard_normal((k, dimension)) * rng.exponential()
        probs = rng.dirichlet(np.ones(k)) / 2
        values = np.concatenate([half, -half])
        if dimension == 1:
            values = values[:, 0]
        specs.append(DistributionSpec.atoms(values, np.concatenate([probs, probs])))
    return Family.of(*specs)


def _family_tail(family):
    atoms = [
        (spec.law.atoms(), count) for spec, count in family.members]
    def tail(z):
        return math.fsum(
            count * math.fsum(probs[np.abs(values[:, 0]) > z])
            for (values, probs), count in atoms)
    return tail


def suite_hoeffding(settings):
    """
    Exact :math:`P(W \\ge z)` by enumeration never exceeds the Hoeffding
    bound on a (z, t) grid over fuzzed unit-variance families.
    """
    tally = _Tally()
    tally.close((math.e / 3) ** 2, hoeffding_tail(2, 1, lambda t: 0.0),
                'bound at z=2, t=1')
    tally.close((math.e / 5) ** 4, hoeffding_tail(4, 1, lambda t: 0.0),
                'bound at z=4, t=1')
    rademacher = Family.iid(DistributionSpec.atoms([-0.5, 0.5], [0.5, 0.5]), 4)
    values, probs = sum_distribution(rademacher)
    tally.close(1 / 16, math.fsum(probs[values[:, 0] >= 2]),
                'P(W >= 2) for four signs of 1/2')
    for index in range(settings.families):
        family = fuzz_family(generator(settings.seed, 1, index))
        values, probs = sum_distribution(family)
        tail = _family_tail(family)
        for z in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0):
            exact = math.fsum(probs[values[:, 0] >= z])
            for t_ in (0.25, 0.5, 1.0, 2.0):
                bound = hoeffding_tail(z, t_, tail)
                tally.check(
                    exact <= bound + PROB_TOL,
                    f'family {index}: P(W >= {z}) = {exact!r} exceeds '
                    f'{bound!r} at t={t_}')
    return tally


def suite_max_inequality(settings):
    """
    Both halves of the maximal inequality for symmetric summands on fuzzed
    families in one and two dimensions.
    """
    tally = _Tally()
    signs = Family.iid(DistributionSpec.atoms([-1.0, 1.0], [0.5, 0.5]), 2)
    result = max_sum_check(signs, 0.5)
    tally.check(
        np.allclose(result[:3], (0.5, 0.5, 1 / 3), rtol=0, atol=1e-12)
        and result.holds, f'two signs at x=0.5 gave {result!r}')
    result = max_sum_check(signs, 1.5)
    tally.check(
        np.allclose(result[:3], (0.5, 0.0, 0.0), rtol=0, atol=1e-12)
        and result.holds, f'two signs at x=1.5 gave {result!r}')
    for index in range(settings.fuzz):
        rng = generator(settings.seed, 2, index)
        family = fuzz_symmetric_family(
            rng, dimension=1 + int(rng.integers(0, 2)))
        scale = max(
            float(np.linalg.norm(spec.law.atoms()[0], axis=1).max())
            for spec, _ in family.members)
        x = scale * rng.uniform(0.05, 1.5)
        result = max_sum_check(family, x)
        tally.check(result.holds, f'family {index} at x={x!r}: {result!r}')
    return tally


def suite_tilt(settings):
    """
    The tilt identity holds atom by atom to 1e-12 relative, tilted
    probabilities sum to 1, and the tilted moment bounds hold.
    """
    tally = _Tally()
    for c in (0.5, 1.0):
        signs = tilt([DistributionSpec.atoms([-1.0, 1.0], [0.5, 0.5])], c)
        values, probs, _ = signs.tilted[0]
        tally.close(math.exp(c) / (math.exp(c) + math.exp(-c)),
                    float(probs[values[:, 0] == 1][0]), f'P(xi^ = 1) at c={c}')
        twos = tilt([DistributionSpec.atoms([-2.0, 2.0], [0.5, 0.5])], c)
        values, probs, _ = twos.tilted[0]
        tally.close(1 / (1 + math.exp(-2 * c)),
                    float(probs[values[:, 0] == 2][0]), f'P(xi^ = 2) at c={c}')
    for index in range(settings.families):
        family = fuzz_family(generator(settings.seed, 3, index))
        for c in (0.0, 0.5, 1.0, 2.0):
            tilted = tilt(family, c)
            error = tilted.check_identity()
            tally.check(error <= 1e-12,
                        f'family {index}, c={c}: identity error {error!r}')
            for member, (_, probs, _) in enumerate(tilted.tilted):
                total = math.fsum(probs)
                tally.check(abs(total - 1) <= 1e-12,
                            f'family {index} member {member}: mass {total!r}')
            for name, holds in tilted.moment_bounds(3.0):
                tally.check(holds, f'family {index}, c={c}: {name}')
    return tally


def _unit_inputs(p):
    s = {alpha: 0.05 * (1 + alpha) for alpha in required_alphas(p)}
    profile = MomentProfile.from_values(
        s, lambda z: min(1.0, 0.01 / z ** 3) if z > 0 else 1.0)
    return BoundInputs(norm_L=1.0, sigma=0.5, M=2.0, epsilon=1.0, p=p,
                       profile=profile)


def suite_unit_freeness(settings):
    """
    Every term of the uniform and non-uniform f(S) bounds is unchanged by
    the change of units :math:`X \\mapsto cX`.
    """
    tally = _Tally()
    for p in (3.0, 2.5, 4.0):
        inputs = _unit_inputs(p)
        base = [uniform_fS_bound(inputs)] + [
            nonuniform_fS_bound(inputs, z) for z in (1.0, 2.0, 3.5, -5.0)]
        for c in (0.5, 2.0, 10.0):
            for d in (-1, 0, 1):
                scaled = scale_inputs(inputs, c, d)
                reports = [uniform_fS_bound(scaled)] + [
                    nonuniform_fS_bound(scaled, report.z)
                    for report in base[1:]]
                for before, after in zip(base, reports):
                    for term in before.terms:
                        tally.close(
                            term.value, after.term(term.label),
                            f'p={p} c={c} d={d} {before.title} {term.label}',
                            rtol=1e-10)
    return tally


class _FixtureModel(t.NamedTuple):
    kind: str
    norm_L: float
    sigma1: float
    epsilon: float
    M: float
    norms: dict

    def v_norm(self, alpha):
        return self.norms[alpha]


def suite_arithmetic(settings):
    "Closed-form values of the bound arithmetic on documented inputs"
    tally = _Tally()
    model = _FixtureModel('fixture', 1.0, 1.0, 0.5, 4.0, {2: 1.0, 3: 1.2})
    A1, A2 = iid_p3_constants(model, 100)
    tally.close(1.808, A1, 'A1')
    tally.close(10.1376, A2, 'A2')
    n = 100
    lam3 = lambda_alpha(BoundInputs(
        norm_L=1.0, sigma=1 / math.sqrt(n), M=2.0, epsilon=1.0,
        profile=MomentProfile.from_values({3: 2.0 * n ** (1 / 3) / n})), 3)
    tally.close(2 / 100 ** (1 / 6), lam3, 'lambda_3')
    inputs = BoundInputs(
        norm_L=1.0, sigma=1.0, M=2.0, epsilon=1.0, p=3.0,
        profile=MomentProfile.from_values({3: 0.2, 1.5: 0.05, 2: 0.1}))
    gamma, gamma1 = gamma_terms(inputs)
    tally.close(0.061, gamma, 'Gamma')
    tally.close(0.0706, gamma1, 'Gamma1')
    report = uniform_fS_bound(inputs, 0.001, 0.002)
    tally.close(0.072, report.total, 'uniform f(S) total')
    result = sum_tail_bound(inputs, 3.0)
    tally.close(1.0, result.x, 'x of the sum tail bound')
    tally.close(36 * math.e * 0.01, result.Lambda1, 'Lambda1')
    for n in (10, 1000, 10 ** 6):
        report = suboptimal_exp_bound(
            n, 3.0, {'V2': 1.0, 'Vp': 1.2, 'LV': 1.0, 'sigma1': 1.0},
            M=1.0, epsilon=0.5)
        if 'exponential' in report:
            tally.close(1 / n, report.term('exponential'),
                        f'exponential term at n={n}')
    profile = MomentProfile.from_values({3: 1.0, 2: 2.0})
    tally.close(3.0, rosenthal_envelope(profile, 3.0), 'Rosenthal envelope')
    return tally


def suite_statistic_oracles(settings):
    "Exact values of the statistics and the linearization identity"
    tally = _Tally()
    tally.close(2 * math.sqrt(9 / 2), student_T([1.0, 2.0, 3.0]), 'student_T',
                rtol=1e-12)
    tally.close(-0.5, pearson_R([(0, 0), (1, 0), (0, 1)]), 'pearson_R',
                rtol=1e-12)
    tally.close(24.0, hotelling_T2([(1, 0), (0, 1), (1, 1)]), 'hotelling_T2',
                rtol=1e-12)
    for index in range(settings.families):
        rng = generator(settings.seed, 7, index)
        n = int(rng.integers(200, 400))
        for kind, params, sample in (
            ('student', {'mu': 1.0}, 1.0 + rng.standard_normal(n)),
            ('pearson', {'rho': 0.0}, rng.standard_normal((n, 2))),
            ('hotelling', {'mu': [0.5, 0.0]},
             np.array([0.5, 0.0]) + rng.standard_normal((n, 2))),
        ):
            result = linearization_identity_check(kind, params, sample)
            tally.check(result is not False,
                        f'{kind} linearization identity, sample {index}')
    return tally


def suite_statistic_invariances(settings):
    """
    Student's T is scale invariant, Pearson's R affine invariant and
    Hotelling's T-squared invariant under nonsingular linear maps.
    """
    tally = _Tally()
    for index in range(settings.fuzz):
        rng = generator(settings.seed, 8, index)
        n = int(rng.integers(5, 30))
        x = rng.standard_normal(n) + rng.standard_normal()
        c = float(rng.uniform(0.1, 10))
        tally.close(student_T(x), student_T(c * x),
                    f'student scale, sample {index}', rtol=1e-8)
        xy = rng.standard_normal((n, 2)) @ rng.standard_normal((2, 2))
        a, b = rng.uniform(0.1, 10, 2)
        shift = rng.standard_normal(2)
        tally.close(pearson_R(xy), pearson_R(xy * (a, b) + shift),
                    f'pearson affine, sample {index}', rtol=1e-8)
        k = int(rng.integers(2, 4))
        z = rng.standard_normal((n + k, k)) + rng.standard_normal(k)
        A = rng.standard_normal((k, k)) + 2 * np.eye(k)
        if abs(np.linalg.det(A)) < 1e-3:
            continue
        tally.close(hotelling_T2(z), hotelling_T2(z @ A.T),
                    f'hotelling linear, sample {index}', rtol=1e-6)
    return tally


def suite_smoothness(settings):
    """
    The certification recovers M = 2 for :math:`x + x^2` and certifies the
    shipped statistics on the ball of radius 1/2 without violations.
    """
    tally = _Tally()
    quadratic = user_model(
        lambda x: x[:, 0] + x[:, 0] ** 2, [1.0], epsilon=1.0, M=math.nan)
    m_hat, violations = smoothness_certify(
        quadratic, n_points=settings.certify_points, seed=settings.seed)
    tally.close(2.0, m_hat, 'M_hat of x + x^2', rtol=1e-6)
    tally.check(not violations, f'x + x^2: {violations} violations')
    for kind, params in (
        ('student', {'mu': 1.0}),
        ('pearson', {'rho': 0.5}),
        ('hotelling', {'mu': [1.0, 0.0]}),
    ):
        embed, f, gradient = PARTS[kind](params)
        probe = SmoothStatisticModel(
            kind, params, embed, f, gradient, math.nan, 0.5, math.nan)
        m_hat, violations = smoothness_certify(
            probe, n_points=settings.certify_points, seed=settings.seed)
        tally.check(
            math.isfinite(m_hat) and not violations,
            f'{kind}: M_hat={m_hat!r} with {violations} violations')
    return tally


def suite_degeneracy(settings):
    "The degenerate supports give sigma1 = 0; ordinary laws do not"
    tally = _Tally()
    for kind, (params, spec) in (
        ('student', degenerate_student_spec()),
        ('pearson', degenerate_pearson_spec(1.0, 1.0)),
        ('pearson', degenerate_pearson_spec(1.0, 2.0, 0.5)),
        ('hotelling', degenerate_hotelling_spec()),
    ):
        report = degeneracy_check(kind, params, spec)
        tally.check(
            report.degenerate and report.sigma1 < 1e-9 and report.structural,
            f'{kind} {params}: {report!r}')
    for kind, params, spec in (
        ('student', {'mu': 1.0}, DistributionSpec.gaussian(1.0, 1.0)),
        ('student', {'mu': 1.0}, DistributionSpec.bernoulli_shift(0.3, 1.0)),
        ('pearson', {'rho': 0.0}, DistributionSpec.gaussian([0, 0], np.eye(2))),
    ):
        report = degeneracy_check(kind, params, spec)
        tally.check(not report.degenerate, f'{kind} {spec.kind}: {report!r}')
    return tally


def suite_chebyshev(settings):
    """
    The Rosenthal-envelope bound on :math:`P(\\|S\\| > \\epsilon)` (with
    constant 1 and p = 2, i.e. Chebyshev) is never below the Monte Carlo
    estimate minus four standard errors for Gaussian sums.
    """
    tally = _Tally()
    draws = 20_000
    for index in range(min(settings.families, 50)):
        rng = generator(settings.seed, 10, index)
        k = int(rng.integers(1, 4))
        n = int(rng.integers(1, 9))
        scale = float(rng.uniform(0.05, 1.0))
        spec = DistributionSpec.gaussian(np.zeros(k), scale ** 2 * np.eye(k))
        family = Family.iid(spec, n)
        profile = family_profile(family, [2.0])
        epsilon = float(profile.s(2) * rng.uniform(0.5, 3.0))
        bound = rosenthal_tail(profile, 2.0, epsilon)
        s = spec.law.draw(rng, draws * n).reshape(draws, n, k).sum(axis=1)
        hits = np.linalg.norm(s, axis=1) > epsilon
        estimate = float(hits.mean())
        stderr = math.sqrt(max(estimate * (1 - estimate), 1 / draws) / draws)
        tally.check(
            bound >= estimate - MC_SIGMAS * stderr,
            f'case {index}: bound {bound!r} below estimate {estimate!r}')
    return tally


SUITES = {
    'hoeffding': suite_hoeffding,
    'max-inequality': suite_max_inequality,
    'tilt': suite_tilt,
    'unit-freeness': suite_unit_freeness,
    'arithmetic': suite_arithmetic,
    'statistic-oracles': suite_statistic_oracles,
    'statistic-invariances': suite_statistic_invariances,
    'smoothness': suite_smoothness,
    'degeneracy': suite_degeneracy,
    'chebyshev': suite_chebyshev,
}


def _run_suite(name, suite, settings):
    logger.info('running suite %s', name)
    try:
        tally = suite(settings)
    except Exception as e:
        logger.exception('suite %s raised', name)
        return SuiteResult(name, 'error', 0, 1, f'{e.__class__.__name__}: {e}')
    failures = len(tally.failures)
    if failures:
        logger.warning('suite %s: %d of %d checks failed', name, failures,
                       tally.checks)
    return SuiteResult(
        name, 'fail' if failures else 'pass', tally.checks, failures,
        '; '.join(tally.failures[:5]))


def run_suites(settings, digest='', names=None):
    """
    Run the suites named in *names* (all of :data:`SUITES` by default) with
    the :class:`~besstat.config.VerifySection` *settings* and return the
    :class:`Manifest`.
    """
    names = list(SUITES) if names is None else list(names)
    return Manifest(digest, settings.seed, tuple(
        _run_suite(name, SUITES[name], settings) for name in names))
