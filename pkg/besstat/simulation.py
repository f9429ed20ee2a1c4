# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Monte Carlo harness: empirical distances of the standardized statistics to
the standard normal, convergence rate fits, comparison of the measured
distances against the shape of the non-uniform bound, and the
demonstration that no non-uniform bound can hold far in the tails.

Replicates are generated in batches keyed by ``(seed, n, batch)``; the
partition depends only on the sample size and the statistic's shape, never
on the number of workers, so results are identical for every worker count.
"""

import math
import time
import logging
import typing as t
from multiprocessing import Pool

import numpy as np
from scipy import stats

from .const import BATCH_FLOATS, BOOTSTRAP
from .bounds import RangeViolation, iid_p3_shape
from .distributions import (
    DistributionError,
    DistributionSpec,
    Estimate,
    generator,
)
from .statistics import (
    BATCH_STATISTICS,
    DegeneracyError,
    build_model,
    degeneracy_check,
)

__all__ = [
    'SimulationError',
    'WEIGHTS',
    'DistanceRow',
    'SimulationRun',
    'RateEstimate',
    'DemoRow',
    'DemoReport',
    'ComparisonRow',
    'ComparisonTable',
    'empirical_distance',
    'distance_at',
    'simulate_statistic',
    'rate_fit',
    'run_experiment',
    'optimality_demo',
    'bound_vs_truth',
    'gamma_z_estimate',
    'degenerate_distance',
]


logger = logging.getLogger('besstat.simulation')

WEIGHTS = ('uniform', 'polynomial', 'exponential')


class SimulationError(RuntimeError):
    "Exception raised when a simulation cannot produce a result"


def _clean(samples):
    x = np.asarray(samples, dtype=float).reshape(-1)
    if not len(x):
        raise SimulationError('empty sample')
    if not np.isfinite(x).all():
        raise SimulationError('samples must be finite; filter sentinels first')
    return x


def distance_at(samples, z_grid, presorted=False):
    """
    Return :math:`|\\hat F(z) - \\Phi(z)|` at each point of *z_grid*, with
    :math:`\\hat F` the right-continuous empirical distribution function.
    """
    x = _clean(samples)
    if not presorted:
        x = np.sort(x)
    z = np.asarray(z_grid, dtype=float)
    ecdf = np.searchsorted(x, z, side='right') / len(x)
    return np.abs(ecdf - stats.norm.cdf(z))


def empirical_distance(samples, z_grid=(), weight='uniform', p=3.0,
                       presorted=False):
    """
    Distance between the empirical law of *samples* and the standard
    normal. The ``uniform`` distance is the exact supremum over the real
    line; ``polynomial`` and ``exponential`` report the maximum over *z_grid*
    of :math:`|\\hat F(z) - \\Phi(z)|` weighted by :math:`(1+|z|)^p` and
    :math:`e^{|z|/3}` respectively.
    """
    x = _clean(samples)
    if weight == 'uniform':
        return float(stats.ks_1samp(x, stats.norm.cdf).statistic)
    z = np.asarray(z_grid, dtype=float)
    if not len(z):
        raise SimulationError(f'{weight} distance needs a z grid')
    if weight == 'polynomial':
        w = (1 + np.abs(z)) ** p
    elif weight == 'exponential':
        w = np.exp(np.abs(z) / 3)
    else:
        raise SimulationError(f'unknown weight {weight!r}')
    return float((w * distance_at(x, z, presorted)).max())


def _batch_size(n, k):
    return max(1, BATCH_FLOATS // (n * k))


def _batch_worker(task):
    kind, observation, n, size, seed, batch = task
    spec = DistributionSpec.from_dict(observation)
    x = spec.law.draw(generator(seed, n, batch), size * n)
    return BATCH_STATISTICS[kind](x.reshape(size, n, spec.dimension))


def _map(func, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            return list(pool.imap(func, tasks))
    return [func(task) for task in tasks]


def simulate_statistic(kind, observation, n, replicates, seed, workers=1):
    """
    Return ``(values, sentinels)``: the raw statistic over *replicates*
    samples of size *n* with undefined replicates removed, and how many were
    removed.
    """
    if replicates < 1:
        raise SimulationError(f'replicates must be positive, not {replicates}')
    size = _batch_size(n, observation.dimension)
    tasks = [
        (kind, observation.as_dict(), n, min(size, replicates - start), seed,
         batch)
        for batch, start in enumerate(range(0, replicates, size))
    ]
    logger.debug('%s n=%d: %d batches of %d from seed %d', kind, n,
                 len(tasks), size, seed)
    values = np.concatenate(_map(_batch_worker, tasks, workers))
    undefined = np.isnan(values)
    sentinels = int(undefined.sum())
    if sentinels:
        logger.warning('n=%d: %d of %d replicates undefined; excluded',
                       n, sentinels, replicates)
    if sentinels == replicates:
        raise SimulationError(f'every replicate at n={n} is undefined')
    return values[~undefined], sentinels


class DistanceRow(t.NamedTuple):
    n: int
    replicates: int
    sentinels: int
    uniform: float
    polynomial: float
    exponential: float
    seconds: float = 0.0

    def csv_row(self):
        return [self.n, self.replicates, self.sentinels, repr(self.uniform),
                repr(self.polynomial), repr(self.exponential)]


class RateEstimate(t.NamedTuple):
    """
    Least squares fit of :math:`\\log D_n` on :math:`\\log n`. The 95%
    *half_width* comes from the bootstrap when replicate samples were
    available and from the regression standard error otherwise.
    """
    slope: float
    intercept: float
    half_width: float
    predicted_order: float = -0.5
    method: str = 'regression'

    @property
    def interval(self):
        return (self.slope - self.half_width, self.slope + self.half_width)


class SimulationRun(t.NamedTuple):
    digest: str
    kind: str
    params: dict
    n_grid: tuple
    replicates: int
    seed: int
    rows: tuple
    rate: t.Optional[RateEstimate] = None
    wall_time: float = 0.0

    def as_dict(self):
        return {
            'digest': self.digest,
            'kind': self.kind,
            'params': self.params,
            'n_grid': list(self.n_grid),
            'replicates': self.replicates,
            'seed': self.seed,
            'rows': [row._asdict() for row in self.rows],
            'rate': None if self.rate is None else self.rate._asdict(),
            'wall_time': self.wall_time,
        }


def _fit(log_n, log_d):
    fit = stats.linregress(log_n, log_d)
    return fit.slope, fit.intercept, fit.stderr


def _bootstrap_distance(sorted_x, cdf, rng):
    r = len(sorted_x)
    counts = rng.multinomial(r, np.full(r, 1 / r))
    upper = np.cumsum(counts) / r
    lower = upper - counts / r
    return max(np.abs(upper - cdf).max(), np.abs(lower - cdf).max())


def rate_fit(points, samples=None, bootstrap=BOOTSTRAP, seed=0,
             predicted_order=-0.5):
    """
    Fit the convergence rate to *points*, a sequence of ``(n, D_n)``. When
    *samples* maps each n to its standardized replicate sample, the slope's
    95% band comes from *bootstrap* resamples of the replicates; otherwise
    from the regression standard error and the t quantile.
    """
    points = sorted((int(n), float(d)) for n, d in points)
    if len({n for n, _ in points}) < 3:
        raise SimulationError('a rate fit needs at least 3 distinct n values')
    if any(not d > 0 for _, d in points):
        raise SimulationError('distances must be positive for a log-log fit')
    log_n = np.log([n for n, _ in points])
    log_d = np.log([d for _, d in points])
    slope, intercept, stderr = _fit(log_n, log_d)
    if samples is None or not bootstrap:
        dof = len(points) - 2
        half = 0.0 if dof < 1 else float(stderr * stats.t.ppf(0.975, dof))
        return RateEstimate(slope, intercept, half, predicted_order)
    prepared = []
    for n, _ in points:
        x = np.sort(_clean(samples[n]))
        prepared.append((x, stats.norm.cdf(x)))
    slopes = np.empty(bootstrap)
    for b in range(bootstrap):
        rng = generator(seed, b)
        resampled = [_bootstrap_distance(x, cdf, rng) for x, cdf in prepared]
        slopes[b] = _fit(log_n, np.log(np.maximum(resampled, 1e-300)))[0]
    lo, hi = np.quantile(slopes, [0.025, 0.975])
    logger.info('rate slope %.4f, bootstrap band [%.4f, %.4f]', slope, lo, hi)
    return RateEstimate(
        slope, intercept, float(max(hi - slope, slope - lo, 0.0)),
        predicted_order, 'bootstrap')


def _require_nondegenerate(kind, params, observation, seed):
    report = degeneracy_check(kind, params, observation, seed=seed)
    if report.degenerate:
        raise DegeneracyError(report)


def run_experiment(config, samples=None):
    """
    Run the simulation described by *config* (a
    :class:`~besstat.config.RunConfig`): for each n of the grid, simulate
    the statistic, standardize it by the normal approximation's centering
    and :math:`\\sigma_1`, and measure its distances to the standard
    normal. Degenerate linearizations are refused before any sampling.
    When a dict is passed as *samples* it receives the sorted standardized
    sample of each n.
    """
    kind = config.statistic.kind
    params = config.statistic.params
    observation = config.distribution
    sim = config.simulation
    _require_nondegenerate(kind, params, observation, sim.seed)
    model = build_model(kind, params, observation,
                        epsilon=config.bound.epsilon, seed=sim.seed)
    start = time.perf_counter()
    rows = []
    if samples is None:
        samples = {}
    for n in sim.n_grid:
        batch_start = time.perf_counter()
        values, sentinels = simulate_statistic(
            kind, observation, n, sim.replicates, sim.seed, sim.workers)
        x = np.sort(model.standardize(values, n))
        rows.append(DistanceRow(
            n, sim.replicates, sentinels,
            empirical_distance(x),
            empirical_distance(x, sim.z_grid, 'polynomial', config.bound.p,
                               presorted=True),
            empirical_distance(x, sim.z_grid, 'exponential', presorted=True),
            time.perf_counter() - batch_start))
        samples[n] = x
        logger.info('%s n=%d: D_n=%.6g', kind, n, rows[-1].uniform)
    rate = None
    if len(sim.n_grid) >= 3:
        try:
            rate = rate_fit(
                [(row.n, row.uniform) for row in rows], samples,
                bootstrap=sim.bootstrap, seed=sim.seed)
        except SimulationError as e:
            logger.warning('no rate fit: %s', e)
    return SimulationRun(
        config.digest, kind, params, tuple(sim.n_grid), sim.replicates,
        sim.seed, tuple(rows), rate, time.perf_counter() - start)


class DemoRow(t.NamedTuple):
    n: int
    kappa: float
    z: float
    defect: float
    stderr: float
    tail: float
    ratio: float


class DemoReport(t.NamedTuple):
    p: float
    quadratic: bool
    replicates: int
    rows: tuple

    def as_dict(self):
        return {
            'p': self.p,
            'quadratic': self.quadratic,
            'replicates': self.replicates,
            'rows': [row._asdict() for row in self.rows],
        }


def _demo_worker(task):
    p, n, size, thresholds, seed, batch = task
    law = DistributionSpec.heavy_tail(p).law
    v = law.draw(generator(seed, n, batch), size * (n - 1)).reshape(size, n - 1)
    s = v.sum(axis=1)
    top = v.max(axis=1)
    bottom = -v.min(axis=1)
    upper, level, lower = thresholds
    # P(sum > x) = n E sf(max(M, x - S)) over the other n - 1 summands
    estimate = (
        law.sf(np.maximum(top, upper - s)) -
        law.sf(np.maximum(top, level - s)))
    if lower is not None:
        estimate = estimate + law.sf(np.maximum(bottom, -lower + s))
    return n * estimate


def optimality_demo(p, kappa_grid, n_grid, replicates, seed=0, quadratic=True,
                    workers=1, kappa_power=None):
    """
    For :math:`T = \\sqrt n(\\bar V + \\bar V^2)` and :math:`W = \\sqrt n\\bar
    V` with heavy-tailed :math:`V`, estimate the defect :math:`P(T > z) -
    P(W > z)` at :math:`z = \\kappa\\sqrt n` and its ratio to the tail term
    :math:`nP(V > w)`, :math:`w = n^{3/4}z^{1/2}`.

    Sum tails are estimated by conditional Monte Carlo on the largest
    summand with common random numbers across the three tails involved.
    With *quadratic* false, :math:`T = W` and the defect is identically 0.
    When *kappa_power* is given, *kappa_grid* is ignored and each n uses
    the single :math:`\\kappa = n^{a}` with *a* = *kappa_power*; 0.25 puts z
    at :math:`n^{3/4}`.
    """
    if not p > 2:
        raise SimulationError(f'p must exceed 2, not {p}')
    try:
        law = DistributionSpec.heavy_tail(p).law
    except DistributionError as e:
        raise SimulationError(str(e))
    rows = []
    for n in n_grid:
        if n < 2:
            raise SimulationError('the demo needs n >= 2')
        root = math.sqrt(n)
        kappas = kappa_grid if kappa_power is None else [n ** kappa_power]
        for kappa in kappas:
            if kappa < 1:
                raise SimulationError(f'kappa must be >= 1, not {kappa}')
            z = kappa * root
            level = root * z
            if quadratic:
                disc = math.sqrt(1 + 4 * z / root)
                thresholds = (n * (disc - 1) / 2, level, n * (-1 - disc) / 2)
            else:
                thresholds = (level, level, None)
            size = _batch_size(n, 1)
            tasks = [
                (p, n, min(size, replicates - start), thresholds, seed, batch)
                for batch, start in enumerate(range(0, replicates, size))]
            estimates = np.concatenate(_map(_demo_worker, tasks, workers))
            defect = float(estimates.mean())
            stderr = float(estimates.std(ddof=1) / math.sqrt(replicates))
            tail = float(n * law.sf(n ** 0.75 * math.sqrt(z)))
            rows.append(DemoRow(
                n, kappa, z, defect, stderr, tail,
                defect / tail if tail > 0 else math.inf))
            logger.info('demo n=%d kappa=%g: defect=%.4g (+/- %.2g) tail=%.4g',
                        n, kappa, defect, stderr, tail)
    return DemoReport(float(p), quadratic, replicates, tuple(rows))


class ComparisonRow(t.NamedTuple):
    n: int
    z: float
    empirical: float
    shape: float
    implied_constant: float
    valid: bool

    def csv_row(self):
        return [self.n, repr(self.z), repr(self.empirical), repr(self.shape),
                repr(self.implied_constant), int(self.valid)]


class ComparisonTable(t.NamedTuple):
    rows: tuple
    implied_constant: float
    by_n: dict

    def as_dict(self):
        return {
            'rows': [row._asdict() for row in self.rows],
            'implied_constant': self.implied_constant,
            'by_n': {str(n): c for n, c in self.by_n.items()},
        }


def bound_vs_truth(model, n_grid, z_grid, replicates, seed=0, workers=1,
                   samples=None):
    """
    Tabulate the empirical :math:`|P(\\cdot \\le z) - \\Phi(z)|` of the
    standardized statistic against the shape :math:`(A_1/|z|^3 +
    A_2e^{-|z|/3})/\\sqrt n` of the non-uniform bound (suppressed constant
    1). Rows outside the valid z range are flagged and excluded from the
    implied constants.
    *samples* may map n to an already simulated sorted standardized sample
    (as filled in by :func:`run_experiment`); other n are simulated.
    """
    model.require_nondegenerate()
    samples = samples or {}
    rows = []
    by_n = {}
    for n in n_grid:
        try:
            x = samples[n]
        except KeyError:
            values, _ = simulate_statistic(
                model.kind, model.observation, n, replicates, seed, workers)
            x = np.sort(model.standardize(values, n))
        empirical = distance_at(x, z_grid, presorted=True)
        for z, d in zip(z_grid, empirical):
            try:
                shape = iid_p3_shape(model, n, z)
            except RangeViolation:
                logger.warning('n=%d z=%g outside the valid range; excluded',
                               n, z)
                rows.append(ComparisonRow(n, z, float(d), math.nan, math.nan,
                                          False))
            else:
                rows.append(ComparisonRow(n, z, float(d), shape, d / shape,
                                          True))
        valid = [row.implied_constant for row in rows
                 if row.n == n and row.valid]
        by_n[n] = max(valid) if valid else math.nan
    constants = [c for c in by_n.values() if not math.isnan(c)]
    return ComparisonTable(
        tuple(rows), max(constants) if constants else math.nan, by_n)


def gamma_z_estimate(pair_spec, n, z, replicates, seed=0):
    """
    Estimate :math:`\\sum_i P(|W - \\xi_i| > (|z|-2)/3)P(|\\eta_i| > 1)` for
    *n* i.i.d. pairs :math:`(\\xi, \\eta)` with law *pair_spec* (one column
    means :math:`\\eta = \\xi`). Returns an
    :class:`~besstat.distributions.Estimate`.
    """
    if n < 2:
        raise SimulationError('gamma_z needs n >= 2')
    law = pair_spec.law
    rng = generator(seed, n)
    eta_column = 0 if pair_spec.dimension == 1 else 1
    atoms = law.atoms()
    if atoms is not None:
        values, probs = atoms
        eta_tail = Estimate(math.fsum(probs[np.abs(values[:, eta_column]) > 1]))
    else:
        hits = np.abs(law.draw(rng, replicates)[:, eta_column]) > 1
        eta_tail = Estimate(
            float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(replicates)))
    threshold = (abs(z) - 2) / 3
    if threshold < 0:
        rest = Estimate(1.0)
    else:
        size = _batch_size(n - 1, 1)
        hits = []
        for batch, start in enumerate(range(0, replicates, size)):
            draws = law.draw(generator(seed, n - 1, batch),
                             min(size, replicates - start) * (n - 1))
            sums = draws[:, 0].reshape(-1, n - 1).sum(axis=1)
            hits.append(np.abs(sums) > threshold)
        hits = np.concatenate(hits)
        rest = Estimate(
            float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(replicates)))
    value = n * rest.value * eta_tail.value
    stderr = n * math.hypot(rest.stderr * eta_tail.value,
                            rest.value * eta_tail.stderr)
    return Estimate(value, stderr)


def degenerate_distance(kind, params, observation, n, replicates, seed=0,
                        workers=1):
    """
    Return the Kolmogorov distance to the standard normal of the statistic
    standardized by its own Monte Carlo mean and standard deviation. This is
    the naive standardization that remains available when
    :math:`\\sigma_1 = 0`.
    """
    report = degeneracy_check(kind, params, observation, seed=seed)
    if not report.degenerate:
        logger.info('%s is not degenerate (sigma1=%g)', kind, report.sigma1)
    values, _ = simulate_statistic(
        kind, observation, n, replicates, seed, workers)
    spread = values.std()
    if not spread > 0:
        raise SimulationError('the simulated statistic is constant')
    return empirical_distance((values - values.mean()) / spread)
