# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Implements the commands dispatched by the besstat application: evaluating
bounds, running simulations, verification suites and the optimality
demonstration, writing their artifacts to the output directory, and
summarizing them on the console.
"""

import io
import csv
import json
import math
import logging
from datetime import datetime, timezone
from importlib.metadata import version

import numpy as np
from rich import box
from rich.console import Console
from rich.table import Table

from .bounds import (
    RangeViolation,
    iid_inputs,
    iid_nonuniform_bound,
    iid_p3_constants,
    iid_p3_uniform,
    suboptimal_exp_bound,
    uniform_fS_bound,
)
from .config import canonical_json
from .database import Database, DistanceRecord
from .distributions import InfiniteMomentError, expect
from .simulation import (
    DistanceRow,
    SimulationError,
    bound_vs_truth,
    optimality_demo,
    run_experiment,
)
from .statistics import DegeneracyError, build_model
from .verify import run_suites


__all__ = [
    'Commands',
    'plain',
]


logger = logging.getLogger('besstat.commands')


class Commands:
    """
    Dispatches a :class:`~besstat.config.RunConfig` to the ``do_<command>``
    method for its command. Every artifact written carries the config's
    digest and seed; the creation time appears only in header lines so that
    re-running a configuration reproduces byte-identical CSV bodies.
    """
    def __init__(self, config, console=None):
        self.config = config
        self.console = console or Console()
        self.created = datetime.now(tz=timezone.utc).replace(microsecond=0)
        self.output = config.output.path
        self.version = version('besstat')

    def dispatch(self):
        """
        Run the configured command, returning the process exit status (0, or
        3 when verification fails). :exc:`~besstat.statistics.DegeneracyError`
        is re-raised after its report has been written.
        """
        self.output.mkdir(parents=True, exist_ok=True)
        handler = getattr(self, f'do_{self.config.command}')
        try:
            manifest, status = handler()
            manifest = plain(manifest)
        except DegeneracyError as e:
            self.write_json('degeneracy.json', e.report.as_dict())
            raise
        with Database(self.output / 'results.db') as db:
            db.migrate()
            with db.transaction():
                db.add_run(Database.new_run(
                    self.config.digest, self.config.command, self.config.seed,
                    manifest))
                if self.config.command == 'simulate':
                    self._store_distances(db, manifest)
        return status

    @property
    def header(self):
        return [
            f'besstat {self.version}',
            f'digest: {self.config.digest}',
            f'seed: {self.config.seed}',
            f'created: {self.created.isoformat()}',
        ]

    def _enabled(self, fmt):
        return fmt in self.config.output.formats

    def write_json(self, name, payload):
        path = self.output / name
        data = {
            'besstat': self.version,
            'digest': self.config.digest,
            'seed': self.config.seed,
            'created': self.created.isoformat(),
            'config': self.config.as_dict(),
        }
        data.update(payload)
        path.write_text(json.dumps(plain(data), indent=2) + '\n')
        logger.info('wrote %s', path)
        return path

    def write_csv(self, name, rows):
        if not self._enabled('csv'):
            return None
        path = self.output / name
        out = io.StringIO()
        for line in self.header:
            out.write(f'# {line}\n')
        csv.writer(out, lineterminator='\n').writerows(rows)
        path.write_text(out.getvalue())
        logger.info('wrote %s', path)
        return path

    def write_dat(self, name, columns, rows):
        "Write two-column plot data with a commented header"
        if not self._enabled('dat'):
            return None
        path = self.output / name
        with path.open('w') as f:
            for line in self.header:
                f.write(f'# {line}\n')
            f.write('# ' + ' '.join(columns) + '\n')
            for x, y in rows:
                f.write(f'{x!r} {y!r}\n')
        logger.info('wrote %s', path)
        return path

    def _model(self):
        conf = self.config
        return build_model(
            conf.statistic.kind, conf.statistic.params, conf.distribution,
            epsilon=conf.bound.epsilon, seed=conf.seed)

    def do_bound(self):
        "Evaluate every bound for the configured statistic and sample size"
        conf = self.config.bound
        model = self._model().require_nondegenerate()
        n, p = conf.n, conf.p
        reports = []
        skipped = []
        constants = None
        try:
            A1, A2 = iid_p3_constants(model, n)
            constants = {'A1': A1, 'A2': A2}
            reports.append(iid_p3_uniform(model, n, conf.user_constant))
        except InfiniteMomentError as e:
            skipped.append(f'p = 3 bounds: {e}')
        inputs = iid_inputs(model, n, p)._replace(D=conf.D)
        reports.append(uniform_fS_bound(inputs, user_constant=conf.user_constant))
        for z in conf.z_grid:
            try:
                reports.append(iid_nonuniform_bound(
                    model, n, z, p, profile=inputs.profile,
                    user_constant=conf.user_constant))
            except RangeViolation as e:
                logger.warning('skipping z=%g: %s', z, e)
                skipped.append(str(e))
        r = min(p, 3.0)
        LV = expect(
            model.observation,
            lambda x: np.abs(model.embed(x) @ model.gradient) ** r,
            mode=model.mode, seed=model.seed).value ** (1 / r)
        try:
            reports.append(suboptimal_exp_bound(
                n, p, {
                    'V2': model.v_norm(2), 'Vp': model.v_norm(p), 'LV': LV,
                    'sigma1': model.sigma1,
                }, model.M, model.epsilon, conf.be_constant, conf.D))
        except InfiniteMomentError as e:
            skipped.append(f'suboptimal exponential bound: {e}')
        self.write_json('bound.json', {
            'model': model.as_dict(),
            'n': n,
            'constants': constants,
            'reports': [report.as_dict() for report in reports],
            'skipped': skipped,
        })
        rows = [['report', 'z', 'label', 'value', 'equation_tag']]
        for report in reports:
            for label, value, tag in list(report.to_csv_rows())[1:]:
                rows.append([report.title, '' if report.z is None else
                             repr(report.z), label, value, tag])
        self.write_csv('bound.csv', rows)
        self.print_bounds(model, constants, reports)
        return {
            'model': model.as_dict(), 'constants': constants,
            'totals': {
                f'{report.title} z={report.z}': report.total
                for report in reports},
        }, 0

    def do_simulate(self):
        "Measure the distances to the normal law over the configured n grid"
        conf = self.config
        samples = {}
        run = run_experiment(conf, samples)
        model = self._model()
        table = bound_vs_truth(
            model, conf.simulation.n_grid, conf.simulation.z_grid,
            conf.simulation.replicates, conf.seed, conf.simulation.workers,
            samples=samples)
        self.write_json('simulate.json', {
            'model': model.as_dict(),
            'run': run.as_dict(),
            'comparison': table.as_dict(),
        })
        self.write_csv('distances.csv', [
            ['n', 'replicates', 'sentinels', 'uniform', 'polynomial',
             'exponential']] + [row.csv_row() for row in run.rows])
        self.write_csv('comparison.csv', [
            ['n', 'z', 'empirical', 'shape', 'implied_constant', 'valid']] +
            [row.csv_row() for row in table.rows])
        self.write_dat('rate.dat', ['log_n', 'log_D_n'], [
            (math.log(row.n), math.log(row.uniform))
            for row in run.rows if row.uniform > 0])
        self.print_simulation(run, table)
        return {
            'rows': [row._asdict() for row in run.rows],
            'rate': None if run.rate is None else run.rate._asdict(),
            'implied_constant': table.implied_constant,
        }, 0

    def _store_distances(self, db, manifest):
        digest = self.config.digest
        kind = self.config.statistic.kind
        fresh = {
            record.n: record for record in (
                DistanceRecord.from_distance_row(digest, kind, DistanceRow(**row))
                for row in manifest['rows'])}
        stored = db.get_distances(digest)
        for record in stored:
            if record.n in fresh and not record.matches(fresh[record.n]):
                raise SimulationError(
                    f'n={record.n}: distances differ from the stored run '
                    f'{digest[:8]}; the simulation is not reproducible')
        if stored:
            logger.info('re-run of %s reproduced %d stored rows', digest[:8],
                        len(stored))
        db.add_distances(fresh.values())

    def do_demo(self):
        "Estimate the defect-to-tail ratios of the optimality demonstration"
        conf = self.config.demo
        report = optimality_demo(
            conf.p, conf.kappa_grid, conf.n_grid, conf.replicates,
            seed=self.config.seed, quadratic=conf.quadratic,
            workers=self.config.simulation.workers,
            kappa_power=conf.kappa_power)
        self.write_json('demo.json', report.as_dict())
        self.write_csv('demo.csv', [list(report.rows[0]._fields)] + [
            [repr(value) for value in row] for row in report.rows])
        self.write_dat('demo.dat', ['log_n', 'ratio'], [
            (math.log(row.n), row.ratio) for row in report.rows])
        self.print_demo(report)
        return report.as_dict(), 0

    def do_verify(self):
        "Run every verification suite"
        manifest = run_suites(self.config.verify, self.config.digest)
        self.write_json('manifest.json', manifest.as_dict())
        self.print_manifest(manifest)
        return manifest.as_dict(), 0 if manifest.passed else 3

    def print_bounds(self, model, constants, reports):
        table = Table(box=box.ROUNDED)
        table.add_column('Bound')
        table.add_column('z', no_wrap=True, justify='right')
        table.add_column('Term')
        table.add_column('Value', no_wrap=True, justify='right')
        table.add_column('Tag', no_wrap=True)
        for report in reports:
            for index, term in enumerate(report.terms):
                table.add_row(
                    report.title if index == 0 else '',
                    '' if report.z is None or index else f'{report.z:g}',
                    term.label, f'{term.value:.6g}', term.equation_tag,
                    end_section=index == len(report.terms) - 1)
        info = (
            f'{model.kind} {canonical_json(model.params)}: '
            f'sigma1={model.sigma1:.6g} M={model.M:.6g} |L|={model.norm_L:.6g}')
        if constants:
            info += f' A1={constants["A1"]:.6g} A2={constants["A2"]:.6g}'
        self.console.print(info, '', table, '',
                           'Totals are modulo the absolute constant A(p).',
                           sep='\n')

    def print_simulation(self, run, comparison):
        table = Table(box=box.ROUNDED)
        table.add_column('n', no_wrap=True, justify='right')
        table.add_column('Sentinels', no_wrap=True, justify='right')
        table.add_column('D_n', no_wrap=True, justify='right')
        table.add_column('Polynomial', no_wrap=True, justify='right')
        table.add_column('Exponential', no_wrap=True, justify='right')
        table.add_column('Implied A', no_wrap=True, justify='right')
        for row in run.rows:
            implied = comparison.by_n.get(row.n, math.nan)
            table.add_row(
                str(row.n), str(row.sentinels), f'{row.uniform:.6f}',
                f'{row.polynomial:.6f}', f'{row.exponential:.6f}',
                '-' if math.isnan(implied) else f'{implied:.4g}')
        output = [
            f'{run.kind} {canonical_json(run.params)}, {run.replicates} '
            f'replicates per n', '', table]
        if run.rate is not None:
            output.append(
                f'slope {run.rate.slope:.4f} ± {run.rate.half_width:.4f} '
                f'({run.rate.method}); predicted {run.rate.predicted_order}')
        self.console.print(*output, sep='\n')

    def print_demo(self, report):
        table = Table(box=box.ROUNDED)
        table.add_column('n', no_wrap=True, justify='right')
        table.add_column('kappa', no_wrap=True, justify='right')
        table.add_column('Defect', no_wrap=True, justify='right')
        table.add_column('Std err', no_wrap=True, justify='right')
        table.add_column('n P(V > w)', no_wrap=True, justify='right')
        table.add_column('Ratio', no_wrap=True, justify='right')
        for row in report.rows:
            table.add_row(
                str(row.n), f'{row.kappa:g}', f'{row.defect:.4g}',
                f'{row.stderr:.2g}', f'{row.tail:.4g}', f'{row.ratio:.4g}')
        self.console.print(table)

    def print_manifest(self, manifest):
        table = Table(box=box.ROUNDED)
        table.add_column('Suite')
        table.add_column('Status', no_wrap=True, justify='center')
        table.add_column('Checks', no_wrap=True, justify='right')
        table.add_column('Failures', no_wrap=True, justify='right')
        for suite in manifest.suites:
            table.add_row(
                suite.name,
                '[green]✓[/green]' if suite.passed else
                f'[red]{suite.status}[/red]',
                str(suite.checks), str(suite.failures))
        self.console.print(table)
        for suite in manifest.suites:
            if not suite.passed:
                self.console.print(f'[red]{suite.name}:[/red] {suite.detail}')


def plain(value):
    """
    Convert *value* to strict JSON data: numpy scalars and arrays become
    Python values and non-finite floats become None.
    """
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value
