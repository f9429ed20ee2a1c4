# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

import json
import math

import pytest
import numpy as np
from sqlalchemy import text

from besstat import verify
from besstat.commands import *
from besstat.bounds import iid_p3_constants
from besstat.database import Database
from besstat.distributions import DistributionSpec
from besstat.simulation import SimulationError
from besstat.statistics import DegeneracyError, build_model


@pytest.fixture()
def bound_config(student_config):
    return {
        'command': 'bound',
        'statistic': student_config['statistic'],
        'distribution': student_config['distribution'],
        'bound': {'n': 100, 'z_grid': [0.5, 2.0]},
    }


@pytest.fixture()
def arithmetic_only(monkeypatch):
    monkeypatch.setattr(verify, 'SUITES', {'arithmetic': verify.suite_arithmetic})


def test_plain():
    assert plain({
        'a': np.float64(1.5),
        'b': (math.nan, np.int64(2)),
        3: np.array([1.0, math.inf]),
    }) == {'a': 1.5, 'b': [None, 2], '3': [1.0, None]}


def test_bound(make_config, bound_config, console):
    config = make_config(bound_config)
    assert Commands(config, console).dispatch() == 0
    out = config.output.path
    data = json.loads((out / 'bound.json').read_text())
    assert data['digest'] == config.digest
    assert data['n'] == 100
    model = build_model(
        'student', {'mu': 1.0}, DistributionSpec.gaussian(1.0, 1.0), seed=0)
    A1, A2 = iid_p3_constants(model, 100)
    assert data['constants'] == {'A1': pytest.approx(A1), 'A2': pytest.approx(A2)}
    titles = [report['title'] for report in data['reports']]
    assert 'uniform i.i.d. bound (p = 3)' in titles
    assert 'uniform f(S) bound' in titles
    assert 'non-uniform i.i.d. bound (n = 100)' in titles
    assert 'suboptimal exponential bound' in titles
    assert any('0.5' in message for message in data['skipped'])
    lines = (out / 'bound.csv').read_text().splitlines()
    assert lines[0].startswith('# besstat ')
    assert lines[1] == f'# digest: {config.digest}'
    assert 'report,z,label,value,equation_tag' in lines
    assert 'uniform f(S) bound' in console.file.getvalue()
    with Database(out / 'results.db') as db:
        run = db.get_run(config.digest)
    assert run.command == 'bound'
    assert run.manifest['constants'] == data['constants']


def test_bound_json_only(make_config, bound_config, console):
    config = make_config(dict(bound_config, output={'formats': ['json']}))
    assert Commands(config, console).dispatch() == 0
    assert (config.output.path / 'bound.json').exists()
    assert not (config.output.path / 'bound.csv').exists()


def test_degenerate(make_config, degenerate_config, console):
    config = make_config(degenerate_config)
    with pytest.raises(DegeneracyError):
        Commands(config, console).dispatch()
    data = json.loads((config.output.path / 'degeneracy.json').read_text())
    assert data['degenerate'] is True
    assert data['digest'] == config.digest


def test_simulate(make_config, student_config, console):
    config = make_config(student_config)
    assert Commands(config, console).dispatch() == 0
    out = config.output.path
    for name in ('simulate.json', 'distances.csv', 'comparison.csv', 'rate.dat'):
        assert (out / name).exists()
    data = json.loads((out / 'simulate.json').read_text())
    assert [row['n'] for row in data['run']['rows']] == [20, 40, 80]
    body = [
        line for line in (out / 'distances.csv').read_text().splitlines()
        if not line.startswith('#')]
    assert body[0] == 'n,replicates,sentinels,uniform,polynomial,exponential'
    assert len(body) == 4
    assert len((out / 'rate.dat').read_text().splitlines()) == 4 + 1 + 3
    with Database(out / 'results.db') as db:
        stored = db.get_distances(config.digest)
    assert [record.n for record in stored] == [20, 40, 80]

    # a re-run reproduces the stored rows exactly
    assert Commands(config, console).dispatch() == 0
    reruns = [
        line for line in (out / 'distances.csv').read_text().splitlines()
        if not line.startswith('#')]
    assert reruns == body


def test_simulate_not_reproduced(make_config, student_config, console):
    config = make_config(student_config)
    assert Commands(config, console).dispatch() == 0
    with Database(config.output.path / 'results.db') as db:
        with db.transaction():
            db._conn.execute(text('UPDATE distances SET uniform = 0.5'))
    with pytest.raises(SimulationError):
        Commands(config, console).dispatch()


def test_demo(make_config, console):
    config = make_config({
        'command': 'demo',
        'demo': {'p': 3.0, 'n_grid': [20, 40], 'replicates': 500},
    })
    assert Commands(config, console).dispatch() == 0
    out = config.output.path
    data = json.loads((out / 'demo.json').read_text())
    assert [row['n'] for row in data['rows']] == [20, 40]
    lines = (out / 'demo.csv').read_text().splitlines()
    assert 'n,kappa,z,defect,stderr,tail,ratio' in lines


def test_verify(make_config, console, arithmetic_only):
    config = make_config({'command': 'verify'})
    assert Commands(config, console).dispatch() == 0
    data = json.loads((config.output.path / 'manifest.json').read_text())
    assert data['passed'] is True
    assert [suite['name'] for suite in data['suites']] == ['arithmetic']


def test_verify_failure(make_config, console, monkeypatch):
    def failing(settings):
        tally = verify._Tally()
        tally.check(False, 'always fails')
        return tally
    monkeypatch.setattr(verify, 'SUITES', {'failing': failing})
    config = make_config({'command': 'verify'})
    assert Commands(config, console).dispatch() == 3
    assert 'always fails' in console.file.getvalue()
