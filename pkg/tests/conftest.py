# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

import io
import json
import math

import pytest
from rich.console import Console

from besstat import database
from besstat.bounds import BoundInputs
from besstat.config import load_config
from besstat.distributions import DistributionSpec, MomentProfile
from besstat.statistics import build_model, degenerate_student_spec


@pytest.fixture()
def db(request, tmp_path):
    with database.Database(tmp_path / 'results.db') as db:
        yield db


@pytest.fixture()
def with_schema(request, db):
    db.migrate()
    yield db.get_version()


@pytest.fixture()
def signs():
    "Rademacher summands"
    return DistributionSpec.atoms([-1.0, 1.0], [0.5, 0.5])


@pytest.fixture()
def half_signs():
    return DistributionSpec.atoms([-0.5, 0.5], [0.5, 0.5])


@pytest.fixture(scope='session')
def student_model():
    # Student's T under N(1, 1): sigma1 = sqrt(1.5)
    return build_model(
        'student', {'mu': 1.0}, DistributionSpec.gaussian(1.0, 1.0),
        certify_points=5000)


@pytest.fixture()
def fixture_inputs():
    """
    C1 = 1, sigma = |L| = 1, p = 3 with lambda_3 = 0.2, lambda_{3/2} = 0.05
    and lambda_2 = 0.1; every tail sum is 0
    """
    return BoundInputs(
        norm_L=1.0, sigma=1.0, M=2.0, epsilon=1.0, p=3.0,
        profile=MomentProfile.from_values({3: 0.2, 1.5: 0.05, 2: 0.1}))


@pytest.fixture()
def console():
    return Console(file=io.StringIO(), width=160)


@pytest.fixture()
def student_config():
    "A small simulate configuration for Student's T under N(1, 1)"
    return {
        'command': 'simulate',
        'statistic': {'kind': 'student', 'params': {'mu': 1.0}},
        'distribution': DistributionSpec.gaussian(1.0, 1.0).as_dict(),
        'bound': {'n': 100, 'z_grid': [2.0, 3.0]},
        'simulation': {
            'n_grid': [20, 40, 80],
            'replicates': 1000,
            'z_grid': [-2.0, 2.0, 3.0],
            'seed': 42,
            'bootstrap': 5,
        },
    }


@pytest.fixture()
def degenerate_config():
    params, spec = degenerate_student_spec(0.3)
    return {
        'command': 'simulate',
        'statistic': {'kind': 'student', 'params': params},
        'distribution': spec.as_dict(),
        'simulation': {'n_grid': [20], 'replicates': 100},
    }


@pytest.fixture()
def make_config(tmp_path):
    """
    Return a factory turning a config mapping into a :class:`RunConfig`
    writing its artifacts beneath the test's temporary directory
    """
    def factory(data, out='out'):
        data = dict(data)
        data.setdefault('output', {})
        data['output'] = dict(data['output'], directory=str(tmp_path / out))
        return load_config(json.dumps(data))
    return factory


@pytest.fixture()
def config_file(tmp_path):
    "Return a factory writing a config mapping to a JSON file"
    def factory(data, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return factory
