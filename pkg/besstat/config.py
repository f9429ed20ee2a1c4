# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Parses and validates the JSON run configuration consumed by the command line
front end. Parsing is strict: unknown keys are errors, and every problem in a
file is reported at once in a single :exc:`ConfigError`.
"""

import json
import math
import hashlib
import typing as t
from pathlib import Path

from .const import (
    OUTPUT_DIR,
    BE_CONSTANT,
    BOOTSTRAP,
    CERTIFY_POINTS,
    EPSILON,
    N_GRID,
    REPLICATES,
    Z_GRID,
)
from .distributions import DistributionError, DistributionSpec
from .statistics import KINDS


__all__ = [
    'COMMANDS',
    'FORMATS',
    'ConfigError',
    'StatisticSection',
    'BoundSection',
    'SimulationSection',
    'DemoSection',
    'VerifySection',
    'OutputSection',
    'RunConfig',
    'canonical_json',
    'parse_config',
    'load_config',
]


COMMANDS = ('bound', 'simulate', 'verify', 'demo')
FORMATS = ('json', 'csv', 'dat')


class ConfigError(Exception):
    "Exception raised when a run configuration is invalid"
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        super().__init__(list(errors))
        self.errors = list(errors)

    def __str__(self):
        return 'Error: ' + '; '.join(self.errors)

    def __rich__(self):
        return '[red]Error:[/red] ' + '; '.join(self.errors)


def _real(value):
    "a real number"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f'expected a number, not {value!r}')
    if not math.isfinite(value):
        raise ValueError(f'expected a finite number, not {value!r}')
    return float(value)


def _positive_real(value):
    "a positive real number"
    value = _real(value)
    if not value > 0:
        raise ValueError(f'must be positive, not {value!r}')
    return value


def _integer(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f'expected an integer, not {value!r}')
    return value


def _positive_int(value):
    "a positive integer"
    value = _integer(value)
    if value < 1:
        raise ValueError(f'must be positive, not {value!r}')
    return value


def _count(value):
    "a non-negative integer"
    value = _integer(value)
    if value < 0:
        raise ValueError(f'must not be negative, not {value!r}')
    return value


def _seed(value):
    "an unsigned 64-bit integer"
    value = _integer(value)
    if not 0 <= value < 2 ** 64:
        raise ValueError(f'must be an unsigned 64-bit integer, not {value!r}')
    return value


def _bool(value):
    if not isinstance(value, bool):
        raise ValueError(f'expected true or false, not {value!r}')
    return value


def _exponent(value):
    "a moment exponent p > 2"
    value = _real(value)
    if not value > 2:
        raise ValueError(f'must exceed 2, not {value!r}')
    return value


def _list_of(item):
    def convert(value):
        if not isinstance(value, list) or not value:
            raise ValueError(f'expected a non-empty list, not {value!r}')
        return tuple(item(v) for v in value)
    return convert


def _sample_sizes(value):
    "a list of sample sizes, each at least 2"
    sizes = _list_of(_positive_int)(value)
    if any(n < 2 for n in sizes):
        raise ValueError('sample sizes must be at least 2')
    if len(set(sizes)) != len(sizes):
        raise ValueError('sample sizes must be distinct')
    return tuple(sorted(sizes))


def _optional(convert):
    def wrapper(value):
        return None if value is None else convert(value)
    return wrapper


def _choice(*choices):
    def convert(value):
        if value not in choices:
            raise ValueError(
                f'must be one of {", ".join(choices)}, not {value!r}')
        return value
    return convert


def _mapping(value):
    if not isinstance(value, dict):
        raise ValueError(f'expected a table, not {value!r}')
    return dict(value)


def _formats(value):
    formats = _list_of(_choice(*FORMATS))(value)
    return tuple(dict.fromkeys(formats))


def _directory(value):
    if not isinstance(value, str) or not value:
        raise ValueError(f'expected a path, not {value!r}')
    return value


def _parse_section(cls, name, data, errors):
    """
    Build the section record *cls* from the mapping *data*, appending one
    message per problem to *errors*. Returns the record built from the keys
    that validated (defaults elsewhere).
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        errors.append(f'{name}: expected a table, not {data!r}')
        return cls()
    values = {}
    for key, value in data.items():
        try:
            handler = cls.handlers[key]
        except KeyError:
            errors.append(f'{name}: unknown key {key!r}')
            continue
        try:
            values[key] = handler(value)
        except ValueError as e:
            errors.append(f'{name}.{key}: {e}')
    return cls(**values)


class StatisticSection(t.NamedTuple):
    kind: str = 'student'
    params: dict = {}

    handlers = {
        'kind': _choice(*KINDS),
        'params': _mapping,
    }

    def as_dict(self):
        return {'kind': self.kind, 'params': self.params}


class BoundSection(t.NamedTuple):
    p: float = 3.0
    epsilon: float = EPSILON
    n: int = 100
    z_grid: tuple = Z_GRID
    user_constant: float = 1.0
    be_constant: float = BE_CONSTANT
    D: float = 1.0

    handlers = {
        'p': _exponent,
        'epsilon': _positive_real,
        'n': _positive_int,
        'z_grid': _list_of(_real),
        'user_constant': _positive_real,
        'be_constant': _positive_real,
        'D': _positive_real,
    }

    def as_dict(self):
        d = self._asdict()
        d['z_grid'] = list(self.z_grid)
        return d


class SimulationSection(t.NamedTuple):
    n_grid: tuple = N_GRID
    replicates: int = REPLICATES
    z_grid: tuple = Z_GRID
    seed: int = 0
    workers: int = 1
    bootstrap: int = BOOTSTRAP

    handlers = {
        'n_grid': _sample_sizes,
        'replicates': _positive_int,
        'z_grid': _list_of(_real),
        'seed': _seed,
        'workers': _positive_int,
        'bootstrap': _count,
    }

    def as_dict(self):
        d = self._asdict()
        d['n_grid'] = list(self.n_grid)
        d['z_grid'] = list(self.z_grid)
        return d


class DemoSection(t.NamedTuple):
    p: float = 2.5
    kappa_grid: tuple = (1.0,)
    kappa_power: t.Optional[float] = None
    n_grid: tuple = (1000, 4000, 16000)
    replicates: int = 100_000
    quadratic: bool = True

    handlers = {
        'p': _exponent,
        'kappa_grid': _list_of(_real),
        'kappa_power': _optional(_real),
        'n_grid': _sample_sizes,
        'replicates': _positive_int,
        'quadratic': _bool,
    }

    def as_dict(self):
        d = self._asdict()
        d['kappa_grid'] = list(self.kappa_grid)
        d['n_grid'] = list(self.n_grid)
        return d


class VerifySection(t.NamedTuple):
    families: int = 100
    fuzz: int = 1000
    certify_points: int = CERTIFY_POINTS
    seed: int = 0

    handlers = {
        'families': _positive_int,
        'fuzz': _positive_int,
        'certify_points': _positive_int,
        'seed': _seed,
    }

    def as_dict(self):
        return self._asdict()


class OutputSection(t.NamedTuple):
    directory: t.Optional[str] = None
    formats: tuple = FORMATS

    handlers = {
        'directory': _directory,
        'formats': _formats,
    }

    @property
    def path(self):
        return Path(self.directory) if self.directory else Path(OUTPUT_DIR)

    def as_dict(self):
        return {'directory': self.directory, 'formats': list(self.formats)}


SECTIONS = {
    'statistic': StatisticSection,
    'bound': BoundSection,
    'simulation': SimulationSection,
    'demo': DemoSection,
    'verify': VerifySection,
    'output': OutputSection,
}

# Keys whose values never change a result; they are left out of the
# digest
UNDIGESTED = {('simulation', 'workers'), ('output', 'directory'),
              ('output', 'formats')}


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(',', ':'),
                      allow_nan=False)


class RunConfig(t.NamedTuple):
    command: str
    statistic: StatisticSection = StatisticSection()
    distribution: t.Optional[DistributionSpec] = None
    bound: BoundSection = BoundSection()
    simulation: SimulationSection = SimulationSection()
    demo: DemoSection = DemoSection()
    verify: VerifySection = VerifySection()
    output: OutputSection = OutputSection()

    @classmethod
    def from_dict(cls, data):
        """
        Construct a :class:`RunConfig` from the decoded JSON *data*, raising
        :exc:`ConfigError` listing every problem found.
        """
        if not isinstance(data, dict):
            raise ConfigError('the configuration must be a JSON object')
        errors = []
        unknown = set(data) - {'command', 'distribution'} - set(SECTIONS)
        for key in sorted(unknown):
            errors.append(f'unknown section {key!r}')
        command = data.get('command')
        if command is None:
            errors.append('missing required key command')
        elif command not in COMMANDS:
            errors.append(
                f'command: must be one of {", ".join(COMMANDS)}, not '
                f'{command!r}')
        sections = {
            name: _parse_section(section, name, data.get(name), errors)
            for name, section in SECTIONS.items()
        }
        distribution = None
        if command in ('bound', 'simulate'):
            for name in ('statistic', 'distribution'):
                if name not in data:
                    errors.append(
                        f'missing required section {name} for {command}')
        if 'distribution' in data:
            try:
                distribution = DistributionSpec.from_dict(data['distribution'])
            except DistributionError as e:
                errors.append(f'distribution: {e}')
        if errors:
            raise ConfigError(errors)
        return cls(command=command, distribution=distribution, **sections)

    def as_dict(self):
        return {
            'command': self.command,
            'statistic': self.statistic.as_dict(),
            'distribution': (
                None if self.distribution is None else
                self.distribution.as_dict()),
            'bound': self.bound.as_dict(),
            'simulation': self.simulation.as_dict(),
            'demo': self.demo.as_dict(),
            'verify': self.verify.as_dict(),
            'output': self.output.as_dict(),
        }

    @property
    def digest(self):
        """
        SHA-1 of the canonical JSON of the fully defaulted configuration;
        independent of key order in the source file, worker count, and
        output location.
        """
        data = self.as_dict()
        for section, key in UNDIGESTED:
            del data[section][key]
        return hashlib.sha1(canonical_json(data).encode('utf-8')).hexdigest()

    @property
    def seed(self):
        if self.command == 'verify':
            return self.verify.seed
        return self.simulation.seed

    def override(self, *, seed=None, workers=None, out=None):
        "Apply the command line overrides, validating them like the file"
        errors = []
        conf = self
        if seed is not None:
            try:
                seed = _seed(seed)
            except ValueError as e:
                errors.append(f'--seed: {e}')
            else:
                conf = conf._replace(
                    simulation=conf.simulation._replace(seed=seed),
                    verify=conf.verify._replace(seed=seed))
        if workers is not None:
            try:
                workers = _positive_int(workers)
            except ValueError as e:
                errors.append(f'--workers: {e}')
            else:
                conf = conf._replace(
                    simulation=conf.simulation._replace(workers=workers))
        if out is not None:
            conf = conf._replace(
                output=conf.output._replace(directory=str(out)))
        if errors:
            raise ConfigError(errors)
        return conf


def parse_config(path):
    """
    Read the JSON configuration at *path* and return the validated
    :class:`RunConfig`.
    """
    try:
        source = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f'cannot read {path}: {e.strerror}')
    return load_config(source)


def load_config(source):
    "Parse the JSON text *source* into a :class:`RunConfig`"
    try:
        data = json.loads(source)
    except json.JSONDecodeError as e:
        raise ConfigError(f'invalid JSON at line {e.lineno}: {e.msg}')
    return RunConfig.from_dict(data)
