# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

"""
Implements the results store: a small sqlite database in the output
directory recording every run by configuration digest, and the distances of
every simulation.
"""

import json
import typing as t
from datetime import datetime, timezone
from importlib import resources
from contextlib import contextmanager

from sqlalchemy import create_engine, text, exc
from sqlalchemy.engine import Result
from sqlalchemy.engine.url import URL


__all__ = [
    'StoreError',
    'RunRecord',
    'DistanceRecord',
    'Database',
]


class StoreError(RuntimeError):
    "Exception raised when the results store cannot be used"


class RunRecord(t.NamedTuple):
    digest: str
    command: str
    seed: int
    created: datetime
    manifest: dict = {}

    def __repr__(self):
        return f'<RunRecord({self.digest[:8]}, {self.command!r})>'

    @classmethod
    def from_row(cls, row):
        return cls(
            digest=row.digest,
            command=row.command,
            seed=int(row.seed),
            created=datetime.fromisoformat(row.created),
            manifest=json.loads(row.manifest))

    @property
    def as_row(self):
        return {
            'digest': self.digest,
            'command': self.command,
            # sqlite integers are signed 64-bit; seeds are unsigned
            'seed': str(self.seed),
            'created': self.created.isoformat(),
            'manifest': json.dumps(self.manifest, sort_keys=True),
        }


class DistanceRecord(t.NamedTuple):
    digest: str
    n: int
    kind: str
    replicates: int
    sentinels: int
    uniform: float
    weighted: dict

    @classmethod
    def from_row(cls, row):
        return cls(
            digest=row.digest,
            n=row.n,
            kind=row.kind,
            replicates=row.replicates,
            sentinels=row.sentinels,
            uniform=row.uniform,
            weighted=json.loads(row.weighted))

    @classmethod
    def from_distance_row(cls, digest, kind, row):
        "Build a record from a :class:`~besstat.simulation.DistanceRow`"
        return cls(
            digest=digest,
            n=row.n,
            kind=kind,
            replicates=row.replicates,
            sentinels=row.sentinels,
            uniform=row.uniform,
            weighted={
                'polynomial': row.polynomial,
                'exponential': row.exponential,
            })

    @property
    def as_row(self):
        row = self._asdict()
        row['weighted'] = json.dumps(self.weighted, sort_keys=True)
        return row

    def matches(self, other):
        "True if *other* holds bit-identical results"
        return (
            (self.n, self.kind, self.replicates, self.sentinels,
             self.uniform, self.weighted) ==
            (other.n, other.kind, other.replicates, other.sentinels,
             other.uniform, other.weighted))


class Database:
    # This is the version of the schema in sql/create_db.sql, i.e. the
    # version created when no database is found in the output directory
    latest_version = 1

    def __init__(self, filename):
        try:
            self._url = URL.create('sqlite', database=str(filename))
            self._engine = None
            self._conn = None
            self._open()
        except exc.OperationalError:
            raise StoreError(
                f"Cannot create or open database {self._url.database}")

    def _open(self):
        self._engine = create_engine(self._url)
        self._conn = self._engine.connect()
        with self._conn.begin():
            self._conn.execute(text('PRAGMA foreign_keys = ON'))

    def close(self):
        """
        Close the database connection. This method is idempotent. After the
        initial call, any subsequent database operations attempted will
        necessarily fail.
        """
        if self._conn:
            self._conn.close()
            self._conn = None
            self._engine.dispose()
            self._engine = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False

    @contextmanager
    def transaction(self):
        with self._conn.begin():
            yield

    def get_version(self):
        """
        Return the current version of the database schema from the
        ``version`` table, or 0 if the database is uninitialized.
        """
        try:
            with self._conn.begin():
                return int(self._conn.scalar(text(
                    "SELECT version FROM version")))
        except exc.OperationalError:
            return 0

    def migrate(self):
        """
        Create the schema if the database is uninitialized. A database from
        a newer release is refused rather than modified.

        Creation is atomic; any failure leaves the file without tables.
        """
        version = self.get_version()
        if version > self.latest_version:
            raise StoreError(
                f'results database version {version} is newer than this '
                f'release supports ({self.latest_version})')
        if version < self.latest_version:
            script = (
                resources.files('besstat') / 'sql' / 'create_db.sql'
            ).read_text(encoding='utf-8')
            with self._conn.begin():
                for statement in self._parse_script(script):
                    self._conn.execute(text(statement))

    @staticmethod
    def _parse_script(script):
        """
        Split *script* into individual statements on semi-colon terminators.
        Understands ``--comments`` and ``'string literals'`` (with doubled
        quotes), which is all the shipped schema uses.
        """
        stmt = ''
        in_string = False
        for line in script.splitlines(keepends=True):
            i = 0
            while i < len(line):
                char = line[i]
                if in_string:
                    stmt += char
                    if char == "'":
                        in_string = False
                elif char == "'":
                    stmt += char
                    in_string = True
                elif line.startswith('--', i):
                    stmt += '\n'
                    break
                elif char == ';':
                    yield stmt.strip()
                    stmt = ''
                else:
                    stmt += char
                i += 1
        stmt = stmt.strip()
        if stmt:
            yield stmt

    def _check_rowcount(self, result: Result, expected: int=1) -> None:
        if result.rowcount != expected:
            raise StoreError(f'failed to write {expected} row(s)')

    def add_run(self, run: RunRecord) -> RunRecord:
        """
        Record *run*; a second run with the same digest replaces the
        creation time and manifest of the first.
        """
        self._check_rowcount(self._conn.execute(text(
            """
            INSERT INTO runs (digest, command, seed, created, manifest)
            VALUES (:digest, :command, :seed, :created, json(:manifest))
            ON CONFLICT (digest) DO UPDATE SET
                created = excluded.created,
                manifest = excluded.manifest
            """), run.as_row))
        return run

    def get_run(self, digest: str) -> t.Optional[RunRecord]:
        row = self._conn.execute(text(
            """
            SELECT digest, command, seed, created, manifest
            FROM runs
            WHERE digest = :digest
            """), {'digest': digest}).first()
        if row is None:
            return row
        else:
            return RunRecord.from_row(row)

    def get_runs(self) -> t.List[RunRecord]:
        return [
            RunRecord.from_row(row)
            for row in self._conn.execute(text(
                """
                SELECT digest, command, seed, created, manifest
                FROM runs
                ORDER BY created
                """))
        ]

    def add_distances(self, records: t.Iterable[DistanceRecord]) -> None:
        """
        Store the distance *records* of a run which must already have been
        added with :meth:`add_run`. Existing rows for the same digest and n
        are left untouched.
        """
        for record in records:
            self._conn.execute(text(
                """
                INSERT INTO distances (
                    digest, n, kind, replicates, sentinels, uniform, weighted
                )
                VALUES (
                    :digest, :n, :kind, :replicates, :sentinels, :uniform,
                    json(:weighted)
                )
                ON CONFLICT (digest, n) DO NOTHING
                """), record.as_row)

    def get_distances(self, digest: str) -> t.List[DistanceRecord]:
        return [
            DistanceRecord.from_row(row)
            for row in self._conn.execute(text(
                """
                SELECT digest, n, kind, replicates, sentinels, uniform, weighted
                FROM distances
                WHERE digest = :digest
                ORDER BY n
                """), {'digest': digest})
        ]

    @classmethod
    def new_run(cls, digest, command, seed, manifest=None):
        "Convenience constructor of a :class:`RunRecord` stamped now"
        return RunRecord(
            digest, command, seed, datetime.now(tz=timezone.utc),
            manifest or {})
