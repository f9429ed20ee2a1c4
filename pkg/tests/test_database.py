# besstat: Berry-Esseen bounds for nonlinear statistics
#
# Copyright (c) 2024 The besstat authors
#
# SPDX-License-Identifier: GPL-3.0-or-later

import datetime as dt

import pytest
from sqlalchemy import exc, text

from besstat.database import *
from besstat.simulation import DistanceRow


DIGEST = 'a' * 40


@pytest.fixture()
def with_run(request, db, with_schema):
    run = RunRecord(
        DIGEST, 'simulate', 2 ** 64 - 1,
        dt.datetime(2024, 5, 1, 12, 0, tzinfo=dt.timezone.utc),
        {'rows': [1, 2]})
    with db.transaction():
        db.add_run(run)
    yield run


def test_db_init_fail(tmp_path):
    filename = tmp_path / 'not-a-file'
    filename.mkdir()
    with pytest.raises(RuntimeError):
        Database(filename)


def test_db_uninitialized(db):
    assert db.get_version() == 0


def test_db_current_version(db, with_schema):
    assert db.get_version() == with_schema == db.latest_version == 1


def test_db_migrate_idempotent(db, with_schema):
    db.migrate()
    assert db.get_version() == 1


def test_db_newer_version(db, with_schema):
    with db.transaction():
        db._conn.execute(text('UPDATE version SET version = 2'))
    with pytest.raises(StoreError):
        db.migrate()


def test_db_close(tmp_path):
    db = Database(tmp_path / 'results.db')
    db.close()
    db.close()


def test_parse_script():
    script = (
        "SELECT 'a;b'; -- comment; more\n"
        "SELECT 'it''s';\n"
        "SELECT 3\n")
    assert list(Database._parse_script(script)) == [
        "SELECT 'a;b'", "SELECT 'it''s'", 'SELECT 3']


def test_run_roundtrip(db, with_run):
    run = db.get_run(DIGEST)
    assert run == with_run
    assert run.seed == 2 ** 64 - 1
    assert run.created.tzinfo is not None
    assert repr(run) == "<RunRecord(aaaaaaaa, 'simulate')>"
    assert db.get_run('b' * 40) is None


def test_run_upsert(db, with_run):
    later = with_run._replace(
        created=with_run.created + dt.timedelta(hours=1),
        manifest={'rows': []})
    with db.transaction():
        db.add_run(later)
    assert db.get_run(DIGEST) == later
    assert len(db.get_runs()) == 1


def test_runs_ordered(db, with_run):
    earlier = RunRecord(
        'c' * 40, 'bound', 0, with_run.created - dt.timedelta(days=1))
    with db.transaction():
        db.add_run(earlier)
    assert [run.digest for run in db.get_runs()] == ['c' * 40, DIGEST]


def test_run_command_check(db, with_schema):
    with pytest.raises(exc.IntegrityError):
        with db.transaction():
            db.add_run(Database.new_run(DIGEST, 'rip', 0))


def test_new_run():
    run = Database.new_run(DIGEST, 'verify', 5)
    assert run.manifest == {}
    assert run.created.tzinfo == dt.timezone.utc


def test_distances(db, with_run):
    records = [
        DistanceRecord.from_distance_row(
            DIGEST, 'student', DistanceRow(n, 100, 0, 0.1 / n, 0.2, 0.3))
        for n in (40, 20)
    ]
    with db.transaction():
        db.add_distances(records)
    stored = db.get_distances(DIGEST)
    assert [record.n for record in stored] == [20, 40]
    assert stored[0] == records[1]
    assert stored[0].weighted == {'polynomial': 0.2, 'exponential': 0.3}
    assert stored[0].matches(records[1])
    assert not stored[0].matches(records[0])
    assert db.get_distances('b' * 40) == []


def test_distances_kept(db, with_run):
    first = DistanceRecord(DIGEST, 20, 'student', 100, 0, 0.1, {})
    with db.transaction():
        db.add_distances([first])
    with db.transaction():
        db.add_distances([first._replace(uniform=0.5)])
    assert db.get_distances(DIGEST) == [first]
