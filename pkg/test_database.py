"""
Tests du registre des exécutions (SQLModel)
"""

from datetime import datetime

from sqlalchemy.pool import StaticPool
from sqlmodel import Session, create_engine, select

from models.database import get_session, init_db
from models.experiment_run import ExperimentRun


def memory_engine():
    return create_engine("sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool)


def make_run(**overrides) -> ExperimentRun:
    values = {
        "run_id": "deadbeef",
        "archetype": "colocated_ties",
        "method": "kema",
        "repetition": 0,
        "seed": 7,
        "overall_accuracy": 0.91,
        "kappa": 0.86,
        "p": 3,
        "config_json": "{}",
        "created_at": datetime(2024, 5, 1, 12, 0, 0),
    }
    values.update(overrides)
    return ExperimentRun(**values)


def test_uuid_assigned_on_insert():
    engine = init_db(memory_engine())
    with Session(engine) as session:
        run = make_run()
        assert run.uuid is None
        session.add(run)
        session.commit()
        session.refresh(run)
        assert run.uuid and len(run.uuid) == 36


def test_explicit_uuid_is_kept():
    engine = init_db(memory_engine())
    with Session(engine) as session:
        session.add(make_run(uuid="fixed-id"))
        session.commit()
        stored = session.exec(select(ExperimentRun)).one()
        assert stored.uuid == "fixed-id"


def test_to_dict():
    payload = make_run(uuid="abc").to_dict
    assert payload["uuid"] == "abc"
    assert payload["method"] == "kema"
    assert payload["created_at"] == "2024-05-01T12:00:00"


def test_get_session_uses_target():
    engine = init_db(memory_engine())
    session = next(get_session(engine))
    session.add(make_run(method="ssma"))
    session.commit()
    assert [row.method for row in session.exec(select(ExperimentRun)).all()] == ["ssma"]
    session.close()
