from sqlmodel import Field, SQLModel
from sqlalchemy import event
from datetime import datetime
import uuid


class ExperimentRun(SQLModel, table=True):
    """Une ligne par (méthode, répétition) d'un cmd_experiment lancé avec --record."""

    __tablename__ = "experiment_runs"

    uuid: str | None = Field(default=None, primary_key=True)
    run_id: str = Field(index=True)
    archetype: str
    method: str
    repetition: int
    seed: int
    overall_accuracy: float
    kappa: float
    p: int | None = None
    config_json: str
    created_at: datetime = Field()

    @property
    def to_dict(self):
        return {
            "uuid": self.uuid.__str__(),
            "run_id": self.run_id,
            "method": self.method,
            "repetition": self.repetition,
            "overall_accuracy": self.overall_accuracy,
            "kappa": self.kappa,
            "created_at": self.created_at.isoformat(),
        }


@event.listens_for(ExperimentRun, "before_insert")
def set_experiment_run_uuid(mapper, connection, target):
    if target.uuid is None:
        target.uuid = uuid.uuid4().__str__()
