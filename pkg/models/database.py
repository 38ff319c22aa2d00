from sqlmodel import SQLModel, create_engine, Session
from sqlalchemy.engine import Engine
import os

from utils.logging_config import get_logger

logger = get_logger("manialign.database")

# Récupération de l'URL de la base depuis l'environnement
DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./manialign.db")

engine = create_engine(DATABASE_URL, echo=False) # echo=True pour logger les requêtes SQL


def init_db(target: Engine | None = None) -> Engine:
    """Crée les tables du registre d'expériences si elles n'existent pas."""
    # import local : enregistre ExperimentRun dans les métadonnées
    from .experiment_run import ExperimentRun  # noqa: F401

    target = target or engine
    SQLModel.metadata.create_all(target)
    logger.debug(f"Experiment ledger ready on {target.url}")
    return target


def get_session(target: Engine | None = None):
    with Session(target or engine) as session:
        yield session
