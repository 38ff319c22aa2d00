"""
Journalisation des étapes du pipeline d'alignement

Chaque exécution (fit, répétition d'expérience, ...) reçoit un identifiant court
qui préfixe toutes ses lignes de log, comme un identifiant de requête HTTP,
et chaque étape est chronométrée.
"""

import time
import uuid
from contextlib import contextmanager
from typing import Iterator

from utils.logging_config import get_logger


class PipelineStepLogger:
    """
    Utilitaire pour logger les étapes d'un pipeline.

    Capture:
    - le nom de l'étape et l'identifiant d'exécution
    - le temps de traitement
    - les erreurs non gérées (avec trace)
    """

    def __init__(self, logger_name: str = "manialign.pipeline"):
        self.logger = get_logger(logger_name)

    @staticmethod
    def new_run_id() -> str:
        return str(uuid.uuid4())[:8]

    @contextmanager
    def step(self, name: str, run_id: str | None = None, **details) -> Iterator[str]:
        """
        Chronomètre une étape.

        Args:
            name: Nom de l'étape (graphs, kernels, eigsolve, ...)
            run_id: Identifiant d'exécution (généré si absent)
            details: Paires clé/valeur ajoutées à la ligne de début

        Yields:
            L'identifiant d'exécution utilisé
        """
        run_id = run_id or self.new_run_id()
        extra = " ".join(f"{key}={value}" for key, value in details.items())
        self.logger.debug(f"[{run_id}] {name} started {extra}".rstrip())
        start_time = time.perf_counter()
        try:
            yield run_id
        except Exception as e:
            elapsed = time.perf_counter() - start_time
            self.logger.error(
                f"[{run_id}] {name} - ERROR - {elapsed:.3f}s - Exception: {str(e)}",
                exc_info=True
            )
            raise
        elapsed = time.perf_counter() - start_time
        self.logger.info(f"[{run_id}] {name} - {elapsed:.3f}s")

    def log_fit_summary(self, run_id: str, mode: str, p: int, eigenvalues, skipped: int):
        """Logger le résumé d'un ajustement"""
        head = ", ".join(f"{value:.4g}" for value in list(eigenvalues)[:5])
        self.logger.info(
            f"[{run_id}] {mode} fitted - p={p} - eigenvalues[:5]=[{head}] - null pairs skipped={skipped}"
        )

    def log_repetition(self, run_id: str, repetition: int, method: str, overall_accuracy: float, kappa: float):
        """Logger le résultat d'une répétition d'expérience"""
        self.logger.info(
            f"[{run_id}] repetition {repetition} - {method} - OA={overall_accuracy:.4f} - kappa={kappa:.4f}"
        )


# Instance globale pour faciliter l'utilisation
pipeline_logger = PipelineStepLogger()
