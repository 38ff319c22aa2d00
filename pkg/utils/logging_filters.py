"""
Filtres personnalisés pour le système de logging de manialign

Ces filtres sont branchés par utils.logging_config sur les handlers
console et runs.
"""

import logging
import time


class InfoFilter(logging.Filter):
    """Filtre qui ne laisse passer que les messages de niveau INFO et plus élevé"""

    def filter(self, record: logging.LogRecord) -> bool:
        return record.levelno >= logging.INFO


class RateLimitFilter(logging.Filter):
    """
    Filtre qui limite le taux de messages répétitifs.

    La validation croisée et les répétitions d'expérience peuvent produire des
    centaines d'avertissements identiques (non-convergence du SVM, k réduit, ...).
    La clé de regroupement est (logger, niveau, fonction).
    """

    def __init__(self, max_per_minute: int = 60, clock=time.monotonic):
        super().__init__()
        self.max_per_minute = max_per_minute
        self.clock = clock
        self.message_counts: dict[str, int] = {}
        self.last_reset: dict[str, float] = {}

    def filter(self, record: logging.LogRecord) -> bool:
        # DEBUG et ERROR ne sont jamais limités
        if record.levelno != logging.WARNING and record.levelno != logging.INFO:
            return True

        current_time = self.clock()
        message_key = f"{record.name}:{record.levelname}:{record.funcName}"

        if (message_key not in self.last_reset or
                current_time - self.last_reset[message_key] >= 60):
            self.message_counts[message_key] = 0
            self.last_reset[message_key] = current_time

        self.message_counts[message_key] = self.message_counts.get(message_key, 0) + 1
        count = self.message_counts[message_key]

        if count <= self.max_per_minute:
            return True
        if count == self.max_per_minute + 1:
            record.msg = f"[RATE LIMITED] {record.getMessage()} (further messages suppressed for 1 minute)"
            record.args = ()
            return True
        return False
