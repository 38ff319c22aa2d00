"""
Hiérarchie d'exceptions de manialign

Chaque erreur porte le module qui l'a levée (pour les messages préfixés de la CLI)
et appartient à une famille qui fixe le code de sortie du processus :
ConfigError -> 2, DataError -> 3, NumericalError -> 4.
"""


class ManiAlignError(Exception):
    """Erreur de base, taguée par module."""

    exit_code: int = 1

    def __init__(self, module: str, message: str):
        super().__init__(message)
        self.module = module
        self.message = message

    def __str__(self) -> str:
        return f"[{self.module}] {self.message}"


class ConfigError(ManiAlignError):
    exit_code = 2


class DataError(ManiAlignError):
    exit_code = 3


class NumericalError(ManiAlignError):
    exit_code = 4


# Données / entrées
class NonFinite(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class OrderMismatch(DataError):
    pass


class OrderingMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class KTooLarge(ConfigError):
    pass


class SingleClass(DataError):
    pass


class NoTies(DataError):
    pass


class DegenerateData(DataError):
    pass


class UnknownDomain(DataError):
    pass


class CountTooLarge(ConfigError):
    pass


class TooFewPerClass(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooFewPairs(DataError):
    pass


class EmptyObject(DataError):
    pass


class NoCommonBands(DataError):
    pass


class BadSpec(ConfigError):
    pass


# Numérique
class ConvergenceFailure(NumericalError):
    pass


class SingularB(NumericalError):
    pass


class InsufficientSpectrum(NumericalError):
    pass


class DegenerateDIS(NumericalError):
    pass
