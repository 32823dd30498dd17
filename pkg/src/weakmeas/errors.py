"""Exception hierarchy for the weakmeas package.

Three families, matching the CLI exit-code contract:

* ``ConfigurationError`` (exit 2): bad run configuration or input files.
* ``DomainError`` (exit 3): physics preconditions violated (non-Hermitian
  observable, orthogonal post-selection, ...).
* ``NumericalQualityError`` (exit 4): the requested computation is valid but
  cannot be carried out at acceptable numerical quality (grid too coarse,
  term budget exhausted, empty post-selected sample).
"""


class WeakmeasError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WeakmeasError):
    """Invalid run configuration."""


class SchemaError(ConfigurationError):
    """Config document violates the schema; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class FileError(ConfigurationError):
    """Config or output file could not be read/written."""


class DomainError(WeakmeasError):
    """Physics-level precondition violated."""


class NotHermitian(DomainError):
    """Matrix supplied as an observable is not Hermitian."""


class OrthogonalPostselection(DomainError):
    """Pre- and post-selected states are (numerically) orthogonal."""


class ProportionalToIdentity(DomainError):
    """Observable has a single eigenvalue, so no anomalous pair exists."""


class BasisMismatch(DomainError):
    """Pointer wavefunctions combined or transformed in the wrong basis."""


class DimensionMismatch(DomainError):
    """System dimensions of states/observables do not agree."""


class ZeroProbabilityOutcome(DomainError):
    """Conditioning on a meter outcome of zero probability."""


class NumericalQualityError(WeakmeasError):
    """Computation refused on numerical-quality grounds."""


class GridTooCoarse(NumericalQualityError):
    """Sampling grid leaves more than the tolerated probability mass outside."""


class TermBudgetExceeded(NumericalQualityError):
    """Collective expansion would exceed the configured term budget."""


class NoPostselectedRuns(NumericalQualityError):
    """Monte Carlo run produced zero post-selected trials; statistics undefined."""
