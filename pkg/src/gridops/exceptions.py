"""Exception types shared across the package."""


class GridOpsError(Exception):
    """Base class for all errors raised by this package."""


class GridFormatError(GridOpsError):
    """A grid description failed schema or referential validation."""


class ChronicsError(GridOpsError):
    """A scenario data directory is malformed or inconsistent."""


class ActionError(GridOpsError):
    """An action is structurally invalid (as opposed to merely illegal)."""


class PowerFlowError(GridOpsError):
    """The solver was handed a degenerate system (singular island matrix)."""


class EnvUsageError(GridOpsError):
    """The environment was driven out of contract (e.g. stepping when done)."""


class BenchmarkError(GridOpsError):
    """A benchmark run could not be assembled (bad scenario list, paths)."""

