"""Exception hierarchy shared by all estimators."""


class PanelError(Exception):
    """Base class for every error raised by :mod:`panelfe`."""


class DomainError(PanelError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class BalanceError(PanelError):
    """Long-format input does not form a complete unit x time grid."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f"({u},{t})" for u, t in self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" and {len(self.missing) - 20} more"
        super().__init__(f"unbalanced panel, missing (unit,time) cells: {shown}{more}")


class ParseError(PanelError):
    """A field of the input file could not be parsed."""

    def __init__(self, message, row=None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)


class SingularDesignError(PanelError):
    """The (possibly projected) regressor cross-product matrix is not invertible."""


class BootstrapError(PanelError):
    """Too many bootstrap resamples failed."""


class JackknifeError(PanelError):
    """A half-panel estimate needed by the jackknife could not be computed."""

    def __init__(self, half, cause):
        self.half = half
        self.cause = cause
        super().__init__(f"jackknife sub-estimate on {half} failed: {cause}")
