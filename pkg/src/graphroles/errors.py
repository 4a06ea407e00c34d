"""Exception and warning types shared across the package."""

from __future__ import annotations


class RolesError(Exception):
    """Base class for package errors.

    ``module`` names the subsystem that raised the error so batch drivers
    can print a useful diagnostic.
    """

    default_module = "graphroles"

    def __init__(self, message, *, module=None):
        super().__init__(message)
        self.module = module or self.default_module


class ParseError(RolesError):
    """A text input could not be parsed; carries the 1-based line number."""

    default_module = "graphio"

    def __init__(self, message, *, line=None, module=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, module=module)
        self.line = line


class FormatError(RolesError):
    """A structured document (model file, matrix, tensor) is inconsistent."""

    default_module = "graphio"


class ConfigurationError(RolesError):
    """Invalid parameters: rank too large, bad dimensions, unknown options."""


class InputError(RolesError):
    """Invalid data: negative entries, empty inputs, mismatched shapes."""


class SchemaError(RolesError):
    """Feature schemas of two inputs do not line up."""

    default_module = "tasks"


class TransferError(RolesError):
    """A factor cannot be transferred; the message names the offending mode."""

    default_module = "mrd"


class SizeError(RolesError):
    """A solve would exceed the configured memory budget."""

    default_module = "mrd"


class ConvergenceError(RolesError):
    """An iterative kernel hit its iteration cap.

    ``best`` holds the last iterate and ``change`` the final successive
    change so callers can inspect how close the run got.
    """

    default_module = "numkit"

    def __init__(self, message, *, best=None, change=None, module=None):
        super().__init__(message, module=module)
        self.best = best
        self.change = change


class DeadRoleWarning(UserWarning):
    """A role's paired vector became all-zero and the role stays dead."""


class DegenerateColumnWarning(UserWarning):
    """A factor column was all-zero and was left un-normalized."""
