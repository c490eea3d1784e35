"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes, so raising the right class is
part of the public contract: DomainError / config problems -> 2,
SizeError -> 3, DegenerateError -> 4.
"""


class DomainError(ValueError):
    """An argument lies outside the documented domain of an operation."""


class SizeError(RuntimeError):
    """A requested computation exceeds the documented size guard."""


class InfeasibleError(ValueError):
    """Construction parameters that can never produce a valid run."""


class DegenerateError(RuntimeError):
    """A construction collapsed to the trivial case and cannot proceed."""


class InternalError(RuntimeError):
    """Invariant violation inside the library; always a bug."""
