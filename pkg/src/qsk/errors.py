"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: usage errors exit 2, capacity errors
exit 3, numerical-integrity errors exit 4.
"""


class QskError(Exception):
    exit_code = 1


class UsageError(QskError):
    """Bad arguments: width mismatches, out-of-domain parameters."""

    exit_code = 2


class CapacityError(QskError):
    """Request exceeds the documented enumeration/memory budget."""

    exit_code = 3


class NumericalIntegrityError(QskError):
    """A computed quantity violated an internal consistency bound."""

    exit_code = 4
