"""Exception hierarchy shared across the package.

InputError marks bad user data or arguments (CLI exit code 2);
ProviderFailure marks an unreachable or refusing free-flow provider
(exit code 3); everything else surfaces as an internal error (exit code 1).
"""


class RoutegamesError(Exception):
    pass


class InputError(RoutegamesError):
    pass


class ProviderFailure(RoutegamesError):
    pass


class RouteNotFound(ProviderFailure):
    """The provider could not route the requested origin/destination pair."""
