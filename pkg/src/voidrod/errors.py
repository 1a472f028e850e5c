"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class VoidRodError(Exception):
    exit_code = 3
    code = "numerical.failure"


class InvalidInputError(VoidRodError, ValueError):
    exit_code = 2
    code = "input.invalid"


class ConfigError(InvalidInputError):
    code = "config.invalid"


class DegenerateProjectionError(VoidRodError):
    code = "numerical.degenerate_projection"


class AssemblyError(VoidRodError):
    code = "numerical.singular_assembly"


class InvalidConfigError(InvalidInputError):
    """A limit configuration violates its structural invariants."""

    code = "input.invalid_limit_config"


class InfeasibleError(VoidRodError):
    exit_code = 4
    code = "precondition.infeasible"


class PreconditionError(VoidRodError):
    exit_code = 4
    code = "precondition.not_met"


class UnsupportedOperationError(VoidRodError):
    exit_code = 4
    code = "precondition.unsupported"


class DependencyError(VoidRodError):
    exit_code = 4
    code = "precondition.missing_dependency"
