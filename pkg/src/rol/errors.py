"""Shared exception types, mapped to CLI exit codes by the front end."""


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario input (CLI exit code 3)."""


class InfeasibleError(RuntimeError):
    """No admissible design exists for the requested parameters (exit code 2)."""


class DivergenceError(RuntimeError):
    """A numerical integration left the trusted region (exit code 4)."""
