"""Error hierarchy for the diffusion workbench.

Each class maps to one CLI exit code:
- ConfigError, TopologyError -> 1
- InfeasibleError -> 2
- NumericalError -> 3
"""

from typing import List, Optional


class DiffusionError(Exception):
    """Base class for all workbench errors."""

    exit_code = 1


class ConfigError(DiffusionError, ValueError):
    """Invalid scenario, network or profile input."""

    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        location = ""
        if source:
            location = f"{source}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class TopologyError(DiffusionError, ValueError):
    """Graph does not support the requested neighborhood construction."""

    exit_code = 1


class InfeasibleError(DiffusionError):
    """No solution satisfies the constraints (budgets, LMI bracket, plan)."""

    exit_code = 2

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        self.violations = list(violations or [])
        if self.violations:
            message = f"{message}: " + "; ".join(self.violations)
        super().__init__(message)


class NumericalError(DiffusionError, ArithmeticError):
    """Divergence, non-convergence or factorization failure."""

    exit_code = 3
