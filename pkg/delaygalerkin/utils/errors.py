"""
Exception types raised by the simulator and caught at the CLI edge.
"""
from typing import Optional


class ScenarioError(ValueError):
    """Scenario document could not be parsed or violates an invariant."""

    def __init__(self, message: str, line: Optional[int] = None, invariant: Optional[str] = None):
        self.message = message
        self.line = line
        self.invariant = invariant
        prefix = f"line {line}: " if line is not None else ""
        if invariant and invariant not in message:
            message = f"{invariant}: {message}"
        super().__init__(f"{prefix}{message}")


class BasisError(ValueError):
    pass


class HistoryRangeError(ValueError):
    pass


class KernelError(ValueError):
    pass


class NonFiniteStateError(ArithmeticError):
    def __init__(self, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"non-finite Galerkin coefficients at step {step} (t={time:.6g})")


class ExportError(OSError):
    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
