"""Exception hierarchy shared by the network, trainer and identification code."""


class EhhError(Exception):
    """Base class for every error raised by :mod:`ehhnet`."""

    exit_code = 1


class ConstantDimension(EhhError, ValueError):
    """A raw input column has ``max == min`` so it cannot be normalized."""

    exit_code = 3

    def __init__(self, dim):
        super().__init__(f"input dimension {dim} is constant; cannot normalize")
        self.dim = dim


class DimensionMismatch(EhhError, ValueError):
    exit_code = 3


class ResourceBound(EhhError):
    """Requested construction exceeds the configured size cap."""

    exit_code = 4


class DegenerateQuantiles(EhhError, ValueError):
    exit_code = 3

    def __init__(self, dim, n_distinct, q):
        super().__init__(
            f"dimension {dim}: only {n_distinct} distinct offsets for q={q}")
        self.dim = dim
        self.n_distinct = n_distinct
        self.q = q


class GenerationStall(EhhError):
    """Random structure generation could not find a valid new neuron."""

    exit_code = 5


class NonConvergence(EhhError):
    """ADMM hit its iteration cap; ``solution`` holds the last iterate."""

    exit_code = 5

    def __init__(self, solution):
        super().__init__(
            f"ADMM did not converge in {solution.n_iter} iterations "
            f"(primal {solution.primal_residual:.3g}, dual {solution.dual_residual:.3g})")
        self.solution = solution


class Saturated(EhhError, ValueError):
    """GCV complexity C(M) reached the sample count."""

    exit_code = 5


class SpecMismatch(EhhError, ValueError):
    exit_code = 3


class InsufficientData(EhhError, ValueError):
    exit_code = 3


class NumericOverflow(EhhError, ArithmeticError):
    """Free-run simulation diverged past the guard value."""

    exit_code = 6

    def __init__(self, step, value, guard):
        super().__init__(
            f"simulated output {value!r} exceeds guard {guard:g} at step {step}")
        self.step = step
        self.value = value
        self.guard = guard


class ZeroVariance(EhhError, ValueError):
    exit_code = 3


class ParseError(EhhError, ValueError):
    exit_code = 8

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingColumn(EhhError, ValueError):
    exit_code = 8
