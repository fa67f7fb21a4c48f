"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical aborts (instability, boundary, positivity) with 3, and
a failed unravelling-equivalence check with 4.
"""


class NoisyTBError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NoisyTBError):
    """Rejected parameter set, config file, or run specification."""


class NumericalInstabilityError(NoisyTBError):
    """An integrator left its validated regime (norm blow-up, positivity loss)."""


class BoundaryError(NoisyTBError):
    """A wave packet reached an open boundary (light-cone violation)."""


class PropagatorRangeError(NoisyTBError):
    """Free-propagator evaluation requested outside the validated window."""


class FitError(NoisyTBError):
    """A curve fit was requested on an unusable window or data set."""


class EquivalenceFailure(NoisyTBError):
    """Ensemble averages of an unravelling disagree with the master equation."""


class TrajectoryAbort(NumericalInstabilityError):
    """A single trajectory failed; carries enough context to replay it."""

    def __init__(self, message, trajectory_index, base_seed, step=None, cause=None):
        super().__init__(message)
        self.trajectory_index = trajectory_index
        self.base_seed = base_seed
        self.step = step
        self.cause = cause

    def __str__(self):
        extra = f" [trajectory {self.trajectory_index}, base seed {self.base_seed}"
        if self.step is not None:
            extra += f", step {self.step}"
        extra += "]"
        return super().__str__() + extra
