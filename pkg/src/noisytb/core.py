"""Core state types, parameters, initial states, and noise streams.

Everything downstream (steppers, master-equation integrator, ensemble
runner) is built on the small set of types defined here.  All quantities
are dimensionless: time is measured in hopping units, the noise strength
``gamma`` is the single model parameter, and lattice coordinates are
signed integers with the initial packet centred at 0.

Noise streams are numpy ``Generator`` instances seeded per trajectory
through ``SeedSequence(base_seed, spawn_key=(index,))``, so an ensemble
is reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

#: Norm / trace bookkeeping tolerance used by validation helpers.
NORM_TOL = 1e-8

_BOUNDARIES = ("open", "periodic")
_INITIAL_KINDS = ("gaussian_packet", "delta_site", "uniform")
_NOISE_KINDS = ("real_wiener", "complex_wiener")


@dataclass(frozen=True)
class ModelParams:
    """Model and integration parameters for one run.

    Parameters
    ----------
    gamma : float
        Dimensionless noise strength, >= 0.
    dt : float
        Integration time step for the stochastic steppers.
    n_sites : int
        Lattice size N (>= 3).
    boundary : str
        "open" (neighbours beyond the edge are absent) or "periodic".
    seed : int
        Base seed; trajectory k uses the stream derived from (seed, k).
    t_max : float
        End time of the run.
    """

    gamma: float
    dt: float = 1e-4
    n_sites: int = 1000
    boundary: str = "open"
    seed: int = 0
    t_max: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.n_sites < 3:
            raise ConfigurationError(f"n_sites must be >= 3, got {self.n_sites}")
        if self.boundary not in _BOUNDARIES:
            raise ConfigurationError(
                f"boundary must be one of {_BOUNDARIES}, got {self.boundary!r}"
            )
        if self.t_max <= 0:
            raise ConfigurationError(f"t_max must be > 0, got {self.t_max}")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"


@dataclass
class WaveFunction:
    """State of a single trajectory: complex amplitudes over lattice sites.

    ``origin_offset`` maps array index i to the signed lattice coordinate
    ``i + origin_offset``; initial packets are centred so that coordinate 0
    sits mid-lattice.
    """

    amps: np.ndarray
    origin_offset: int = 0

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)

    @property
    def n_sites(self) -> int:
        return self.amps.shape[0]

    def coords(self) -> np.ndarray:
        return np.arange(self.n_sites, dtype=np.float64) + self.origin_offset

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def weights(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.amps / self.norm(), self.origin_offset)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.amps.copy(), self.origin_offset)

    def index_of(self, coord: int) -> int:
        idx = int(coord) - self.origin_offset
        if not 0 <= idx < self.n_sites:
            raise ConfigurationError(
                f"coordinate {coord} outside lattice [{self.origin_offset}, "
                f"{self.origin_offset + self.n_sites - 1}]"
            )
        return idx


@dataclass
class DensityMatrix:
    """Ensemble state: Hermitian, unit-trace, positive N x N matrix."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.complex128)

    @classmethod
    def from_pure(cls, psi: WaveFunction) -> "DensityMatrix":
        return cls(np.outer(psi.amps, psi.amps.conj()))

    @property
    def n_sites(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def validate(self, check_positivity: bool | None = None) -> None:
        """Raise if trace, Hermiticity, or positivity tolerances are violated.

        Positivity (smallest eigenvalue >= -1e-8) is checked by default
        only for N <= 64; pass ``check_positivity`` to force either way.
        """
        rho = self.rho
        if abs(np.trace(rho).real - 1.0) > NORM_TOL:
            raise ConfigurationError(f"trace {np.trace(rho).real} deviates from 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ConfigurationError("density matrix not Hermitian within 1e-10")
        if np.min(rho.diagonal().real) < -1e-10:
            raise ConfigurationError("negative diagonal entry beyond tolerance")
        if check_positivity is None:
            check_positivity = self.n_sites <= 64
        if check_positivity:
            lowest = float(np.linalg.eigvalsh(rho)[0])
            if lowest < -NORM_TOL:
                raise ConfigurationError(
                    f"smallest eigenvalue {lowest:.3e} below -1e-8"
                )


@dataclass(frozen=True)
class InitialState:
    """Specification of the trajectory initial condition.

    All constructed states are real-valued and normalized; the Gaussian
    packet has amplitudes proportional to exp(-(n-center)^2 / 4 sigma^2)
    so that the probability distribution |c_n|^2 has variance ``variance``.
    """

    kind: str = "gaussian_packet"
    variance: float = 4.0
    center: int = 0

    def __post_init__(self):
        if self.kind not in _INITIAL_KINDS:
            raise ConfigurationError(
                f"initial state kind must be one of {_INITIAL_KINDS}, got {self.kind!r}"
            )
        if self.variance < 0:
            raise ConfigurationError(f"variance must be >= 0, got {self.variance}")


def make_initial(params: ModelParams, spec: InitialState) -> WaveFunction:
    """Construct the normalized initial wave function for ``spec``.

    Raises ``ConfigurationError`` if the requested packet does not fit the
    lattice (estimated probability weight beyond the boundary > 1e-6).
    """
    n = params.n_sites
    origin_offset = -((n - 1) // 2)
    coords = np.arange(n) + origin_offset

    if spec.kind == "uniform":
        amps = np.full(n, 1.0 / math.sqrt(n), dtype=np.complex128)
        return WaveFunction(amps, origin_offset)

    if spec.center < coords[0] or spec.center > coords[-1]:
        raise ConfigurationError(
            f"packet center {spec.center} outside lattice "
            f"[{coords[0]}, {coords[-1]}]"
        )

    if spec.kind == "delta_site":
        amps = np.zeros(n, dtype=np.complex128)
        amps[spec.center - origin_offset] = 1.0
        return WaveFunction(amps, origin_offset)

    # gaussian_packet
    sigma2 = spec.variance
    if sigma2 == 0:
        return make_initial(params, InitialState("delta_site", 0.0, spec.center))
    sigma = math.sqrt(sigma2)
    # |c_n|^2 ~ N(center, sigma^2); Gaussian tail estimate of the weight
    # falling beyond each open edge (half-site shifted to the cell border).
    left = 0.5 * math.erfc((spec.center - (coords[0] - 0.5)) / (sigma * math.sqrt(2)))
    right = 0.5 * math.erfc(((coords[-1] + 0.5) - spec.center) / (sigma * math.sqrt(2)))
    if left + right > 1e-6:
        raise ConfigurationError(
            f"gaussian packet (variance {sigma2}) too wide for {n} sites: "
            f"tail weight beyond boundary {left + right:.2e} > 1e-6"
        )
    amps = np.exp(-((coords - spec.center) ** 2) / (4.0 * sigma2)).astype(np.complex128)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    return WaveFunction(amps, origin_offset)


@dataclass
class NoiseStream:
    """Deterministic per-trajectory random stream.

    Wraps a PCG64-backed numpy ``Generator``.  ``kind`` declares the
    Wiener flavour the stepper will draw; uniform and exponential draws
    (used by the jump unravelling) are available on any stream.
    """

    generator: np.random.Generator
    kind: str = "real_wiener"

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ConfigurationError(
                f"noise kind must be one of {_NOISE_KINDS}, got {self.kind!r}"
            )

    def real_increments(self, n_sites: int, dt: float) -> np.ndarray:
        """N independent Wiener increments dW: Gaussian, mean 0, variance dt."""
        if self.kind != "real_wiener":
            raise ConfigurationError("stream kind is not real_wiener")
        return self.generator.standard_normal(n_sites) * math.sqrt(dt)

    def complex_increments(self, n_sites: int, dt: float) -> np.ndarray:
        """N complex increments with M[dxi_n dxi_m*] = dt delta_nm.

        Real and imaginary parts are independent Wiener processes of
        variance dt/2, drawn in that order (real block, then imaginary).
        """
        if self.kind != "complex_wiener":
            raise ConfigurationError("stream kind is not complex_wiener")
        scale = math.sqrt(0.5 * dt)
        re = self.generator.standard_normal(n_sites)
        im = self.generator.standard_normal(n_sites)
        return (re + 1j * im) * scale

    def uniform(self) -> float:
        return float(self.generator.random())

    def waiting_time(self, gamma: float) -> float:
        """Exponential waiting time with mean 1/gamma."""
        return float(self.generator.exponential(1.0 / gamma))


def stream_for_trajectory(base_seed: int, index: int, kind: str = "real_wiener") -> NoiseStream:
    """Noise stream for trajectory ``index`` of an ensemble seeded by ``base_seed``.

    Uses ``SeedSequence(base_seed, spawn_key=(index,))``, which is
    deterministic and independent of the order in which trajectories run.
    """
    ss = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return NoiseStream(np.random.Generator(np.random.PCG64(ss)), kind=kind)


def draw_real_increments(stream: NoiseStream, n_sites: int, dt: float) -> np.ndarray:
    return stream.real_increments(n_sites, dt)


def draw_complex_increments(stream: NoiseStream, n_sites: int, dt: float) -> np.ndarray:
    return stream.complex_increments(n_sites, dt)
