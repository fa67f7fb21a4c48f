import numpy as np
import pytest

from noisytb.core import InitialState, ModelParams, make_initial, stream_for_trajectory


@pytest.fixture
def small_params():
    return ModelParams(gamma=2.0, dt=1e-4, n_sites=64, boundary="open",
                       seed=1234, t_max=1.0)


@pytest.fixture
def packet(small_params):
    return make_initial(small_params, InitialState("gaussian_packet", 4.0, 0))


def real_stream(seed=0, index=0):
    return stream_for_trajectory(seed, index, "real_wiener")


def complex_stream(seed=0, index=0):
    return stream_for_trajectory(seed, index, "complex_wiener")


def random_state(n, seed, origin_offset=None):
    """Normalized random complex state (test helper, not a model object)."""
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
    from noisytb.core import WaveFunction
    if origin_offset is None:
        origin_offset = -((n - 1) // 2)
    return WaveFunction(amps, origin_offset)
