"""Named run presets reproducing the reference figures.

Each preset encodes the published parameters of one data series: noise
strength, initial packet width (sigma^2 = 4 for the transport figures,
25 for the collapse figures), and trajectory count.  Time steps shrink
as 1/gamma at strong noise so the pre-renormalization norm drift stays
far from the stability guard, and collapse runs share gamma*dt so their
gamma*t grids align exactly.
"""

from __future__ import annotations

from .core import InitialState, ModelParams
from .ensemble import GridSpec, RunSpec
from .errors import ConfigurationError
from .unravellings import UnravellingKind

DEFAULT_SEED = 20240809

#: gamma*dt used by the strong-noise collapse presets.
COLLAPSE_GAMMA_DT = 8e-4


def _spec(gamma, unravelling, sigma2, n_traj, t_max, n_sites, dt=1e-4,
          t_min=None, noise="complex"):
    return RunSpec(
        params=ModelParams(gamma=gamma, dt=dt, n_sites=n_sites,
                           boundary="open", seed=DEFAULT_SEED, t_max=t_max),
        unravelling=UnravellingKind(unravelling, noise_variant=noise),
        initial=InitialState("gaussian_packet", sigma2, 0),
        n_trajectories=n_traj,
        grid=GridSpec(kind="log", t_min=t_min),
    )


def _collapse_dt(gamma):
    return min(1e-4, COLLAPSE_GAMMA_DT / gamma)


def _build():
    presets = {}
    # transport: mean squared position vs the 4/gamma slope
    for gamma in (5, 10, 20):
        presets[f"fig1-gamma{gamma}"] = _spec(
            gamma, "wnp", 4.0, 10_000, t_max=100.0 / gamma, n_sites=1000)
        presets[f"fig1-gamma{gamma}-qsd"] = _spec(
            gamma, "qsd", 4.0, 10_000, t_max=100.0 / gamma, n_sites=1000,
            dt=_collapse_dt(gamma))
    # subdiffusion of the centre of mass in the white-noise potential
    presets["fig2"] = _spec(10, "wnp", 4.0, 4_000, t_max=100.0, n_sites=1000)
    # collapse of a broad packet under quantum state diffusion
    for gamma in (1, 2, 4):
        presets[f"fig3-gamma{gamma}"] = _spec(
            gamma, "qsd", 25.0, 5_000, t_max=60.0 / gamma, n_sites=257,
            dt=_collapse_dt(gamma), t_min=0.25 / gamma)
    for gamma in (8, 16, 32, 64):
        presets[f"fig3-gamma{gamma}"] = _spec(
            gamma, "qsd", 25.0, 10_000, t_max=60.0 / gamma, n_sites=257,
            dt=_collapse_dt(gamma), t_min=0.25 / gamma)
        # asymptotic-width scaling uses the same strong-noise series
        presets[f"fig4-gamma{gamma}"] = presets[f"fig3-gamma{gamma}"]
    # wide-open comparison: kinetic term dropped; gamma only sets the clock
    presets["fig5"] = _spec(
        16, "qsd_wide_open", 25.0, 1_000, t_max=40.0 / 16, n_sites=257,
        dt=_collapse_dt(16), t_min=0.25 / 16)
    presets["fig5-wideopen"] = presets["fig5"]
    for gamma in (16, 32, 64):
        presets[f"fig5-gamma{gamma}"] = presets[f"fig3-gamma{gamma}"]
    return presets


PRESETS = _build()


def get_preset(name: str) -> RunSpec:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigurationError(f"unknown preset {name!r}; available: {known}") from None
