import math

import numpy as np
import pytest
from scipy.linalg import expm

from noisytb.core import InitialState, ModelParams, WaveFunction, make_initial
from noisytb.errors import BoundaryError, PropagatorRangeError
from noisytb.hamiltonian import (MAX_ORDER, MAX_TIME, apply_kinetic,
                                 bessel_j_array, free_evolve,
                                 free_evolve_periodic, free_propagator,
                                 kinetic_matrix, propagator_column)
from noisytb.observables import measure


def _delta(n_sites):
    p = ModelParams(gamma=0.0, n_sites=n_sites)
    return make_initial(p, InitialState("delta_site", 0.0, 0))


class TestApplyKinetic:
    def test_delta_periodic(self):
        psi = WaveFunction(np.eye(5)[0], origin_offset=0)
        d = apply_kinetic(psi, periodic=True)
        assert d[0] == -2j
        assert d[1] == 1j and d[4] == 1j
        assert d[2] == 0 and d[3] == 0

    def test_uniform_translation_invariance(self):
        psi = WaveFunction(np.full(8, 1 / math.sqrt(8)), origin_offset=0)
        assert np.allclose(apply_kinetic(psi, periodic=True), 0.0)

    def test_plane_wave_eigenvector(self):
        n = 16
        k = 2 * math.pi * 3 / n
        amps = np.exp(1j * k * np.arange(n)) / math.sqrt(n)
        psi = WaveFunction(amps, origin_offset=0)
        d = apply_kinetic(psi, periodic=True)
        assert np.allclose(d, 1j * (2 * math.cos(k) - 2) * amps, atol=1e-12)

    def test_matches_matrix(self):
        # i (c_{n+1} + c_{n-1} - 2 c_n) == -i H c for both boundaries
        rng = np.random.default_rng(0)
        amps = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        for periodic in (False, True):
            psi = WaveFunction(amps, origin_offset=0)
            h = kinetic_matrix(12, periodic)
            assert np.allclose(apply_kinetic(psi, periodic), -1j * (h @ amps))


class TestBessel:
    def test_against_scipy(self):
        from scipy import special
        for x in (1e-10, 1e-4, 0.03, 0.3, 2.0, 7.7, 31.0, 100.0):
            mine = bessel_j_array(MAX_ORDER, x)
            ref = special.jv(np.arange(MAX_ORDER + 1), x)
            assert np.max(np.abs(mine - ref)) < 1e-10

    def test_at_zero(self):
        j = bessel_j_array(5, 0.0)
        assert j[0] == 1.0 and np.all(j[1:] == 0.0)


class TestFreePropagator:
    def test_identity_at_t0(self):
        assert free_propagator(0, 0.0) == 1.0
        for n in (1, 2, -3):
            assert free_propagator(n, 0.0) == 0.0

    def test_short_time_linear(self):
        # g_1(t) ~ i t for t << 1
        g = free_propagator(1, 0.01)
        assert abs(g - 1j * 0.01) / 0.01 < 0.01

    def test_unitarity(self):
        col = propagator_column(3.0)
        assert np.sum(np.abs(col.g) ** 2) == pytest.approx(1.0, abs=1e-8)

    def test_against_matrix_exponential(self):
        # brute-force oracle: dense expm of the open-chain Hamiltonian;
        # the constant diagonal of H is a global phase exp(-2it), removed
        # before the elementwise comparison
        n, t = 101, 2.0
        h = kinetic_matrix(n, periodic=False)
        u = expm(-1j * h * t) * np.exp(2j * t)
        center = n // 2
        for disp in range(-30, 31):
            assert abs(u[center + disp, center] - free_propagator(disp, t)) < 1e-8

    def test_range_errors(self):
        with pytest.raises(PropagatorRangeError):
            free_propagator(MAX_ORDER + 1, 1.0)
        with pytest.raises(PropagatorRangeError):
            free_propagator(0, MAX_TIME + 1.0)
        with pytest.raises(PropagatorRangeError):
            free_propagator(0, -1.0)

    def test_short_time_decay_bound(self):
        # |g_n(dt)| <= (dt^n / n!) * 1.1 for dt <= 0.1, n <= 5
        for dt in (0.01, 0.05, 0.1):
            for n in range(1, 6):
                bound = dt ** n / math.factorial(n) * 1.1
                assert abs(free_propagator(n, dt)) <= bound


class TestFreeEvolve:
    def test_variance_2t2(self):
        psi = _delta(301)
        for t in (1.0, 2.0, 4.0):
            _, _, var, _ = measure(free_evolve(psi, t))
            assert var == pytest.approx(2 * t * t, rel=1e-3)

    def test_t0_identity(self):
        psi = _delta(51)
        out = free_evolve(psi, 0.0)
        assert np.array_equal(out.amps, psi.amps)

    def test_group_property(self):
        psi = _delta(301)
        a = free_evolve(free_evolve(psi, 1.5), 2.5)
        b = free_evolve(psi, 4.0)
        assert np.max(np.abs(a.amps - b.amps)) < 1e-8

    def test_norm_preserved(self):
        psi = _delta(301)
        assert free_evolve(psi, 5.0).norm() == pytest.approx(1.0, abs=1e-8)

    def test_boundary_violation(self):
        psi = _delta(21)
        with pytest.raises(BoundaryError):
            free_evolve(psi, 8.0)

    def test_periodic_matches_matrix_exponential(self):
        n, t = 16, 2.0
        p = ModelParams(gamma=0.0, n_sites=n, boundary="periodic")
        psi = make_initial(p, InitialState("delta_site", 0.0, 0))
        u = expm(-1j * kinetic_matrix(n, periodic=True) * t) * np.exp(2j * t)
        expected = u @ psi.amps
        out = free_evolve_periodic(psi, t)
        assert np.max(np.abs(out.amps - expected)) < 1e-10

    def test_open_and_periodic_paths_agree(self):
        # same convention in both free-evolution implementations: on a large
        # ring the wrap-around is negligible and the columns must match
        n, t = 256, 3.0
        p_open = ModelParams(gamma=0.0, n_sites=n, boundary="open")
        psi = make_initial(p_open, InitialState("delta_site", 0.0, 0))
        a = free_evolve(psi, t)
        b = free_evolve_periodic(psi, t)
        assert np.max(np.abs(a.amps - b.amps)) < 1e-10
