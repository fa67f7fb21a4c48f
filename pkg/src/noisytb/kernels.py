"""Compiled inner loops for the stochastic steppers.

All three time-stepped unravellings share the same structure: draw the
step's noise from the trajectory's generator, form the Euler-Maruyama
update, renormalize, and (optionally) trim the active window.  The
kernels draw through numpy ``Generator`` objects, whose streams numba
reproduces bit-for-bit, so a multi-step kernel call equals the same
number of single-step calls on the same stream.

Windowing: on large open lattices the amplitudes outside an active
window [lo, hi] are exactly zero (support grows one site per step) or
below 1e-16 in magnitude and are trimmed to zero.  Draws are made only
for the active window, which changes the per-trajectory stream alignment
but not the law of the process; ensembles remain deterministic per
(seed, trajectory index).  Windowing is never used on periodic lattices.

Status codes: 0 = ok, 1 = step-size instability (pre-renormalization
norm deviated from 1 by more than 1e-2), 2 = jump-log capacity overflow.
"""

from __future__ import annotations

import numpy as np
from numba import njit

#: Squared-amplitude trim threshold (|c| < 1e-16, i.e. machine-level mass).
TRIM2 = 1e-32

#: Pre-renormalization norm guard from the step-size stability contract.
NORM_GUARD = 1e-2


@njit(cache=True, nogil=True)
def wnp_kernel(c, tmp, gen, n_steps, gamma, dt, periodic, include_kinetic,
               windowed, lo, hi):
    """Euler-Maruyama steps of dc = i(kinetic)dt - i sqrt(g) c dW - (g/2) c dt."""
    n = c.shape[0]
    sq_g = np.sqrt(gamma)
    half_gdt = 0.5 * gamma * dt
    sq_dt = np.sqrt(dt)
    nrm = 1.0
    for s in range(n_steps):
        if windowed:
            nlo = lo - 1 if lo > 0 else 0
            nhi = hi + 1 if hi < n - 1 else n - 1
        else:
            nlo = 0
            nhi = n - 1
        z = gen.standard_normal(nhi - nlo + 1)
        nrm2 = 0.0
        for i in range(nlo, nhi + 1):
            ci = c[i]
            nc = ci - 1j * (sq_g * sq_dt * z[i - nlo]) * ci - half_gdt * ci
            if include_kinetic:
                if periodic:
                    left = c[i - 1] if i > 0 else c[n - 1]
                    right = c[i + 1] if i < n - 1 else c[0]
                else:
                    left = c[i - 1] if i > nlo else 0.0 + 0.0j
                    right = c[i + 1] if i < nhi else 0.0 + 0.0j
                nc += 1j * dt * (right + left - 2.0 * ci)
            tmp[i] = nc
            nrm2 += nc.real * nc.real + nc.imag * nc.imag
        nrm = np.sqrt(nrm2)
        if np.abs(nrm - 1.0) > NORM_GUARD:
            return 1, s, lo, hi, nrm
        inv = 1.0 / nrm
        for i in range(nlo, nhi + 1):
            c[i] = tmp[i] * inv
        lo = nlo
        hi = nhi
        if windowed:
            while lo < hi and c[lo].real ** 2 + c[lo].imag ** 2 < TRIM2:
                c[lo] = 0.0
                lo += 1
            while hi > lo and c[hi].real ** 2 + c[hi].imag ** 2 < TRIM2:
                c[hi] = 0.0
                hi -= 1
    return 0, n_steps, lo, hi, nrm


@njit(cache=True, nogil=True)
def qsd_kernel(c, tmp, gen, n_steps, gamma, dt, periodic, include_kinetic,
               real_noise, windowed, lo, hi):
    """Euler-Maruyama steps of the norm-preserving diffusive unravelling.

    dc_n = i(kinetic) dt + g (w_n - 1/2 - S4/2) c_n dt
           + sqrt(g) (dxi_n - sum_m w_m dxi_m) c_n,
    with w_n = |c_n|^2, S4 = sum w^2.  Complex noise draws the real block
    then the imaginary block, each of variance dt/2; the real variant
    replaces dxi by a real Wiener increment of variance dt.
    """
    n = c.shape[0]
    sq_g = np.sqrt(gamma)
    sq_half_dt = np.sqrt(0.5 * dt)
    sq_dt = np.sqrt(dt)
    nrm = 1.0
    for s in range(n_steps):
        if windowed:
            nlo = lo - 1 if lo > 0 else 0
            nhi = hi + 1 if hi < n - 1 else n - 1
        else:
            nlo = 0
            nhi = n - 1
        w = nhi - nlo + 1
        zre = gen.standard_normal(w)
        if real_noise:
            zim = np.zeros(w)
            scale = sq_dt
        else:
            zim = gen.standard_normal(w)
            scale = sq_half_dt
        s4 = 0.0
        xibar_re = 0.0
        xibar_im = 0.0
        for i in range(nlo, nhi + 1):
            ci = c[i]
            wi = ci.real * ci.real + ci.imag * ci.imag
            s4 += wi * wi
            xibar_re += wi * zre[i - nlo]
            xibar_im += wi * zim[i - nlo]
        nrm2 = 0.0
        for i in range(nlo, nhi + 1):
            ci = c[i]
            wi = ci.real * ci.real + ci.imag * ci.imag
            dxi_re = (zre[i - nlo] - xibar_re) * scale
            dxi_im = (zim[i - nlo] - xibar_im) * scale
            nc = (ci + gamma * (wi - 0.5 - 0.5 * s4) * ci * dt
                  + sq_g * complex(dxi_re, dxi_im) * ci)
            if include_kinetic:
                if periodic:
                    left = c[i - 1] if i > 0 else c[n - 1]
                    right = c[i + 1] if i < n - 1 else c[0]
                else:
                    left = c[i - 1] if i > nlo else 0.0 + 0.0j
                    right = c[i + 1] if i < nhi else 0.0 + 0.0j
                nc += 1j * dt * (right + left - 2.0 * ci)
            tmp[i] = nc
            nrm2 += nc.real * nc.real + nc.imag * nc.imag
        nrm = np.sqrt(nrm2)
        if np.abs(nrm - 1.0) > NORM_GUARD:
            return 1, s, lo, hi, nrm
        inv = 1.0 / nrm
        for i in range(nlo, nhi + 1):
            c[i] = tmp[i] * inv
        lo = nlo
        hi = nhi
        if windowed:
            while lo < hi and c[lo].real ** 2 + c[lo].imag ** 2 < TRIM2:
                c[lo] = 0.0
                lo += 1
            while hi > lo and c[hi].real ** 2 + c[hi].imag ** 2 < TRIM2:
                c[hi] = 0.0
                hi -= 1
    return 0, n_steps, lo, hi, nrm


@njit(cache=True, nogil=True)
def jump_kernel(c, tmp, gen, n_steps, step_offset, gamma, dt, periodic,
                jump_steps, jump_sites, n_jumps):
    """Time-stepped jump unravelling: free Euler step or collapse.

    Each step draws one uniform; with probability gamma*dt the state
    collapses to a site sampled by inverse CDF over |c_n|^2 (one further
    uniform), otherwise a normalized free Euler step is taken.  Collapse
    events are appended to ``jump_steps``/``jump_sites`` as absolute step
    indices (the collapse lands at time (index+1)*dt).
    """
    n = c.shape[0]
    p_jump = gamma * dt
    for s in range(n_steps):
        u = gen.random()
        if u < p_jump:
            v = gen.random()
            acc = 0.0
            site = n - 1
            for i in range(n):
                acc += c[i].real ** 2 + c[i].imag ** 2
                if v < acc:
                    site = i
                    break
            for i in range(n):
                c[i] = 0.0
            c[site] = 1.0
            if n_jumps >= jump_steps.shape[0]:
                return 2, s, n_jumps, 1.0
            jump_steps[n_jumps] = step_offset + s
            jump_sites[n_jumps] = site
            n_jumps += 1
        else:
            nrm2 = 0.0
            for i in range(n):
                if periodic:
                    left = c[i - 1] if i > 0 else c[n - 1]
                    right = c[i + 1] if i < n - 1 else c[0]
                else:
                    left = c[i - 1] if i > 0 else 0.0 + 0.0j
                    right = c[i + 1] if i < n - 1 else 0.0 + 0.0j
                nc = c[i] + 1j * dt * (right + left - 2.0 * c[i])
                tmp[i] = nc
                nrm2 += nc.real * nc.real + nc.imag * nc.imag
            inv = 1.0 / np.sqrt(nrm2)
            for i in range(n):
                c[i] = tmp[i] * inv
    return 0, n_steps, n_jumps, 1.0


def support_window(amps: np.ndarray) -> tuple[int, int]:
    """Smallest [lo, hi] index window containing all weight above TRIM2."""
    w2 = amps.real ** 2 + amps.imag ** 2
    nz = np.nonzero(w2 >= TRIM2)[0]
    if nz.size == 0:
        return 0, amps.shape[0] - 1
    return int(nz[0]), int(nz[-1])
