"""Numba kernels for interaction-picture RK4 propagation and OCT sweeps.

The working representation is the interaction picture of H0:

    db_n/dt = i E_L(t) sum_k e^{i(E_n-E_k)t} D_nk b_k

with D the total dipole operator in the coupled basis.  The fast phase
factors e^{-iE_n t} are maintained by incremental rotation (one complex
multiply per state per half step) instead of per-step exponentials, with
periodic modulus renormalization.

Dipole matrices are passed as symmetric sparse triplets (rows, cols,
vals) listing every nonzero entry (both orientations).
"""
from __future__ import annotations

import numpy as np
from numba import njit

_RENORM_EVERY = 256


@njit(cache=True, fastmath=True)
def _eval_pulses(pulses, t):
    """Sum of sin^2-envelope pulses; pulses rows are (E0, omega, tau, t_start)."""
    acc = 0.0
    for c in range(pulses.shape[0]):
        s = t - pulses[c, 3]
        tau = pulses[c, 2]
        if 0.0 <= s <= tau:
            sn = np.sin(np.pi * s / tau)
            acc += pulses[c, 0] * sn * sn * np.cos(pulses[c, 1] * s)
    return acc


@njit(cache=True, fastmath=True)
def _rhs(out, b, p, rows, cols, vals, el):
    """out = i * el * conj(p) * (D @ (p * b)), sparse D."""
    n = b.size
    for i in range(n):
        out[i] = 0.0 + 0.0j
    for k in range(rows.size):
        r = rows[k]
        c = cols[k]
        out[r] += vals[k] * (p[c] * b[c])
    for i in range(n):
        out[i] = 1j * el * np.conj(p[i]) * out[i]


@njit(cache=True, fastmath=True)
def _rk4_step(b, p, ph, pf, rows, cols, vals, e1, e2, e3, dt, k1, k2, k3, k4, tmp):
    n = b.size
    _rhs(k1, b, p, rows, cols, vals, e1)
    for i in range(n):
        tmp[i] = b[i] + 0.5 * dt * k1[i]
    _rhs(k2, tmp, ph, rows, cols, vals, e2)
    for i in range(n):
        tmp[i] = b[i] + 0.5 * dt * k2[i]
    _rhs(k3, tmp, ph, rows, cols, vals, e2)
    for i in range(n):
        tmp[i] = b[i] + dt * k3[i]
    _rhs(k4, tmp, pf, rows, cols, vals, e3)
    for i in range(n):
        b[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, fastmath=True)
def _renorm(p):
    for i in range(p.size):
        p[i] /= np.abs(p[i])


@njit(cache=True, fastmath=True)
def rk4_propagate(b, energies, rows, cols, vals, pulses, field_steps, use_pulses,
                  t0, dt, nsteps, stride, pops_out, norm_out):
    """Propagate b in place over nsteps of size dt.

    ``use_pulses`` selects analytic pulse evaluation at the exact stage
    times; otherwise ``field_steps`` holds one amplitude per step
    (piecewise-constant field).  Populations are recorded every ``stride``
    steps (row 0 is the initial state); ``norm_out[0]`` returns the
    maximum deviation of the norm from one over the recorded points.
    """
    n = b.size
    p = np.exp(-1j * energies * t0)
    rot = np.exp(-1j * energies * (0.5 * dt))
    ph = np.empty(n, dtype=np.complex128)
    pf = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    rec = 0
    for i in range(n):
        pops_out[rec, i] = np.abs(b[i]) ** 2
    rec += 1
    max_err = 0.0
    for m in range(nsteps):
        t = t0 + m * dt
        if use_pulses:
            e1 = _eval_pulses(pulses, t)
            e2 = _eval_pulses(pulses, t + 0.5 * dt)
            e3 = _eval_pulses(pulses, t + dt)
        else:
            e1 = field_steps[m]
            e2 = e1
            e3 = e1
        for i in range(n):
            ph[i] = p[i] * rot[i]
            pf[i] = ph[i] * rot[i]
        _rk4_step(b, p, ph, pf, rows, cols, vals, e1, e2, e3, dt, k1, k2, k3, k4, tmp)
        for i in range(n):
            p[i] = pf[i]
        if (m + 1) % _RENORM_EVERY == 0:
            _renorm(p)
        if (m + 1) % stride == 0 or m == nsteps - 1:
            norm = 0.0
            for i in range(n):
                pops_out[rec, i] = np.abs(b[i]) ** 2
                norm += pops_out[rec, i]
            rec += 1
            err = abs(norm - 1.0)
            if err > max_err:
                max_err = err
    norm_out[0] = max_err
    return rec


@njit(cache=True, fastmath=True)
def rk4_propagate_back(psi, energies, rows, cols, vals, field_steps, t0, dt, nsteps):
    """Propagate the (Z, n) block ``psi`` backward from t0+nsteps*dt to t0.

    The field is piecewise constant per forward step index.
    """
    z, n = psi.shape
    tf = t0 + nsteps * dt
    p = np.exp(-1j * energies * tf)
    rot = np.exp(1j * energies * (0.5 * dt))   # time runs backward
    ph = np.empty(n, dtype=np.complex128)
    pf = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    for m in range(nsteps - 1, -1, -1):
        el = field_steps[m]
        for i in range(n):
            ph[i] = p[i] * rot[i]
            pf[i] = ph[i] * rot[i]
        for zz in range(z):
            _rk4_step(psi[zz], p, ph, pf, rows, cols, vals, el, el, el, -dt,
                      k1, k2, k3, k4, tmp)
        for i in range(n):
            p[i] = pf[i]
        if m % _RENORM_EVERY == 0:
            _renorm(p)


@njit(cache=True, fastmath=True)
def krotov_forward_repl(psi_i, psi_f, energies, rows, cols, vals, field_old,
                        field_new, switch, alpha, t0, dt):
    """Replacement-form forward sweep: the new field is built from the
    overlap term alone, E(t_m) = -(s/alpha) Im sum_z <psi_f|mu|psi_i>,
    discarding the old field (which still drives ``psi_f``)."""
    z, n = psi_i.shape
    nsteps = field_old.size
    p = np.exp(-1j * energies * t0)
    rot = np.exp(-1j * energies * (0.5 * dt))
    ph = np.empty(n, dtype=np.complex128)
    pf = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    for m in range(nsteps):
        acc = 0.0 + 0.0j
        for k in range(rows.size):
            r = rows[k]
            c = cols[k]
            pc = p[c]
            pr = np.conj(p[r])
            for zz in range(z):
                acc += pr * np.conj(psi_f[zz, r]) * vals[k] * (pc * psi_i[zz, c])
        el_new = -(switch[m] / alpha) * acc.imag
        field_new[m] = el_new
        el_old = field_old[m]
        for i in range(n):
            ph[i] = p[i] * rot[i]
            pf[i] = ph[i] * rot[i]
        for zz in range(z):
            _rk4_step(psi_i[zz], p, ph, pf, rows, cols, vals, el_new, el_new, el_new,
                      dt, k1, k2, k3, k4, tmp)
            _rk4_step(psi_f[zz], p, ph, pf, rows, cols, vals, el_old, el_old, el_old,
                      dt, k1, k2, k3, k4, tmp)
        for i in range(n):
            p[i] = pf[i]
        if (m + 1) % _RENORM_EVERY == 0:
            _renorm(p)


@njit(cache=True, fastmath=True)
def krotov_forward(psi_i, psi_f, energies, rows, cols, vals, field_old, field_new,
                   switch, alpha, t0, dt):
    """One immediate-feedback forward sweep.

    ``psi_i`` (Z, n) advances under the field being written to
    ``field_new``; ``psi_f`` (Z, n) advances under ``field_old``.  At each
    step the new field value is the damped (incremental) update

        E(t_m) = E_old(t_m) - (s(t_m)/alpha) * Im sum_z <psi_f^z| mu(t_m) |psi_i^z>

    evaluated with the states at t_m (Krotov-style immediate feedback).
    As alpha grows the update collapses onto the old field, so a
    backtracking caller can always restore monotonicity.
    """
    z, n = psi_i.shape
    nsteps = field_old.size
    p = np.exp(-1j * energies * t0)
    rot = np.exp(-1j * energies * (0.5 * dt))
    ph = np.empty(n, dtype=np.complex128)
    pf = np.empty(n, dtype=np.complex128)
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    for m in range(nsteps):
        acc = 0.0 + 0.0j
        for zz in range(z):
            for k in range(rows.size):
                r = rows[k]
                c = cols[k]
                acc += np.conj(p[r] * psi_f[zz, r]) * vals[k] * (p[c] * psi_i[zz, c])
        el_old = field_old[m]
        el_new = el_old - (switch[m] / alpha) * acc.imag
        field_new[m] = el_new
        for i in range(n):
            ph[i] = p[i] * rot[i]
            pf[i] = ph[i] * rot[i]
        for zz in range(z):
            _rk4_step(psi_i[zz], p, ph, pf, rows, cols, vals, el_new, el_new, el_new,
                      dt, k1, k2, k3, k4, tmp)
            _rk4_step(psi_f[zz], p, ph, pf, rows, cols, vals, el_old, el_old, el_old,
                      dt, k1, k2, k3, k4, tmp)
        for i in range(n):
            p[i] = pf[i]
        if (m + 1) % _RENORM_EVERY == 0:
            _renorm(p)
