"""Hot inner loops of the trajectory engine.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
fallback with identical semantics. Set ``NUCZENO_DISABLE_NUMBA=1`` before
import to force the fallback (also used when numba is not installed).
``BACKEND`` reports which one is active.

Conventions shared by all kernels (one magnetisation sector at a time):

* ``w`` (n, n) unitary: columns are H_N eigenvectors in the Overhauser basis.
* ``omega`` (n,): H_N eigenvalues divided by hbar, in rad/ns.
* coefficient vectors are cross/co-polarised amplitudes per Overhauser
  eigenstate; ``o_end`` is the cross-polarised POVM diagonal used for the
  final detection.
"""
from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("NUCZENO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
except ImportError:
    njit = None

BACKEND = "numba" if njit is not None else "numpy"


# ---------------------------------------------------------------- reflectivity


def _coeffs_py(deltas, shift, omega_c, omega_0, omega_l, pikappa, g2):
    den = (omega_c - omega_l - 1j * pikappa) * (omega_0 + deltas + shift - omega_l) - g2
    r = np.conj(den) / den
    d0 = omega_c - omega_l - 1j * pikappa
    r0 = np.conj(d0) / d0
    return 0.5 * (r - r0), 0.5 * (r + r0)


# ------------------------------------------------------------ density kernels


def _density_traj_py(w, omega, o_h, sigma0, rmat, events, taus, out):
    """Non-selective propagation of one sector density matrix along one schedule.

    ``sigma0`` and ``o_h`` are in the H_N eigenbasis; ``rmat`` is the Schur
    multiplier of the non-selective channel in the Overhauser basis. Adds
    ``Tr(O rho(tau))`` for every grid point into ``out``.
    """
    wh = w.conj().T
    sigma = sigma0.copy()
    t_last = 0.0
    k = 0
    n_tau = len(taus)
    for ev in range(len(events) + 1):
        t_next = events[ev] if ev < len(events) else np.inf
        if k < n_tau and taus[k] <= t_next:
            m = o_h.conj() * sigma
            while k < n_tau and taus[k] <= t_next:
                ph = np.exp(-1j * omega * (taus[k] - t_last))
                out[k] += (ph @ m @ ph.conj()).real
                k += 1
        if ev == len(events):
            break
        ph = np.exp(-1j * omega * (t_next - t_last))
        sigma = sigma * np.outer(ph, ph.conj())
        x = w @ sigma @ wh
        x *= rmat
        sigma = wh @ x @ w
        t_last = t_next


def _density_noisy_traj_py(w, omega, o_h, sigma0, deltas, shifts, optics, events, taus, out):
    wh = w.conj().T
    sigma = sigma0.copy()
    t_last = 0.0
    k = 0
    n_tau = len(taus)
    for ev in range(len(events) + 1):
        t_next = events[ev] if ev < len(events) else np.inf
        if k < n_tau and taus[k] <= t_next:
            m = o_h.conj() * sigma
            while k < n_tau and taus[k] <= t_next:
                ph = np.exp(-1j * omega * (taus[k] - t_last))
                out[k] += (ph @ m @ ph.conj()).real
                k += 1
        if ev == len(events):
            break
        ph = np.exp(-1j * omega * (t_next - t_last))
        sigma = sigma * np.outer(ph, ph.conj())
        cr, co = _coeffs_py(deltas, shifts[ev], *optics)
        x = w @ sigma @ wh
        x *= np.outer(cr, cr.conj()) + np.outer(co, co.conj())
        sigma = wh @ x @ w
        t_last = t_next


# ------------------------------------------------------- wavefunction kernels


def _wave_traj_py(w, omega, o_end, phi0, deltas, shifts, optics, events, uniforms, taus, out):
    """Quantum-jump unravelling of the non-selective channel for one pure state.

    At each event the outcome V/H is drawn with its Born probability and the
    state renormalised; ``Tr(O psi psi^H)`` is added into ``out`` per grid
    point. ``phi0`` is the initial state in the H_N eigenbasis.
    """
    wh = w.conj().T
    phi = phi0.copy()
    t_last = 0.0
    k = 0
    n_tau = len(taus)
    for ev in range(len(events) + 1):
        t_next = events[ev] if ev < len(events) else np.inf
        while k < n_tau and taus[k] <= t_next:
            psi = w @ (phi * np.exp(-1j * omega * (taus[k] - t_last)))
            out[k] += np.sum(o_end * (psi.real**2 + psi.imag**2))
            k += 1
        if ev == len(events):
            break
        psi = w @ (phi * np.exp(-1j * omega * (t_next - t_last)))
        cr, co = _coeffs_py(deltas, shifts[ev], *optics)
        a = psi * cr
        p_v = np.sum(a.real**2 + a.imag**2)
        if uniforms[ev] >= p_v:
            a = psi * co
            p_v = 1.0 - p_v
        a = a / math.sqrt(p_v)
        phi = wh @ a
        t_last = t_next


def _record_traj_py(w, omega, phi0, deltas, shifts, optics, events, uniforms, vflags):
    """Selective detection record: writes 1 into ``vflags`` for every V outcome."""
    wh = w.conj().T
    phi = phi0.copy()
    t_last = 0.0
    n_v = 0
    for ev in range(len(events)):
        psi = w @ (phi * np.exp(-1j * omega * (events[ev] - t_last)))
        cr, co = _coeffs_py(deltas, shifts[ev], *optics)
        a = psi * cr
        p_v = np.sum(a.real**2 + a.imag**2)
        if uniforms[ev] < p_v:
            vflags[ev] = 1
            n_v += 1
        else:
            a = psi * co
            p_v = 1.0 - p_v
            vflags[ev] = 0
        phi = wh @ (a / math.sqrt(p_v))
        t_last = events[ev]
    return n_v


def _pair_histogram_py(times, edges, counts):
    """Count ordered pairs ``t_j - t_i`` (j > i) falling into ``edges`` bins."""
    tmax = edges[-1]
    for i in range(len(times)):
        d = times[i + 1 :] - times[i]
        d = d[d < tmax]
        if len(d):
            counts += np.histogram(d, bins=edges)[0]


# -------------------------------------------------------------- numba versions

if njit is not None:

    @njit(cache=True, nogil=True)
    def _coeffs_nb(deltas, shift, omega_c, omega_0, omega_l, pikappa, g2, cr, co):
        d0 = complex(omega_c - omega_l, -pikappa)
        r0 = d0.conjugate() / d0
        for i in range(len(deltas)):
            den = d0 * (omega_0 + deltas[i] + shift - omega_l) - g2
            r = den.conjugate() / den
            cr[i] = 0.5 * (r - r0)
            co[i] = 0.5 * (r + r0)

    @njit(cache=True, nogil=True)
    def _quadform_nb(m, omega, dt):
        n = len(omega)
        ph = np.empty(n, dtype=np.complex128)
        for a in range(n):
            ph[a] = complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
        acc = 0.0
        for a in range(n):
            row = 0.0j
            for b in range(n):
                row += m[a, b] * ph[b].conjugate()
            acc += (ph[a] * row).real
        return acc

    @njit(cache=True, nogil=True)
    def _density_traj_nb(w, omega, o_h, sigma0, rmat, events, taus, out):
        n = len(omega)
        wh = np.ascontiguousarray(w.conj().T)
        sigma = sigma0.copy()
        t_last = 0.0
        k = 0
        n_tau = len(taus)
        n_ev = len(events)
        for ev in range(n_ev + 1):
            t_next = events[ev] if ev < n_ev else np.inf
            if k < n_tau and taus[k] <= t_next:
                m = o_h.conj() * sigma
                while k < n_tau and taus[k] <= t_next:
                    out[k] += _quadform_nb(m, omega, taus[k] - t_last)
                    k += 1
            if ev == n_ev:
                break
            dt = t_next - t_last
            for a in range(n):
                pa = complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
                for b in range(n):
                    pb = complex(math.cos(omega[b] * dt), math.sin(omega[b] * dt))
                    sigma[a, b] *= pa * pb
            x = w @ sigma @ wh
            x *= rmat
            sigma = wh @ x @ w
            t_last = t_next

    @njit(cache=True, nogil=True)
    def _density_noisy_traj_nb(w, omega, o_h, sigma0, deltas, shifts, optics, events, taus, out):
        n = len(omega)
        wh = np.ascontiguousarray(w.conj().T)
        sigma = sigma0.copy()
        cr = np.empty(n, dtype=np.complex128)
        co = np.empty(n, dtype=np.complex128)
        rmat = np.empty((n, n), dtype=np.complex128)
        t_last = 0.0
        k = 0
        n_tau = len(taus)
        n_ev = len(events)
        for ev in range(n_ev + 1):
            t_next = events[ev] if ev < n_ev else np.inf
            if k < n_tau and taus[k] <= t_next:
                m = o_h.conj() * sigma
                while k < n_tau and taus[k] <= t_next:
                    out[k] += _quadform_nb(m, omega, taus[k] - t_last)
                    k += 1
            if ev == n_ev:
                break
            dt = t_next - t_last
            for a in range(n):
                pa = complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
                for b in range(n):
                    pb = complex(math.cos(omega[b] * dt), math.sin(omega[b] * dt))
                    sigma[a, b] *= pa * pb
            _coeffs_nb(deltas, shifts[ev], optics[0], optics[1], optics[2], optics[3], optics[4], cr, co)
            for a in range(n):
                for b in range(n):
                    rmat[a, b] = cr[a] * cr[b].conjugate() + co[a] * co[b].conjugate()
            x = w @ sigma @ wh
            x *= rmat
            sigma = wh @ x @ w
            t_last = t_next

    @njit(cache=True, nogil=True)
    def _wave_traj_nb(w, omega, o_end, phi0, deltas, shifts, optics, events, uniforms, taus, out):
        n = len(omega)
        wh = np.ascontiguousarray(w.conj().T)
        phi = phi0.copy()
        tmp = np.empty(n, dtype=np.complex128)
        cr = np.empty(n, dtype=np.complex128)
        co = np.empty(n, dtype=np.complex128)
        t_last = 0.0
        k = 0
        n_tau = len(taus)
        n_ev = len(events)
        for ev in range(n_ev + 1):
            t_next = events[ev] if ev < n_ev else np.inf
            while k < n_tau and taus[k] <= t_next:
                dt = taus[k] - t_last
                for a in range(n):
                    tmp[a] = phi[a] * complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
                psi = w @ tmp
                acc = 0.0
                for i in range(n):
                    acc += o_end[i] * (psi[i].real ** 2 + psi[i].imag ** 2)
                out[k] += acc
                k += 1
            if ev == n_ev:
                break
            dt = t_next - t_last
            for a in range(n):
                tmp[a] = phi[a] * complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
            psi = w @ tmp
            _coeffs_nb(deltas, shifts[ev], optics[0], optics[1], optics[2], optics[3], optics[4], cr, co)
            p_v = 0.0
            for i in range(n):
                p_v += (psi[i].real ** 2 + psi[i].imag ** 2) * (cr[i].real ** 2 + cr[i].imag ** 2)
            if uniforms[ev] < p_v:
                scale = 1.0 / math.sqrt(p_v)
                for i in range(n):
                    tmp[i] = psi[i] * cr[i] * scale
            else:
                scale = 1.0 / math.sqrt(1.0 - p_v)
                for i in range(n):
                    tmp[i] = psi[i] * co[i] * scale
            phi = wh @ tmp
            t_last = t_next

    @njit(cache=True, nogil=True)
    def _record_traj_nb(w, omega, phi0, deltas, shifts, optics, events, uniforms, vflags):
        n = len(omega)
        wh = np.ascontiguousarray(w.conj().T)
        phi = phi0.copy()
        tmp = np.empty(n, dtype=np.complex128)
        cr = np.empty(n, dtype=np.complex128)
        co = np.empty(n, dtype=np.complex128)
        t_last = 0.0
        n_v = 0
        for ev in range(len(events)):
            dt = events[ev] - t_last
            for a in range(n):
                tmp[a] = phi[a] * complex(math.cos(omega[a] * dt), -math.sin(omega[a] * dt))
            psi = w @ tmp
            _coeffs_nb(deltas, shifts[ev], optics[0], optics[1], optics[2], optics[3], optics[4], cr, co)
            p_v = 0.0
            for i in range(n):
                p_v += (psi[i].real ** 2 + psi[i].imag ** 2) * (cr[i].real ** 2 + cr[i].imag ** 2)
            if uniforms[ev] < p_v:
                vflags[ev] = 1
                n_v += 1
                scale = 1.0 / math.sqrt(p_v)
                for i in range(n):
                    tmp[i] = psi[i] * cr[i] * scale
            else:
                vflags[ev] = 0
                scale = 1.0 / math.sqrt(1.0 - p_v)
                for i in range(n):
                    tmp[i] = psi[i] * co[i] * scale
            phi = wh @ tmp
            t_last = events[ev]
        return n_v

    @njit(cache=True, nogil=True)
    def _pair_histogram_nb(times, edges, counts):
        nb = len(edges) - 1
        tmax = edges[-1]
        t0 = edges[0]
        width = (tmax - t0) / nb
        for i in range(len(times)):
            for j in range(i + 1, len(times)):
                d = times[j] - times[i]
                if d >= tmax:
                    break
                if d < t0:
                    continue
                b = int((d - t0) / width)
                if b >= nb:
                    b = nb - 1
                # uniform bins: correct rounding at the edges
                while b > 0 and d < edges[b]:
                    b -= 1
                while b < nb - 1 and d >= edges[b + 1]:
                    b += 1
                counts[b] += 1

    density_traj = _density_traj_nb
    density_noisy_traj = _density_noisy_traj_nb
    wave_traj = _wave_traj_nb
    record_traj = _record_traj_nb
    pair_histogram = _pair_histogram_nb
else:
    density_traj = _density_traj_py
    density_noisy_traj = _density_noisy_traj_py
    wave_traj = _wave_traj_py
    record_traj = _record_traj_py
    pair_histogram = _pair_histogram_py


def optics_tuple(p) -> np.ndarray:
    """Pack optical parameters in the order the kernels expect."""
    return np.array([p.omega_c, p.omega_0, p.omega_L, np.pi * p.kappa, p.g**2])
