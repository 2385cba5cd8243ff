"""Second-order (Zeno) analytics for the cross-polarised correlation.

Everything is evaluated in the Overhauser eigenbasis, where the measurement
channel is a Schur multiplier. Inside the perturbative formulas ``H_N`` is
used in angular units (``H_N / hbar``, rad/ns) so that times are in ns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import HBAR
from .errors import NoQuadraticDecayError, UndefinedCorrelationError
from .measurement import (
    MeasurementChannel,
    NoiseSpec,
    NuclearState,
    build_noisy_channel,
)
from .optics import OpticalParams
from .series import CorrelationSeries
from .spin_bath import SpinBathSpec, nuclear_hamiltonian, overhauser_basis, spectral

_COMMUTE_TOL = 1e-10


@dataclass(frozen=True)
class ScatteringSchedule:
    """Scattering times ``t_1 < ... < t_n`` inside ``(0, tau)``."""

    times: np.ndarray
    tau: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "tau", float(self.tau))
        if len(t):
            if np.any(np.diff(t) <= 0):
                raise ValueError("scattering times must be strictly ascending")
            if t[0] <= 0 or t[-1] >= self.tau:
                raise ValueError("scattering times must lie inside (0, tau)")

    def __len__(self):
        return len(self.times)

    @property
    def intervals(self) -> np.ndarray:
        """``Delta_i = t_i - t_{i-1}`` with ``t_0 = 0``."""
        return np.diff(self.times, prepend=0.0)

    def scaled(self, factor: float) -> "ScatteringSchedule":
        return ScatteringSchedule(self.times * factor, self.tau * factor)


@dataclass(frozen=True)
class ZenoContext:
    """Nuclear Hamiltonian, channel and steady state in the Overhauser basis.

    ``coherence`` is the non-selective Schur multiplier; it defaults to the
    channel's own and may be replaced to study idealised limits
    (all ones: no back-action; identity matrix: projective).
    """

    h_n: np.ndarray
    channel: MeasurementChannel
    rho_ss: NuclearState
    varrho: NuclearState = field(default=None)
    coherence: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        o = self.channel.o_v
        rho = self.rho_ss.matrix
        comm = o[:, None] * rho - rho * o[None, :]
        if np.max(np.abs(comm), initial=0.0) > _COMMUTE_TOL:
            raise ValueError("steady state must commute with the cross-polarised POVM element")
        if self.varrho is None:
            object.__setattr__(self, "varrho", NuclearState(o[:, None] * rho, self.rho_ss.basis))
        if self.coherence is None:
            object.__setattr__(self, "coherence", self.channel.coherence_matrix())

    @classmethod
    def from_bath(
        cls,
        spec: SpinBathSpec,
        optics: OpticalParams,
        noise: Optional[NoiseSpec] = None,
        rho_diag=None,
    ) -> "ZenoContext":
        """Build the context for a bath; ``rho_diag`` defaults to the maximally mixed state.

        ``rho_diag`` lists steady-state populations of the Overhauser eigenstates
        in ascending-eigenvalue order.
        """
        basis = overhauser_basis(spec)
        v = basis.eigenvectors
        h = v.conj().T @ nuclear_hamiltonian(spec) @ v
        h = 0.5 * (h + h.conj().T)
        ch = build_noisy_channel(optics, basis, noise or NoiseSpec())
        if rho_diag is None:
            rho = np.eye(spec.dim) / spec.dim
        else:
            rho = np.diag(np.asarray(rho_diag, dtype=float))
        return cls(h, ch, NuclearState(rho, basis))

    def with_coherence(self, coherence) -> "ZenoContext":
        return ZenoContext(self.h_n, self.channel, self.rho_ss, self.varrho, np.asarray(coherence, dtype=complex))

    @property
    def o_v(self) -> np.ndarray:
        return self.channel.o_v

    @property
    def p_v(self) -> float:
        """``Tr(O_V rho_N)``."""
        return float(np.real(np.sum(self.o_v * np.diag(self.rho_ss.matrix))))

    @property
    def h_angular(self) -> np.ndarray:
        return self.h_n / HBAR


def _comm(a, b):
    return a @ b - b @ a


def _trace_o(o, x) -> float:
    return float(np.real(np.sum(o * np.diag(x))))


def _inverse_tz2(ctx: ZenoContext) -> float:
    """``Tr(O_V [H,[H,varrho]])`` with ``H`` in rad/ns, i.e. ``1 / tau_z^2``."""
    h = ctx.h_angular
    return _trace_o(ctx.o_v, _comm(h, _comm(h, ctx.varrho.matrix)))


def zeno_time(ctx: ZenoContext) -> float:
    """Nuclear Zeno time in ns.

    Raises
    ------
    NoQuadraticDecayError
        If the double-commutator trace is not positive (frozen dynamics).
    """
    inv = _inverse_tz2(ctx)
    h = ctx.h_angular
    scale = float(np.max(np.abs(h), initial=0.0)) ** 2 * abs(ctx.varrho.trace)
    if not inv > 1e-13 * max(scale, 1e-300):
        raise NoQuadraticDecayError(f"double-commutator trace {inv:.3e} is not positive")
    return float(1.0 / np.sqrt(inv))


def _numerator_series(ctx: ZenoContext, taus) -> np.ndarray:
    hs = spectral(ctx.h_n)
    v = hs.eigenvectors
    sigma = v.conj().T @ ctx.varrho.matrix @ v
    o_h = v.conj().T @ (ctx.o_v[:, None] * v)
    m = o_h.conj() * sigma
    ph = np.exp(-1j * np.outer(np.asarray(taus, dtype=float), hs.eigenvalues / HBAR))
    return np.real(np.einsum("ta,ab,tb->t", ph, m, ph.conj()))


def low_power_g2(ctx: ZenoContext, taus) -> CorrelationSeries:
    """Exact ``g2(tau)`` without intermediate scattering events."""
    p_v = ctx.p_v
    if not p_v > 0:
        raise UndefinedCorrelationError("Tr(O_V rho_N) vanishes")
    taus = np.asarray(taus, dtype=float)
    g2 = _numerator_series(ctx, taus) / p_v**2
    return CorrelationSeries(taus, g2, np.zeros_like(g2), {"rate": 0.0, "p_v": [p_v]})


def exclusive_probability_exact(ctx: ZenoContext, schedule: ScatteringSchedule) -> float:
    """``Tr(O_V V_tau varrho)`` with exact propagation and non-selective events."""
    hs = spectral(ctx.h_n)
    v, w = hs.eigenvectors, hs.eigenvalues / HBAR
    vh = v.conj().T
    rho = ctx.varrho.matrix
    t_last = 0.0
    for t in list(schedule.times) + [schedule.tau]:
        u = (v * np.exp(-1j * w * (t - t_last))) @ vh
        rho = u @ rho @ u.conj().T
        if t < schedule.tau:
            rho = rho * ctx.coherence
        t_last = t
    return _trace_o(ctx.o_v, rho)


def _slopes(ctx: ZenoContext, schedule: ScatteringSchedule) -> np.ndarray:
    """``S_0 .. S_n`` for the schedule."""
    h = ctx.h_angular
    o = ctx.o_v
    x = _comm(h, ctx.varrho.matrix)
    # Tr(O [H, Y]) = sum_ab H_ab (o_a - o_b) Y_ba
    kernel = (h * (o[:, None] - o[None, :])).T
    dts = schedule.intervals
    out = np.zeros(len(dts) + 1)
    # acc_n = sum_j Delta_j Phi^{n-j+1} X, built by acc_n = Phi(acc_{n-1} + Delta_n X)
    acc = np.zeros_like(x)
    for n, dt in enumerate(dts, start=1):
        acc = ctx.coherence * (acc + dt * x)
        out[n] = float(np.real(np.sum(kernel * acc)))
    return out


def slope_function(ctx: ZenoContext, schedule: ScatteringSchedule, n: int) -> float:
    """``S_n = sum_j Delta_j Tr(O_V [H, Phi^{n-j+1} [H, varrho]])`` in 1/ns^2 * ns."""
    if not 0 <= n <= len(schedule):
        raise IndexError(f"slope index {n} outside 0..{len(schedule)}")
    return float(_slopes(ctx, schedule)[n])


def exclusive_probability_perturbative(ctx: ZenoContext, schedule: ScatteringSchedule) -> float:
    """Second-order approximation of :func:`exclusive_probability_exact`."""
    inv = _inverse_tz2(ctx)
    s = _slopes(ctx, schedule)
    dts = schedule.intervals
    n = len(dts)
    t_n = schedule.times[-1] if n else 0.0
    base = _trace_o(ctx.o_v, ctx.varrho.matrix)
    before = base - float(np.sum(dts * s[:n])) - 0.5 * inv * float(np.sum(dts**2))
    rest = schedule.tau - t_n
    return before - rest * s[n] - 0.5 * inv * rest**2


@dataclass(frozen=True)
class SawtoothTrace:
    """Perturbative evolution of one Overhauser two-level sub-block.

    At every scattering event two rows share the same time: the first holds
    the state just before the event and has ``event`` False, the second the
    state just after.
    """

    times: np.ndarray
    coherence: np.ndarray
    bloch_y: np.ndarray
    bloch_z: np.ndarray
    p_value: np.ndarray
    event: np.ndarray


def sawtooth_trajectory(two_level, dt_event, t_max: float, steps: int) -> SawtoothTrace:
    """Evolve ``varrho`` to second order, scattering every ``dt_event`` ns.

    Parameters
    ----------
    two_level : tuple
        ``(i, j, ctx)``: Overhauser basis indices of the tracked pair and the
        :class:`ZenoContext`.
    dt_event : float or None
        Event spacing in ns; ``None`` for no events.
    t_max : float
        Final time in ns.
    steps : int
        Number of uniform grid intervals on ``[0, t_max]``.

    Returns
    -------
    SawtoothTrace
        Raw expectation values ``bloch_y = -2 Im rho_ij`` and
        ``bloch_z = rho_ii - rho_jj`` (no rescaling by the sub-block
        population); ``p_value = Tr(O_V rho)``.
    """
    i, j, ctx = two_level
    if i == j:
        raise ValueError("the two basis indices must differ")
    if dt_event is not None and not dt_event > 0:
        raise ValueError("dt_event must be positive")
    h = ctx.h_angular
    rho0 = ctx.varrho.matrix
    c1 = _comm(h, rho0)
    c2 = _comm(h, c1)
    grid = np.linspace(0.0, t_max, int(steps) + 1)
    events = np.array([]) if dt_event is None else np.arange(1, int(np.floor(t_max / dt_event * (1 + 1e-12))) + 1) * dt_event
    events = events[events <= t_max * (1 + 1e-12)]
    r1 = np.zeros_like(rho0)
    r2 = np.zeros_like(rho0)
    hr1 = np.zeros_like(rho0)
    t_k = 0.0
    rows = []

    def record(t, ev):
        s = t - t_k
        rho = rho0 + (r1 - 1j * s * c1) + (r2 - 1j * s * hr1 - 0.5 * s * s * c2)
        rows.append((t, rho[i, j], rho[i, i].real, rho[j, j].real, _trace_o(ctx.o_v, rho), ev))
        return rho

    on_event = np.isclose(grid[:, None], events[None, :], rtol=0, atol=1e-12 * max(t_max, 1.0)).any(axis=1)
    pts = sorted([(t, 0) for t in grid[~on_event]] + [(t, 1) for t in events])
    for t, is_event in pts:
        if not is_event:
            record(t, False)
            continue
        rho = record(t, False)
        s = t - t_k
        r1_new = ctx.coherence * (r1 - 1j * s * c1)
        r2 = ctx.coherence * (r2 - 1j * s * hr1 - 0.5 * s * s * c2)
        r1 = r1_new
        hr1 = _comm(h, r1)
        t_k = t
        record(t, True)
    arr = np.array(rows, dtype=object)
    times = arr[:, 0].astype(float)
    coh = arr[:, 1].astype(complex)
    pii = arr[:, 2].astype(float)
    pjj = arr[:, 3].astype(float)
    return SawtoothTrace(
        times=times,
        coherence=coh,
        bloch_y=-2.0 * coh.imag,
        bloch_z=pii - pjj,
        p_value=arr[:, 4].astype(float),
        event=arr[:, 5].astype(bool),
    )
