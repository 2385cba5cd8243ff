"""Cavity reflection coefficients with an Overhauser-shifted two-level emitter.

All energies are in ueV. ``kappa`` enters only through ``pi * kappa``, exactly
as it appears in the single-sided cavity reflection formula; it is not
rescaled. The probe frequency ``omega_L`` is kept separate from the electron
Zeeman energy of :class:`~nuczeno.spin_bath.SpinBathSpec`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .errors import ConfigError, SingularParametersError


@dataclass(frozen=True)
class OpticalParams:
    omega_c: float = 0.0
    omega_0: float = 0.0
    omega_L: float = 0.0
    kappa: float = 4000.0
    g: float = 30.0

    def __post_init__(self):
        for name in ("omega_c", "omega_0", "omega_L", "kappa", "g"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ConfigError("must be finite", key=f"optics.{name}")
            object.__setattr__(self, name, value)
        if self.kappa <= 0.0:
            raise ConfigError("must be strictly positive", key="optics.kappa")
        if self.g < 0.0:
            raise ConfigError("must be non-negative", key="optics.g")

    @property
    def fully_resonant(self) -> bool:
        return self.omega_c == self.omega_0 == self.omega_L

    @property
    def crossover_shift(self) -> float:
        """Shift at which co- and cross-polarised weights are equal (resonant case)."""
        if self.g == 0.0:
            raise SingularParametersError("no crossover without emitter coupling")
        return self.g**2 / (np.pi * self.kappa)


@dataclass(frozen=True)
class ChannelCoefficients:
    r: complex
    r0: complex
    r_co: complex
    r_cr: complex


@dataclass(frozen=True)
class ValidityReport:
    linewidth: float
    phase_slope: float
    t_delta_min: float
    t_fluc: float
    threshold: float
    ok: bool


def _denominator(p: OpticalParams, delta):
    detuning = p.omega_0 + np.asarray(delta, dtype=float) - p.omega_L
    return (p.omega_c - p.omega_L - 1j * np.pi * p.kappa) * detuning - p.g**2


def reflectivity(p: OpticalParams, delta):
    """Reflection coefficient for Overhauser shift ``delta`` (scalar or array).

    Written as ``conj(D) / D`` with ``D`` the complex denominator, which is
    algebraically identical to ``1 + 2 i pi kappa x / D`` and unimodular to
    rounding for real parameters.
    """
    if p.g == 0.0:
        # the emitter term cancels; x = 0 is a removable singularity
        r = np.full(np.shape(delta), empty_cavity_reflectivity(p), dtype=complex)
        return r if np.ndim(r) else complex(r)
    den = _denominator(p, delta)
    if np.any(den == 0):
        raise SingularParametersError("reflection coefficient denominator vanishes")
    r = np.conj(den) / den
    return r if np.ndim(r) else complex(r)


def empty_cavity_reflectivity(p: OpticalParams) -> complex:
    """Reflection coefficient with the emitter decoupled (``g = 0``)."""
    d = p.omega_c - p.omega_L - 1j * np.pi * p.kappa
    return complex(np.conj(d) / d)


def channel_coefficients(p: OpticalParams, delta):
    """Co- and cross-polarised reflection amplitudes ``(r +- r0) / 2``.

    Scalar ``delta`` gives a :class:`ChannelCoefficients`; arrays give a
    :class:`ChannelCoefficients` of arrays.
    """
    r = reflectivity(p, delta)
    r0 = empty_cavity_reflectivity(p)
    return ChannelCoefficients(r=r, r0=r0, r_co=0.5 * (r + r0), r_cr=0.5 * (r - r0))


def povm_weight(p: OpticalParams, delta, channel: str = "cr"):
    """Probability that a photon scattered off the shift eigenstate ``delta`` lands in ``channel``."""
    c = channel_coefficients(p, delta)
    if channel == "cr":
        amp = c.r_cr
    elif channel == "co":
        amp = c.r_co
    else:
        raise ValueError(f"channel must be 'co' or 'cr', got {channel!r}")
    w = np.abs(amp) ** 2
    return w if np.ndim(w) else float(w)


def phase_shift(p: OpticalParams, delta):
    """Phase difference ``arg(r) - arg(r0)`` wrapped into ``(-pi, pi]``."""
    theta = np.angle(reflectivity(p, delta)) - np.angle(empty_cavity_reflectivity(p))
    wrapped = np.pi - np.mod(np.pi - theta, 2 * np.pi)
    return wrapped if np.ndim(wrapped) else float(wrapped)


def validity_report(p: OpticalParams, t_fluc: float, threshold: float = 100.0) -> ValidityReport:
    """Check that the Overhauser fluctuation time is long against ``hbar / w_f``.

    ``w_f = g^2 / kappa`` is the emitter linewidth in the cavity and
    ``2 pi kappa / g^2`` the steepest slope of the reflection phase.
    """
    if not t_fluc > 0:
        raise ValueError("t_fluc must be positive")
    if p.g == 0.0:
        raise SingularParametersError("linewidth g^2/kappa vanishes for g = 0")
    w_f = p.g**2 / p.kappa
    t_min = HBAR / w_f
    return ValidityReport(
        linewidth=w_f,
        phase_slope=2 * np.pi * p.kappa / p.g**2,
        t_delta_min=t_min,
        t_fluc=float(t_fluc),
        threshold=float(threshold),
        ok=bool(t_fluc / t_min > threshold),
    )
