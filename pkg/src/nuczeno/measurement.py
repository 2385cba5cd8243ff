"""Photon-scattering measurement operators acting on the nuclear spin state.

Every operator here is diagonal in the Overhauser eigenbasis, so each
quantum operation is a Schur (elementwise) multiplier on the density matrix:
``Phi_c(rho) = rho * K_c`` with ``K_c = sum_s w_s c_s c_s^H``. A noiseless
channel is the single-node case ``w = (1,)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .optics import OpticalParams, channel_coefficients
from .spin_bath import SpectralDecomposition


class NoiseMode(str, enum.Enum):
    AVERAGED_CHANNEL = "averaged_channel"
    PER_EVENT_SAMPLE = "per_event_sample"


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian random shift of the emitter resonance, drawn per scattering event.

    ``sigma_s`` is the standard deviation in ueV. ``n_quad`` Gauss-Hermite
    nodes discretise the distribution for the averaged channel.
    """

    sigma_s: float = 0.0
    mean_s: float = 0.0
    n_quad: int = 21
    mode: NoiseMode = NoiseMode.PER_EVENT_SAMPLE

    def __post_init__(self):
        object.__setattr__(self, "sigma_s", float(self.sigma_s))
        object.__setattr__(self, "mean_s", float(self.mean_s))
        object.__setattr__(self, "mode", NoiseMode(self.mode))
        if not self.sigma_s >= 0.0:
            raise ConfigError("must be non-negative", key="noise.sigma_s")
        if int(self.n_quad) != self.n_quad or self.n_quad < 1:
            raise ConfigError("must be a positive integer", key="noise.n_quad")
        object.__setattr__(self, "n_quad", int(self.n_quad))

    @property
    def is_trivial(self) -> bool:
        return self.sigma_s == 0.0 and self.mean_s == 0.0

    def quadrature(self):
        """Gauss-Hermite nodes (ueV) and weights summing to one."""
        if self.sigma_s == 0.0:
            return np.array([self.mean_s]), np.array([1.0])
        x, w = np.polynomial.hermite.hermgauss(self.n_quad)
        return self.mean_s + np.sqrt(2.0) * self.sigma_s * x, w / np.sqrt(np.pi)


@dataclass(frozen=True)
class NuclearState:
    """Possibly unnormalised nuclear density matrix in the Overhauser eigenbasis."""

    matrix: np.ndarray
    basis: Optional[SpectralDecomposition] = field(default=None, compare=False, repr=False)
    trace: float = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace", float(np.real(np.trace(m))))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def normalized(self) -> "NuclearState":
        return NuclearState(self.matrix / self.trace, self.basis)

    @classmethod
    def maximally_mixed(cls, dim: int, basis=None) -> "NuclearState":
        return cls(np.eye(dim) / dim, basis)


@dataclass(frozen=True)
class MeasurementChannel:
    """Diagonal Kraus family ``{sqrt(w_s) diag(coeffs_c[s])}`` for c in {V, H}.

    ``coeffs_v[s, i]`` is the cross-polarised amplitude of Overhauser
    eigenstate ``i`` under resonance shift ``shifts[s]``.
    """

    deltas: np.ndarray
    coeffs_v: np.ndarray
    coeffs_h: np.ndarray
    weights: np.ndarray
    shifts: np.ndarray
    optics: Optional[OpticalParams] = field(default=None, compare=False)
    noise: Optional[NoiseSpec] = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return len(self.deltas)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @property
    def m_v(self) -> np.ndarray:
        self._require_single("m_v")
        return self.coeffs_v[0]

    @property
    def m_h(self) -> np.ndarray:
        self._require_single("m_h")
        return self.coeffs_h[0]

    @property
    def o_v(self) -> np.ndarray:
        return self.weights @ np.abs(self.coeffs_v) ** 2

    @property
    def o_h(self) -> np.ndarray:
        return self.weights @ np.abs(self.coeffs_h) ** 2

    def _require_single(self, name):
        if self.n_nodes != 1:
            raise AttributeError(f"{name} is undefined for a channel with {self.n_nodes} Kraus nodes")

    def multiplier(self, c: str) -> np.ndarray:
        """Schur multiplier ``K_c`` of the selective operation for outcome ``c``."""
        coeffs = {"V": self.coeffs_v, "H": self.coeffs_h}[c]
        return np.einsum("s,si,sj->ij", self.weights, coeffs, coeffs.conj())

    def coherence_matrix(self) -> np.ndarray:
        """Matrix of factors ``r_dd'`` applied by the non-selective operation.

        The diagonal is set to exactly one (completeness holds analytically),
        so populations in the Overhauser basis are untouched bit for bit.
        """
        r = self.multiplier("V") + self.multiplier("H")
        np.fill_diagonal(r, 1.0)
        return r


def _coefficients(p: OpticalParams, deltas: np.ndarray, shifts: np.ndarray):
    c = channel_coefficients(p, deltas[None, :] + shifts[:, None])
    return np.atleast_2d(c.r_cr), np.atleast_2d(c.r_co)


def _deltas_of(basis) -> np.ndarray:
    if isinstance(basis, SpectralDecomposition):
        return np.asarray(basis.eigenvalues, dtype=float)
    return np.asarray(basis, dtype=float)


def build_channel(p: OpticalParams, basis) -> MeasurementChannel:
    """Noiseless measurement operators ``M_c = sum_d r_c(d) |d><d|``.

    ``basis`` is the Overhauser :class:`SpectralDecomposition` or just its
    eigenvalues.
    """
    deltas = _deltas_of(basis)
    shifts = np.zeros(1)
    v, h = _coefficients(p, deltas, shifts)
    return MeasurementChannel(deltas, v, h, np.ones(1), shifts, optics=p)


def build_noisy_channel(p: OpticalParams, basis, noise: NoiseSpec) -> MeasurementChannel:
    """Kraus family averaged over a Gaussian resonance shift.

    The shift distribution is discretised with ``noise.n_quad`` Gauss-Hermite
    nodes. With ``sigma_s = 0`` and zero mean this is exactly
    :func:`build_channel`. Resolution is limited by the node spacing (about
    ``sigma_s`` over ``sqrt(n_quad)``), so features of the reflection
    spectrum narrower than that are aliased.
    """
    if noise.is_trivial:
        ch = build_channel(p, basis)
        return MeasurementChannel(ch.deltas, ch.coeffs_v, ch.coeffs_h, ch.weights, ch.shifts, p, noise)
    deltas = _deltas_of(basis)
    shifts, weights = noise.quadrature()
    v, h = _coefficients(p, deltas, shifts)
    return MeasurementChannel(deltas, v, h, weights, shifts, optics=p, noise=noise)


def _check_state(ch: MeasurementChannel, rho: NuclearState):
    if rho.dim != ch.dim:
        raise ValueError(f"state dimension {rho.dim} does not match channel dimension {ch.dim}")


def apply_selective(ch: MeasurementChannel, rho: NuclearState, c: str):
    """Unnormalised post-measurement state for outcome ``c`` and its probability."""
    _check_state(ch, rho)
    if not rho.trace > 0:
        raise ValueError("state trace must be positive")
    out = NuclearState(rho.matrix * ch.multiplier(c), rho.basis)
    return out, out.trace / rho.trace


def apply_nonselective(ch: MeasurementChannel, rho: NuclearState) -> NuclearState:
    """Scattering with the polarisation outcome discarded."""
    _check_state(ch, rho)
    return NuclearState(rho.matrix * ch.coherence_matrix(), rho.basis)


# The noisy operation is the same Schur multiplier summed over Kraus nodes.
apply_noisy_nonselective = apply_nonselective


def coherence_factor(ch: MeasurementChannel, i: int, j: int) -> complex:
    """Indistinguishability factor ``r_ij`` of Overhauser eigenstates ``i`` and ``j``."""
    if i == j:
        return 1.0 + 0.0j
    w = ch.weights
    return complex(
        np.sum(w * (ch.coeffs_v[:, i] * ch.coeffs_v[:, j].conj() + ch.coeffs_h[:, i] * ch.coeffs_h[:, j].conj()))
    )


def averaged_povm_v(p: OpticalParams, deltas, noise: Optional[NoiseSpec]) -> np.ndarray:
    """Cross-polarised POVM diagonal averaged over the exact Gaussian shift density.

    ``|r_cr|^2`` is a unit-height Lorentzian in the detuning
    ``x = omega_0 + delta + s - omega_L``, centred at ``Re(g^2/alpha)`` with
    half-width ``g^2 |Im alpha| / |alpha|^2`` where
    ``alpha = omega_c - omega_L - i pi kappa``. Its Gaussian average is
    therefore a Voigt profile, evaluated in closed form.
    """
    from scipy.special import voigt_profile

    deltas = np.asarray(deltas, dtype=float)
    if noise is None or noise.sigma_s == 0.0:
        shift = 0.0 if noise is None else noise.mean_s
        return np.abs(channel_coefficients(p, deltas + shift).r_cr) ** 2
    alpha = complex(p.omega_c - p.omega_L, -np.pi * p.kappa)
    centre = (p.g**2 / alpha).real
    gamma = p.g**2 * abs(alpha.imag) / abs(alpha) ** 2
    x = p.omega_0 + deltas + noise.mean_s - p.omega_L - centre
    return np.pi * gamma * voigt_profile(x, noise.sigma_s, gamma)
