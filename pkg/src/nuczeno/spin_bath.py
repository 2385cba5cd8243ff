"""Nuclear spin bath: Overhauser operator, nuclear Hamiltonian and propagators.

Basis ordering is site-0-major: site 0 is the leftmost Kronecker factor, so
for basis index ``i`` the spin on site ``k`` is read from bit ``n - 1 - k``
of ``i`` (bit value 0 = up, 1 = down). Single-site operators use the Pauli
convention, ``I^z = diag(1, -1)`` and ``I^+ = |up><down|``.

Both the Overhauser operator and the nuclear Hamiltonian conserve the number
of down spins, so every operator built here is block diagonal in the
magnetisation sectors returned by :func:`sector_labels`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import HBAR
from .errors import ConfigError

_HERMITIAN_TOL = 1e-10


class SpinConvention(str, enum.Enum):
    PAULI = "pauli"


@dataclass(frozen=True)
class SpinBathSpec:
    """Couplings and Zeeman energies of ``n_spins`` nuclear spins (all in ueV).

    ``electron_zeeman`` is the electron Zeeman energy that suppresses the
    electron-mediated flip-flop term; it is only used when ``flip_flop`` is set.
    """

    couplings: tuple
    zeeman: tuple
    electron_zeeman: float = 40.0
    flip_flop: bool = True
    convention: SpinConvention = SpinConvention.PAULI

    def __post_init__(self):
        couplings = tuple(float(a) for a in np.atleast_1d(self.couplings))
        zeeman = tuple(float(w) for w in np.atleast_1d(self.zeeman))
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "zeeman", zeeman)
        object.__setattr__(self, "electron_zeeman", float(self.electron_zeeman))
        object.__setattr__(self, "convention", SpinConvention(self.convention))
        if len(couplings) == 0:
            raise ConfigError("at least one nuclear spin is required", key="bath.couplings")
        if len(zeeman) != len(couplings):
            raise ConfigError(
                f"expected {len(couplings)} Zeeman energies, got {len(zeeman)}", key="bath.zeeman"
            )
        values = couplings + zeeman + (self.electron_zeeman,)
        if not np.all(np.isfinite(values)):
            raise ConfigError("energies must be finite", key="bath")
        if self.flip_flop and self.electron_zeeman <= 0.0:
            raise ConfigError(
                "must be strictly positive when flip_flop is enabled", key="bath.electron_zeeman"
            )

    @property
    def n_spins(self) -> int:
        return len(self.couplings)

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and eigenvector columns of a Hermitian operator.

    ``sectors`` optionally labels each eigenvector with its magnetisation
    sector (number of down spins) when the decomposition was built blockwise.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sectors: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _site_bits(n_spins: int) -> np.ndarray:
    """Array ``bits[i, k]`` = 1 if site ``k`` is down in basis state ``i``."""
    idx = np.arange(2 ** n_spins)
    shifts = n_spins - 1 - np.arange(n_spins)
    return (idx[:, None] >> shifts[None, :]) & 1


def sector_labels(n_spins: int) -> np.ndarray:
    """Number of down spins for every product basis state."""
    return _site_bits(n_spins).sum(axis=1)


def embed_spin_operator(spec: SpinBathSpec, site: int, which: str) -> np.ndarray:
    """Single-site ``I^z``, ``I^+`` or ``I^-`` tensored with identities elsewhere."""
    n = spec.n_spins
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} spins")
    local = {
        "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
        "plus": np.array([[0.0, 1.0], [0.0, 0.0]]),
        "minus": np.array([[0.0, 0.0], [1.0, 0.0]]),
    }
    if which not in local:
        raise ValueError(f"unknown single-site operator {which!r}")
    left = np.eye(2 ** site)
    right = np.eye(2 ** (n - site - 1))
    return np.kron(np.kron(left, local[which]), right)


def _zeeman_like_diagonal(spec: SpinBathSpec, weights) -> np.ndarray:
    # sum_k weights_k * I_k^z on the product basis
    signs = 1 - 2 * _site_bits(spec.n_spins)
    return signs @ np.asarray(weights, dtype=float)


def overhauser_operator(spec: SpinBathSpec) -> np.ndarray:
    """Overhauser shift operator as a dense real-symmetric matrix.

    ``sum_j A_j I_j^z + (1 / 2 w_e) sum_{m != n} A_m A_n I_m^+ I_n^-``, with the
    double sum running over ordered pairs so the flip-flop part is Hermitian
    term by term.
    """
    n = spec.n_spins
    dim = spec.dim
    out = np.diag(_zeeman_like_diagonal(spec, spec.couplings))
    if spec.flip_flop and n > 1:
        a = np.asarray(spec.couplings)
        scale = 1.0 / (2.0 * spec.electron_zeeman)
        bits = _site_bits(n)
        idx = np.arange(dim)
        for m in range(n):
            for k in range(n):
                if m == k:
                    continue
                # I_m^+ I_k^- : source has m down and k up, target flips both
                src = idx[(bits[:, m] == 1) & (bits[:, k] == 0)]
                dst = src ^ (1 << (n - 1 - m)) ^ (1 << (n - 1 - k))
                out[dst, src] += scale * a[m] * a[k]
    return out


def zeeman_hamiltonian(spec: SpinBathSpec) -> np.ndarray:
    return np.diag(_zeeman_like_diagonal(spec, spec.zeeman))


def nuclear_hamiltonian(spec: SpinBathSpec) -> np.ndarray:
    """``H_N = sum_j w_j I_j^z + Delta / 2`` in ueV."""
    return zeeman_hamiltonian(spec) + 0.5 * overhauser_operator(spec)


def _check_hermitian(op: np.ndarray) -> None:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {op.shape}")
    scale = max(1.0, float(np.max(np.abs(op))) if op.size else 1.0)
    if op.size and np.max(np.abs(op - op.conj().T)) > _HERMITIAN_TOL * scale:
        raise ValueError("operator is not Hermitian")


def spectral(op: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues."""
    _check_hermitian(op)
    evals, evecs = np.linalg.eigh(np.asarray(op))
    return SpectralDecomposition(evals, evecs)


def sector_spectral(op: np.ndarray, sectors: np.ndarray) -> SpectralDecomposition:
    """Blockwise eigendecomposition of an operator that conserves ``sectors``.

    Eigenvectors never mix sectors, even where eigenvalues are degenerate
    across them. The result is sorted ascending like :func:`spectral`.
    """
    _check_hermitian(op)
    op = np.asarray(op)
    dim = op.shape[0]
    off_block = sectors[:, None] != sectors[None, :]
    if np.any(np.abs(op[off_block]) > 0.0):
        raise ValueError("operator couples different magnetisation sectors")
    evals = np.empty(dim)
    evecs = np.zeros((dim, dim), dtype=np.result_type(op.dtype, np.float64))
    labels = np.empty(dim, dtype=int)
    col = 0
    for s in np.unique(sectors):
        idx = np.flatnonzero(sectors == s)
        e, v = np.linalg.eigh(op[np.ix_(idx, idx)])
        cols = slice(col, col + len(idx))
        evals[cols] = e
        evecs[idx, cols] = v
        labels[cols] = s
        col += len(idx)
    order = np.argsort(evals, kind="stable")
    return SpectralDecomposition(evals[order], evecs[:, order], labels[order])


def overhauser_basis(spec: SpinBathSpec) -> SpectralDecomposition:
    """Overhauser eigenbasis, built sector by sector."""
    return sector_spectral(overhauser_operator(spec), sector_labels(spec.n_spins))


def propagator(h: SpectralDecomposition, dt: float) -> np.ndarray:
    """``exp(-i H dt / hbar)`` for ``dt`` in ns and ``H`` in ueV."""
    if dt < 0:
        raise ValueError("propagation time must be non-negative")
    v = h.eigenvectors
    phases = np.exp(-1j * h.eigenvalues * (dt / HBAR))
    return (v * phases) @ v.conj().T
