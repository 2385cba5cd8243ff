"""Monte-Carlo estimation of the cross-polarised intensity correlation g2(tau).

Scattering events form a homogeneous Poisson process of rate ``rate``. The
nuclear state is propagated exactly between events and the measurement
channel is applied at each event. All work is done sector by sector in the
H_N eigenbasis (both H_N and the Overhauser operator conserve total I^z).

Estimators
----------
``nonselective``
    Outcomes are summed over. With ``method="density"`` each trajectory
    carries the full density matrix; ``method="wavefunction"`` unravels the
    same channel into pure states (an unbiased estimator of the same mean,
    n^2 instead of n^3 per event).
``selective``
    Long detection records are simulated with sampled polarisation outcomes;
    g2 is the normalised histogram of V-V pair delays.

Randomness: every trajectory owns a Philox stream keyed by
``(seed, bath_index, trajectory_index)``, and per-trajectory curves are
reduced in ascending index order, so output does not depend on ``threads``.
"""
from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .constants import HBAR
from .errors import ConfigError, UndefinedCorrelationError
from .measurement import NoiseMode, NoiseSpec, averaged_povm_v, build_noisy_channel
from .optics import OpticalParams, channel_coefficients
from .series import CorrelationSeries
from .spin_bath import SpinBathSpec, nuclear_hamiltonian, overhauser_operator, sector_labels
from .zeno import ScatteringSchedule

_TRAJ_KEY = 1
_BATH_KEY = 2


class Estimator(str, enum.Enum):
    NONSELECTIVE = "nonselective"
    SELECTIVE = "selective"


class Method(str, enum.Enum):
    DENSITY = "density"
    WAVEFUNCTION = "wavefunction"


class Normalization(str, enum.Enum):
    POOLED = "pooled"
    PER_BATH = "per_bath"


@dataclass(frozen=True)
class BathEnsemble:
    """Gaussian distribution of random baths (all energies in ueV)."""

    n_spins: int = 8
    mean_a: float = 0.5
    sd_a: float = 0.25
    mean_w: float = 0.5
    sd_w: float = 0.01
    electron_zeeman: float = 40.0
    flip_flop: bool = True
    truncate: bool = False

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ConfigError("must be a positive integer", key="ensemble.n_spins")
        if self.sd_a < 0:
            raise ConfigError("must be non-negative", key="ensemble.sd_a")
        if self.sd_w < 0:
            raise ConfigError("must be non-negative", key="ensemble.sd_w")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one g2 run.

    ``bath`` is used when ``ensemble`` is None; otherwise ``n_bath_draws``
    baths are drawn from ``ensemble``. ``record_factor`` sets the length of
    selective detection records in units of ``tau_max``.
    """

    bath: Optional[SpinBathSpec] = None
    optics: OpticalParams = field(default_factory=OpticalParams)
    noise: Optional[NoiseSpec] = None
    rate: float = 0.0
    tau_max: float = 100.0
    tau_points: int = 101
    n_trajectories: int = 100
    n_bath_draws: int = 1
    seed: int = 0
    estimator: Estimator = Estimator.NONSELECTIVE
    method: Method = Method.DENSITY
    normalization: Normalization = Normalization.POOLED
    ensemble: Optional[BathEnsemble] = None
    record_factor: float = 20.0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if not (np.isfinite(self.rate) and self.rate >= 0):
            raise ConfigError("must be a finite non-negative number", key="run.rate")
        if not self.tau_max > 0:
            raise ConfigError("must be positive", key="run.tau_max")
        if int(self.tau_points) != self.tau_points or self.tau_points < 2:
            raise ConfigError("must be an integer >= 2", key="run.tau_points")
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise ConfigError("must be a positive integer", key="run.n_trajectories")
        if int(self.n_bath_draws) != self.n_bath_draws or self.n_bath_draws < 1:
            raise ConfigError("must be a positive integer", key="run.n_bath_draws")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", key="run.seed")
        if int(self.threads) < 1:
            raise ConfigError("must be a positive integer", key="run.threads")
        if not self.record_factor > 1:
            raise ConfigError("must exceed 1", key="run.record_factor")
        if self.bath is None and self.ensemble is None:
            raise ConfigError("either a bath or an ensemble is required", key="bath")

    @property
    def taus(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, int(self.tau_points))


# ----------------------------------------------------------------- bath model


@dataclass(frozen=True)
class SectorBlock:
    """One magnetisation sector, expressed in its Overhauser eigenbasis.

    ``w`` holds H_N eigenvectors (columns) and ``omega`` the eigenvalues in
    rad/ns. ``o_v`` is the cross-polarised POVM diagonal used for the first
    and last detection and ``rho`` the steady-state populations.
    """

    deltas: np.ndarray
    w: np.ndarray
    omega: np.ndarray
    o_v: np.ndarray
    rho: np.ndarray
    rmat: np.ndarray


@dataclass(frozen=True)
class PreparedBath:
    spec: SpinBathSpec
    blocks: tuple
    p_v: float
    shift_nodes: np.ndarray
    shift_weights: np.ndarray


def prepare_bath(spec: SpinBathSpec, optics: OpticalParams, noise: Optional[NoiseSpec] = None) -> PreparedBath:
    """Diagonalise a bath sector by sector and attach the measurement channel.

    The steady state is maximally mixed. In ``per_event_sample`` noise mode the
    endpoint POVM uses the exact Gaussian average; otherwise it is the
    quadrature (or noiseless) channel's own ``O_V``.
    """
    noise = noise or NoiseSpec()
    delta_op = overhauser_operator(spec)
    h_op = nuclear_hamiltonian(spec)
    labels = sector_labels(spec.n_spins)
    blocks = []
    for s in np.unique(labels):
        idx = np.flatnonzero(labels == s)
        deltas, v = np.linalg.eigh(delta_op[np.ix_(idx, idx)])
        h = v.T @ h_op[np.ix_(idx, idx)] @ v
        e, w = np.linalg.eigh(0.5 * (h + h.T))
        ch = build_noisy_channel(optics, deltas, noise)
        if noise.mode is NoiseMode.PER_EVENT_SAMPLE and not noise.is_trivial:
            o_v = averaged_povm_v(optics, deltas, noise)
        else:
            o_v = ch.o_v
        blocks.append(
            SectorBlock(
                deltas=deltas,
                w=np.ascontiguousarray(w.astype(complex)),
                omega=e / HBAR,
                o_v=o_v,
                rho=np.full(len(idx), 1.0 / spec.dim),
                rmat=np.ascontiguousarray(ch.coherence_matrix()),
            )
        )
    p_v = float(sum(np.sum(b.o_v * b.rho) for b in blocks))
    nodes, weights = noise.quadrature()
    return PreparedBath(spec, tuple(blocks), p_v, nodes, weights)


def _block_initial_density(b: SectorBlock):
    wh = b.w.conj().T
    sigma0 = wh @ ((b.o_v * b.rho)[:, None] * b.w)
    o_h = wh @ (b.o_v[:, None] * b.w)
    return np.ascontiguousarray(sigma0), np.ascontiguousarray(o_h)


def exact_numerator(bath: PreparedBath, taus) -> np.ndarray:
    """``Tr(O_V U_tau varrho)`` without intermediate events."""
    taus = np.asarray(taus, dtype=float)
    out = np.zeros(len(taus))
    for b in bath.blocks:
        sigma0, o_h = _block_initial_density(b)
        m = o_h.conj() * sigma0
        ph = np.exp(-1j * np.outer(taus, b.omega))
        out += np.real(np.einsum("ta,ab,tb->t", ph, m, ph.conj()))
    return out


# --------------------------------------------------------------------- random


def trajectory_rng(seed: int, bath_index: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_TRAJ_KEY, int(bath_index), int(traj_index)))
    return np.random.Generator(np.random.Philox(ss))


def bath_rng(seed: int, bath_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_BATH_KEY, int(bath_index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_event_times(rate: float, tau_max: float, rng: np.random.Generator) -> ScatteringSchedule:
    """Homogeneous Poisson scattering times on ``(0, tau_max)``."""
    if not rate >= 0:
        raise ValueError("rate must be non-negative")
    if rate == 0:
        return ScatteringSchedule(np.empty(0), tau_max)
    mean = rate * tau_max
    chunk = int(mean + 6 * np.sqrt(mean) + 16)
    times = np.cumsum(rng.exponential(1.0 / rate, size=chunk))
    while times[-1] < tau_max:
        more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        times = np.concatenate([times, more])
    return ScatteringSchedule(times[times < tau_max], tau_max)


def _event_shifts(bath: PreparedBath, noise: Optional[NoiseSpec], n: int, rng) -> np.ndarray:
    if noise is None or noise.is_trivial:
        return np.zeros(n)
    if noise.mode is NoiseMode.PER_EVENT_SAMPLE:
        return rng.normal(noise.mean_s, noise.sigma_s, size=n)
    return bath.shift_nodes[rng.choice(len(bath.shift_nodes), size=n, p=bath.shift_weights)]


# ---------------------------------------------------------------- trajectories


def _density_trajectory(bath, cfg, taus, rng):
    events = sample_event_times(cfg.rate, taus[-1], rng).times
    noise = cfg.noise
    per_event = noise is not None and not noise.is_trivial and noise.mode is NoiseMode.PER_EVENT_SAMPLE
    shifts = _event_shifts(bath, noise, len(events), rng) if per_event else None
    optics = K.optics_tuple(cfg.optics)
    out = np.zeros(len(taus))
    for b in bath.blocks:
        sigma0, o_h = _block_initial_density(b)
        if per_event:
            K.density_noisy_traj(b.w, b.omega, o_h, sigma0, b.deltas, shifts, optics, events, taus, out)
        else:
            K.density_traj(b.w, b.omega, o_h, sigma0, b.rmat, events, taus, out)
    return out


def _pick_basis_state(bath, weights_of, rng):
    """Sample (block, index) with probability proportional to ``weights_of(block)``."""
    flat = np.concatenate([weights_of(b) for b in bath.blocks])
    total = flat.sum()
    k = int(np.searchsorted(np.cumsum(flat), rng.random() * total, side="right"))
    k = min(k, len(flat) - 1)
    for b in bath.blocks:
        if k < len(b.deltas):
            return b, k, total
        k -= len(b.deltas)
    raise AssertionError("unreachable")


def _wave_trajectory(bath, cfg, taus, rng):
    events = sample_event_times(cfg.rate, taus[-1], rng).times
    uniforms = rng.random(len(events))
    shifts = _event_shifts(bath, cfg.noise, len(events), rng)
    b, k, weight = _pick_basis_state(bath, lambda blk: blk.o_v * blk.rho, rng)
    phi0 = np.ascontiguousarray(b.w[k].conj())
    out = np.zeros(len(taus))
    K.wave_traj(b.w, b.omega, b.o_v, phi0, b.deltas, shifts, K.optics_tuple(cfg.optics), events, uniforms, taus, out)
    return out * weight


def _selective_trajectory(bath, cfg, edges, rng):
    t_rec = cfg.record_factor * cfg.tau_max
    events = sample_event_times(cfg.rate, t_rec, rng).times
    uniforms = rng.random(len(events))
    shifts = _event_shifts(bath, cfg.noise, len(events), rng)
    b, k, _ = _pick_basis_state(bath, lambda blk: blk.rho, rng)
    phi0 = np.ascontiguousarray(b.w[k].conj())
    flags = np.zeros(len(events), dtype=np.int64)
    K.record_traj(b.w, b.omega, phi0, b.deltas, shifts, K.optics_tuple(cfg.optics), events, uniforms, flags)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    K.pair_histogram(np.ascontiguousarray(events[flags == 1]), edges, counts)
    return counts.astype(float)


def _run_many(fn, jobs, threads):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _bath_curves(bath: PreparedBath, cfg: RunConfig, bath_index: int) -> np.ndarray:
    """Per-trajectory curves (n_trajectories, n_points) for one prepared bath."""
    n = int(cfg.n_trajectories)
    if cfg.estimator is Estimator.SELECTIVE:
        edges = cfg.taus
        if cfg.rate == 0:
            raise ConfigError("the selective estimator needs a positive rate", key="run.rate")

        def job(t):
            return _selective_trajectory(bath, cfg, edges, trajectory_rng(cfg.seed, bath_index, t))

        counts = np.array(_run_many(job, range(n), cfg.threads))
        mids = 0.5 * (edges[1:] + edges[:-1])
        width = np.diff(edges)
        t_rec = cfg.record_factor * cfg.tau_max
        # expected pairs per bin: rate^2 * width * (T - tau) * numerator(tau)
        return counts / (cfg.rate**2 * width * (t_rec - mids))
    taus = cfg.taus
    if cfg.rate == 0:
        return np.tile(exact_numerator(bath, taus), (n, 1))
    if cfg.rate * cfg.tau_max / (cfg.tau_points - 1) > 1000:
        warnings.warn("more than 1000 expected events per grid step; run will be slow", RuntimeWarning)
    traj = _wave_trajectory if cfg.method is Method.WAVEFUNCTION else _density_trajectory

    def job(t):
        return traj(bath, cfg, taus, trajectory_rng(cfg.seed, bath_index, t))

    return np.array(_run_many(job, range(n), cfg.threads))


def _check_p_v(p_v):
    if not p_v > 0:
        raise UndefinedCorrelationError("Tr(O_V rho_N) vanishes; no cross-polarised scattering")


def _series(cfg: RunConfig, curves_per_bath, p_vs, baths) -> CorrelationSeries:
    if cfg.estimator is Estimator.SELECTIVE:
        edges = cfg.taus
        taus = 0.5 * (edges[1:] + edges[:-1])
    else:
        taus = cfg.taus
    p_vs = np.asarray(p_vs, dtype=float)
    n_traj = curves_per_bath[0].shape[0]
    if cfg.normalization is Normalization.POOLED:
        pooled = np.concatenate(curves_per_bath, axis=0)
        denom = np.mean(p_vs) ** 2
        _check_p_v(np.mean(p_vs))
        g2 = _ordered_mean(pooled) / denom
        err = _stderr(pooled) / denom
    else:
        for p in p_vs:
            _check_p_v(p)
        per = [_ordered_mean(c) / p**2 for c, p in zip(curves_per_bath, p_vs)]
        errs = [_stderr(c) / p**2 for c, p in zip(curves_per_bath, p_vs)]
        g2 = _ordered_mean(np.array(per))
        err = np.sqrt(np.sum(np.square(errs), axis=0)) / len(per)
    deterministic = cfg.rate == 0 and cfg.estimator is Estimator.NONSELECTIVE
    if deterministic and len(p_vs) == 1:
        err = np.zeros_like(g2)
    meta = {
        "rate": float(cfg.rate),
        "seed": int(cfg.seed),
        "n_trajectories": int(n_traj),
        "n_bath_draws": len(p_vs),
        "p_v": [float(p) for p in p_vs],
        "estimator": cfg.estimator.value,
        "method": cfg.method.value,
        "normalization": cfg.normalization.value,
        "backend": K.BACKEND,
        "baths": [{"couplings": list(b.couplings), "zeeman": list(b.zeeman)} for b in baths],
    }
    return CorrelationSeries(taus, g2, err, meta)


def _ordered_mean(x: np.ndarray) -> np.ndarray:
    # sequential sum in index order, independent of how the rows were produced
    acc = np.zeros(x.shape[1:])
    for row in x:
        acc = acc + row
    return acc / x.shape[0]


def _stderr(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    if n < 2:
        return np.zeros(x.shape[1:])
    mean = _ordered_mean(x)
    var = _ordered_mean((x - mean) ** 2) * n / (n - 1)
    return np.sqrt(var / n)


def _estimate(cfg: RunConfig, baths) -> CorrelationSeries:
    curves, p_vs = [], []
    for i, spec in enumerate(baths):
        prepared = prepare_bath(spec, cfg.optics, cfg.noise)
        p_vs.append(prepared.p_v)
        if cfg.normalization is Normalization.PER_BATH:
            _check_p_v(prepared.p_v)
        curves.append(_bath_curves(prepared, cfg, i))
    return _series(cfg, curves, p_vs, baths)


def g2_nonselective(cfg: RunConfig) -> CorrelationSeries:
    """Outcome-averaged g2 for ``cfg.bath`` (Monte-Carlo over schedules)."""
    return _estimate(replace(cfg, estimator=Estimator.NONSELECTIVE), [_single_bath(cfg)])


def g2_selective(cfg: RunConfig) -> CorrelationSeries:
    """g2 from simulated detection records; grid points are bin centres."""
    return _estimate(replace(cfg, estimator=Estimator.SELECTIVE), [_single_bath(cfg)])


def _single_bath(cfg: RunConfig) -> SpinBathSpec:
    if cfg.bath is None:
        raise ConfigError("a fixed bath is required for a single-bath estimate", key="bath")
    return cfg.bath


def draw_baths(cfg: RunConfig):
    """Bath specs for every draw; a fixed ``cfg.bath`` is reused if no ensemble is set."""
    if cfg.ensemble is None:
        return [_single_bath(cfg)] * int(cfg.n_bath_draws)
    from .cli_io.baths import draw_random_bath

    e = cfg.ensemble
    return [
        draw_random_bath(
            e.n_spins, e.mean_a, e.sd_a, e.mean_w, e.sd_w, e.electron_zeeman, bath_rng(cfg.seed, i),
            flip_flop=e.flip_flop, truncate=e.truncate,
        )
        for i in range(int(cfg.n_bath_draws))
    ]


def ensemble_g2(cfg: RunConfig) -> CorrelationSeries:
    """g2 averaged over bath realisations with the configured estimator."""
    return _estimate(cfg, draw_baths(cfg))


# ------------------------------------------------------------- master equation


def master_equation_g2(
    spec: SpinBathSpec, optics: OpticalParams, noise: Optional[NoiseSpec], rate: float, taus
) -> np.ndarray:
    """Schedule-averaged g2 numerator from the Poisson-averaged master equation.

    Averaging the non-selective evolution over Poisson schedules gives the
    semigroup ``d rho/dt = -i[H, rho] + rate (R o rho - rho)``. Solved by dense
    Liouvillian exponentiation per sector, so only small baths are practical.
    Returns ``g2(tau)``, normalised by ``Tr(O_V rho_N)^2``.
    """
    from scipy.linalg import expm

    bath = prepare_bath(spec, optics, noise)
    _check_p_v(bath.p_v)
    taus = np.asarray(taus, dtype=float)
    out = np.zeros(len(taus))
    for b in bath.blocks:
        n = len(b.deltas)
        h = (b.w * b.omega) @ b.w.conj().T
        eye = np.eye(n)
        # row-major vec: vec(A X B) = kron(A, B^T) vec(X)
        liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T)) + rate * (np.diag(b.rmat.reshape(-1)) - np.eye(n * n))
        x = np.diag(b.o_v * b.rho).astype(complex).reshape(-1)
        t_last = 0.0
        for k, t in enumerate(taus):
            if t != t_last:
                x = expm(liou * (t - t_last)) @ x
                t_last = t
            out[k] += float(np.real(np.sum(b.o_v * np.diag(x.reshape(n, n)))))
    return out / bath.p_v**2
