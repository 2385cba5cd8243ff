"""Measurement-induced (Zeno) dynamics of a nuclear spin bath seen through cavity-reflected photons.

Energies are in ueV, times in ns, rates in 1/ns.
"""

__version__ = "0.1.0"

from .constants import HBAR, PLANCK, mhz_to_uev
from .errors import (
    ConfigError,
    NoQuadraticDecayError,
    NuczenoError,
    SingularParametersError,
    UndefinedCorrelationError,
)
from .measurement import (
    MeasurementChannel,
    NoiseMode,
    NoiseSpec,
    NuclearState,
    apply_noisy_nonselective,
    apply_nonselective,
    apply_selective,
    build_channel,
    build_noisy_channel,
    coherence_factor,
)
from .optics import (
    ChannelCoefficients,
    OpticalParams,
    ValidityReport,
    channel_coefficients,
    empty_cavity_reflectivity,
    phase_shift,
    povm_weight,
    reflectivity,
    validity_report,
)
from .series import CorrelationSeries, half_decay_time
from .spin_bath import (
    SpectralDecomposition,
    SpinBathSpec,
    SpinConvention,
    embed_spin_operator,
    nuclear_hamiltonian,
    overhauser_basis,
    overhauser_operator,
    propagator,
    spectral,
)
from .trajectory import (
    BathEnsemble,
    RunConfig,
    ensemble_g2,
    g2_nonselective,
    g2_selective,
    master_equation_g2,
    sample_event_times,
)
from .zeno import (
    ScatteringSchedule,
    ZenoContext,
    exclusive_probability_exact,
    exclusive_probability_perturbative,
    low_power_g2,
    sawtooth_trajectory,
    slope_function,
    zeno_time,
)
