"""Random nuclear-bath realisations."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..spin_bath import SpinBathSpec


def draw_random_bath(
    n: int,
    mean_a: float,
    sd_a: float,
    mean_w: float,
    sd_w: float,
    omega_e: float,
    rng: np.random.Generator,
    flip_flop: bool = True,
    truncate: bool = False,
) -> SpinBathSpec:
    """Independent Gaussian couplings and Zeeman energies for ``n`` spins.

    Negative draws are kept unless ``truncate`` is set, in which case each
    value is redrawn until it is non-negative. All couplings are drawn first,
    then all Zeeman energies.
    """
    if int(n) != n or n < 1:
        raise ConfigError("must be a positive integer", key="ensemble.n_spins")
    if sd_a < 0 or sd_w < 0:
        raise ConfigError("standard deviations must be non-negative", key="ensemble")
    a = _draw(rng, mean_a, sd_a, int(n), truncate)
    w = _draw(rng, mean_w, sd_w, int(n), truncate)
    return SpinBathSpec(tuple(a), tuple(w), electron_zeeman=omega_e, flip_flop=flip_flop)


def _draw(rng, mean, sd, n, truncate):
    x = rng.normal(mean, sd, size=n)
    if truncate:
        if mean < 0 and sd == 0:
            raise ConfigError("cannot truncate a negative constant", key="ensemble.truncate")
        bad = x < 0
        while np.any(bad):
            x[bad] = rng.normal(mean, sd, size=int(bad.sum()))
            bad = x < 0
    return x
