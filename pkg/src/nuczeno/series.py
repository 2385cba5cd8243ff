"""Result container for correlation functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CorrelationSeries:
    """``g2`` sampled on ``taus`` (ns) with pointwise standard errors.

    ``meta`` carries run parameters and the normalisation constants
    ``p_v`` (one ``Tr(O_V rho_N)`` per bath draw).
    """

    taus: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        err = np.asarray(self.stderr, dtype=float)
        if not (taus.shape == g2.shape == err.shape):
            raise ValueError("taus, g2 and stderr must have equal lengths")
        if not np.all(np.isfinite(g2)):
            raise ValueError("g2 contains non-finite values")
        if np.any(err < 0):
            raise ValueError("stderr must be non-negative")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "g2", g2)
        object.__setattr__(self, "stderr", err)

    def __len__(self):
        return len(self.taus)


def half_decay_time(taus, g2, floor: float = 1.0) -> float:
    """First delay at which ``g2 - floor`` falls to half its initial value.

    Linear interpolation between grid points; ``inf`` if never reached.
    """
    taus = np.asarray(taus, dtype=float)
    y = np.asarray(g2, dtype=float) - floor
    target = 0.5 * y[0]
    below = np.flatnonzero(y <= target)
    if len(below) == 0:
        return float("inf")
    k = below[0]
    if k == 0:
        return float(taus[0])
    t0, t1, y0, y1 = taus[k - 1], taus[k], y[k - 1], y[k]
    return float(t0 + (target - y0) * (t1 - t0) / (y1 - y0))
