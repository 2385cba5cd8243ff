"""Physical constants in the package unit system (energies in ueV, times in ns)."""

#: Reduced Planck constant in ueV*ns.
HBAR = 0.6582119569

#: Planck constant in ueV*ns (h = 2*pi*hbar); h * 1 GHz = 4.1357 ueV.
PLANCK = 2.0 * 3.141592653589793 * HBAR


def mhz_to_uev(f_mhz):
    """Photon energy h*f in ueV for a frequency in MHz."""
    return PLANCK * f_mhz * 1e-3
