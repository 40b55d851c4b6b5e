"""dB/linear conversions and the BER ↔ ΔSNR threshold relation.

All computations inside the simulator are linear; dB only appears at the
configuration and output boundaries.
"""

import numpy as np
from scipy.special import erfcinv


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """10·log10 of a linear ratio; zero maps to -inf without a warning"""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(value, dtype=float))


def delta_snr_target_for_ber(ber_target: float) -> float:
    """Linear ΔSNR target such that ½·erfc(ΔSNR) equals the BER target"""
    if not 0.0 < ber_target < 0.5:
        raise ValueError(f"BER target must lie in (0, 0.5), got {ber_target}")
    return float(erfcinv(2.0 * ber_target))
