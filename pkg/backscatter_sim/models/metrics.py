"""Reader SNR, ΔSNR, energy-detector BER and legacy-device SNR.

Everything here is linear. ``SNR^illum`` absorbs transmit power, noise and
the large-scale gain, so channels enter only through their small-scale
coefficients.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np
from scipy.special import erfc

from backscatter_sim.core.errors import InvalidParameterError, UnsupportedModulationError
from backscatter_sim.models.channel import ChannelVector, equivalent_channel
from backscatter_sim.schemas.config import ModulationFactor, QosTarget


if TYPE_CHECKING:
    from backscatter_sim.models.precoding import Precoder


@dataclass(frozen=True, eq=False)
class LinkSample:
    h_st: ChannelVector
    h_sr: ChannelVector
    h_tr: complex
    snr_illum: float
    modulation: ModulationFactor = field(default_factory=ModulationFactor)

    def __post_init__(self):
        if np.shape(self.h_st) != np.shape(self.h_sr):
            raise InvalidParameterError(
                f"h_st {np.shape(self.h_st)} and h_sr {np.shape(self.h_sr)} differ in length"
            )
        if not self.snr_illum > 0:
            raise InvalidParameterError(f"SNR^illum must be positive, got {self.snr_illum}")


def received_snr(sample: LinkSample, gamma: float, p: "Precoder") -> float:
    """|(γ·h^TR·h^ST + h^SR)·p|²·SNR^illum"""
    h_eq = equivalent_channel(gamma, sample.h_tr, sample.h_st, sample.h_sr)
    return float(np.abs(p.apply(h_eq)) ** 2 * sample.snr_illum)


def _gammas(modulation: Optional[ModulationFactor]) -> Tuple[float, float]:
    if modulation is None:
        return 1.0, 0.0
    return modulation.gamma_on, modulation.gamma_off


def delta_snr_from_projections(h_tr, st_projection, sr_projection, modulation: Optional[ModulationFactor] = None):
    """|Re[(γ^ON - γ^OFF)·x·((γ^ON + γ^OFF)·x + 2·h^SR·p)*]| with x = h^TR·(h^ST·p).

    SNR^ON - SNR^OFF per unit SNR^illum written as a difference of squares;
    the two received powers are never formed. Broadcasts over arrays.
    """
    gamma_on, gamma_off = _gammas(modulation)
    backscatter = np.asarray(h_tr) * np.asarray(st_projection)
    swing = (gamma_on - gamma_off) * backscatter
    level = (gamma_on + gamma_off) * backscatter + 2.0 * np.asarray(sr_projection)
    return np.abs((swing * np.conj(level)).real)


def delta_snr(sample: LinkSample, p: "Precoder") -> float:
    """|h^TR·(h^ST·p)|² + 2·Re(h^TR·(h^ST·p)·(h^SR·p)*), taken in absolute value, times SNR^illum"""
    if not sample.modulation.is_default:
        raise UnsupportedModulationError(
            "the closed-form ΔSNR assumes γ^ON = 1 and γ^OFF = 0; use delta_snr_general"
        )
    gain = delta_snr_from_projections(sample.h_tr, p.apply(sample.h_st), p.apply(sample.h_sr))
    return float(gain * sample.snr_illum)


def delta_snr_general(sample: LinkSample, p: "Precoder") -> float:
    """|SNR^ON - SNR^OFF| for arbitrary modulation factors"""
    gain = delta_snr_from_projections(sample.h_tr, p.apply(sample.h_st), p.apply(sample.h_sr), sample.modulation)
    return float(gain * sample.snr_illum)


def ber_from_delta(delta):
    """½·erfc(ΔSNR) with ΔSNR linear"""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise InvalidParameterError("ΔSNR cannot be negative")
    ber = 0.5 * erfc(delta)
    return float(ber) if ber.ndim == 0 else ber


def qos_met(delta, target: QosTarget):
    """ΔSNR > ΔSNR^target, strictly"""
    met = np.asarray(delta) > target.delta_snr_target
    return bool(met) if met.ndim == 0 else met


def legacy_snr(h_d: ChannelVector, p: "Precoder", snr_illum: float) -> float:
    """|h^D·p|²·SNR^illum at a device that is neither tag nor reader"""
    return float(np.abs(p.apply(h_d)) ** 2 * snr_illum)


# Closed forms per precoder kind, expressed per unit SNR^illum


def mrt_closed_form(
    h_tr,
    h_st: ChannelVector,
    h_sr: ChannelVector,
    snr_illum: float = 1.0,
    modulation: Optional[ModulationFactor] = None,
):
    """|(γ^ON² - γ^OFF²)·|h^TR|²·‖h^ST‖² + 2·(γ^ON - γ^OFF)·Re(h^TR·(h^SR·(h^ST)†)*)|·SNR^illum

    The defaults γ^ON = 1, γ^OFF = 0 give the plain MRT expression.
    """
    gamma_on, gamma_off = _gammas(modulation)
    h_st = np.asarray(h_st)
    h_sr = np.asarray(h_sr)
    st_power = np.sum(np.abs(h_st) ** 2, axis=-1)
    coupling = np.sum(h_sr * np.conj(h_st), axis=-1)
    h_tr = np.asarray(h_tr)
    power_swing = (gamma_on - gamma_off) * (gamma_on + gamma_off)
    cross = (gamma_on - gamma_off) * (h_tr * np.conj(coupling)).real
    return np.abs(power_swing * np.abs(h_tr) ** 2 * st_power + 2.0 * cross) * snr_illum


def zf_closed_form(h_tr, q1_power, snr_illum: float = 1.0, modulation: Optional[ModulationFactor] = None):
    """|γ^ON² - γ^OFF²|·|h^TR|²/‖q1‖²·SNR^illum; the direct path is nulled so no cross term survives"""
    gamma_on, gamma_off = _gammas(modulation)
    power_swing = abs((gamma_on - gamma_off) * (gamma_on + gamma_off))
    return power_swing * np.abs(np.asarray(h_tr)) ** 2 / np.asarray(q1_power) * snr_illum


def cc_closed_form(
    h_tr,
    alpha_squared,
    delta,
    phi,
    snr_illum: float = 1.0,
    modulation: Optional[ModulationFactor] = None,
):
    """α²·| (γ^ON² - γ^OFF²)·δ²·|h^TR|²
    + 2·(γ^ON - γ^OFF)·δ·√(1-δ²)·Re(h^TR·e^{-jφ}) |·SNR^illum
    """
    gamma_on, gamma_off = _gammas(modulation)
    h_tr = np.asarray(h_tr)
    delta = np.asarray(delta, dtype=float)
    complement = np.sqrt(1.0 - delta**2)
    cross = (h_tr * np.exp(-1j * np.asarray(phi, dtype=float))).real
    power_swing = (gamma_on - gamma_off) * (gamma_on + gamma_off)
    value = power_swing * delta**2 * np.abs(h_tr) ** 2 + 2.0 * (gamma_on - gamma_off) * delta * complement * cross
    return alpha_squared * np.abs(value) * snr_illum
