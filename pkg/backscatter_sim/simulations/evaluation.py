"""ΔSNR per unit SNR^illum for a fixed tag and many candidate reader positions.

The adaptive precoders (ZF, CC) are rebuilt for every reader position, MRT
and REF only depend on the tag. ΔSNR is linear in SNR^illum, so one profile
serves every illumination level of a sweep.
"""

from typing import Optional, Tuple

import numpy as np

from backscatter_sim.models.channel import ChannelVector
from backscatter_sim.models.metrics import delta_snr_from_projections
from backscatter_sim.models.precoding import (
    BasisGram,
    Precoder,
    cc_grid_gains,
    mrt_precoder,
    zf_gains,
)
from backscatter_sim.schemas.config import CcGrid, ModulationFactor, PrecoderKind


def adaptive_gains(
    kind: PrecoderKind,
    h_st: ChannelVector,
    h_sr: np.ndarray,
    h_tr: np.ndarray,
    cc_grid: CcGrid,
    mrt: Optional[Precoder] = None,
    modulation: Optional[ModulationFactor] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(gains, ill_conditioned)`` for reader channels ``h_sr`` (N, K).

    Reader positions where the ZF basis is rejected get a zero gain and are
    flagged; REF and MRT never flag. ``modulation`` defaults to γ^ON = 1, γ^OFF = 0.
    """
    h_sr = np.atleast_2d(h_sr)
    h_tr = np.asarray(h_tr)
    no_flags = np.zeros(h_sr.shape[0], dtype=bool)

    if kind is PrecoderKind.REF:
        return delta_snr_from_projections(h_tr, h_st[0], h_sr[:, 0], modulation), no_flags
    if kind is PrecoderKind.MRT:
        precoder = mrt if mrt is not None else mrt_precoder(h_st)
        return delta_snr_from_projections(h_tr, precoder.apply(h_st), precoder.apply(h_sr), modulation), no_flags

    gram = BasisGram.from_channels(h_st, h_sr)
    if kind is PrecoderKind.ZF:
        return zf_gains(gram, h_tr, modulation), gram.ill_conditioned
    table = cc_grid_gains(gram, h_tr, cc_grid.phases, cc_grid.allocations, modulation)
    return table.max(axis=(-2, -1)), gram.ill_conditioned
