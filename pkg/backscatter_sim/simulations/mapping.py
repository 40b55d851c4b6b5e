"""Spatial maps over a lattice of candidate points Z.

SNR^OFF, SNR^TR and ΔSNR maps hold the scenario's precoder fixed (it is
matched to the marked tag and reader). F^O maps rebuild the adaptive
precoders at every candidate reader position and every ensemble draw.
Values are stored linear; masked points hold NaN.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from backscatter_sim.core.errors import InvalidParameterError
from backscatter_sim.core.units import linear_to_db
from backscatter_sim.models.channel import (
    PathSet,
    evaluate_channel,
    evaluate_channels,
    friis_channel,
    friis_channels,
)
from backscatter_sim.models.metrics import LinkSample, delta_snr_general, qos_met
from backscatter_sim.models.precoding import (
    Precoder,
    cc_optimize,
    mrt_precoder,
    ref_precoder,
    zf_basis,
    zf_precoder,
)
from backscatter_sim.schemas.config import (
    MapGrid,
    ModulationFactor,
    PhysicalConfig,
    PlanarArray,
    PrecoderKind,
    RunConfig,
)
from backscatter_sim.schemas.results import MapQuantity
from backscatter_sim.simulations.evaluation import adaptive_gains

# Reader positions evaluated together when sweeping the CC grid
PIXEL_CHUNK = 512


@dataclass(eq=False)
class ScalarMap:
    grid: MapGrid
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    quantity: MapQuantity
    kind: PrecoderKind
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def masked(self) -> int:
        return int(np.count_nonzero(np.isnan(self.values)))

    def display_values(self) -> np.ndarray:
        """dB for SNR quantities, percent for F^O; masked points stay NaN"""
        if self.quantity is MapQuantity.F_O:
            return self.values
        return linear_to_db(self.values)


def build_scenario_precoder(config: RunConfig, paths: PathSet, kind: PrecoderKind) -> Precoder:
    """Precoder matched to the configured tag and reader positions"""
    if kind is PrecoderKind.REF:
        return ref_precoder()
    scenario = config.scenario
    h_st = evaluate_channel(paths, config.array, scenario.tag_position, config.physical)
    if kind is PrecoderKind.MRT:
        return mrt_precoder(h_st)
    h_sr = evaluate_channel(paths, config.array, scenario.reader_position, config.physical)
    basis = zf_basis(h_st, h_sr)
    if kind is PrecoderKind.ZF:
        return zf_precoder(basis)
    distance = float(np.hypot(scenario.reader_x - scenario.tag_x, scenario.reader_y - scenario.tag_y))
    h_tr = friis_channel(distance, config.physical)
    precoder, value = cc_optimize(basis, h_tr, scenario.snr_illum, config.cc, config.modulation)
    logger.debug(
        f"CC scenario precoder: φ={precoder.cc_params.phi:.4f} rad, δ={precoder.cc_params.delta:.2f}, "
        f"ΔSNR={float(linear_to_db(value)):.2f} dB"
    )
    return precoder


def _tag_distances(points: np.ndarray, tag_pos, phys: PhysicalConfig) -> Tuple[np.ndarray, np.ndarray]:
    distances = np.hypot(points[:, 0] - tag_pos[0], points[:, 1] - tag_pos[1])
    return distances, distances < phys.wavelength / 2


def _make_map(grid: MapGrid, flat: np.ndarray, quantity: MapQuantity, p_kind: PrecoderKind, **metadata) -> ScalarMap:
    xs, ys = grid.axes()
    values = np.asarray(flat, dtype=float).reshape(len(ys), len(xs))
    return ScalarMap(grid=grid, xs=xs, ys=ys, values=values, quantity=quantity, kind=p_kind, metadata=metadata)


def map_snr_off(
    paths: PathSet, array: PlanarArray, phys: PhysicalConfig, p: Precoder, snr_illum: float, grid: MapGrid
) -> ScalarMap:
    """|h^SZ·p|²·SNR^illum: the illumination alone, tag transparent"""
    channels = evaluate_channels(paths, array, grid.points(), phys)
    values = np.abs(p.apply(channels)) ** 2 * snr_illum
    return _make_map(grid, values, MapQuantity.SNR_OFF, p.kind)


def map_snr_tr(
    paths: PathSet,
    array: PlanarArray,
    phys: PhysicalConfig,
    p: Precoder,
    snr_illum: float,
    tag_pos,
    grid: MapGrid,
) -> ScalarMap:
    """|h^TZ·(h^ST·p)|²·SNR^illum with the Friis link from the tag to Z"""
    points = grid.points()
    st_projection = p.apply(evaluate_channel(paths, array, tag_pos, phys))
    distances, mask = _tag_distances(points, tag_pos, phys)
    h_tz = friis_channels(np.where(mask, 1.0, distances), phys)
    values = np.where(mask, np.nan, np.abs(h_tz * st_projection) ** 2 * snr_illum)
    return _make_map(grid, values, MapQuantity.SNR_TR, p.kind, masked=int(mask.sum()))


def map_delta_snr(
    paths: PathSet,
    array: PlanarArray,
    phys: PhysicalConfig,
    p: Precoder,
    snr_illum: float,
    tag_pos,
    grid: MapGrid,
    modulation: Optional[ModulationFactor] = None,
) -> ScalarMap:
    """ΔSNR with the reader moved to Z and the precoder held fixed.

    Every unmasked pixel is ``delta_snr_general`` of the link sample with
    the reader at that pixel.
    """
    modulation = modulation if modulation is not None else ModulationFactor()
    h_st = evaluate_channel(paths, array, tag_pos, phys)
    points = grid.points()
    values = np.full(points.shape[0], np.nan)
    masked = 0
    for index, (x, y) in enumerate(points):
        distance = float(np.hypot(x - tag_pos[0], y - tag_pos[1]))
        if distance < phys.wavelength / 2:
            masked += 1
            continue
        sample = LinkSample(
            h_st=h_st,
            h_sr=evaluate_channel(paths, array, (x, y), phys),
            h_tr=friis_channel(distance, phys),
            snr_illum=snr_illum,
            modulation=modulation,
        )
        values[index] = delta_snr_general(sample, p)
    return _make_map(grid, values, MapQuantity.DELTA_SNR, p.kind, masked=masked)


def map_f_o(ensemble: Sequence[PathSet], kind: PrecoderKind, config: RunConfig) -> ScalarMap:
    """Percentage of draws meeting the QoS target at each candidate reader position.

    ZF and CC are rebuilt per pixel and per draw; a pixel whose ZF basis is
    rejected counts as QoS not met for that draw.
    """
    if len(ensemble) < 1:
        raise InvalidParameterError("F^O maps need at least one ensemble draw")
    grid = config.grid
    phys = config.physical
    scenario = config.scenario
    points = grid.points()
    distances, mask = _tag_distances(points, scenario.tag_position, phys)
    h_tr = friis_channels(np.where(mask, 1.0, distances), phys)

    met_count = np.zeros(points.shape[0], dtype=np.int64)
    ill_events = 0
    for draw, paths in enumerate(ensemble):
        h_st = evaluate_channel(paths, config.array, scenario.tag_position, phys)
        mrt = mrt_precoder(h_st) if kind is PrecoderKind.MRT else None
        for start in range(0, points.shape[0], PIXEL_CHUNK):
            chunk = slice(start, start + PIXEL_CHUNK)
            h_sr = evaluate_channels(paths, config.array, points[chunk], phys)
            gains, ill = adaptive_gains(kind, h_st, h_sr, h_tr[chunk], config.cc, mrt, config.modulation)
            met = qos_met(gains * scenario.snr_illum, config.qos) & ~mask[chunk] & ~ill
            met_count[chunk] += met
            ill_events += int(np.count_nonzero(ill & ~mask[chunk]))
        logger.debug(f"F^O {kind.value}: draw {draw + 1}/{len(ensemble)} done")

    if ill_events:
        logger.warning(f"F^O {kind.value}: {ill_events} (draw, pixel) pairs had an ill-conditioned ZF basis")
    values = np.where(mask, np.nan, 100.0 * met_count / len(ensemble))
    return _make_map(
        grid,
        values,
        MapQuantity.F_O,
        kind,
        masked=int(mask.sum()),
        ill_conditioned=ill_events,
        ensemble_size=len(ensemble),
    )
