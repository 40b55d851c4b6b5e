from typing import List

import numpy as np
from loguru import logger

from backscatter_sim.core.errors import ExitStatus, IllConditionedChannelError
from backscatter_sim.core.streams import Stream, substream
from backscatter_sim.models.channel import sample_path_set
from backscatter_sim.output.artifacts import ArtifactStore
from backscatter_sim.output.formats import render_map_grid, render_map_long, render_precoder
from backscatter_sim.schemas.config import PrecoderKind, RunConfig
from backscatter_sim.schemas.results import MapSummary
from backscatter_sim.simulations.mapping import (
    ScalarMap,
    build_scenario_precoder,
    map_delta_snr,
    map_f_o,
    map_snr_off,
    map_snr_tr,
)


def _write_map(store: ArtifactStore, config: RunConfig, scalar_map: ScalarMap) -> MapSummary:
    stem = f"maps/{scalar_map.kind.value}_{scalar_map.quantity.value}"
    store.write_text(f"{stem}.txt", render_map_grid(scalar_map, config.seed))
    if config.mapping.long_format:
        store.write_text(f"{stem}_long.csv", render_map_long(scalar_map))
    shown = scalar_map.display_values()
    finite = shown[np.isfinite(shown)]
    ny, nx = scalar_map.shape
    return MapSummary(
        quantity=scalar_map.quantity,
        kind=scalar_map.kind,
        nx=nx,
        ny=ny,
        masked=scalar_map.masked,
        ill_conditioned=int(scalar_map.metadata.get("ill_conditioned", 0)),
        minimum=float(finite.min()) if finite.size else None,
        maximum=float(finite.max()) if finite.size else None,
    )


def handle_maps(config: RunConfig, store: ArtifactStore) -> ExitStatus:
    """SNR^OFF, SNR^TR and ΔSNR maps of one environment draw, per precoder kind"""
    paths = sample_path_set(config.channel.paths, substream(config.seed, Stream.ENVIRONMENT, 0))
    store.write_text("fixtures/pathset.csv", paths.to_text())
    scenario = config.scenario
    summaries: List[MapSummary] = []

    for kind in PrecoderKind:
        try:
            precoder = build_scenario_precoder(config, paths, kind)
        except IllConditionedChannelError as e:
            logger.warning(f"Skipping {kind.value} maps: {e.detail}")
            continue
        store.write_text(f"fixtures/precoder_{kind.value}.csv", render_precoder(precoder))
        args = (paths, config.array, config.physical, precoder, scenario.snr_illum)
        maps = (
            map_snr_off(*args, config.grid),
            map_snr_tr(*args, scenario.tag_position, config.grid),
            map_delta_snr(*args, scenario.tag_position, config.grid, config.modulation),
        )
        for scalar_map in maps:
            summaries.append(_write_map(store, config, scalar_map))
        logger.info(f"{kind.value} maps written ({maps[0].shape[1]}×{maps[0].shape[0]} points)")

    store.write_json("maps/summary.json", [summary.model_dump(mode="json") for summary in summaries])
    return ExitStatus.OK


def handle_f_o_maps(config: RunConfig, store: ArtifactStore) -> ExitStatus:
    """Detection-probability maps over an ensemble of environment draws"""
    ensemble = [
        sample_path_set(config.channel.paths, substream(config.seed, Stream.MAP_ENSEMBLE, draw))
        for draw in range(config.mapping.ensemble_size)
    ]
    summaries = []
    for kind in PrecoderKind:
        scalar_map = map_f_o(ensemble, kind, config)
        summaries.append(_write_map(store, config, scalar_map))
        logger.info(f"{kind.value} F^O map written over {len(ensemble)} draws")
    store.write_json("maps/summary.json", [summary.model_dump(mode="json") for summary in summaries])
    return ExitStatus.OK
