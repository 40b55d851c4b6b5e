from loguru import logger

from backscatter_sim.core.errors import ExitStatus
from backscatter_sim.output.artifacts import ArtifactStore
from backscatter_sim.output.formats import render_curves, render_legacy, render_samples
from backscatter_sim.schemas.config import RunConfig
from backscatter_sim.simulations.campaign import legacy_sweep, run_campaign


def handle_campaign(config: RunConfig, store: ArtifactStore) -> ExitStatus:
    result = run_campaign(config)
    store.write_text("campaign/curves.csv", render_curves(result.curves))
    store.write_text("campaign/samples.csv", render_samples(result.samples))
    store.write_text("campaign/legacy.csv", render_legacy(result.legacy))
    store.write_json("campaign/summary.json", result)
    for point in result.curves:
        logger.info(
            f"D^{point.percentile:g}% {point.kind.value} @ {point.snr_illum_db:g} dB: {point.distance:.3f} m"
        )
    return ExitStatus.OK


def handle_legacy(config: RunConfig, store: ArtifactStore) -> ExitStatus:
    statistics = legacy_sweep(config)
    store.write_text("legacy/legacy.csv", render_legacy(statistics))
    store.write_json("legacy/summary.json", {"statistics": [s.model_dump(mode="json") for s in statistics]})
    return ExitStatus.OK
