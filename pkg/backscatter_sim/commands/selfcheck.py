from loguru import logger

from backscatter_sim.core.errors import ExitStatus
from backscatter_sim.output.artifacts import ArtifactStore
from backscatter_sim.output.formats import render_selfcheck
from backscatter_sim.schemas.config import RunConfig
from backscatter_sim.simulations.selfcheck import run_selfcheck


def handle_selfcheck(config: RunConfig, store: ArtifactStore) -> ExitStatus:
    """A failed check is a reported outcome: artifacts are kept and the status is 4"""
    results = run_selfcheck(config)
    store.write_text("selfcheck/results.csv", render_selfcheck(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Selfcheck failed: {', '.join(failed)}")
        return ExitStatus.SELFCHECK_FAILED
    logger.info(f"Selfcheck passed all {len(results)} checks")
    return ExitStatus.OK
