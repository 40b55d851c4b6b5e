import argparse
import os
import sys
from typing import Callable, Dict, List, Optional

from loguru import logger

from backscatter_sim.commands.campaign import handle_campaign, handle_legacy
from backscatter_sim.commands.maps import handle_f_o_maps, handle_maps
from backscatter_sim.commands.selfcheck import handle_selfcheck
from backscatter_sim.core.config import dump_config, parse_config, settings
from backscatter_sim.core.errors import ExitStatus, SimulationError
from backscatter_sim.output.artifacts import ArtifactStore
from backscatter_sim.schemas.config import Mode, Preset, RunConfig

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} | {message}"

Handler = Callable[[RunConfig, ArtifactStore], ExitStatus]

HANDLERS: Dict[Mode, Handler] = {
    Mode.MAPS: handle_maps,
    Mode.F_O_MAPS: handle_f_o_maps,
    Mode.CAMPAIGN: handle_campaign,
    Mode.LEGACY: handle_legacy,
    Mode.SELFCHECK: handle_selfcheck,
}


# Configure logging
def setup_logging():
    """Setup logging configuration"""
    logger.remove()

    logger.add(sys.stderr, format=LOG_FORMAT, level=settings.log_level, colorize=True)

    if settings.log_file:
        directory = os.path.dirname(settings.log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        logger.add(
            settings.log_file,
            format=LOG_FORMAT,
            level=settings.log_level,
            rotation="10 MB",
            retention="30 days",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backscatter_sim",
        description="Link-level simulator for beamforming-assisted ambient backscatter",
    )
    parser.add_argument("--mode", choices=[m.value for m in Mode], help="Run mode (overrides the config file)")
    parser.add_argument("--config", help="Key=value configuration file with dotted section names")
    parser.add_argument("--seed", type=int, help="Master seed, unsigned 64-bit")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--preset", choices=[p.value for p in Preset], help="Size preset applied before the config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one configuration key, e.g. campaign.n_draws=5 (repeatable)",
    )
    return parser


def run(config: RunConfig) -> ExitStatus:
    """Write the resolved config, dispatch the mode handler and seal the manifest"""
    logger.info(f"Starting {settings.app_name} {settings.version}: mode={config.mode.value}, seed={config.seed}")
    with ArtifactStore(config) as store:
        store.write_text("resolved_config.env", dump_config(config))
        store.status = HANDLERS[config.mode](config, store)
    logger.info(f"Finished mode={config.mode.value} with status {int(store.status)}")
    return store.status


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(
            config_path=args.config,
            overrides=args.overrides,
            preset=args.preset,
            mode=args.mode,
            seed=args.seed,
            output_dir=args.out,
        )
        return int(run(config))
    except SimulationError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return int(e.exit_code)
    except Exception as e:
        logger.exception(f"Unhandled exception: {e}")
        return int(ExitStatus.SIMULATION_ERROR)


if __name__ == "__main__":
    sys.exit(main())
