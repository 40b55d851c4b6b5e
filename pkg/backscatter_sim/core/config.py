from pathlib import Path
from typing import Dict, Iterable, Optional, Union

from dotenv import dotenv_values
from loguru import logger
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from backscatter_sim.core.errors import ConfigError
from backscatter_sim.schemas.config import Preset, RunConfig


class Settings(BaseSettings):
    # Application
    app_name: str = "Backscatter Beamforming Simulator"
    version: str = "1.0.0"

    # Logging
    log_level: str = "INFO"
    log_file: str = "logs/backscatter_sim.log"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="BSIM_", case_sensitive=False, extra="ignore")


settings = Settings()


# Run configuration: flat dotted keys, nested into RunConfig
PRESETS: Dict[Preset, Dict[str, str]] = {
    Preset.PAPER: {},
    Preset.DESK: {
        "campaign.n_draws": "5",
        "campaign.n_tags": "5",
        "campaign.n_angles": "8",
        "mapping.ensemble_size": "10",
        "legacy.n_device_draws": "1000",
    },
}


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError(f"config file {path}: keys without a value: {', '.join(missing)}")
    return dict(values)


def nest(flat: Dict[str, str]) -> dict:
    """'section.key' → {'section': {'key': value}}"""
    tree: dict = {}
    for key, value in flat.items():
        parts = [part.strip() for part in key.split(".")]
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"'{key}': '{part}' is a value, not a section")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(f"'{key}' names a section, not a value")
        node[parts[-1]] = value
    return tree


def _describe(error: ValidationError) -> str:
    issues = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        issues.append(f"{location}: {item['msg']}")
    return "; ".join(issues)


def parse_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
    preset: Optional[Union[Preset, str]] = None,
    mode: Optional[str] = None,
    seed: Optional[int] = None,
    output_dir: Optional[Union[str, Path]] = None,
) -> RunConfig:
    """Resolve defaults < preset < config file < --set overrides < dedicated flags"""
    flat: Dict[str, str] = {}
    if preset is not None:
        try:
            flat.update(PRESETS[Preset(preset)])
        except ValueError:
            raise ConfigError(f"preset: unknown preset '{preset}', expected one of {[p.value for p in Preset]}")
    if config_path is not None:
        flat.update(read_config_file(config_path))
    for item in overrides:
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"override '{item}' is not of the form key=value")
        flat[key.strip()] = value.strip()
    if mode is not None:
        flat["mode"] = mode
    if seed is not None:
        flat["seed"] = str(seed)
    if output_dir is not None:
        flat["output_dir"] = str(output_dir)

    try:
        config = RunConfig.model_validate(nest(flat))
    except ValidationError as e:
        raise ConfigError(_describe(e))
    logger.debug(f"Resolved configuration for mode={config.mode.value}, seed={config.seed}")
    return config


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_render(item) for item in value)
    return str(value)


def _flatten(tree: dict, prefix: str = "") -> Dict[str, str]:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif value is not None:
            flat[name] = _render(value)
    return flat


def dump_config(config: RunConfig) -> str:
    """Resolved configuration as sorted key=value lines; parse_config reads it back unchanged"""
    flat = _flatten(config.model_dump(mode="json"))
    return "".join(f"{key}={flat[key]}\n" for key in sorted(flat))
