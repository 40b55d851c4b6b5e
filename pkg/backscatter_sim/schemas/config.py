from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backscatter_sim.core.units import db_to_linear, delta_snr_target_for_ber, linear_to_db

LIGHT_SPEED = 299_792_458.0


class Mode(str, Enum):
    MAPS = "maps"
    F_O_MAPS = "f_o_maps"
    CAMPAIGN = "campaign"
    LEGACY = "legacy"
    SELFCHECK = "selfcheck"


class PrecoderKind(str, Enum):
    REF = "REF"
    MRT = "MRT"
    ZF = "ZF"
    CC = "CC"


class ThresholdRule(str, Enum):
    PREFIX = "prefix"
    POOLED = "pooled"


class DeviceChannelModel(str, Enum):
    UNCORRELATED = "uncorrelated"
    ARRAY = "array"


class Preset(str, Enum):
    PAPER = "paper"
    DESK = "desk"


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Physical layer
class PhysicalConfig(Section):
    carrier_frequency: float = Field(2.4e9, gt=0, description="Carrier frequency in Hz")

    @property
    def light_speed(self) -> float:
        return LIGHT_SPEED

    @property
    def wavelength(self) -> float:
        return LIGHT_SPEED / self.carrier_frequency


class PlanarArray(Section):
    """Uniform planar array; line index runs along x, column index along y"""

    lines: int = Field(8, ge=1)
    columns: int = Field(8, ge=1)
    antennas: Optional[int] = Field(None, ge=1)
    element_spacing: Optional[float] = Field(None, gt=0, description="m, defaults to λ/2")

    @model_validator(mode="after")
    def check_antenna_count(self) -> "PlanarArray":
        expected = self.lines * self.columns
        if self.antennas is None:
            self.antennas = expected
        elif self.antennas != expected:
            raise ValueError(
                f"antennas={self.antennas} does not match lines*columns={expected} (K must equal k1*k2)"
            )
        return self

    @property
    def num_antennas(self) -> int:
        return self.lines * self.columns

    def element_positions(self, phys: PhysicalConfig) -> np.ndarray:
        """(K, 2) element coordinates in m; element 1 sits at the array origin"""
        spacing = self.element_spacing if self.element_spacing is not None else phys.wavelength / 2
        line, column = np.divmod(np.arange(self.num_antennas), self.columns)
        return np.column_stack([line * spacing, column * spacing]).astype(float)


class ChannelConfig(Section):
    paths: int = Field(100, ge=1, description="Number of scattering paths M")


class ModulationFactor(Section):
    gamma_on: float = Field(1.0, ge=0, le=1)
    gamma_off: float = Field(0.0, ge=0, le=1)

    @property
    def is_default(self) -> bool:
        return self.gamma_on == 1.0 and self.gamma_off == 0.0


class QosTarget(Section):
    ber_target: float = Field(1e-3, gt=0, lt=0.5)
    delta_snr_target_db: Optional[float] = None

    @model_validator(mode="after")
    def resolve_target(self) -> "QosTarget":
        if self.delta_snr_target_db is None:
            self.delta_snr_target_db = float(linear_to_db(delta_snr_target_for_ber(self.ber_target)))
        return self

    @property
    def delta_snr_target(self) -> float:
        return float(db_to_linear(self.delta_snr_target_db))


class CcGrid(Section):
    """Phase-shift × power-allocation grid; allocations always end with δ = 1"""

    phase_steps: int = Field(360, ge=1)
    allocation_steps: int = Field(10, ge=1)

    @property
    def phases(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.phase_steps) / self.phase_steps

    @property
    def allocations(self) -> np.ndarray:
        return np.arange(1, self.allocation_steps + 1) / self.allocation_steps


# Scenario and mapping
class ScenarioConfig(Section):
    tag_x: float = 0.0
    tag_y: float = 0.0
    reader_x: float = 0.25
    reader_y: float = 0.0
    snr_illum_db: float = 24.0

    @property
    def tag_position(self) -> Tuple[float, float]:
        return (self.tag_x, self.tag_y)

    @property
    def reader_position(self) -> Tuple[float, float]:
        return (self.reader_x, self.reader_y)

    @property
    def snr_illum(self) -> float:
        return float(db_to_linear(self.snr_illum_db))


class MapGrid(Section):
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    y_min: Optional[float] = None
    y_max: Optional[float] = None
    step: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_bounds(self) -> "MapGrid":
        if self.x_min is not None and self.x_max is not None and self.x_min > self.x_max:
            raise ValueError(f"x_min={self.x_min} exceeds x_max={self.x_max}")
        if self.y_min is not None and self.y_max is not None and self.y_min > self.y_max:
            raise ValueError(f"y_min={self.y_min} exceeds y_max={self.y_max}")
        return self

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        nx = int(np.floor((self.x_max - self.x_min) / self.step + 1e-9)) + 1
        ny = int(np.floor((self.y_max - self.y_min) / self.step + 1e-9)) + 1
        return self.x_min + self.step * np.arange(nx), self.y_min + self.step * np.arange(ny)

    def points(self) -> np.ndarray:
        """Lattice points as (ny·nx, 2), one row of y at a time"""
        xs, ys = self.axes()
        grid_x, grid_y = np.meshgrid(xs, ys)
        return np.column_stack([grid_x.ravel(), grid_y.ravel()])


class MappingConfig(Section):
    ensemble_size: int = Field(100, ge=1)
    long_format: bool = True


# Campaign
class CampaignConfig(Section):
    n_draws: int = Field(20, ge=1)
    n_tags: int = Field(10, ge=1)
    tag_x_min: float = 0.0
    tag_x_max: float = 100.0
    tag_y_min: float = 0.0
    tag_y_max: float = 100.0
    n_angles: int = Field(20, ge=1)
    snr_illum_db: List[float] = Field(default_factory=lambda: [20.0, 22.0, 24.0, 26.0, 28.0, 30.0], min_length=1)
    d_min: Optional[float] = Field(None, gt=0, description="m, defaults to λ/2")
    d_max: float = Field(200.0, gt=0)
    d_precision: float = Field(1e-3, gt=0)
    coarse_factor: int = Field(10, ge=1)
    percentiles: List[float] = Field(default_factory=lambda: [99.0, 90.0], min_length=1)
    threshold_rule: ThresholdRule = ThresholdRule.PREFIX
    workers: int = Field(1, ge=1)

    @field_validator("snr_illum_db", "percentiles", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @field_validator("percentiles")
    @classmethod
    def check_percentiles(cls, value: List[float]) -> List[float]:
        for p in value:
            if not 0.0 < p < 100.0:
                raise ValueError(f"percentile {p} outside (0, 100)")
        return value

    @model_validator(mode="after")
    def check_region(self) -> "CampaignConfig":
        if self.tag_x_min > self.tag_x_max or self.tag_y_min > self.tag_y_max:
            raise ValueError("tag region bounds are not ordered")
        return self

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_angles) / self.n_angles

    @property
    def snr_illum_linear(self) -> np.ndarray:
        return db_to_linear(self.snr_illum_db)

    @property
    def coarse_step(self) -> float:
        return self.coarse_factor * self.d_precision


class LegacyConfig(Section):
    n_device_draws: int = Field(10000, ge=2)
    reader_distance_max: float = Field(1.0, gt=0, description="m, upper bound of the random tag-reader distance")
    confidence: float = Field(0.95, gt=0, lt=1)
    device_model: DeviceChannelModel = DeviceChannelModel.UNCORRELATED


class RunConfig(Section):
    mode: Mode
    seed: int = Field(0, ge=0, le=2**64 - 1)
    output_dir: Path = Path("output")
    physical: PhysicalConfig = Field(default_factory=PhysicalConfig)
    array: PlanarArray = Field(default_factory=PlanarArray)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    modulation: ModulationFactor = Field(default_factory=ModulationFactor)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    qos: QosTarget = Field(default_factory=QosTarget)
    cc: CcGrid = Field(default_factory=CcGrid)
    grid: MapGrid = Field(default_factory=MapGrid)
    mapping: MappingConfig = Field(default_factory=MappingConfig)
    campaign: CampaignConfig = Field(default_factory=CampaignConfig)
    legacy: LegacyConfig = Field(default_factory=LegacyConfig)

    @model_validator(mode="after")
    def resolve_derived(self) -> "RunConfig":
        """Fill wavelength-dependent defaults and check cross-section bounds"""
        wavelength = self.physical.wavelength
        far_field = wavelength / 2

        if self.array.element_spacing is None:
            self.array.element_spacing = wavelength / 2

        campaign = self.campaign
        if campaign.d_min is None:
            campaign.d_min = far_field
        elif campaign.d_min < far_field:
            raise ValueError(f"campaign.d_min={campaign.d_min} is below the far-field bound λ/2={far_field}")
        if campaign.d_min >= campaign.d_max:
            raise ValueError(f"campaign.d_min={campaign.d_min} must be smaller than campaign.d_max={campaign.d_max}")
        if self.legacy.reader_distance_max < far_field:
            raise ValueError(
                f"legacy.reader_distance_max={self.legacy.reader_distance_max} is below λ/2={far_field}"
            )

        center_x = 0.5 * (self.scenario.tag_x + self.scenario.reader_x)
        center_y = 0.5 * (self.scenario.tag_y + self.scenario.reader_y)
        half_width = 2.0 * wavelength
        grid = self.grid
        if grid.x_min is None:
            grid.x_min = center_x - half_width
        if grid.x_max is None:
            grid.x_max = center_x + half_width
        if grid.y_min is None:
            grid.y_min = center_y - half_width
        if grid.y_max is None:
            grid.y_max = center_y + half_width
        if grid.step is None:
            grid.step = wavelength / 16
        if grid.x_min > grid.x_max or grid.y_min > grid.y_max:
            raise ValueError("grid bounds are not ordered")
        return self
