from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from backscatter_sim.core.units import linear_to_db
from backscatter_sim.schemas.config import PrecoderKind, ThresholdRule


class MapQuantity(str, Enum):
    SNR_OFF = "SNR_OFF"
    SNR_TR = "SNR_TR"
    DELTA_SNR = "DELTA_SNR"
    F_O = "F_O"

    @property
    def units(self) -> str:
        return "percent" if self is MapQuantity.F_O else "dB"


class ThresholdFlag(str, Enum):
    DETECTED = "detected"
    NOT_DETECTED = "not_detected"
    SATURATED = "saturated"


# Campaign schemas
class ThresholdSample(BaseModel):
    draw: int
    tag: int
    angle_index: int
    angle: float
    kind: PrecoderKind
    snr_illum_db: float
    distance: float
    flag: ThresholdFlag = ThresholdFlag.DETECTED
    ill_conditioned: int = Field(
        0, description="Coarse reader positions on this ray where the ZF basis was rejected (ZF and CC only)"
    )


class CurvePoint(BaseModel):
    kind: PrecoderKind
    snr_illum_db: float
    percentile: float
    distance: float
    samples: int
    not_detected: int = 0
    saturated: int = 0


class LegacyStatistic(BaseModel):
    kind: PrecoderKind
    snr_illum_db: float
    draws: int
    mean: float
    variance: float
    ci_low: float
    ci_high: float
    confidence: float

    @property
    def mean_db(self) -> float:
        return float(linear_to_db(self.mean))


class CampaignMetadata(BaseModel):
    seed: int
    n_draws: int
    n_tags: int
    n_angles: int
    threshold_rule: ThresholdRule
    samples_per_curve: int
    common_random_numbers: bool = True
    ill_conditioned_events: int = Field(0, description="Rejected coarse reader positions, counted once per ray")
    not_detected: int = 0
    saturated: int = 0
    workers: int = 1


class CampaignResult(BaseModel):
    curves: List[CurvePoint] = Field(default_factory=list)
    samples: List[ThresholdSample] = Field(default_factory=list)
    legacy: List[LegacyStatistic] = Field(default_factory=list)
    metadata: CampaignMetadata

    def curve(self, kind: PrecoderKind, percentile: float) -> Dict[float, float]:
        """SNR^illum (dB) → distance for one precoder and percentile"""
        return {
            point.snr_illum_db: point.distance
            for point in self.curves
            if point.kind == kind and point.percentile == percentile
        }


# Maps and selfcheck
class MapSummary(BaseModel):
    quantity: MapQuantity
    kind: PrecoderKind
    nx: int
    ny: int
    masked: int = 0
    ill_conditioned: int = 0
    minimum: Optional[float] = None
    maximum: Optional[float] = None


class SelfCheckResult(BaseModel):
    name: str
    passed: bool
    worst: float = Field(..., description="Largest observed deviation")
    tolerance: float
    detail: str = ""


# Output bookkeeping
class ArtifactEntry(BaseModel):
    path: str
    sha256: str
    size: int


class Manifest(BaseModel):
    app_name: str
    version: str
    mode: str
    seed: int
    status: int
    artifacts: List[ArtifactEntry] = Field(default_factory=list)
