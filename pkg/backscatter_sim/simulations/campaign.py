"""Monte Carlo detection-range campaign and legacy-device sweep.

For every (draw, tag, angle) the reader walks away from the tag along a ray.
Each precoder kind gets a per-sample threshold distance: the largest d with
the QoS met at every tested distance up to d (coarse prefix scan, then
bisection of the crossing interval). D^p% is the distance exceeded by p% of
those samples. The same draws serve every SNR^illum value.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from backscatter_sim.core.errors import IllConditionedChannelError, InvalidParameterError
from backscatter_sim.core.streams import Stream, substream
from backscatter_sim.core.units import db_to_linear
from backscatter_sim.models.channel import (
    PathSet,
    evaluate_channel,
    evaluate_channels,
    friis_channel,
    friis_channels,
    sample_independent_channel,
    sample_path_set,
)
from backscatter_sim.models.metrics import legacy_snr, qos_met
from backscatter_sim.models.precoding import (
    BasisGram,
    cc_optimize,
    mrt_precoder,
    ref_precoder,
    zf_basis,
    zf_precoder,
)
from backscatter_sim.schemas.config import (
    DeviceChannelModel,
    PrecoderKind,
    QosTarget,
    RunConfig,
    ThresholdRule,
)
from backscatter_sim.schemas.results import (
    CampaignMetadata,
    CampaignResult,
    CurvePoint,
    LegacyStatistic,
    ThresholdFlag,
    ThresholdSample,
)
from backscatter_sim.simulations.evaluation import adaptive_gains

# Coarse distances evaluated per channel batch along a ray
CHUNK_POINTS = 512

KINDS = (PrecoderKind.REF, PrecoderKind.MRT, PrecoderKind.ZF, PrecoderKind.CC)

# Kinds rebuilt from the reader channel, and so exposed to a rejected ZF basis
ADAPTIVE_KINDS = (PrecoderKind.ZF, PrecoderKind.CC)


def coarse_distances(d_min: float, d_max: float, step: float) -> np.ndarray:
    """d_min, d_min + step, … with d_max always the last point"""
    count = int(np.floor((d_max - d_min) / step + 1e-9)) + 1
    distances = np.minimum(d_min + step * np.arange(count), d_max)
    if distances[-1] < d_max:
        distances = np.append(distances, d_max)
    return distances


def draw_environment(config: RunConfig, draw: int) -> PathSet:
    return sample_path_set(config.channel.paths, substream(config.seed, Stream.ENVIRONMENT, draw))


def draw_tag_position(config: RunConfig, draw: int, tag: int) -> Tuple[float, float]:
    rng = substream(config.seed, Stream.TAG_POSITIONS, draw, tag)
    campaign = config.campaign
    return (
        float(rng.uniform(campaign.tag_x_min, campaign.tag_x_max)),
        float(rng.uniform(campaign.tag_y_min, campaign.tag_y_max)),
    )


class RayEvaluator:
    """ΔSNR per unit SNR^illum along one ray leaving the tag.

    Reader channels of each coarse chunk are cached so that all precoder
    kinds share them.
    """

    def __init__(self, paths: PathSet, config: RunConfig, tag_pos, angle: float):
        self.paths = paths
        self.config = config
        self.tag_pos = np.asarray(tag_pos, dtype=float)
        self.direction = np.array([np.cos(angle), np.sin(angle)])
        self.h_st = evaluate_channel(paths, config.array, tuple(self.tag_pos), config.physical)
        self.mrt = mrt_precoder(self.h_st)
        campaign = config.campaign
        self.coarse = coarse_distances(campaign.d_min, campaign.d_max, campaign.coarse_step)
        self._chunks: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    @property
    def chunk_count(self) -> int:
        return -(-len(self.coarse) // CHUNK_POINTS)

    def _channels(self, distances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        points = self.tag_pos + distances[:, None] * self.direction
        h_sr = evaluate_channels(self.paths, self.config.array, points, self.config.physical)
        return h_sr, friis_channels(distances, self.config.physical)

    def _chunk(self, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        distances = self.coarse[index * CHUNK_POINTS:(index + 1) * CHUNK_POINTS]
        if index not in self._chunks:
            self._chunks[index] = self._channels(distances)
        return (distances,) + self._chunks[index]

    def chunk_gains(self, kind: PrecoderKind, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        distances, h_sr, h_tr = self._chunk(index)
        gains, ill = adaptive_gains(kind, self.h_st, h_sr, h_tr, self.config.cc, self.mrt, self.config.modulation)
        return distances, gains, ill

    def gain_at(self, kind: PrecoderKind, distance: float) -> float:
        h_sr, h_tr = self._channels(np.array([distance]))
        gains, _ = adaptive_gains(kind, self.h_st, h_sr, h_tr, self.config.cc, self.mrt, self.config.modulation)
        return float(gains[0])

    def ill_conditioned_positions(self) -> int:
        """Coarse reader positions on this ray whose ZF basis is rejected, shared by ZF and CC"""
        count = 0
        for index in range(self.chunk_count):
            _, h_sr, _ = self._chunk(index)
            count += int(np.count_nonzero(BasisGram.from_channels(self.h_st, h_sr).ill_conditioned))
        return count


@dataclass
class RayScan:
    thresholds: List[Tuple[float, ThresholdFlag]]
    met: Optional[np.ndarray] = None


def threshold_distances(
    evaluator,
    kind: PrecoderKind,
    snr_illum: np.ndarray,
    target: QosTarget,
    d_precision: float,
    full_scan: bool = False,
) -> RayScan:
    """Prefix-maximal threshold distance for every SNR^illum value along one ray.

    ``evaluator`` provides ``coarse``, ``chunk_count``, ``chunk_gains`` and
    ``gain_at``. The scan stops once the largest SNR^illum has failed unless
    ``full_scan`` is set, in which case the full met matrix
    (n_snr, n_coarse) is returned as well.
    """
    snr_illum = np.atleast_1d(np.asarray(snr_illum, dtype=float))
    coarse = evaluator.coarse
    first_failure = np.full(snr_illum.shape[0], -1)
    met_rows = []

    for index in range(evaluator.chunk_count):
        _, gains, _ = evaluator.chunk_gains(kind, index)
        met = qos_met(gains[None, :] * snr_illum[:, None], target)
        start = index * CHUNK_POINTS
        for j in np.flatnonzero(first_failure < 0):
            failures = np.flatnonzero(~met[j])
            if failures.size:
                first_failure[j] = start + failures[0]
        if full_scan:
            met_rows.append(met)
        elif np.all(first_failure >= 0):
            break

    thresholds = []
    for j, snr in enumerate(snr_illum):
        failure = first_failure[j]
        if failure == 0:
            thresholds.append((float(coarse[0]), ThresholdFlag.NOT_DETECTED))
        elif failure < 0:
            thresholds.append((float(coarse[-1]), ThresholdFlag.SATURATED))
        else:
            low, high = float(coarse[failure - 1]), float(coarse[failure])
            while high - low > d_precision:
                middle = 0.5 * (low + high)
                if qos_met(evaluator.gain_at(kind, middle) * snr, target):
                    low = middle
                else:
                    high = middle
            thresholds.append((low, ThresholdFlag.DETECTED))

    met_matrix = np.concatenate(met_rows, axis=1) if full_scan else None
    return RayScan(thresholds=thresholds, met=met_matrix)


def sample_threshold_distance(
    config: RunConfig, draw: int, tag: int, angle_index: int, kind: PrecoderKind, snr_illum_db: float
) -> ThresholdSample:
    """Threshold distance of a single (draw, tag, angle, kind, SNR^illum) index"""
    tag_pos = draw_tag_position(config, draw, tag)
    angle = float(config.campaign.angles[angle_index])
    evaluator = RayEvaluator(draw_environment(config, draw), config, tag_pos, angle)
    scan = threshold_distances(
        evaluator, kind, db_to_linear([snr_illum_db]), config.qos, config.campaign.d_precision
    )
    distance, flag = scan.thresholds[0]
    return ThresholdSample(
        draw=draw,
        tag=tag,
        angle_index=angle_index,
        angle=angle,
        kind=kind,
        snr_illum_db=snr_illum_db,
        distance=distance,
        flag=flag,
        ill_conditioned=evaluator.ill_conditioned_positions() if kind in ADAPTIVE_KINDS else 0,
    )


@dataclass
class TagOutcome:
    draw: int
    tag: int
    samples: List[ThresholdSample] = field(default_factory=list)
    ill_conditioned: int = 0
    met_counts: Dict[PrecoderKind, np.ndarray] = field(default_factory=dict)


def evaluate_tag(config: RunConfig, draw: int, tag: int) -> TagOutcome:
    """Every angle, kind and SNR^illum for one (draw, tag) pair"""
    campaign = config.campaign
    pooled = campaign.threshold_rule is ThresholdRule.POOLED
    paths = draw_environment(config, draw)
    tag_pos = draw_tag_position(config, draw, tag)
    snr_linear = campaign.snr_illum_linear
    outcome = TagOutcome(draw=draw, tag=tag)

    for angle_index, angle in enumerate(campaign.angles):
        evaluator = RayEvaluator(paths, config, tag_pos, float(angle))
        ray_ill = evaluator.ill_conditioned_positions()
        outcome.ill_conditioned += ray_ill
        for kind in KINDS:
            scan = threshold_distances(
                evaluator, kind, snr_linear, config.qos, campaign.d_precision, full_scan=pooled
            )
            if pooled:
                counts = scan.met.astype(np.int64)
                if kind in outcome.met_counts:
                    outcome.met_counts[kind] += counts
                else:
                    outcome.met_counts[kind] = counts
            for snr_db, (distance, flag) in zip(campaign.snr_illum_db, scan.thresholds):
                outcome.samples.append(
                    ThresholdSample(
                        draw=draw,
                        tag=tag,
                        angle_index=angle_index,
                        angle=float(angle),
                        kind=kind,
                        snr_illum_db=snr_db,
                        distance=distance,
                        flag=flag,
                        ill_conditioned=ray_ill if kind in ADAPTIVE_KINDS else 0,
                    )
                )
    return outcome


def _percentile_curves(config: RunConfig, samples: List[ThresholdSample]) -> List[CurvePoint]:
    campaign = config.campaign
    curves = []
    for kind in KINDS:
        for snr_db in campaign.snr_illum_db:
            selected = [s for s in samples if s.kind == kind and s.snr_illum_db == snr_db]
            distances = np.array([s.distance for s in selected])
            not_detected = sum(s.flag is ThresholdFlag.NOT_DETECTED for s in selected)
            saturated = sum(s.flag is ThresholdFlag.SATURATED for s in selected)
            for p in campaign.percentiles:
                curves.append(
                    CurvePoint(
                        kind=kind,
                        snr_illum_db=snr_db,
                        percentile=p,
                        distance=float(np.percentile(distances, 100.0 - p, method="lower")),
                        samples=len(selected),
                        not_detected=not_detected,
                        saturated=saturated,
                    )
                )
    return curves


def _pooled_curves(config: RunConfig, met_counts: Dict[PrecoderKind, np.ndarray]) -> List[CurvePoint]:
    """Largest coarse d such that the pooled detection rate is ≥ p% at every d' ≤ d"""
    campaign = config.campaign
    coarse = coarse_distances(campaign.d_min, campaign.d_max, campaign.coarse_step)
    total = campaign.n_draws * campaign.n_tags * campaign.n_angles
    curves = []
    for kind in KINDS:
        for j, snr_db in enumerate(campaign.snr_illum_db):
            rate = met_counts[kind][j] / total
            for p in campaign.percentiles:
                failures = np.flatnonzero(rate < p / 100.0)
                if failures.size == 0:
                    distance, not_detected, saturated = float(coarse[-1]), 0, 1
                elif failures[0] == 0:
                    distance, not_detected, saturated = float(coarse[0]), 1, 0
                else:
                    distance, not_detected, saturated = float(coarse[failures[0] - 1]), 0, 0
                curves.append(
                    CurvePoint(
                        kind=kind,
                        snr_illum_db=snr_db,
                        percentile=p,
                        distance=distance,
                        samples=total,
                        not_detected=not_detected,
                        saturated=saturated,
                    )
                )
    return curves


def run_campaign(config: RunConfig) -> CampaignResult:
    campaign = config.campaign
    tasks = [(draw, tag) for draw in range(campaign.n_draws) for tag in range(campaign.n_tags)]
    logger.info(
        f"Campaign: {campaign.n_draws} draws × {campaign.n_tags} tags × {campaign.n_angles} angles, "
        f"{len(campaign.snr_illum_db)} SNR^illum values, rule={campaign.threshold_rule.value}, "
        f"workers={campaign.workers}"
    )

    draws, tags = zip(*tasks)
    if campaign.workers > 1:
        with ProcessPoolExecutor(max_workers=campaign.workers) as pool:
            outcomes = list(pool.map(evaluate_tag, repeat(config), draws, tags))
    else:
        outcomes = list(map(evaluate_tag, repeat(config), draws, tags))

    samples: List[ThresholdSample] = []
    met_counts: Dict[PrecoderKind, np.ndarray] = {}
    for outcome in outcomes:
        samples.extend(outcome.samples)
        for kind, counts in outcome.met_counts.items():
            met_counts[kind] = met_counts[kind] + counts if kind in met_counts else counts.copy()
        if outcome.tag == campaign.n_tags - 1:
            logger.info(f"Campaign draw {outcome.draw + 1}/{campaign.n_draws} done")

    if campaign.threshold_rule is ThresholdRule.POOLED:
        curves = _pooled_curves(config, met_counts)
    else:
        curves = _percentile_curves(config, samples)

    legacy = legacy_sweep(config)
    ill_events = sum(outcome.ill_conditioned for outcome in outcomes)
    not_detected = sum(s.flag is ThresholdFlag.NOT_DETECTED for s in samples)
    saturated = sum(s.flag is ThresholdFlag.SATURATED for s in samples)
    if ill_events or saturated:
        logger.warning(
            f"Campaign flags: {ill_events} ill-conditioned reader positions, "
            f"{saturated} saturated and {not_detected} undetected samples"
        )

    metadata = CampaignMetadata(
        seed=config.seed,
        n_draws=campaign.n_draws,
        n_tags=campaign.n_tags,
        n_angles=campaign.n_angles,
        threshold_rule=campaign.threshold_rule,
        samples_per_curve=campaign.n_draws * campaign.n_tags * campaign.n_angles,
        ill_conditioned_events=ill_events,
        not_detected=not_detected,
        saturated=saturated,
        workers=campaign.workers,
    )
    return CampaignResult(curves=curves, samples=samples, legacy=legacy, metadata=metadata)


def _device_channel(config: RunConfig, index: int):
    rng = substream(config.seed, Stream.DEVICE, index)
    if config.legacy.device_model is DeviceChannelModel.UNCORRELATED:
        return sample_independent_channel(config.array.num_antennas, config.channel.paths, rng)
    paths = sample_path_set(config.channel.paths, rng)
    campaign = config.campaign
    position = (
        rng.uniform(campaign.tag_x_min, campaign.tag_x_max),
        rng.uniform(campaign.tag_y_min, campaign.tag_y_max),
    )
    return evaluate_channel(paths, config.array, position, config.physical)


def legacy_sweep(config: RunConfig, n_device_draws: Optional[int] = None) -> List[LegacyStatistic]:
    """Mean and Student-t interval of SNR^D per precoder kind and SNR^illum.

    Each draw places a tag and a reader in a fresh environment, builds the
    four precoders for them, then measures them on an independent device
    channel. All kinds share the same draws; a draw whose ZF basis is
    rejected is dropped for every kind.
    """
    n = config.legacy.n_device_draws if n_device_draws is None else n_device_draws
    if n < 2:
        raise InvalidParameterError(f"the legacy sweep needs at least two device draws, got {n}")
    phys = config.physical
    campaign = config.campaign
    far_field = phys.wavelength / 2

    gains = {kind: np.empty(n) for kind in KINDS}
    kept = np.ones(n, dtype=bool)
    for index in range(n):
        rng = substream(config.seed, Stream.LEGACY_GEOMETRY, index)
        paths = sample_path_set(config.channel.paths, rng)
        tag = (rng.uniform(campaign.tag_x_min, campaign.tag_x_max), rng.uniform(campaign.tag_y_min, campaign.tag_y_max))
        distance = rng.uniform(far_field, config.legacy.reader_distance_max)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        reader = (tag[0] + distance * np.cos(angle), tag[1] + distance * np.sin(angle))

        h_st = evaluate_channel(paths, config.array, tag, phys)
        h_sr = evaluate_channel(paths, config.array, reader, phys)
        try:
            basis = zf_basis(h_st, h_sr)
        except IllConditionedChannelError:
            kept[index] = False
            continue
        # CC's argmax does not depend on SNR^illum
        cc, _ = cc_optimize(basis, friis_channel(distance, phys), 1.0, config.cc, config.modulation)
        precoders = {
            PrecoderKind.REF: ref_precoder(),
            PrecoderKind.MRT: mrt_precoder(h_st),
            PrecoderKind.ZF: zf_precoder(basis),
            PrecoderKind.CC: cc,
        }
        h_d = _device_channel(config, index)
        for kind, precoder in precoders.items():
            gains[kind][index] = legacy_snr(h_d, precoder, 1.0)

    dropped = int(n - kept.sum())
    if dropped:
        logger.warning(f"Legacy sweep: {dropped} draws dropped for an ill-conditioned ZF basis")
    confidence = config.legacy.confidence
    statistics = []
    for kind in KINDS:
        for snr_db in campaign.snr_illum_db:
            values = gains[kind][kept] * float(db_to_linear(snr_db))
            mean = float(values.mean())
            variance = float(values.var(ddof=1))
            low, high = stats.t.interval(
                confidence, df=values.size - 1, loc=mean, scale=np.sqrt(variance / values.size)
            )
            statistics.append(
                LegacyStatistic(
                    kind=kind,
                    snr_illum_db=snr_db,
                    draws=int(values.size),
                    mean=mean,
                    variance=variance,
                    ci_low=float(low),
                    ci_high=float(high),
                    confidence=confidence,
                )
            )
    logger.info(f"Legacy sweep: {int(kept.sum())} device draws per precoder")
    return statistics
