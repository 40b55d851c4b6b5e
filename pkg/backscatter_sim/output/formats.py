"""Delimited-text renderers for maps, campaign curves, samples and legacy statistics"""

import csv
import io
from typing import Iterable, List, Sequence

import numpy as np

from backscatter_sim.models.precoding import Precoder
from backscatter_sim.schemas.results import (
    CurvePoint,
    LegacyStatistic,
    SelfCheckResult,
    ThresholdSample,
)
from backscatter_sim.simulations.mapping import ScalarMap

SIGNIFICANT_DIGITS = 9


def format_number(value: float) -> str:
    """9 significant digits; NaN and infinities spelled 'nan', 'inf', '-inf'"""
    value = float(value)
    if np.isnan(value):
        return "nan"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{SIGNIFICANT_DIGITS}g")


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def render_map_grid(scalar_map: ScalarMap, seed: int) -> str:
    grid = scalar_map.grid
    lines = [
        f"# quantity={scalar_map.quantity.value}",
        f"# units={scalar_map.quantity.units}",
        f"# x_min={format_number(grid.x_min)} x_max={format_number(grid.x_max)}",
        f"# y_min={format_number(grid.y_min)} y_max={format_number(grid.y_max)}",
        f"# step={format_number(grid.step)} nx={len(scalar_map.xs)} ny={len(scalar_map.ys)}",
        f"# seed={seed}",
        f"# precoder={scalar_map.kind.value}",
    ]
    for row in scalar_map.display_values():
        lines.append(",".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def render_map_long(scalar_map: ScalarMap) -> str:
    values = scalar_map.display_values()
    rows = (
        (format_number(x), format_number(y), format_number(values[iy, ix]))
        for iy, y in enumerate(scalar_map.ys)
        for ix, x in enumerate(scalar_map.xs)
    )
    return _csv(("x", "y", "value"), rows)


def render_precoder(precoder: Precoder) -> str:
    lines = [f"# kind={precoder.kind.value}"]
    if precoder.cc_params is not None:
        lines.append(f"# phi={precoder.cc_params.phi!r} delta={precoder.cc_params.delta!r}")
    body = _csv(
        ("index", "weight_re", "weight_im"),
        ((k, format(w.real, ".17g"), format(w.imag, ".17g")) for k, w in enumerate(precoder.weights)),
    )
    return "\n".join(lines) + "\n" + body


def render_curves(curves: List[CurvePoint]) -> str:
    return _csv(
        ("kind", "snr_illum_db", "percentile", "distance_m", "samples", "not_detected", "saturated"),
        (
            (
                c.kind.value,
                format_number(c.snr_illum_db),
                format_number(c.percentile),
                format_number(c.distance),
                c.samples,
                c.not_detected,
                c.saturated,
            )
            for c in curves
        ),
    )


def render_samples(samples: List[ThresholdSample]) -> str:
    return _csv(
        ("draw", "tag", "angle_index", "angle", "kind", "snr_illum_db", "distance_m", "flag", "ill_conditioned"),
        (
            (
                s.draw,
                s.tag,
                s.angle_index,
                format_number(s.angle),
                s.kind.value,
                format_number(s.snr_illum_db),
                format_number(s.distance),
                s.flag.value,
                s.ill_conditioned,
            )
            for s in samples
        ),
    )


def render_legacy(statistics: List[LegacyStatistic]) -> str:
    return _csv(
        ("kind", "snr_illum_db", "draws", "mean_db", "mean", "variance", "ci_low", "ci_high", "confidence"),
        (
            (
                s.kind.value,
                format_number(s.snr_illum_db),
                s.draws,
                format_number(s.mean_db),
                format_number(s.mean),
                format_number(s.variance),
                format_number(s.ci_low),
                format_number(s.ci_high),
                format_number(s.confidence),
            )
            for s in statistics
        ),
    )


def render_selfcheck(results: List[SelfCheckResult]) -> str:
    return _csv(
        ("check", "passed", "worst", "tolerance", "detail"),
        (
            (r.name, "pass" if r.passed else "FAIL", format_number(r.worst), format_number(r.tolerance), r.detail)
            for r in results
        ),
    )
