"""Invariant suite run by the selfcheck mode.

Each check draws fresh environments from the SELFCHECK stream, measures the
worst deviation from the invariant and compares it with a tolerance.
"""

from typing import Dict, List

import numpy as np
from loguru import logger

from backscatter_sim.core.errors import IllConditionedChannelError
from backscatter_sim.core.streams import Stream, substream
from backscatter_sim.core.units import delta_snr_target_for_ber, linear_to_db
from backscatter_sim.models.channel import evaluate_channel, friis_channel, sample_path_set
from backscatter_sim.models.metrics import (
    LinkSample,
    cc_closed_form,
    delta_snr,
    delta_snr_general,
    mrt_closed_form,
    zf_closed_form,
)
from backscatter_sim.models.precoding import (
    cc_optimize,
    cc_precoder,
    mrt_precoder,
    ref_precoder,
    zf_basis,
    zf_precoder,
)
from backscatter_sim.schemas.config import RunConfig
from backscatter_sim.schemas.results import SelfCheckResult

SELFCHECK_DRAWS = 200


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _draw_link(config: RunConfig, draw: int):
    """Environment plus a tag/reader placement at 0.2 m to 2 m from each other"""
    rng = substream(config.seed, Stream.SELFCHECK, draw)
    paths = sample_path_set(config.channel.paths, rng)
    tag = config.scenario.tag_position
    distance = rng.uniform(0.2, 2.0)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    reader = (tag[0] + distance * np.cos(angle), tag[1] + distance * np.sin(angle))
    h_st = evaluate_channel(paths, config.array, tag, config.physical)
    h_sr = evaluate_channel(paths, config.array, reader, config.physical)
    h_tr = friis_channel(max(distance, config.physical.wavelength / 2), config.physical)
    random_phase = rng.uniform(0.0, 2.0 * np.pi)
    random_delta = rng.uniform(0.0, 1.0)
    return LinkSample(h_st=h_st, h_sr=h_sr, h_tr=h_tr, snr_illum=config.scenario.snr_illum), random_phase, random_delta


def run_selfcheck(config: RunConfig, draws: int = SELFCHECK_DRAWS) -> List[SelfCheckResult]:
    worst: Dict[str, float] = {
        "unit_norm": 0.0,
        "zf_null": 0.0,
        "two_state_difference": 0.0,
        "closed_form_mrt": 0.0,
        "closed_form_zf": 0.0,
        "closed_form_cc": 0.0,
        "cc_dominance": 0.0,
    }
    skipped = 0

    for draw in range(draws):
        sample, phi, delta = _draw_link(config, draw)
        try:
            basis = zf_basis(sample.h_st, sample.h_sr)
        except IllConditionedChannelError:
            skipped += 1
            continue
        mrt = mrt_precoder(sample.h_st)
        zf = zf_precoder(basis)
        cc = cc_precoder(basis, phi, delta)
        best, best_value = cc_optimize(basis, sample.h_tr, sample.snr_illum, config.cc)
        precoders = (ref_precoder(), mrt, zf, cc, best)

        for p in precoders:
            worst["unit_norm"] = max(worst["unit_norm"], abs(p.norm_squared - 1.0))
            closed = delta_snr(sample, p)
            gap = abs(closed - delta_snr_general(sample, p))
            relative = gap / closed if closed > 0 else (0.0 if gap == 0 else np.inf)
            worst["two_state_difference"] = max(worst["two_state_difference"], relative)
        null = abs(zf.apply(sample.h_sr)) ** 2 / np.vdot(sample.h_sr, sample.h_sr).real
        worst["zf_null"] = max(worst["zf_null"], null)

        snr = sample.snr_illum
        worst["closed_form_mrt"] = max(
            worst["closed_form_mrt"],
            _relative(float(mrt_closed_form(sample.h_tr, sample.h_st, sample.h_sr, snr)), delta_snr(sample, mrt)),
        )
        q1_power = np.vdot(basis.q1, basis.q1).real
        worst["closed_form_zf"] = max(
            worst["closed_form_zf"],
            _relative(float(zf_closed_form(sample.h_tr, q1_power, snr)), delta_snr(sample, zf)),
        )
        unnormalised = delta * basis.q1 + np.sqrt(1.0 - delta**2) * np.exp(1j * phi) * basis.q2
        alpha_squared = 1.0 / np.vdot(unnormalised, unnormalised).real
        worst["closed_form_cc"] = max(
            worst["closed_form_cc"],
            _relative(float(cc_closed_form(sample.h_tr, alpha_squared, delta, phi, snr)), delta_snr(sample, cc)),
        )
        zf_value = delta_snr(sample, zf)
        worst["cc_dominance"] = max(worst["cc_dominance"], (zf_value - best_value) / zf_value if zf_value > 0 else 0.0)

    target_db = float(linear_to_db(delta_snr_target_for_ber(1e-3)))
    tolerances = {
        "unit_norm": 1e-12,
        "zf_null": 1e-20,
        "two_state_difference": 1e-12,
        "closed_form_mrt": 1e-9,
        "closed_form_zf": 1e-9,
        "closed_form_cc": 1e-9,
        "cc_dominance": 1e-12,
    }
    details = {
        "zf_null": "max |h^SR·p^ZF|²/‖h^SR‖²",
        "cc_dominance": "max relative shortfall of the CC optimum below ZF",
    }
    evaluated = draws - skipped
    results = [
        SelfCheckResult(
            name=name,
            passed=bool(value <= tolerances[name]),
            worst=value,
            tolerance=tolerances[name],
            detail=details.get(name, "max relative deviation") + f" over {evaluated} draws",
        )
        for name, value in worst.items()
    ]
    results.append(
        SelfCheckResult(
            name="ber_calibration",
            passed=bool(abs(target_db - 3.40) <= 0.01),
            worst=abs(target_db - 3.40),
            tolerance=0.01,
            detail=f"ΔSNR target for BER 1e-3 is {target_db:.4f} dB",
        )
    )

    if skipped:
        logger.warning(f"Selfcheck: {skipped} draws skipped for an ill-conditioned ZF basis")
    for result in results:
        log = logger.info if result.passed else logger.error
        log(f"Selfcheck {result.name}: {'pass' if result.passed else 'FAIL'} (worst {result.worst:.3e})")
    return results
