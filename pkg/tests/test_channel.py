import cmath
import math

import numpy as np
import pytest
from scipy.special import j0

from backscatter_sim.core.errors import InvalidParameterError, OutOfModelRangeError
from backscatter_sim.core.streams import Stream, substream
from backscatter_sim.models.channel import (
    PathSet,
    equivalent_channel,
    evaluate_channel,
    evaluate_channels,
    friis_channel,
    sample_independent_channel,
    sample_path_set,
)
from backscatter_sim.schemas.config import PlanarArray


def test_sample_path_set_shapes_and_ranges(rng):
    """One record per path, angles and phases on [0, 2π)"""
    paths = sample_path_set(100, rng)
    assert paths.size == 100
    for angles in (paths.aod, paths.aoa, paths.phases):
        assert angles.shape == (100,)
        assert np.all((angles >= 0) & (angles < 2 * np.pi))
    assert paths.gains.dtype == np.complex128


def test_sample_path_set_rejects_empty(rng):
    with pytest.raises(InvalidParameterError):
        sample_path_set(0, rng)


def test_path_set_is_read_only(rng):
    paths = sample_path_set(4, rng)
    with pytest.raises(ValueError):
        paths.gains[0] = 0


def test_gain_power_is_normalized(rng):
    """Σ|α_m|² averages to 1 over 10⁴ draws"""
    totals = [np.sum(np.abs(sample_path_set(100, rng).gains) ** 2) for _ in range(10_000)]
    assert np.mean(totals) == pytest.approx(1.0, abs=0.03)


def test_same_seed_same_draw(array, phys):
    first = sample_path_set(100, substream(7, Stream.ENVIRONMENT, 3))
    second = sample_path_set(100, substream(7, Stream.ENVIRONMENT, 3))
    other = sample_path_set(100, substream(7, Stream.ENVIRONMENT, 4))
    assert np.array_equal(first.gains, second.gains)
    assert np.array_equal(first.aoa, second.aoa)
    h1 = evaluate_channel(first, array, (0.3, -1.2), phys)
    h2 = evaluate_channel(second, array, (0.3, -1.2), phys)
    assert np.array_equal(h1, h2)
    assert not np.array_equal(first.gains, other.gains)


def test_single_antenna_at_origin(rng, phys):
    paths = sample_path_set(100, rng)
    single = PlanarArray(lines=1, columns=1)
    h = evaluate_channel(paths, single, (0.0, 0.0), phys)
    assert h.shape == (1,)
    assert h[0] == pytest.approx(np.sum(paths.gains * np.exp(1j * paths.phases)), rel=1e-12)


def test_single_path_has_equal_magnitudes(rng, array, phys):
    """With one path only the phase varies across antennas"""
    paths = sample_path_set(1, rng)
    h = evaluate_channel(paths, array, (0.4, 0.1), phys)
    assert np.allclose(np.abs(h), np.abs(paths.gains[0]), rtol=1e-12)


def test_translation_multiplies_each_path(rng, array, phys):
    paths = sample_path_set(1, rng)
    shift = 0.037
    before = evaluate_channel(paths, array, (0.2, 0.5), phys)
    after = evaluate_channel(paths, array, (0.2 + shift, 0.5), phys)
    expected = np.exp(-2j * np.pi * phys.carrier_frequency * shift * np.cos(paths.aoa[0]) / phys.light_speed)
    assert np.allclose(after, before * expected, rtol=1e-10)


def test_shifting_origin_with_points_leaves_channel_unchanged(rng, array, phys):
    """Moving the local origin by Δ is absorbed by the path phases"""
    paths = sample_path_set(100, rng)
    delta = np.array([1.7, -0.4])
    wavenumber = 2 * np.pi / phys.wavelength
    shifted = PathSet(
        gains=paths.gains,
        aod=paths.aod,
        aoa=paths.aoa,
        phases=paths.phases - wavenumber * (delta[0] * np.cos(paths.aoa) + delta[1] * np.sin(paths.aoa)),
    )
    point = np.array([0.3, 0.9])
    original = evaluate_channel(paths, array, tuple(point), phys)
    moved = evaluate_channel(shifted, array, tuple(point - delta), phys)
    assert np.allclose(original, moved, rtol=1e-9, atol=1e-12)


def test_batch_matches_single_point(rng, array, phys):
    paths = sample_path_set(100, rng)
    points = np.array([[0.0, 0.0], [0.1, 0.2], [-3.0, 4.5]])
    batch = evaluate_channels(paths, array, points, phys)
    for row, point in zip(batch, points):
        assert np.allclose(row, evaluate_channel(paths, array, tuple(point), phys), rtol=1e-12)


def test_evaluate_channels_rejects_bad_points(rng, array, phys):
    paths = sample_path_set(10, rng)
    with pytest.raises(InvalidParameterError):
        evaluate_channels(paths, array, np.zeros((3, 3)), phys)
    with pytest.raises(InvalidParameterError):
        evaluate_channels(paths, array, np.array([[np.nan, 0.0]]), phys)


def test_unit_power_per_coefficient(rng, array, phys):
    """Mean |h_k|² = 1 ± 0.05 for every antenna over 10⁴ environments"""
    power = np.zeros(array.num_antennas)
    draws = 10_000
    for _ in range(draws):
        h = evaluate_channel(sample_path_set(100, rng), array, (0.5, 0.5), phys)
        power += np.abs(h) ** 2
    assert np.allclose(power / draws, 1.0, atol=0.05)


def _brute_force_channel(paths, array, point, phys):
    """The multipath sum term by term with Python complex arithmetic"""
    positions = array.element_positions(phys)
    wavelength = phys.light_speed / phys.carrier_frequency
    values = []
    for xk, yk in positions:
        total = 0j
        for m in range(paths.size):
            theta = (
                (xk - positions[0][0]) * math.cos(paths.aod[m])
                + (yk - positions[0][1]) * math.sin(paths.aod[m])
                + point[0] * math.cos(paths.aoa[m])
                + point[1] * math.sin(paths.aoa[m])
            )
            total += complex(paths.gains[m]) * cmath.exp(-2j * math.pi * theta / wavelength + 1j * paths.phases[m])
        values.append(total)
    return np.array(values)


def test_matches_brute_force_sum(rng, phys):
    small = PlanarArray(lines=2, columns=3)
    paths = sample_path_set(20, rng)
    expected = _brute_force_channel(paths, small, (0.7, -0.3), phys)
    assert np.allclose(evaluate_channel(paths, small, (0.7, -0.3), phys), expected, rtol=1e-9)


def test_spatial_correlation_half_wavelength(rng, phys):
    """Two points λ/2 apart decorrelate like J0(π) under uniform arrivals"""
    single = PlanarArray(lines=1, columns=1)
    half = phys.wavelength / 2
    fast, brute = [], []
    for _ in range(1000):
        paths = sample_path_set(100, rng)
        fast.append(evaluate_channels(paths, single, np.array([[0.0, 0.0], [half, 0.0]]), phys)[:, 0])
        brute.append(
            [
                _brute_force_channel(paths, single, (0.0, 0.0), phys)[0],
                _brute_force_channel(paths, single, (half, 0.0), phys)[0],
            ]
        )

    def correlation(samples):
        samples = np.asarray(samples)
        a, b = samples[:, 0], samples[:, 1]
        return np.mean(a * np.conj(b)) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))

    assert abs(correlation(fast) - correlation(brute)) < 0.05
    assert correlation(fast).real == pytest.approx(j0(np.pi), abs=0.12)


def test_independent_channel_is_unit_power(rng):
    draws = np.array([sample_independent_channel(64, 100, rng) for _ in range(2000)])
    assert draws.shape == (2000, 64)
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(1.0, abs=0.02)
    # Distinct antennas are uncorrelated
    assert abs(np.mean(draws[:, 0] * np.conj(draws[:, 1]))) < 0.1


def test_friis_at_one_wavelength(phys):
    h = friis_channel(phys.wavelength, phys)
    assert abs(h) == pytest.approx(1 / (4 * np.pi), rel=1e-12)
    assert h.imag == pytest.approx(0.0, abs=1e-12)
    assert h.real > 0


def test_friis_at_one_meter(phys):
    h = friis_channel(1.0, phys)
    assert abs(h) == pytest.approx(0.0099404, rel=1e-4)
    assert 20 * np.log10(abs(h)) == pytest.approx(-40.05, abs=0.01)


def test_friis_inverse_distance(phys):
    assert abs(friis_channel(3.0, phys)) == pytest.approx(abs(friis_channel(1.5, phys)) / 2, rel=1e-12)


def test_friis_far_field_bound(phys):
    friis_channel(phys.wavelength / 2, phys)
    with pytest.raises(OutOfModelRangeError):
        friis_channel(phys.wavelength / 2 * 0.999, phys)


def test_equivalent_channel(link_channels, rng):
    h_st, h_sr = link_channels(rng)
    h_tr = 0.02 - 0.01j
    assert np.array_equal(equivalent_channel(0.0, h_tr, h_st, h_sr), h_sr)
    assert np.allclose(equivalent_channel(1.0, h_tr, h_st, np.zeros_like(h_sr)), h_tr * h_st)
    generic = equivalent_channel(0.7, h_tr, h_st, h_sr)
    for k in range(len(h_st)):
        assert generic[k] == pytest.approx(0.7 * h_tr * h_st[k] + h_sr[k], rel=1e-14)
    # linear in γ
    difference = equivalent_channel(0.7, h_tr, h_st, h_sr) - equivalent_channel(0.0, h_tr, h_st, h_sr)
    assert np.allclose(difference, 0.7 * h_tr * h_st, rtol=1e-12, atol=1e-15)


def test_equivalent_channel_length_mismatch():
    with pytest.raises(InvalidParameterError):
        equivalent_channel(1.0, 0.1, np.ones(4, dtype=complex), np.ones(5, dtype=complex))


def test_path_set_text_round_trip(rng):
    paths = sample_path_set(12, rng)
    restored = PathSet.from_text(paths.to_text())
    assert np.array_equal(restored.gains, paths.gains)
    assert np.array_equal(restored.phases, paths.phases)
