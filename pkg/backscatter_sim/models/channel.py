"""Spatially correlated multipath channel, Friis tag-to-reader link and
equivalent backscatter channel.

One ``PathSet`` is a single draw of the M-path scattering environment. It is
evaluated at any local point Z of the tag/reader area; evaluating the same
PathSet at the tag and at the reader is what correlates the two channels.
"""

import io
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
import numpy.typing as npt
from loguru import logger

from backscatter_sim.core.errors import InvalidParameterError, OutOfModelRangeError
from backscatter_sim.schemas.config import PhysicalConfig, PlanarArray

ChannelVector = npt.NDArray[np.complex128]

PATH_SET_HEADER = "index,gain_re,gain_im,aod,aoa,phase"


class FieldPoint(NamedTuple):
    """Local coordinates (m) relative to the tag/reader area origin"""

    x: float
    y: float


@dataclass(frozen=True, eq=False)
class PathSet:
    gains: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        size = np.shape(self.gains)
        if len(size) != 1 or size[0] < 1:
            raise InvalidParameterError("a PathSet needs at least one path")
        for name in ("aod", "aoa", "phases"):
            if np.shape(getattr(self, name)) != size:
                raise InvalidParameterError(f"PathSet field {name} does not match {size[0]} paths")
        for name, dtype in (("gains", complex), ("aod", float), ("aoa", float), ("phases", float)):
            frozen = np.array(getattr(self, name), dtype=dtype)
            if not np.all(np.isfinite(frozen)):
                raise InvalidParameterError(f"PathSet field {name} holds non-finite values")
            frozen.flags.writeable = False
            object.__setattr__(self, name, frozen)

    @property
    def size(self) -> int:
        return int(self.gains.shape[0])

    def to_text(self) -> str:
        """Structured-text record: one row per path, radians, 17 significant digits"""
        lines = [PATH_SET_HEADER]
        for m in range(self.size):
            values = (self.gains[m].real, self.gains[m].imag, self.aod[m], self.aoa[m], self.phases[m])
            lines.append(",".join([str(m)] + [format(float(v), ".17g") for v in values]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PathSet":
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        order = np.argsort(rows[:, 0], kind="stable")
        rows = rows[order]
        return cls(
            gains=rows[:, 1] + 1j * rows[:, 2],
            aod=rows[:, 3],
            aoa=rows[:, 4],
            phases=rows[:, 5],
        )


def sample_path_set(num_paths: int, rng: np.random.Generator) -> PathSet:
    """Draw one scattering environment.

    Gains are (a + jb)/sqrt(2M) with a, b standard normal so that
    E[|α_m|²] = 1/M; angles and phases are uniform on [0, 2π).
    """
    if num_paths < 1:
        raise InvalidParameterError(f"number of paths must be at least 1, got {num_paths}")
    parts = rng.standard_normal((2, num_paths))
    gains = (parts[0] + 1j * parts[1]) / np.sqrt(2.0 * num_paths)
    aod, aoa, phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, num_paths))
    return PathSet(gains=gains, aod=aod, aoa=aoa, phases=phases)


def _departure_phasors(paths: PathSet, array: PlanarArray, phys: PhysicalConfig) -> np.ndarray:
    positions = array.element_positions(phys)
    offsets = positions - positions[0]
    wavenumber = 2.0 * np.pi / phys.wavelength
    delay = np.outer(offsets[:, 0], np.cos(paths.aod)) + np.outer(offsets[:, 1], np.sin(paths.aod))
    return np.exp(-1j * wavenumber * delay)


def evaluate_channels(
    paths: PathSet, array: PlanarArray, points: np.ndarray, phys: PhysicalConfig
) -> np.ndarray:
    """Channel vectors at many points at once, shape (N, K)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[-1] != 2:
        raise InvalidParameterError(f"points must have shape (N, 2), got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise InvalidParameterError("field points must be finite")
    wavenumber = 2.0 * np.pi / phys.wavelength
    arrival = np.outer(points[:, 0], np.cos(paths.aoa)) + np.outer(points[:, 1], np.sin(paths.aoa))
    weighted = paths.gains * np.exp(1j * paths.phases) * np.exp(-1j * wavenumber * arrival)
    return weighted @ _departure_phasors(paths, array, phys).T


def evaluate_channel(
    paths: PathSet, array: PlanarArray, point: Union[FieldPoint, tuple], phys: PhysicalConfig
) -> ChannelVector:
    """h^SZ at one point Z:

    h_k = Σ_m α_m exp(-j·2πf·θ_{k,m}/c + j·φ_m)
    θ_{k,m} = Δx_k cos(AoD_m) + Δy_k sin(AoD_m) + x cos(AoA_m) + y sin(AoA_m)
    """
    return evaluate_channels(paths, array, np.asarray([point], dtype=float), phys)[0]


def sample_independent_channel(num_antennas: int, num_paths: int, rng: np.random.Generator) -> ChannelVector:
    """One independent M-path Rayleigh sum per antenna, each evaluated at its own origin.

    Equivalent to drawing ``num_antennas`` PathSets and evaluating each with a
    single-element array at Z = (0, 0); the coefficients are i.i.d. CN(0, 1).
    """
    if num_paths < 1 or num_antennas < 1:
        raise InvalidParameterError("an independent channel needs at least one antenna and one path")
    parts = rng.standard_normal((2, num_antennas, num_paths))
    gains = (parts[0] + 1j * parts[1]) / np.sqrt(2.0 * num_paths)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(num_antennas, num_paths))
    return np.sum(gains * np.exp(1j * phases), axis=1)


def friis_channels(distances, phys: PhysicalConfig) -> np.ndarray:
    """Vectorised Friis channel; callers mask distances below λ/2"""
    wavelength = phys.wavelength
    distances = np.asarray(distances, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return wavelength / (4.0 * np.pi * distances) * np.exp(-2j * np.pi * distances / wavelength)


def friis_channel(d_tr: float, phys: PhysicalConfig) -> complex:
    """h^TR = λ/(4π·d)·exp(-j·2π·d/λ), valid for d ≥ λ/2"""
    if not d_tr >= phys.wavelength / 2:
        logger.debug(f"Friis distance {d_tr} m rejected (λ/2 = {phys.wavelength / 2} m)")
        raise OutOfModelRangeError(f"tag-reader distance {d_tr} m is below the far-field bound λ/2")
    return complex(friis_channels(d_tr, phys))


def equivalent_channel(gamma: float, h_tr: complex, h_st: ChannelVector, h_sr: ChannelVector) -> ChannelVector:
    """h^eq = γ·h^TR·h^ST + h^SR (the large-scale gain lives in SNR^illum)"""
    h_st = np.asarray(h_st)
    h_sr = np.asarray(h_sr)
    if h_st.shape != h_sr.shape:
        raise InvalidParameterError(f"h_st {h_st.shape} and h_sr {h_sr.shape} differ in length")
    return gamma * h_tr * h_st + h_sr
