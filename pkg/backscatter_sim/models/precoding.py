"""Transmit precoders built from the known channels h^ST and h^SR.

REF uses a single antenna, MRT focuses a hot spot on the tag, ZF adds a
quiet spot on the reader, CC steers a phase-aligned second hot spot onto
the reader. h^TR is never needed to build a precoder; only the CC grid
search consumes the ΔSNR the reader measures for each grid point.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from backscatter_sim.core.errors import (
    DegenerateChannelError,
    IllConditionedChannelError,
    InvalidParameterError,
)
from backscatter_sim.models.channel import ChannelVector
from backscatter_sim.models.metrics import cc_closed_form
from backscatter_sim.schemas.config import CcGrid, ModulationFactor, PrecoderKind

# Largest accepted condition number of H·H†
ILL_CONDITIONED_LIMIT = 1e12


@dataclass(frozen=True)
class CcParams:
    phi: float
    delta: float


@dataclass(frozen=True, eq=False)
class Precoder:
    weights: np.ndarray
    kind: PrecoderKind
    cc_params: Optional[CcParams] = None

    def __post_init__(self):
        weights = np.array(self.weights, dtype=complex).reshape(-1)
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.weights, self.weights).real)

    def apply(self, h):
        """h·p for a channel vector (or a stack of them along the last axis).

        REF only drives antenna 1, so it reads the first coefficient of a
        full-array channel.
        """
        h = np.asarray(h)
        if self.kind is PrecoderKind.REF:
            return h[..., 0] * self.weights[0]
        if h.shape[-1] != self.size:
            raise InvalidParameterError(
                f"{self.kind.value} precoder has {self.size} weights, channel has {h.shape[-1]} coefficients"
            )
        return h @ self.weights


@dataclass(frozen=True, eq=False)
class ZfBasis:
    """Columns of Q = H†(HH†)⁻¹ for H = [h^ST; h^SR]"""

    q1: np.ndarray
    q2: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.q1, self.q2])


@dataclass(frozen=True, eq=False)
class BasisGram:
    """Gram quantities of the ZF basis, Q†Q = (HH†)⁻¹, for one or many reader positions.

    ``q1_power`` = ‖q1‖², ``q2_power`` = ‖q2‖², ``cross`` = q1†q2. Entries
    flagged ``ill_conditioned`` hold zeros.
    """

    q1_power: np.ndarray
    q2_power: np.ndarray
    cross: np.ndarray
    ill_conditioned: np.ndarray

    @classmethod
    def from_basis(cls, basis: ZfBasis) -> "BasisGram":
        return cls(
            q1_power=np.asarray(np.vdot(basis.q1, basis.q1).real),
            q2_power=np.asarray(np.vdot(basis.q2, basis.q2).real),
            cross=np.asarray(np.vdot(basis.q1, basis.q2)),
            ill_conditioned=np.asarray(False),
        )

    @classmethod
    def from_channels(cls, h_st: ChannelVector, h_sr: np.ndarray) -> "BasisGram":
        """Closed-form 2×2 inverse of HH† for a fixed tag and many reader channels (N, K)"""
        h_st = np.asarray(h_st)
        h_sr = np.asarray(h_sr)
        st_power = np.vdot(h_st, h_st).real
        sr_power = np.sum(np.abs(h_sr) ** 2, axis=-1)
        coupling = h_sr.conj() @ h_st
        determinant = st_power * sr_power - np.abs(coupling) ** 2
        largest = 0.5 * (st_power + sr_power) + np.sqrt(0.25 * (st_power - sr_power) ** 2 + np.abs(coupling) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            condition = largest**2 / determinant
            ill = ~(determinant > 0) | ~(condition <= ILL_CONDITIONED_LIMIT)
            safe = np.where(ill, 1.0, determinant)
            return cls(
                q1_power=np.where(ill, 0.0, sr_power / safe),
                q2_power=np.where(ill, 0.0, st_power / safe),
                cross=np.where(ill, 0.0, -coupling / safe),
                ill_conditioned=ill,
            )


def ref_precoder() -> Precoder:
    return Precoder(weights=np.array([1.0 + 0j]), kind=PrecoderKind.REF)


def mrt_precoder(h_st: ChannelVector) -> Precoder:
    """p = (h^ST)†/‖h^ST‖, a hot spot on the tag"""
    h_st = np.asarray(h_st, dtype=complex)
    norm = np.linalg.norm(h_st)
    if norm == 0.0:
        raise DegenerateChannelError("cannot match a precoder to an all-zero tag channel")
    return Precoder(weights=h_st.conj() / norm, kind=PrecoderKind.MRT)


def zf_basis(h_st: ChannelVector, h_sr: ChannelVector) -> ZfBasis:
    h_st = np.asarray(h_st, dtype=complex)
    h_sr = np.asarray(h_sr, dtype=complex)
    if h_st.shape != h_sr.shape:
        raise InvalidParameterError(f"h_st {h_st.shape} and h_sr {h_sr.shape} differ in length")
    if h_st.shape[0] < 2:
        raise InvalidParameterError("zero forcing needs at least two antennas")

    channel = np.vstack([h_st, h_sr])
    gram = channel @ channel.conj().T
    condition = np.linalg.cond(gram)
    if not condition <= ILL_CONDITIONED_LIMIT:
        logger.debug(f"ZF basis rejected, cond(HH†) = {condition:.3e}")
        raise IllConditionedChannelError(
            f"tag and reader channels are nearly collinear (cond(HH†) = {condition:.3e})", condition
        )
    q = channel.conj().T @ np.linalg.inv(gram)
    return ZfBasis(q1=q[:, 0], q2=q[:, 1])


def zf_precoder(basis: ZfBasis) -> Precoder:
    """p = q1/‖q1‖: hot spot on the tag, quiet spot on the reader"""
    return Precoder(weights=basis.q1 / np.linalg.norm(basis.q1), kind=PrecoderKind.ZF)


def cc_precoder(basis: ZfBasis, phi: float, delta: float) -> Precoder:
    """p = α·Q·T·D·S with T = diag(1, e^{jφ}), D = diag(δ, √(1-δ²)), S = [1, 1]ᵀ"""
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameterError(f"power allocation δ must lie in [0, 1], got {delta}")
    phasing = np.diag([1.0, np.exp(1j * phi)])
    allocation = np.diag([delta, np.sqrt(1.0 - delta**2)])
    combining = np.ones((2, 1))
    weights = (basis.matrix @ phasing @ allocation @ combining)[:, 0]
    return Precoder(
        weights=weights / np.linalg.norm(weights),
        kind=PrecoderKind.CC,
        cc_params=CcParams(phi=float(phi), delta=float(delta)),
    )


def cc_grid_gains(
    gram: BasisGram,
    h_tr,
    phases: np.ndarray,
    allocations: np.ndarray,
    modulation: Optional[ModulationFactor] = None,
) -> np.ndarray:
    """ΔSNR/SNR^illum of every CC grid point, shape (..., n_allocations, n_phases).

    With h^ST·p = α·δ and h^SR·p = α·√(1-δ²)·e^{jφ}, only ‖q1‖², ‖q2‖², q1†q2
    and h^TR are needed. δ = 1 reproduces the ZF value exactly.
    """
    delta = np.asarray(allocations, dtype=float)[:, None]
    complement = np.sqrt(1.0 - delta**2)
    phasor = np.exp(1j * np.asarray(phases, dtype=float))[None, :]

    q1_power = np.asarray(gram.q1_power)[..., None, None]
    q2_power = np.asarray(gram.q2_power)[..., None, None]
    cross = np.asarray(gram.cross)[..., None, None]
    norm = delta**2 * q1_power + complement**2 * q2_power + 2.0 * delta * complement * (phasor * cross).real

    with np.errstate(divide="ignore", invalid="ignore"):
        alpha_squared = np.where(norm > 0, 1.0 / np.where(norm > 0, norm, 1.0), 0.0)
    h_tr = np.asarray(h_tr)[..., None, None]
    return cc_closed_form(
        h_tr, alpha_squared, delta, np.asarray(phases, dtype=float)[None, :], modulation=modulation
    )


def zf_gains(gram: BasisGram, h_tr, modulation: Optional[ModulationFactor] = None) -> np.ndarray:
    """ΔSNR/SNR^illum for ZF, evaluated as the (φ=0, δ=1) CC grid point"""
    return cc_grid_gains(gram, h_tr, np.zeros(1), np.ones(1), modulation)[..., 0, 0]


def cc_delta_snr_grid(
    basis: ZfBasis,
    h_tr: complex,
    snr_illum: float,
    grid: CcGrid,
    modulation: Optional[ModulationFactor] = None,
) -> np.ndarray:
    """ΔSNR table a reader would measure over the CC pilot sweep, shape (δ, φ)"""
    gram = BasisGram.from_basis(basis)
    return cc_grid_gains(gram, h_tr, grid.phases, grid.allocations, modulation) * snr_illum


def cc_optimize(
    basis: ZfBasis,
    h_tr: complex,
    snr_illum: float,
    grid: CcGrid,
    modulation: Optional[ModulationFactor] = None,
) -> Tuple[Precoder, float]:
    """Grid point maximising ΔSNR; ties go to the smallest (δ index, φ index)"""
    table = cc_delta_snr_grid(basis, h_tr, snr_illum, grid, modulation)
    best = int(np.argmax(table))
    delta_index, phase_index = np.unravel_index(best, table.shape)
    precoder = cc_precoder(basis, grid.phases[phase_index], grid.allocations[delta_index])
    return precoder, float(table[delta_index, phase_index])
