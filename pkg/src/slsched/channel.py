"""Link-level modeling: urban-microcell path loss, Rician fading, Shannon rates.

Path loss follows the two-slope street-canyon forms of 3GPP TR 38.901 with a
max() rule between the LOS curve and the NLOS fit. The dB formulas take the
carrier frequency in GHz; wavelength and breakpoint distance use Hz. Fading
composes a deterministic unit-magnitude line-of-sight phasor with a complex
Gaussian scattered term, weighted by the Rician K-factor.

All functions are pure; random sampling takes a caller-owned numpy Generator.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_S = 3.0e8

# Thermal noise floor near 290 K (-174 dBm/Hz). Calibrated budgets back-solve
# transmit power against this value, so the absolute level cancels out of the
# resulting rates.
DEFAULT_NOISE_W_PER_HZ = 10.0 ** (-174.0 / 10.0) * 1e-3


@dataclass(frozen=True)
class LinkGeometry:
    """Placement of one transmitter/receiver pair.

    d3d_m is the 3D separation in meters, h_t_m and h_r_m the antenna heights
    in meters (transmitter strictly above receiver), fc_ghz the carrier
    frequency in GHz.
    """

    d3d_m: float
    h_t_m: float
    h_r_m: float
    fc_ghz: float

    def __post_init__(self) -> None:
        if not self.d3d_m > 0:
            raise ValueError(f"d3d_m must be > 0, got {self.d3d_m}")
        if not self.h_t_m > self.h_r_m > 0:
            raise ValueError(
                "antenna heights must satisfy h_t > h_r > 0, got "
                f"h_t={self.h_t_m}, h_r={self.h_r_m}"
            )
        if not self.fc_ghz > 0:
            raise ValueError(f"fc_ghz must be > 0, got {self.fc_ghz}")

    @property
    def fc_hz(self) -> float:
        return self.fc_ghz * 1e9

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.fc_hz


@dataclass(frozen=True)
class ChannelRealization:
    """One small-scale fading draw: complex gain plus the parameters used."""

    h: complex
    k_factor: float
    nlos_power_scale: float

    def __post_init__(self) -> None:
        if self.k_factor < 0:
            raise ValueError(f"k_factor must be >= 0, got {self.k_factor}")
        if not self.nlos_power_scale > 0:
            raise ValueError(
                f"nlos_power_scale must be > 0, got {self.nlos_power_scale}"
            )

    @property
    def power_gain(self) -> float:
        """|h|^2."""
        return abs(self.h) ** 2


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power, noise density, bandwidth, and path loss for one link."""

    tx_power_w: float
    noise_spectral_density_w_per_hz: float
    bandwidth_hz: float
    pathloss_db: float

    def __post_init__(self) -> None:
        if not self.tx_power_w > 0:
            raise ValueError(f"tx_power_w must be > 0, got {self.tx_power_w}")
        if not self.noise_spectral_density_w_per_hz > 0:
            raise ValueError("noise_spectral_density_w_per_hz must be > 0")
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        if self.pathloss_db < 0:
            raise ValueError(f"pathloss_db must be >= 0, got {self.pathloss_db}")


def breakpoint_distance(geometry: LinkGeometry) -> float:
    """Two-slope breakpoint distance in meters: 4 * h_t * h_r * fc / c."""
    return 4.0 * geometry.h_t_m * geometry.h_r_m * geometry.fc_hz / SPEED_OF_LIGHT_M_S


def pathloss_los(geometry: LinkGeometry) -> float:
    """Line-of-sight path loss in dB.

    Below the breakpoint the distance slope is 21 dB/decade; above it the
    slope steepens to 40 dB/decade with a correction term
    9.5 * log10(d_bp^2 + (h_t - h_r)^2).
    """
    d_bp = breakpoint_distance(geometry)
    base = 32.4 + 20.0 * math.log10(geometry.fc_ghz)
    if geometry.d3d_m <= d_bp:
        return base + 21.0 * math.log10(geometry.d3d_m)
    correction = 9.5 * math.log10(d_bp**2 + (geometry.h_t_m - geometry.h_r_m) ** 2)
    return base + 40.0 * math.log10(geometry.d3d_m) - correction


def pathloss_nlos(geometry: LinkGeometry) -> float:
    """Non-line-of-sight path loss in dB: max of the LOS curve and the NLOS fit."""
    nlos = (
        22.4
        + 35.3 * math.log10(geometry.d3d_m)
        + 21.3 * math.log10(geometry.fc_ghz)
        - 0.3 * (geometry.h_r_m - 1.5)
    )
    return max(pathloss_los(geometry), nlos)


def sample_rician(
    geometry: LinkGeometry,
    k_factor: float,
    nlos_power_scale: float = 1.0,
    rng: np.random.Generator | None = None,
) -> ChannelRealization:
    """Draw one Rician channel gain.

    h = sqrt(K/(K+1)) * exp(-j*2*pi*d/lambda) + sqrt(1/(K+1)) * z, where z is
    complex Gaussian with total variance nlos_power_scale. The mean power is
    therefore K/(K+1) + nlos_power_scale/(K+1), exactly 1 at unit scale.
    """
    if rng is None:
        raise ValueError("sample_rician requires an explicit numpy Generator")
    if k_factor < 0:
        raise ValueError(f"k_factor must be >= 0, got {k_factor}")
    if not nlos_power_scale > 0:
        raise ValueError(f"nlos_power_scale must be > 0, got {nlos_power_scale}")
    los = cmath.exp(-2j * math.pi * geometry.d3d_m / geometry.wavelength_m)
    sigma = math.sqrt(nlos_power_scale / 2.0)
    scattered = complex(rng.normal(0.0, sigma), rng.normal(0.0, sigma))
    w_los = math.sqrt(k_factor / (k_factor + 1.0))
    w_nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return ChannelRealization(
        h=w_los * los + w_nlos * scattered,
        k_factor=k_factor,
        nlos_power_scale=nlos_power_scale,
    )


def snr_linear(budget: LinkBudget, channel_power_gain: float = 1.0) -> float:
    """Linear SNR: P_t * |h|^2 * 10^(-PL/10) / (N0 * B)."""
    attenuation = 10.0 ** (-budget.pathloss_db / 10.0)
    noise_w = budget.noise_spectral_density_w_per_hz * budget.bandwidth_hz
    return budget.tx_power_w * channel_power_gain * attenuation / noise_w


def link_rate(budget: LinkBudget, realization: ChannelRealization) -> float:
    """Shannon rate in bit/s: B * log2(1 + SNR)."""
    return budget.bandwidth_hz * math.log2(1.0 + snr_linear(budget, realization.power_gain))


def calibrated_budget(
    target_snr_db: float,
    bandwidth_hz: float,
    pathloss_db: float = 0.0,
    noise_spectral_density_w_per_hz: float = DEFAULT_NOISE_W_PER_HZ,
) -> LinkBudget:
    """Back-solve the transmit power so SNR at unit channel gain hits the target.

    The returned budget satisfies snr_linear(budget, 1.0) == 10^(target/10) up
    to floating-point round-off.
    """
    if not bandwidth_hz > 0:
        raise ValueError(f"bandwidth_hz must be > 0, got {bandwidth_hz}")
    if pathloss_db < 0:
        raise ValueError(f"pathloss_db must be >= 0, got {pathloss_db}")
    target_linear = 10.0 ** (target_snr_db / 10.0)
    noise_w = noise_spectral_density_w_per_hz * bandwidth_hz
    tx_power_w = target_linear * noise_w * 10.0 ** (pathloss_db / 10.0)
    return LinkBudget(
        tx_power_w=tx_power_w,
        noise_spectral_density_w_per_hz=noise_spectral_density_w_per_hz,
        bandwidth_hz=bandwidth_hz,
        pathloss_db=pathloss_db,
    )
