"""Frequency-domain MIMO channel generation and application.

The channel is a tapped-delay-line Rayleigh model: i.i.d. complex Gaussian
taps with an exponential power-delay profile, transformed to a per-subcarrier
frequency response. Time variation is either block fading or a per-symbol
AR(1) process whose lag-1 autocorrelation matches the Jakes spectrum,
rho = J0(2*pi*f_d*T_sym).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import j0

__all__ = [
    "CorrelationModel",
    "ChannelProfile",
    "ChannelRealization",
    "generate_channel",
    "apply_channel",
    "complex_noise",
    "ar1_coefficient",
    "freq_autocorrelation",
]

SPEED_OF_LIGHT = 299_792_458.0

# Exponential PDP rate putting the last of 8 taps 15 dB below the first.
_DEFAULT_TAPS = 8
_DEFAULT_DECAY = 1.5 * math.log(10.0) / (_DEFAULT_TAPS - 1)


class CorrelationModel(Enum):
    BLOCK_FADING = "block_fading"
    JAKES_AR1 = "jakes_ar1"


@dataclass(frozen=True)
class ChannelProfile:
    """Statistical description of the fading process."""

    num_taps: int = _DEFAULT_TAPS
    pdp_decay: float = _DEFAULT_DECAY
    velocity: float = 3.0
    carrier_frequency: float = 3.5e9
    subcarrier_spacing: float = 30e3
    correlation_model: CorrelationModel = CorrelationModel.JAKES_AR1
    fft_size: int = 128

    def __post_init__(self):
        if self.num_taps < 1:
            raise ValueError("num_taps must be positive")
        if self.pdp_decay <= 0:
            raise ValueError("pdp_decay must be positive")
        if not (1.0 <= self.velocity <= 10.0):
            raise ValueError("velocity must be in [1, 10] m/s")
        if self.fft_size < self.num_taps:
            raise ValueError("fft_size must cover the delay spread")
        if self.max_doppler_hz >= self.subcarrier_spacing / 10.0:
            raise ValueError("Doppler too large for the per-RE channel model")

    @property
    def max_doppler_hz(self) -> float:
        return self.velocity * self.carrier_frequency / SPEED_OF_LIGHT

    @property
    def symbol_duration(self) -> float:
        # CP ignored for Doppler purposes.
        return 1.0 / self.subcarrier_spacing

    def tap_powers(self) -> np.ndarray:
        p = np.exp(-self.pdp_decay * np.arange(self.num_taps))
        return p / p.sum()


@dataclass
class ChannelRealization:
    """Per-user frequency-domain channels, each (n_F, n_T, N_R, N_T_k)."""

    per_user: list[np.ndarray]

    def __post_init__(self):
        for h in self.per_user:
            if h.ndim != 4:
                raise ValueError("user channels must be 4-D (n_F, n_T, N_R, N_T)")


def ar1_coefficient(max_doppler_hz: float, symbol_duration: float) -> float:
    """Lag-1 time correlation of the Jakes spectrum."""
    return float(j0(2.0 * math.pi * max_doppler_hz * symbol_duration))


def freq_autocorrelation(profile: ChannelProfile, lag: int) -> complex:
    """Analytic frequency autocorrelation of the tapped-delay response."""
    p = profile.tap_powers()
    taps = np.arange(profile.num_taps)
    return complex(np.sum(p * np.exp(-2j * np.pi * lag * taps / profile.fft_size)))


def generate_channel(
    profile: ChannelProfile,
    n_subcarriers: int,
    n_symbols: int,
    n_rx: int,
    n_tx: int,
    seed: int,
) -> np.ndarray:
    """Draw one channel realization of shape (n_F, n_T, N_R, N_T).

    Each (rx, tx) pair gets independent Rayleigh taps; E[|H|^2] = 1 per
    coefficient by the unit-power PDP.
    """
    rng = np.random.default_rng(seed)
    p = profile.tap_powers()
    scale = np.sqrt(p / 2.0)[:, None, None]
    L = profile.num_taps

    def draw():
        return rng.standard_normal((L, n_rx, n_tx)) + 1j * rng.standard_normal((L, n_rx, n_tx))

    taps = np.empty((n_symbols, L, n_rx, n_tx), dtype=np.complex128)
    taps[0] = scale * draw()
    if profile.correlation_model is CorrelationModel.BLOCK_FADING:
        taps[1:] = taps[0]
    else:
        rho = ar1_coefficient(profile.max_doppler_hz, profile.symbol_duration)
        innov = math.sqrt(max(0.0, 1.0 - rho * rho))
        for t in range(1, n_symbols):
            taps[t] = rho * taps[t - 1] + innov * scale * draw()

    # Delay -> frequency: tap l contributes exp(-2j*pi*i*l/N_fft) at subcarrier i.
    grid = np.exp(
        -2j
        * np.pi
        * np.arange(n_subcarriers)[:, None]
        * np.arange(L)[None, :]
        / profile.fft_size
    )
    h = np.einsum("fl,tlrs->ftrs", grid, taps)
    return h


def complex_noise(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Unit-variance circular complex Gaussian field."""
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def apply_channel(
    user_values: list[np.ndarray],
    channels: ChannelRealization | list[np.ndarray],
    noise_variance: float,
    seed: int | None = None,
    noise_field: np.ndarray | None = None,
) -> np.ndarray:
    """Received grid y = sum_k H_k x_k + n, per Eq. of the system model.

    ``noise_field`` may supply a precomputed unit-variance realization so
    that sweeps can scale the same noise across SNR points; otherwise it is
    drawn from ``seed``.
    """
    per_user = channels.per_user if isinstance(channels, ChannelRealization) else channels
    if len(user_values) != len(per_user):
        raise ValueError("one channel tensor per user grid required")
    n_f, n_t, n_rx = per_user[0].shape[:3]
    y = np.zeros((n_f, n_t, n_rx), dtype=np.complex128)
    for x, h in zip(user_values, per_user):
        if x.shape[:2] != (n_f, n_t) or h.shape[3] != x.shape[2]:
            raise ValueError(
                f"grid shape {x.shape} inconsistent with channel shape {h.shape}"
            )
        y += np.einsum("ftrs,fts->ftr", h, x)
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    if noise_variance > 0 or noise_field is not None:
        if noise_field is None:
            if seed is None:
                raise ValueError("seed required when drawing noise")
            noise_field = complex_noise(y.shape, seed)
        elif noise_field.shape != y.shape:
            raise ValueError("noise_field shape mismatch")
        y = y + np.sqrt(noise_variance) * noise_field
    return y
