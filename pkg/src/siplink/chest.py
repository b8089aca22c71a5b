"""Channel estimation.

Superimposed-pilot least squares is a per-RE de-spread by the conjugate
pilot; the data-to-pilot interference it leaves behind is suppressed by a
sliding-window mean over (W_f, W_t) resource elements. Orthogonal DMRS uses
FD-OCC de-spreading over comb pairs followed by time interpolation and a
frequency moving average.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .waveform import OrthDmrsConfig, _base_sequence, _comb_subcarriers

__all__ = [
    "EstimateProvenance",
    "WindowSchedule",
    "ChannelEstimate",
    "ls_estimate_sip",
    "smooth",
    "ls_estimate_orthogonal",
    "interpolate",
]


class EstimateProvenance(Enum):
    RAW_LS = "raw_ls"
    SMOOTHED = "smoothed"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class WindowSchedule:
    """Ordered smoothing windows; the length fixes the iteration count."""

    windows: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple((int(f), int(t)) for f, t in self.windows))
        if not self.windows:
            raise ValueError("window schedule must not be empty")
        for w_f, w_t in self.windows:
            if w_f < 2 or w_t < 2 or w_f % 2 or w_t % 2:
                raise ValueError(f"window sizes must be positive even integers, got {(w_f, w_t)}")

    def __len__(self) -> int:
        return len(self.windows)

    def validate_for_grid(self, n_subcarriers: int, n_symbols: int) -> None:
        for w_f, w_t in self.windows:
            if w_f > 2 * n_subcarriers or w_t > 2 * n_symbols:
                raise ValueError(f"window {(w_f, w_t)} too large for grid")


@dataclass
class ChannelEstimate:
    """Channel estimate for one user, full grid (n_F, n_T, N_R, N_T).

    For orthogonal DMRS the raw LS estimate is only defined at DMRS
    positions; ``sample_subcarriers``/``sample_symbols`` record per-layer
    where the values are meaningful (other entries are zero).
    """

    values: np.ndarray
    provenance: EstimateProvenance
    iteration_index: int = 0
    sample_subcarriers: list[np.ndarray] | None = None
    sample_symbols: np.ndarray | None = None

    def __post_init__(self):
        if self.values.ndim != 4:
            raise ValueError("estimate must have shape (n_F, n_T, N_R, N_T)")
        if not np.isfinite(self.values).all():
            raise ValueError("estimate contains non-finite values")


# ---------------------------------------------------------------------------
# Superimposed-pilot LS
# ---------------------------------------------------------------------------


def ls_estimate_sip(y: np.ndarray, pilots: np.ndarray, power_ratio: float) -> ChannelEstimate:
    """Per-RE least squares against one user's superimposed pilots.

    H_hat[i,j,r,s] = y[i,j,r] * conj(p[i,j,s]) / sqrt(power_ratio); the data
    of all users leaks into this raw estimate and is handled by smoothing.
    """
    if power_ratio <= 0.0:
        raise ValueError("power_ratio must be positive for pilot-based estimation")
    values = np.einsum("ftr,fts->ftrs", y, pilots.conj()) / np.sqrt(power_ratio)
    return ChannelEstimate(values=values, provenance=EstimateProvenance.RAW_LS)


# ---------------------------------------------------------------------------
# Sliding-window smoothing
# ---------------------------------------------------------------------------


def _box_mean(values: np.ndarray, w_f: int, w_t: int) -> np.ndarray:
    """Mean over the window [i-w_f/2+1, i+w_f/2] x [j-w_t/2+1, j+w_t/2].

    The window is clipped at grid edges and renormalized by the number of
    included REs, which keeps constant fields exactly constant.
    """
    n_f, n_t = values.shape[:2]
    # Even widths follow the asymmetric window definition; odd widths are
    # centered (only used by the interpolation path).
    lo_f = w_f // 2 - 1 if w_f % 2 == 0 else (w_f - 1) // 2
    hi_f = w_f // 2
    lo_t = w_t // 2 - 1 if w_t % 2 == 0 else (w_t - 1) // 2
    hi_t = w_t // 2

    acc = np.zeros((n_f + 1, n_t + 1) + values.shape[2:], dtype=values.dtype)
    acc[1:, 1:] = values
    acc = acc.cumsum(axis=0).cumsum(axis=1)

    i = np.arange(n_f)
    j = np.arange(n_t)
    f0 = np.clip(i - lo_f, 0, n_f)
    f1 = np.clip(i + hi_f + 1, 0, n_f)
    t0 = np.clip(j - lo_t, 0, n_t)
    t1 = np.clip(j + hi_t + 1, 0, n_t)

    sums = (
        acc[f1[:, None], t1[None, :]]
        - acc[f0[:, None], t1[None, :]]
        - acc[f1[:, None], t0[None, :]]
        + acc[f0[:, None], t0[None, :]]
    )
    counts = ((f1 - f0)[:, None] * (t1 - t0)[None, :]).astype(np.float64)
    return sums / counts.reshape(counts.shape + (1,) * (values.ndim - 2))


def smooth(est: ChannelEstimate, window: tuple[int, int]) -> ChannelEstimate:
    """Apply the sliding-window mean to an estimate."""
    w_f, w_t = window
    if w_f < 1 or w_t < 1:
        raise ValueError("window sizes must be positive")
    values = _box_mean(est.values, w_f, w_t)
    return replace(est, values=values, provenance=EstimateProvenance.SMOOTHED)


# ---------------------------------------------------------------------------
# Orthogonal DMRS LS + interpolation
# ---------------------------------------------------------------------------


def ls_estimate_orthogonal(y: np.ndarray, cfg: OrthDmrsConfig) -> ChannelEstimate:
    """FD-OCC de-spread least squares at the DMRS positions.

    Each comb pair is averaged after removing the port's cover code and base
    sequence, assuming the channel is constant over the pair; the pair value
    is assigned to both comb REs. The two ports of a CDM group separate
    exactly; the estimation noise variance per coefficient is sigma^2 / 2.
    """
    n_f, n_t, n_rx = y.shape
    syms = np.asarray(cfg.dmrs_symbol_indices)
    if syms.max() >= n_t:
        raise ValueError("DMRS symbol index outside the received grid")
    n_layers = len(cfg.port_assignment)
    n_comb = (n_f + 1) // 2
    base = _base_sequence(cfg, n_comb, syms.size)

    values = np.zeros((n_f, n_t, n_rx, n_layers), dtype=np.complex128)
    sample_sc: list[np.ndarray] = []
    for layer, port in enumerate(cfg.port_assignment):
        group = cfg.port_group(port)
        occ = cfg.port_occ(port)
        sc = _comb_subcarriers(cfg, group, n_f)
        n_pairs = sc.size // 2
        pair_sc = sc[: 2 * n_pairs].reshape(n_pairs, 2)
        seq = base[group, : sc.size, :][: 2 * n_pairs].reshape(n_pairs, 2, syms.size)
        w = np.array(occ)
        # (pairs, 2, syms, rx): received DMRS REs for this group
        y_d = y[pair_sc][:, :, syms, :]
        despread = 0.5 * np.einsum(
            "pmtr,pmt,m->ptr", y_d, seq.conj(), np.conj(w)
        )
        for t, j in enumerate(syms):
            values[pair_sc[:, 0], j, :, layer] = despread[:, t]
            values[pair_sc[:, 1], j, :, layer] = despread[:, t]
        sample_sc.append(pair_sc.reshape(-1))
    return ChannelEstimate(
        values=values,
        provenance=EstimateProvenance.RAW_LS,
        sample_subcarriers=sample_sc,
        sample_symbols=syms,
    )


def _time_interp_matrix(n_symbols: int, sample_symbols: np.ndarray) -> np.ndarray:
    """Linear interpolation weights from DMRS symbols to all symbols.

    Nearest-hold before the first and after the last DMRS symbol.
    """
    s = np.asarray(sample_symbols, dtype=np.float64)
    t = np.arange(n_symbols, dtype=np.float64)
    w = np.zeros((n_symbols, s.size))
    if s.size == 1:
        w[:, 0] = 1.0
        return w
    idx = np.clip(np.searchsorted(s, t, side="right") - 1, 0, s.size - 2)
    left = s[idx]
    right = s[idx + 1]
    frac = np.clip((t - left) / (right - left), 0.0, 1.0)
    w[np.arange(n_symbols), idx] = 1.0 - frac
    w[np.arange(n_symbols), idx + 1] += frac
    return w


def interpolate(est: ChannelEstimate, w_f_interp: int = 4) -> ChannelEstimate:
    """Fill a DMRS-sampled estimate to the full grid.

    Linear interpolation across time between DMRS symbols, linear fill across
    frequency from the comb positions, then a frequency moving average of
    width ``w_f_interp``.
    """
    if est.sample_subcarriers is None or est.sample_symbols is None:
        raise ValueError("interpolate needs an estimate sampled at DMRS REs")
    n_f, n_t, n_rx, n_layers = est.values.shape
    t_mat = _time_interp_matrix(n_t, est.sample_symbols)

    out = np.empty_like(est.values)
    all_f = np.arange(n_f, dtype=np.float64)
    for layer in range(n_layers):
        sc = est.sample_subcarriers[layer]
        sampled = est.values[:, :, :, layer][np.ix_(sc, est.sample_symbols)]
        timed = np.einsum("ts,fsr->ftr", t_mat, sampled)
        filled = np.empty((n_f, n_t, n_rx), dtype=est.values.dtype)
        for r in range(n_rx):
            re_part = np.array(
                [np.interp(all_f, sc, timed[:, t, r].real) for t in range(n_t)]
            ).T
            im_part = np.array(
                [np.interp(all_f, sc, timed[:, t, r].imag) for t in range(n_t)]
            ).T
            filled[:, :, r] = re_part + 1j * im_part
        out[:, :, :, layer] = _box_mean(filled, w_f_interp, 1) if w_f_interp > 1 else filled
    return ChannelEstimate(
        values=out,
        provenance=EstimateProvenance.INTERPOLATED,
        iteration_index=est.iteration_index,
    )
