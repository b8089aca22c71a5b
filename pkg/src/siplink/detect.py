"""Symbol detection and the iterative superimposed-pilot receiver.

The iterative receiver alternates, per user: interference reconstruction
from the previous estimates, pilot-despread LS re-estimation, sliding-window
smoothing, and LMMSE detection, optionally with the LDPC decoder in the
loop. A genie baseline runs the same linear detection with the true channel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fec
from .chest import ChannelEstimate, EstimateProvenance, WindowSchedule, ls_estimate_sip, smooth
from .waveform import Constellation, ReRole, data_positions, fill_data_grid, modulate

__all__ = [
    "EqualizedSymbols",
    "LlrGrid",
    "LLR_CLAMP",
    "NOISE_FLOOR",
    "remove_pilots",
    "lmmse_detect",
    "demap_llr",
    "build_interference",
    "detection_input",
    "one_shot_receive_si",
    "iterative_receive",
    "genie_lmmse_baseline",
]

LLR_CLAMP = 40.0
NOISE_FLOOR = 1e-9


@dataclass
class EqualizedSymbols:
    """Soft symbol estimates for one user with per-RE residual variance."""

    symbols: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        if self.symbols.shape != self.variance.shape:
            raise ValueError("symbols/variance shape mismatch")
        if not np.isfinite(self.symbols).all() or not np.isfinite(self.variance).all():
            raise ValueError("non-finite equalizer output")
        if (self.variance <= 0).any():
            raise ValueError("variance must be positive")


@dataclass
class LlrGrid:
    """Per-user LLR tensors (n_F, n_T, layers, bits); positive means bit 0.

    ``role`` identifies the data-carrying REs; codeword_llrs() serializes one
    user's LLRs in the canonical transmit order for the FEC decoder.
    """

    per_user: list[np.ndarray]
    role: np.ndarray

    def codeword_llrs(self, user: int) -> np.ndarray:
        llr = self.per_user[user]
        ii, jj = data_positions(self.role)
        return llr[ii, jj].reshape(-1)


def _stack_channels(channels: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(channels, axis=3)


def remove_pilots(
    y: np.ndarray,
    estimates: list[ChannelEstimate | np.ndarray],
    pilots: list[np.ndarray],
    power_ratio: float,
) -> np.ndarray:
    """Subtract every user's estimated pilot contribution from y."""
    if len(estimates) != len(pilots):
        raise ValueError("one channel estimate per user's pilots required")
    y_clean = y.copy()
    root = np.sqrt(power_ratio)
    for est, p in zip(estimates, pilots):
        h = est.values if isinstance(est, ChannelEstimate) else est
        y_clean -= root * np.einsum("ftrs,fts->ftr", h, p)
    return y_clean


def lmmse_detect(
    t: np.ndarray,
    channels: list[np.ndarray] | np.ndarray,
    noise_variance: float,
) -> list[EqualizedSymbols]:
    """Joint per-RE LMMSE over all supplied users' streams.

    Solves (H^H H + sigma^2 I) d = H^H t per resource element and splits the
    result back per user. The per-stream variance proxy is
    sigma^2 * diag(G^{-1}).
    """
    per_user = [channels] if isinstance(channels, np.ndarray) else list(channels)
    if not np.isfinite(t).all():
        raise ValueError("non-finite detector input")
    h = _stack_channels(per_user)
    n_f, n_t, n_rx, n_streams = h.shape
    sigma2 = max(float(noise_variance), NOISE_FLOOR)

    hm = h.reshape(-1, n_rx, n_streams)
    tv = t.reshape(-1, n_rx)
    gram = np.einsum("bri,brj->bij", hm.conj(), hm)
    gram[:, np.arange(n_streams), np.arange(n_streams)] += sigma2
    rhs = np.einsum("brs,br->bs", hm.conj(), tv)
    ginv = np.linalg.inv(gram)
    d = np.einsum("bij,bj->bi", ginv, rhs)
    var = sigma2 * np.einsum("bii->bi", ginv).real
    var = np.maximum(var, 1e-30)

    d = d.reshape(n_f, n_t, n_streams)
    var = var.reshape(n_f, n_t, n_streams)
    out = []
    offset = 0
    for hk in per_user:
        width = hk.shape[3]
        out.append(
            EqualizedSymbols(
                symbols=d[:, :, offset : offset + width],
                variance=var[:, :, offset : offset + width],
            )
        )
        offset += width
    return out


def demap_llr(eq: EqualizedSymbols, constellation: Constellation) -> np.ndarray:
    """Max-log LLRs per bit, clamped to +-LLR_CLAMP."""
    b = constellation.bits_per_symbol
    points = constellation.points
    labels = constellation.bit_labels
    d = eq.symbols[..., None]
    dist = np.abs(d - points) ** 2 / eq.variance[..., None]

    llrs = np.empty(eq.symbols.shape + (b,), dtype=np.float64)
    for bit in range(b):
        ones = labels[:, bit] == 1
        llrs[..., bit] = dist[..., ones].min(axis=-1) - dist[..., ~ones].min(axis=-1)
    return np.clip(llrs, -LLR_CLAMP, LLR_CLAMP)


# ---------------------------------------------------------------------------
# Iterative receiver
# ---------------------------------------------------------------------------


def build_interference(
    estimates: list[np.ndarray],
    data: list[np.ndarray],
    pilots: list[np.ndarray],
    power_ratio: float,
    target_user: int,
) -> np.ndarray:
    """Reconstructed received signal minus the target user's pilot part.

    v = sum_k' H_k' sqrt(1-e) d_k'  +  sum_{k' != target} H_k' sqrt(e) p_k'.
    Subtracting v from y isolates the target pilot for re-estimation.
    """
    n_users = len(estimates)
    if not (len(data) == len(pilots) == n_users):
        raise ValueError("estimates, data and pilots must cover the same users")
    root_d = np.sqrt(1.0 - power_ratio)
    root_p = np.sqrt(power_ratio)
    v = np.zeros(estimates[0].shape[:3], dtype=np.complex128)
    for k in range(n_users):
        if data[k].shape != estimates[k].shape[:2] + (estimates[k].shape[3],):
            raise ValueError("data grid shape inconsistent with the channel estimate")
        v += root_d * np.einsum("ftrs,fts->ftr", estimates[k], data[k])
        if k != target_user:
            v += root_p * np.einsum("ftrs,fts->ftr", estimates[k], pilots[k])
    return v


def detection_input(
    y: np.ndarray,
    estimates: list[np.ndarray],
    data: list[np.ndarray],
    pilots: list[np.ndarray],
    power_ratio: float,
    target_user: int,
) -> np.ndarray:
    """Detector input for one user: remove every pilot and other users' data,
    then rescale by sqrt(1 - power_ratio)."""
    root_d = np.sqrt(1.0 - power_ratio)
    root_p = np.sqrt(power_ratio)
    z = y.copy()
    for k in range(len(estimates)):
        z -= root_p * np.einsum("ftrs,fts->ftr", estimates[k], pilots[k])
        if k != target_user:
            z -= root_d * np.einsum("ftrs,fts->ftr", estimates[k], data[k])
    return z / root_d


@dataclass
class IterationDiagnostics:
    """Per-iteration receiver state captured for analysis."""

    iteration: int
    llrs: LlrGrid
    parity_ok: list[bool] | None = None
    chest_mse: list[float] | None = None


def _demap_all(
    eq_list: list[EqualizedSymbols], constellation: Constellation, role: np.ndarray
) -> LlrGrid:
    return LlrGrid(per_user=[demap_llr(eq, constellation) for eq in eq_list], role=role)


def one_shot_receive_si(
    y: np.ndarray,
    pilots: list[np.ndarray],
    power_ratio: float,
    window: tuple[int, int],
    noise_variance: float,
    constellation: Constellation,
) -> tuple[LlrGrid, list[ChannelEstimate]]:
    """Classical non-iterative pipeline: LS, smooth, pilot removal, joint LMMSE."""
    if power_ratio >= 1.0:
        raise ValueError("one-shot detection needs data power (power_ratio < 1)")
    estimates = [smooth(ls_estimate_sip(y, p, power_ratio), window) for p in pilots]
    y_clean = remove_pilots(y, estimates, pilots, power_ratio)
    t = y_clean / np.sqrt(1.0 - power_ratio)
    eq = lmmse_detect(t, [e.values for e in estimates], noise_variance)
    role = np.full(y.shape[:2], ReRole.SUPERIMPOSED, dtype=np.uint8)
    return _demap_all(eq, constellation, role), estimates


def _decoder_feedback(
    llr_grid: LlrGrid,
    user: int,
    eq: EqualizedSymbols,
    code: fec.CodeSpec,
    constellation: Constellation,
) -> tuple[np.ndarray, bool]:
    """Re-modulated hard decisions of the decoded block when parity checks
    pass, otherwise the detector's soft symbols."""
    llrs = llr_grid.codeword_llrs(user)
    info, _, parity_ok = fec.decode(llrs, code)
    if not parity_ok:
        return eq.symbols, False
    coded = fec.encode(info, code)
    symbols = modulate(coded, constellation)
    n_layers = eq.symbols.shape[2]
    return fill_data_grid(symbols, llr_grid.role, n_layers), True


def iterative_receive(
    y: np.ndarray,
    pilots: list[np.ndarray],
    power_ratio: float,
    schedule: WindowSchedule,
    noise_variance: float,
    constellation: Constellation,
    code: fec.CodeSpec | None = None,
    decoder_in_loop: bool = False,
    truth_channels: list[np.ndarray] | None = None,
) -> tuple[LlrGrid, list[ChannelEstimate], list[IterationDiagnostics]]:
    """Iterative channel estimation, detection and interference cancellation.

    Initial estimates come from smoothed per-user LS (first scheduled
    window); detected data starts at zero, so the first pass over a single
    user reduces to the one-shot pipeline. Within an iteration, users are
    processed in order and each step uses the most recent available
    estimates (Gauss-Seidel).
    """
    if decoder_in_loop and code is None:
        raise ValueError("decoder_in_loop requires a CodeSpec")
    if power_ratio >= 1.0 or power_ratio <= 0.0:
        raise ValueError("iterative receiver needs 0 < power_ratio < 1")
    n_users = len(pilots)
    schedule.validate_for_grid(*y.shape[:2])
    role = np.full(y.shape[:2], ReRole.SUPERIMPOSED, dtype=np.uint8)

    est = [smooth(ls_estimate_sip(y, p, power_ratio), schedule.windows[0]) for p in pilots]
    h_now = [e.values for e in est]
    d_now = [np.zeros(y.shape[:2] + (p.shape[2],), dtype=np.complex128) for p in pilots]
    eq_now: list[EqualizedSymbols | None] = [None] * n_users

    diagnostics: list[IterationDiagnostics] = []
    root_p = np.sqrt(power_ratio)

    for u, window in enumerate(schedule.windows, start=1):
        h_prev = [h.copy() for h in h_now]
        d_prev = [d.copy() for d in d_now]
        parity_flags: list[bool] = []
        for k in range(n_users):
            v = build_interference(h_prev, d_prev, pilots, power_ratio, k)
            raw = np.einsum("ftr,fts->ftrs", y - v, pilots[k].conj()) / root_p
            est_k = smooth(
                ChannelEstimate(values=raw, provenance=EstimateProvenance.RAW_LS, iteration_index=u),
                window,
            )
            h_now[k] = est_k.values
            est[k] = est_k

            t_k = detection_input(y, h_now, d_now, pilots, power_ratio, k)
            eq_k = lmmse_detect(t_k, h_now[k], noise_variance)[0]
            eq_now[k] = eq_k
            d_now[k] = eq_k.symbols
            if decoder_in_loop:
                llr_k = _demap_all([eq_k], constellation, role)
                feedback, ok = _decoder_feedback(llr_k, 0, eq_k, code, constellation)
                d_now[k] = feedback
                parity_flags.append(ok)

        llrs_u = _demap_all(eq_now, constellation, role)
        diag = IterationDiagnostics(iteration=u, llrs=llrs_u)
        if decoder_in_loop:
            diag.parity_ok = parity_flags
        if truth_channels is not None:
            diag.chest_mse = [
                float(np.mean(np.abs(h_now[k] - truth_channels[k]) ** 2))
                for k in range(n_users)
            ]
        diagnostics.append(diag)

    return diagnostics[-1].llrs, est, diagnostics


def genie_lmmse_baseline(
    y: np.ndarray,
    truth_channels: list[np.ndarray],
    noise_variance: float,
    constellation: Constellation,
    role: np.ndarray,
    pilots: list[np.ndarray] | None = None,
    power_ratio: float = 0.0,
) -> LlrGrid:
    """Linear receiver with perfect channel knowledge.

    For superimposed pilots the true pilot contribution is removed first;
    orthogonal and pilot-free grids skip removal.
    """
    if pilots is not None and power_ratio > 0.0:
        y = remove_pilots(y, truth_channels, pilots, power_ratio)
    data_scale = np.sqrt(1.0 - power_ratio) if power_ratio < 1.0 else 1.0
    eq = lmmse_detect(y / data_scale, truth_channels, noise_variance)
    return _demap_all(eq, constellation, role)
