"""Transmit-side resource grid construction.

Covers Gray-mapped QAM constellations, OCC-based superimposed DMRS
generation, the data/pilot superposition, and 5G-type-1-like orthogonal
DMRS grids with comb-2 and frequency-domain cover codes.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.linalg import hadamard

__all__ = [
    "Constellation",
    "ReRole",
    "ResourceGrid",
    "SiDmrsConfig",
    "OrthDmrsConfig",
    "modulate",
    "demap_hard",
    "build_si_dmrs",
    "superimpose",
    "build_orthogonal_grid",
    "orthogonal_pilot_grid",
    "data_positions",
    "fill_data_grid",
    "extract_data_symbols",
    "default_port_assignment",
]


class ReRole(IntEnum):
    """Role of one (subcarrier, symbol) resource element."""

    DATA = 0
    DMRS = 1
    SUPERIMPOSED = 2


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = 1
    while shift < 32:
        b ^= b >> shift
        shift *= 2
    return b


def _axis_levels(bits_per_axis: int) -> np.ndarray:
    """PAM levels indexed by the Gray-coded axis label.

    Label 0 maps to the most positive level, so an all-zero symbol label sits
    in the first quadrant.
    """
    g = np.arange(1 << bits_per_axis, dtype=np.int64)
    n = _gray_to_binary(g)
    return ((1 << bits_per_axis) - 1 - 2 * n).astype(np.float64)


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped square QAM with unit average symbol energy.

    ``points[v]`` is the symbol whose bit label is the big-endian integer
    ``v``; the label splits evenly into I bits (most significant) and Q bits.
    """

    order: int
    points: np.ndarray
    bit_labels: np.ndarray

    @classmethod
    def qam(cls, order: int) -> "Constellation":
        if order not in (4, 16, 64):
            raise ValueError("constellation order must be 4, 16 or 64")
        bits = order.bit_length() - 1
        half = bits // 2
        levels = _axis_levels(half)
        v = np.arange(order)
        vi = v >> half
        vq = v & ((1 << half) - 1)
        raw = levels[vi] + 1j * levels[vq]
        points = raw / np.sqrt(np.mean(np.abs(raw) ** 2))
        labels = (v[:, None] >> np.arange(bits - 1, -1, -1)[None, :]) & 1
        return cls(order=order, points=points, bit_labels=labels.astype(np.uint8))

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1


def modulate(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map a coded bit sequence to unit-energy constellation symbols."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    b = constellation.bits_per_symbol
    if bits.size % b:
        raise ValueError(f"bit count {bits.size} not divisible by log2(M)={b}")
    groups = bits.reshape(-1, b)
    weights = 1 << np.arange(b - 1, -1, -1)
    labels = groups @ weights
    return constellation.points[labels]


def demap_hard(symbols: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Nearest-point hard demapping back to bit labels."""
    symbols = np.asarray(symbols).ravel()
    d2 = np.abs(symbols[:, None] - constellation.points[None, :]) ** 2
    idx = np.argmin(d2, axis=1)
    return constellation.bit_labels[idx].reshape(-1)


# ---------------------------------------------------------------------------
# Resource grids
# ---------------------------------------------------------------------------


@dataclass
class ResourceGrid:
    """Complex values over (subcarrier, symbol, layer) with a shared role mask.

    The role mask is per (subcarrier, symbol); all layers of a grid follow
    the same scheme. On DMRS resource elements a layer transmits either its
    port sequence (unit modulus) or nothing, when the RE is reserved for
    another CDM group.
    """

    values: np.ndarray
    role: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("values must have shape (n_subcarriers, n_symbols, n_layers)")
        if self.role.shape != self.values.shape[:2]:
            raise ValueError("role mask shape must match the grid dimensions")

    @property
    def num_layers(self) -> int:
        return self.values.shape[2]

    def data_re_count(self) -> int:
        """Number of REs that carry data (full grid minus DMRS reservations)."""
        return int(np.count_nonzero(self.role != ReRole.DMRS))


def data_positions(role: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical ordering of data-carrying REs (subcarrier-major)."""
    ii, jj = np.nonzero(role != ReRole.DMRS)
    return ii, jj


def fill_data_grid(symbols: np.ndarray, role: np.ndarray, num_layers: int) -> np.ndarray:
    """Place a flat symbol sequence onto the data REs of a grid.

    Symbols are consumed position-major: all layers of the first data RE,
    then the next RE. Returns the (n_F, n_T, L) value tensor.
    """
    ii, jj = data_positions(role)
    n_data = ii.size
    symbols = np.asarray(symbols).ravel()
    if symbols.size != n_data * num_layers:
        raise ValueError(f"need {n_data * num_layers} data symbols, got {symbols.size}")
    values = np.zeros(role.shape + (num_layers,), dtype=np.complex128)
    values[ii, jj, :] = symbols.reshape(n_data, num_layers)
    return values


def extract_data_symbols(values: np.ndarray, role: np.ndarray) -> np.ndarray:
    """Inverse of fill_data_grid: read data REs back in canonical order."""
    ii, jj = data_positions(role)
    return values[ii, jj, :].reshape(-1)


# ---------------------------------------------------------------------------
# Superimposed DMRS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiDmrsConfig:
    """Superimposed-DMRS parameters shared by all users and layers.

    ``power_ratio`` is the pilot power fraction; ``base_occ`` rows are the
    per-layer cover codes over one OCC group (mutually orthogonal, unit
    modulus). When ``base_occ`` is None, rows of a Walsh-Hadamard matrix of
    the group size are used.
    """

    power_ratio: float
    occ_group_shape: tuple[int, int] = (2, 2)
    base_occ: np.ndarray | None = None
    scrambling_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.power_ratio <= 1.0):
            raise ValueError("power_ratio must be in [0, 1]")
        g_f, g_t = self.occ_group_shape
        if g_f < 1 or g_t < 1:
            raise ValueError("occ_group_shape entries must be positive")
        if self.base_occ is not None:
            occ = np.asarray(self.base_occ)
            if occ.ndim != 2 or occ.shape[1] != g_f * g_t:
                raise ValueError("base_occ rows must have length g_f * g_t")
            if not np.allclose(np.abs(occ), 1.0, atol=1e-12):
                raise ValueError("base_occ entries must be unit modulus")
            gram = occ @ occ.conj().T
            if not np.allclose(gram, np.eye(occ.shape[0]) * occ.shape[1], atol=1e-9):
                raise ValueError("base_occ rows must be mutually orthogonal")

    def occ_rows(self, total_layers: int) -> np.ndarray:
        g_f, g_t = self.occ_group_shape
        group_size = g_f * g_t
        if self.base_occ is not None:
            occ = np.asarray(self.base_occ, dtype=np.complex128)
        else:
            if group_size & (group_size - 1):
                raise ValueError("default Walsh base needs a power-of-two group size")
            occ = hadamard(group_size).astype(np.complex128)
        if total_layers > occ.shape[0]:
            raise ValueError(
                f"{total_layers} layers exceed the {occ.shape[0]} available base OCC sequences"
            )
        return occ[:total_layers]


_QPSK_SCRAMBLE = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))


def build_si_dmrs(
    cfg: SiDmrsConfig, n_subcarriers: int, n_symbols: int, total_layers: int
) -> np.ndarray:
    """Generate the superimposed pilot field for all layers.

    Each layer repeats its base cover code over (g_f, g_t) OCC groups; every
    group is multiplied by one zero-mean unit-modulus QPSK scrambling value
    shared by all layers, which preserves the cover-code orthogonality within
    the group. Trailing partial groups reuse the truncated prefix of the base
    sequence, so orthogonality is only guaranteed over full groups.
    """
    g_f, g_t = cfg.occ_group_shape
    occ = cfg.occ_rows(total_layers)

    ii = np.arange(n_subcarriers)
    jj = np.arange(n_symbols)
    pos = (ii[:, None] % g_f) * g_t + (jj[None, :] % g_t)

    n_gf = -(-n_subcarriers // g_f)
    n_gt = -(-n_symbols // g_t)
    rng = np.random.default_rng(cfg.scrambling_seed)
    scramble = rng.choice(_QPSK_SCRAMBLE, size=(n_gf, n_gt))
    per_re_scramble = scramble[ii[:, None] // g_f, jj[None, :] // g_t]

    pilots = occ.T[pos] * per_re_scramble[:, :, None]
    return pilots


def superimpose(data_values: np.ndarray, pilot_values: np.ndarray, power_ratio: float) -> ResourceGrid:
    """Combine data and pilots per RE: x = sqrt(1-e)*d + sqrt(e)*p."""
    data_values = np.asarray(data_values)
    pilot_values = np.asarray(pilot_values)
    if data_values.shape != pilot_values.shape:
        raise ValueError(
            f"data shape {data_values.shape} does not match pilot shape {pilot_values.shape}"
        )
    if not (0.0 <= power_ratio <= 1.0):
        raise ValueError("power_ratio must be in [0, 1]")
    values = np.sqrt(1.0 - power_ratio) * data_values + np.sqrt(power_ratio) * pilot_values
    role = np.full(values.shape[:2], ReRole.SUPERIMPOSED, dtype=np.uint8)
    return ResourceGrid(values=values, role=role)


# ---------------------------------------------------------------------------
# Orthogonal DMRS (5G type-1-like: comb-2, FD-OCC over comb pairs)
# ---------------------------------------------------------------------------

# Preferred port order: first stream on port 0, second on port 2 (second CDM
# group), then fill the remaining FD-OCC slots.
_PORT_ORDER = (0, 2, 1, 3)

_FD_OCC = {0: (1.0, 1.0), 1: (1.0, -1.0)}


def default_port_assignment(total_layers: int) -> tuple[int, ...]:
    if not (1 <= total_layers <= 4):
        raise ValueError("orthogonal DMRS supports 1 to 4 layers")
    return _PORT_ORDER[:total_layers]


@dataclass(frozen=True)
class OrthDmrsConfig:
    """Orthogonal DMRS layout for one user's layers.

    Ports 0/1 share CDM group 0 (even comb), ports 2/3 share CDM group 1
    (odd comb); within a group the two ports are separated by a length-2
    frequency-domain cover code over adjacent comb REs.
    ``reserved_cdm_groups`` lists every group active in the cell (all users),
    whose comb REs carry no data on DMRS symbols.
    """

    port_assignment: tuple[int, ...]
    dmrs_symbol_indices: tuple[int, ...] = (2, 11)
    comb_offsets: tuple[int, int] = (0, 1)
    reserved_cdm_groups: tuple[int, ...] | None = None
    sequence_seed: int = 24601

    def __post_init__(self):
        if len(self.dmrs_symbol_indices) == 0:
            raise ValueError("orthogonal DMRS requires at least one DMRS symbol")
        if len(set(self.dmrs_symbol_indices)) != len(self.dmrs_symbol_indices):
            raise ValueError("duplicate DMRS symbol indices")
        if len(set(self.port_assignment)) != len(self.port_assignment):
            raise ValueError(f"port collision in assignment {self.port_assignment}")
        if any(p not in (0, 1, 2, 3) for p in self.port_assignment):
            raise ValueError("ports must be in 0..3")

    @property
    def active_groups(self) -> tuple[int, ...]:
        if self.reserved_cdm_groups is not None:
            return tuple(sorted(set(self.reserved_cdm_groups)))
        return tuple(sorted({p // 2 for p in self.port_assignment}))

    def port_group(self, port: int) -> int:
        return port // 2

    def port_occ(self, port: int) -> tuple[float, float]:
        return _FD_OCC[port % 2]


def _base_sequence(cfg: OrthDmrsConfig, n_comb: int, n_dmrs_syms: int) -> np.ndarray:
    """Unit-modulus QPSK base sequence per (CDM group, comb RE, DMRS symbol)."""
    rng = np.random.default_rng(cfg.sequence_seed)
    return rng.choice(_QPSK_SCRAMBLE, size=(2, n_comb, n_dmrs_syms))


def _comb_subcarriers(cfg: OrthDmrsConfig, group: int, n_subcarriers: int) -> np.ndarray:
    return np.arange(cfg.comb_offsets[group], n_subcarriers, 2)


def orthogonal_pilot_grid(
    cfg: OrthDmrsConfig, n_subcarriers: int, n_symbols: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pilot values per layer plus the shared role mask.

    Returns (pilots, role): pilots has shape (n_F, n_T, L) and is nonzero
    only on each layer's own comb REs of the DMRS symbols.
    """
    syms = np.asarray(cfg.dmrs_symbol_indices)
    if syms.min() < 0 or syms.max() >= n_symbols:
        raise ValueError("DMRS symbol index outside the grid")
    n_layers = len(cfg.port_assignment)
    n_comb = (n_subcarriers + 1) // 2
    base = _base_sequence(cfg, n_comb, len(syms))

    pilots = np.zeros((n_subcarriers, n_symbols, n_layers), dtype=np.complex128)
    role = np.zeros((n_subcarriers, n_symbols), dtype=np.uint8)

    for group in cfg.active_groups:
        sc = _comb_subcarriers(cfg, group, n_subcarriers)
        role[np.ix_(sc, syms)] = ReRole.DMRS

    for layer, port in enumerate(cfg.port_assignment):
        group = cfg.port_group(port)
        occ = cfg.port_occ(port)
        sc = _comb_subcarriers(cfg, group, n_subcarriers)
        q = np.arange(sc.size)
        weights = np.where(q % 2 == 0, occ[0], occ[1])
        seq = base[group, : sc.size, :] * weights[:, None]
        for t, j in enumerate(syms):
            pilots[sc, j, layer] = seq[:, t]
    return pilots, role


def build_orthogonal_grid(
    data_symbols: np.ndarray, cfg: OrthDmrsConfig, n_subcarriers: int, n_symbols: int
) -> ResourceGrid:
    """Assemble one user's orthogonal-DMRS grid: pilots at full power on the
    DMRS REs, data everywhere else, zeros on REs reserved for other groups.
    """
    pilots, role = orthogonal_pilot_grid(cfg, n_subcarriers, n_symbols)
    n_layers = len(cfg.port_assignment)
    values = fill_data_grid(data_symbols, role, n_layers)
    dmrs_re = role == ReRole.DMRS
    values[dmrs_re, :] = pilots[dmrs_re, :]
    return ResourceGrid(values=values, role=role)
