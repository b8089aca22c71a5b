"""Simulation configuration: geometry, grid dimensions, seeding, noise model.

Every other module is a pure function of a ScenarioConfig plus derived
per-stream seeds, which makes whole runs reproducible bit for bit.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields
from enum import Enum
from fractions import Fraction
from pathlib import Path

__all__ = [
    "DmrsScheme",
    "SeedPurpose",
    "ScenarioConfig",
    "NoiseModel",
    "SiTuning",
    "derive_stream_seeds",
    "parse_config_file",
    "write_config_file",
    "si_tuning",
    "DEFAULT_MCS_RATES",
]


class DmrsScheme(Enum):
    ORTHOGONAL = "orthogonal"
    SUPERIMPOSED = "superimposed"
    GENIE_CSI = "genie_csi"


class SeedPurpose(Enum):
    BITS = "bits"
    CHANNEL = "channel"
    NOISE = "noise"
    SCRAMBLING = "scrambling"


# Default code rate per constellation order. MCS table lookups are out of
# scope; explicit pairs keep results interpretable.
DEFAULT_MCS_RATES = {
    4: Fraction(1, 2),
    16: Fraction(1, 2),
    64: Fraction(2, 3),
}

_VALID_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable description of one simulated uplink scenario.

    Safe to share across parallel Monte-Carlo workers.
    """

    num_users: int = 1
    layers_per_user: tuple[int, ...] = (1,)
    rx_antennas: int = 4
    num_subcarriers: int = 72
    num_symbols: int = 14
    constellation_order: int = 4
    code_rate: Fraction = Fraction(1, 2)
    dmrs_scheme: DmrsScheme = DmrsScheme.SUPERIMPOSED
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers_per_user", tuple(int(x) for x in self.layers_per_user))
        object.__setattr__(self, "code_rate", Fraction(self.code_rate))
        if self.num_users < 1:
            raise ValueError("num_users must be positive")
        if len(self.layers_per_user) != self.num_users:
            raise ValueError(
                f"layers_per_user has {len(self.layers_per_user)} entries for {self.num_users} users"
            )
        if any(l < 1 for l in self.layers_per_user):
            raise ValueError("layers_per_user entries must be positive")
        if self.total_layers > self.rx_antennas:
            raise ValueError(
                f"total layers ({self.total_layers}) exceed receive antennas ({self.rx_antennas})"
            )
        if self.num_subcarriers < 12:
            raise ValueError("num_subcarriers must be at least 12")
        if self.num_symbols < 1:
            raise ValueError("num_symbols must be at least 1")
        if self.constellation_order not in _VALID_ORDERS:
            raise ValueError(f"constellation_order must be one of {_VALID_ORDERS}")
        if not (0 < self.code_rate <= 1):
            raise ValueError("code_rate must be in (0, 1]")
        if not (0 <= self.master_seed < 2**64):
            raise ValueError("master_seed must fit in 64 bits")

    @property
    def total_layers(self) -> int:
        return sum(self.layers_per_user)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.num_subcarriers, self.num_symbols)

    @property
    def bits_per_symbol(self) -> int:
        return self.constellation_order.bit_length() - 1


@dataclass(frozen=True)
class NoiseModel:
    """AWGN level at the receiver.

    ``noise_variance`` is linear power per receive antenna per RE.
    ``snr_db`` is per-RE total received signal power over the variance;
    with unit per-layer symbol power and unit average channel gain the
    signal power equals the total number of transmission layers.
    """

    noise_variance: float
    snr_db: float

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")

    @classmethod
    def from_snr_db(cls, snr_db: float, total_signal_power: float) -> "NoiseModel":
        sigma2 = total_signal_power / 10.0 ** (snr_db / 10.0)
        return cls(noise_variance=sigma2, snr_db=snr_db)

    @classmethod
    def from_variance(cls, noise_variance: float, total_signal_power: float) -> "NoiseModel":
        if noise_variance <= 0:
            raise ValueError("noise_variance must be positive")
        snr_db = 10.0 * math.log10(total_signal_power / noise_variance)
        return cls(noise_variance=noise_variance, snr_db=snr_db)


def derive_stream_seeds(cfg: ScenarioConfig | int, purpose: SeedPurpose, drop_index: int) -> int:
    """Derive a 64-bit stream seed for (purpose, drop_index) under a master seed.

    Deterministic and collision-free across purposes and drop indices for a
    fixed master seed. Accepts either a ScenarioConfig or a bare master seed.
    """
    if drop_index < 0:
        raise ValueError("drop_index must be nonnegative")
    master = cfg.master_seed if isinstance(cfg, ScenarioConfig) else int(cfg)
    tag = f"siplink/{master:d}/{purpose.value}/{drop_index:d}".encode()
    digest = hashlib.blake2b(tag, digest_size=8).digest()
    return int.from_bytes(digest, "little")


# ---------------------------------------------------------------------------
# Receiver tuning defaults for superimposed DMRS, per scenario.
# Keys are (num_users, layers per user, rx antennas, constellation order).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiTuning:
    """Power ratio and smoothing-window schedule for one scenario."""

    power_ratio_iterative: float
    power_ratio_neural: float
    windows_iterative: tuple[tuple[int, int], ...]
    windows_neural: tuple[tuple[int, int], ...] = ((12, 14), (6, 14))


_W2 = ((12, 14), (6, 14))
_W4 = ((8, 14), (6, 14), (6, 14), (4, 14))
_W5 = ((8, 14), (6, 14), (6, 14), (4, 14), (2, 14))

_SI_TUNING_TABLE = {
    (1, 1, 4, 4): SiTuning(0.14, 0.035, _W2),
    (1, 1, 4, 16): SiTuning(0.22, 0.035, _W4),
    (1, 1, 4, 64): SiTuning(0.30, 0.035, _W5),
    (1, 2, 4, 4): SiTuning(0.22, 0.07, _W2),
    (1, 2, 4, 16): SiTuning(0.35, 0.07, _W4),
    (1, 2, 4, 64): SiTuning(0.43, 0.07, _W5),
    (2, 1, 4, 16): SiTuning(0.35, 0.07, _W4),
    (2, 1, 4, 64): SiTuning(0.43, 0.07, _W5),
    (4, 1, 16, 4): SiTuning(0.24, 0.14, _W2),
    (4, 1, 16, 64): SiTuning(0.55, 0.14, _W5),
}

_FALLBACK_TUNING = SiTuning(0.22, 0.07, _W2)


def si_tuning(cfg: ScenarioConfig) -> SiTuning:
    """Look up the tuned power ratio / window schedule for a scenario.

    Scenarios outside the tuned set fall back to a mid-range default.
    """
    layers = cfg.layers_per_user[0] if len(set(cfg.layers_per_user)) == 1 else None
    if layers is not None:
        key = (cfg.num_users, layers, cfg.rx_antennas, cfg.constellation_order)
        if key in _SI_TUNING_TABLE:
            return _SI_TUNING_TABLE[key]
    return _FALLBACK_TUNING


# ---------------------------------------------------------------------------
# Flat key/value configuration files.
# ---------------------------------------------------------------------------

_LIST_FIELDS = {"layers_per_user"}


def _format_value(name: str, value) -> str:
    if name == "layers_per_user":
        return ",".join(str(v) for v in value)
    if name == "dmrs_scheme":
        return value.value
    if name == "code_rate":
        return str(value)
    return str(value)


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name == "layers_per_user":
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    if name == "dmrs_scheme":
        try:
            return DmrsScheme(raw.lower())
        except ValueError:
            names = ", ".join(s.value for s in DmrsScheme)
            raise ValueError(f"unknown dmrs_scheme {raw!r}; expected one of: {names}") from None
    if name == "code_rate":
        return Fraction(raw)
    return int(raw)


def parse_config_file(path: str | Path) -> ScenarioConfig:
    """Read a flat ``key = value`` text file into a ScenarioConfig.

    Lines starting with '#' and blank lines are ignored. Unknown keys are an
    error; keys mirror ScenarioConfig field names.
    """
    known = {f.name for f in fields(ScenarioConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown configuration key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate configuration key {key!r}")
        values[key] = _parse_value(key, raw)
    return ScenarioConfig(**values)


def write_config_file(cfg: ScenarioConfig, path: str | Path) -> None:
    """Serialize a ScenarioConfig to the flat key/value format."""
    lines = [f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}" for f in fields(ScenarioConfig)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
