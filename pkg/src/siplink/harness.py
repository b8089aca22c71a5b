"""Monte-Carlo sweep driver, metrics, persistence, and dataset export.

Drops are independent work units seeded from the master seed, so results are
bit-reproducible. Within a drop the same bits, channel, and unit-variance
noise field are shared across SNR points (common random numbers).
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import fec
from .channel import ChannelProfile, apply_channel, complex_noise, generate_channel
from .chest import WindowSchedule, interpolate, ls_estimate_orthogonal
from .detect import (
    LlrGrid,
    genie_lmmse_baseline,
    iterative_receive,
    lmmse_detect,
    demap_llr,
    one_shot_receive_si,
)
from .scenario import (
    DmrsScheme,
    ScenarioConfig,
    SeedPurpose,
    derive_stream_seeds,
    si_tuning,
)
from .waveform import (
    Constellation,
    OrthDmrsConfig,
    ReRole,
    ResourceGrid,
    build_si_dmrs,
    SiDmrsConfig,
    build_orthogonal_grid,
    data_positions,
    default_port_assignment,
    fill_data_grid,
    modulate,
    orthogonal_pilot_grid,
    superimpose,
)

__all__ = [
    "Receiver",
    "SweepPoint",
    "SweepResult",
    "run_sweep",
    "emit_results",
    "load_results",
    "export_dataset",
    "read_dataset",
    "DATASET_MAGIC",
    "DATASET_VERSION",
]

CSV_COLUMNS = ("snr_db", "drops", "uncoded_ber", "coded_ber", "bler", "throughput", "n_d")

DATASET_MAGIC = b"SIPD"
DATASET_VERSION = 1


class Receiver(Enum):
    ONE_SHOT = "one_shot"
    ITERATIVE = "iterative"
    GENIE_LMMSE = "genie_lmmse"


@dataclass
class SweepPoint:
    snr_db: float
    drops: int
    uncoded_ber: float
    coded_ber: float
    bler: float
    throughput: float
    n_d: int


@dataclass
class SweepResult:
    points: list[SweepPoint]
    metadata: dict

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


# ---------------------------------------------------------------------------
# Per-drop transmit state
# ---------------------------------------------------------------------------


@dataclass
class _Drop:
    info_bits: list[np.ndarray]
    coded_bits: list[np.ndarray]
    pilots: list[np.ndarray]
    grids: list[ResourceGrid]
    channels: list[np.ndarray]
    noise_field: np.ndarray
    role: np.ndarray
    n_d: int
    seed: int


def _layer_offsets(cfg: ScenarioConfig) -> list[int]:
    offsets = [0]
    for l in cfg.layers_per_user:
        offsets.append(offsets[-1] + l)
    return offsets


def _scheme_role(cfg: ScenarioConfig, scheme: DmrsScheme) -> np.ndarray:
    n_f, n_t = cfg.grid_shape
    if scheme is DmrsScheme.ORTHOGONAL:
        ports = default_port_assignment(cfg.total_layers)
        probe = OrthDmrsConfig(port_assignment=ports)
        _, role = orthogonal_pilot_grid(probe, n_f, n_t)
        return role
    fill = ReRole.SUPERIMPOSED if scheme is DmrsScheme.SUPERIMPOSED else ReRole.DATA
    return np.full((n_f, n_t), fill, dtype=np.uint8)


def _user_codes(cfg: ScenarioConfig, n_d: int) -> list[fec.CodeSpec]:
    b = cfg.bits_per_symbol
    return [
        fec.make_code(n_d * b * layers, cfg.code_rate)
        for layers in cfg.layers_per_user
    ]


def _build_drop(
    cfg: ScenarioConfig,
    scheme: DmrsScheme,
    drop: int,
    power_ratio: float,
    profile: ChannelProfile,
    constellation: Constellation,
    codes: list[fec.CodeSpec],
) -> _Drop:
    n_f, n_t = cfg.grid_shape
    bits_seed = derive_stream_seeds(cfg, SeedPurpose.BITS, drop)
    chan_seed = derive_stream_seeds(cfg, SeedPurpose.CHANNEL, drop)
    noise_seed = derive_stream_seeds(cfg, SeedPurpose.NOISE, drop)
    scram_seed = derive_stream_seeds(cfg, SeedPurpose.SCRAMBLING, drop)

    role = _scheme_role(cfg, scheme)
    ii, jj = data_positions(role)
    n_d = ii.size

    # Transmit grids per user
    pilots: list[np.ndarray] = []
    grids: list[ResourceGrid] = []
    info_bits: list[np.ndarray] = []
    coded_bits: list[np.ndarray] = []

    if scheme is DmrsScheme.SUPERIMPOSED:
        si_cfg = SiDmrsConfig(power_ratio=power_ratio, scrambling_seed=scram_seed)
        all_pilots = build_si_dmrs(si_cfg, n_f, n_t, cfg.total_layers)

    offsets = _layer_offsets(cfg)
    for k, layers in enumerate(cfg.layers_per_user):
        rng = np.random.default_rng((bits_seed, k))
        code = codes[k]
        u = rng.integers(0, 2, size=code.k, dtype=np.uint8)
        b = fec.encode(u, code)
        info_bits.append(u)
        coded_bits.append(b)
        symbols = modulate(b, constellation)

        if scheme is DmrsScheme.SUPERIMPOSED:
            p_user = all_pilots[:, :, offsets[k] : offsets[k + 1]]
            d_user = fill_data_grid(symbols, role, layers)
            grids.append(superimpose(d_user, p_user, power_ratio))
            pilots.append(p_user)
        elif scheme is DmrsScheme.ORTHOGONAL:
            ocfg = _orth_config_for_user(cfg, k, scram_seed)
            grids.append(build_orthogonal_grid(symbols, ocfg, n_f, n_t))
            p_user, _ = orthogonal_pilot_grid(ocfg, n_f, n_t)
            pilots.append(p_user)
        else:  # GENIE_CSI: all power to data, no pilots
            d_user = fill_data_grid(symbols, role, layers)
            grids.append(ResourceGrid(values=d_user, role=role.copy()))
            pilots.append(np.zeros_like(d_user))

    vel_rng = np.random.default_rng((chan_seed, 0x7E1))
    drop_profile = replace(profile, velocity=float(vel_rng.uniform(1.0, 10.0)))
    channels = [
        generate_channel(drop_profile, n_f, n_t, cfg.rx_antennas, layers, seed=(chan_seed, k))
        for k, layers in enumerate(cfg.layers_per_user)
    ]
    noise_field = complex_noise((n_f, n_t, cfg.rx_antennas), noise_seed)
    return _Drop(
        info_bits=info_bits,
        coded_bits=coded_bits,
        pilots=pilots,
        grids=grids,
        channels=channels,
        noise_field=noise_field,
        role=role,
        n_d=n_d,
        seed=bits_seed,
    )


def _orth_config_for_user(cfg: ScenarioConfig, user: int, scram_seed: int) -> OrthDmrsConfig:
    offsets = _layer_offsets(cfg)
    all_ports = default_port_assignment(cfg.total_layers)
    groups = tuple(sorted({p // 2 for p in all_ports}))
    return OrthDmrsConfig(
        port_assignment=all_ports[offsets[user] : offsets[user + 1]],
        reserved_cdm_groups=groups,
        sequence_seed=scram_seed,
    )


def _receive(
    cfg: ScenarioConfig,
    scheme: DmrsScheme,
    receiver: Receiver,
    drop: _Drop,
    y: np.ndarray,
    noise_variance: float,
    power_ratio: float,
    windows: WindowSchedule,
    constellation: Constellation,
    codes: list[fec.CodeSpec],
    scram_seed: int,
) -> LlrGrid:
    if receiver is Receiver.GENIE_LMMSE:
        si = scheme is DmrsScheme.SUPERIMPOSED
        return genie_lmmse_baseline(
            y,
            drop.channels,
            noise_variance,
            constellation,
            drop.role,
            pilots=drop.pilots if si else None,
            power_ratio=power_ratio if si else 0.0,
        )
    if scheme is DmrsScheme.SUPERIMPOSED:
        if receiver is Receiver.ONE_SHOT:
            llrs, _ = one_shot_receive_si(
                y, drop.pilots, power_ratio, windows.windows[0], noise_variance, constellation
            )
            return llrs
        # In-loop decoding assumes one shared block size across users.
        shared_code = len(set(cfg.layers_per_user)) == 1
        llrs, _, _ = iterative_receive(
            y,
            drop.pilots,
            power_ratio,
            windows,
            noise_variance,
            constellation,
            code=codes[0] if shared_code else None,
            decoder_in_loop=shared_code,
        )
        return llrs
    if scheme is DmrsScheme.ORTHOGONAL and receiver is Receiver.ONE_SHOT:
        estimates = []
        for k in range(cfg.num_users):
            ocfg = _orth_config_for_user(cfg, k, scram_seed)
            est = interpolate(ls_estimate_orthogonal(y, ocfg))
            estimates.append(est.values)
        eq = lmmse_detect(y, estimates, noise_variance)
        return LlrGrid(
            per_user=[demap_llr(e, constellation) for e in eq], role=drop.role
        )
    raise ValueError(f"receiver {receiver.value} does not support scheme {scheme.value}")


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def run_sweep(
    cfg: ScenarioConfig,
    receiver: Receiver,
    snr_db_list: list[float] | np.ndarray,
    drops: int,
    scheme: DmrsScheme | None = None,
    power_ratio: float | None = None,
    windows: WindowSchedule | None = None,
    profile: ChannelProfile | None = None,
) -> SweepResult:
    """Full link sweep: bits -> encode -> modulate -> channel -> receiver -> decode.

    Deterministic for a fixed ScenarioConfig; metrics accumulate per SNR
    point over all drops.
    """
    if drops < 1:
        raise ValueError("drops must be at least 1")
    scheme = scheme or cfg.dmrs_scheme
    tuning = si_tuning(cfg)
    if power_ratio is None:
        power_ratio = tuning.power_ratio_iterative if scheme is DmrsScheme.SUPERIMPOSED else 0.0
    windows = windows or WindowSchedule(tuning.windows_iterative)
    profile = profile or ChannelProfile()
    constellation = Constellation.qam(cfg.constellation_order)

    # Early validation of impossible combinations
    if receiver is Receiver.ITERATIVE and scheme is not DmrsScheme.SUPERIMPOSED:
        raise ValueError("iterative receiver requires the superimposed scheme")
    if receiver is Receiver.ONE_SHOT and scheme is DmrsScheme.GENIE_CSI:
        raise ValueError("one-shot receiver needs pilots; genie_csi has none")

    role = _scheme_role(cfg, scheme)
    n_d = int(np.count_nonzero(role != ReRole.DMRS))
    codes = _user_codes(cfg, n_d)
    bits_sym = cfg.bits_per_symbol
    snr_list = [float(s) for s in snr_db_list]

    totals = {
        s: {"unc_err": 0, "unc_tot": 0, "cod_err": 0, "cod_tot": 0, "blk_err": 0, "blk_tot": 0}
        for s in snr_list
    }

    for drop_idx in range(drops):
        drop = _build_drop(cfg, scheme, drop_idx, power_ratio, profile, constellation, codes)
        scram_seed = derive_stream_seeds(cfg, SeedPurpose.SCRAMBLING, drop_idx)
        signal = apply_channel([g.values for g in drop.grids], drop.channels, 0.0)
        for snr_db in snr_list:
            sigma2 = cfg.total_layers / 10.0 ** (snr_db / 10.0)
            y = signal + np.sqrt(sigma2) * drop.noise_field
            llrs = _receive(
                cfg, scheme, receiver, drop, y, sigma2, power_ratio,
                windows, constellation, codes, scram_seed,
            )
            acc = totals[snr_db]
            for k in range(cfg.num_users):
                cw_llrs = llrs.codeword_llrs(k)
                hard = (cw_llrs < 0).astype(np.uint8)
                acc["unc_err"] += int(np.count_nonzero(hard != drop.coded_bits[k]))
                acc["unc_tot"] += hard.size
                info_hat, _, parity_ok = fec.decode(cw_llrs, codes[k])
                errs = int(np.count_nonzero(info_hat != drop.info_bits[k]))
                acc["cod_err"] += errs
                acc["cod_tot"] += info_hat.size
                acc["blk_err"] += int((not parity_ok) or errs > 0)
                acc["blk_tot"] += 1

    points = []
    for snr_db in snr_list:
        acc = totals[snr_db]
        bler = acc["blk_err"] / acc["blk_tot"]
        points.append(
            SweepPoint(
                snr_db=snr_db,
                drops=drops,
                uncoded_ber=acc["unc_err"] / acc["unc_tot"],
                coded_ber=acc["cod_err"] / acc["cod_tot"],
                bler=bler,
                throughput=(1.0 - bler) * n_d * bits_sym * cfg.total_layers,
                n_d=n_d,
            )
        )
    metadata = _metadata(cfg, receiver, scheme, power_ratio, windows, drops)
    return SweepResult(points=points, metadata=metadata)


def _metadata(cfg, receiver, scheme, power_ratio, windows, drops) -> dict:
    meta = {
        "num_users": cfg.num_users,
        "layers_per_user": list(cfg.layers_per_user),
        "rx_antennas": cfg.rx_antennas,
        "num_subcarriers": cfg.num_subcarriers,
        "num_symbols": cfg.num_symbols,
        "constellation_order": cfg.constellation_order,
        "code_rate": str(cfg.code_rate),
        "dmrs_scheme": scheme.value,
        "master_seed": cfg.master_seed,
        "receiver": receiver.value,
        "power_ratio": power_ratio,
        "windows": [list(w) for w in windows.windows],
        "drops": drops,
    }
    digest = hashlib.sha256(json.dumps(meta, sort_keys=True).encode()).hexdigest()
    meta["build_hash"] = digest[:12]
    return meta


# ---------------------------------------------------------------------------
# Result persistence
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def emit_results(result: SweepResult, fmt: str, path: str | Path) -> Path:
    """Write a sweep to CSV or JSON. One row per SNR point, fixed columns."""
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for p in result.points:
            lines.append(",".join(_fmt(getattr(p, c)) for c in CSV_COLUMNS))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        doc = {
            "metadata": result.metadata,
            "points": [{c: getattr(p, c) for c in CSV_COLUMNS} for p in result.points],
        }
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown result format {fmt!r}")
    return path


def load_results(path: str | Path) -> SweepResult:
    """Read results back from either emitted format."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        doc = json.loads(text)
        points = [SweepPoint(**{k: v for k, v in p.items()}) for p in doc["points"]]
        return SweepResult(points=points, metadata=doc.get("metadata", {}))
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = tuple(lines[0].split(","))
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {header}")
    points = []
    for ln in lines[1:]:
        vals = ln.split(",")
        kw = dict(zip(CSV_COLUMNS, vals))
        points.append(
            SweepPoint(
                snr_db=float(kw["snr_db"]),
                drops=int(kw["drops"]),
                uncoded_ber=float(kw["uncoded_ber"]),
                coded_ber=float(kw["coded_ber"]),
                bler=float(kw["bler"]),
                throughput=float(kw["throughput"]),
                n_d=int(kw["n_d"]),
            )
        )
    return SweepResult(points=points, metadata={})


# ---------------------------------------------------------------------------
# Dataset export for the neural receiver
# ---------------------------------------------------------------------------


def _dataset_fields(cfg: ScenarioConfig, n_d: int) -> list[dict]:
    n_f, n_t = cfg.grid_shape
    fields = [{"name": "y", "dtype": "complex64", "shape": [n_f, n_t, cfg.rx_antennas]}]
    for k, layers in enumerate(cfg.layers_per_user):
        fields.append({"name": f"pilot_user{k}", "dtype": "complex64", "shape": [n_f, n_t, layers]})
    fields.append({"name": "power_ratio", "dtype": "float32", "shape": []})
    fields.append({"name": "noise_variance", "dtype": "float32", "shape": []})
    for k, layers in enumerate(cfg.layers_per_user):
        fields.append(
            {"name": f"channel_user{k}", "dtype": "complex64", "shape": [n_f, n_t, cfg.rx_antennas, layers]}
        )
    for k, layers in enumerate(cfg.layers_per_user):
        fields.append(
            {"name": f"bits_user{k}", "dtype": "float32", "shape": [n_d * cfg.bits_per_symbol * layers]}
        )
    fields.append({"name": "seed", "dtype": "uint64", "shape": []})
    return fields


_DTYPES = {"complex64": "<c8", "float32": "<f4", "uint64": "<u8"}


def _field_nbytes(f: dict) -> int:
    count = int(np.prod(f["shape"])) if f["shape"] else 1
    return count * np.dtype(_DTYPES[f["dtype"]]).itemsize


def export_dataset(
    cfg: ScenarioConfig,
    num_records: int,
    path: str | Path,
    scheme: DmrsScheme | None = None,
    power_ratio: float | None = None,
    snr_db_range: tuple[float, float] = (0.0, 20.0),
    profile: ChannelProfile | None = None,
) -> Path:
    """Write simulated slots to the binary dataset format.

    Layout: magic 'SIPD', version u16 LE, u32 LE header length, JSON header
    (shapes, dtypes, record count), then records as contiguous little-endian
    tensors; complex values are interleaved (real, imag) float32.
    """
    scheme = scheme or cfg.dmrs_scheme
    if power_ratio is None:
        power_ratio = (
            si_tuning(cfg).power_ratio_iterative if scheme is DmrsScheme.SUPERIMPOSED else 0.0
        )
    profile = profile or ChannelProfile()
    constellation = Constellation.qam(cfg.constellation_order)
    role = _scheme_role(cfg, scheme)
    n_d = int(np.count_nonzero(role != ReRole.DMRS))
    codes = _user_codes(cfg, n_d)

    fields = _dataset_fields(cfg, n_d)
    header = {
        "version": DATASET_VERSION,
        "record_count": num_records,
        "scheme": scheme.value,
        "power_ratio": power_ratio,
        "snr_db_range": list(snr_db_range),
        "config": {
            "num_users": cfg.num_users,
            "layers_per_user": list(cfg.layers_per_user),
            "rx_antennas": cfg.rx_antennas,
            "num_subcarriers": cfg.num_subcarriers,
            "num_symbols": cfg.num_symbols,
            "constellation_order": cfg.constellation_order,
            "code_rate": str(cfg.code_rate),
            "master_seed": cfg.master_seed,
        },
        "n_data_re": n_d,
        "fields": fields,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    with path.open("wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<H", DATASET_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        snr_rng = np.random.default_rng((cfg.master_seed, 0xDA7A))
        for i in range(num_records):
            drop = _build_drop(cfg, scheme, i, power_ratio, profile, constellation, codes)
            snr_db = float(snr_rng.uniform(*snr_db_range))
            sigma2 = cfg.total_layers / 10.0 ** (snr_db / 10.0)
            y = apply_channel(
                [g.values for g in drop.grids], drop.channels, sigma2, noise_field=drop.noise_field
            )
            record: list[np.ndarray] = [y.astype("<c8")]
            record += [p.astype("<c8") for p in drop.pilots]
            record.append(np.float32(power_ratio).reshape(()).astype("<f4"))
            record.append(np.float32(sigma2).reshape(()).astype("<f4"))
            record += [h.astype("<c8") for h in drop.channels]
            record += [b.astype("<f4") for b in drop.coded_bits]
            record.append(np.uint64(drop.seed).reshape(()).astype("<u8"))
            for arr in record:
                fh.write(np.ascontiguousarray(arr).tobytes())
    return path


def read_dataset(path: str | Path) -> tuple[dict, list[dict[str, np.ndarray]]]:
    """Read a dataset file back; returns (header, records)."""
    raw = Path(path).read_bytes()
    if raw[:4] != DATASET_MAGIC:
        raise ValueError("not a siplink dataset file")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 6)
    header = json.loads(raw[10 : 10 + hlen].decode("utf-8"))
    offset = 10 + hlen
    records = []
    for _ in range(header["record_count"]):
        rec = {}
        for f in header["fields"]:
            count = int(np.prod(f["shape"])) if f["shape"] else 1
            arr = np.frombuffer(raw, dtype=_DTYPES[f["dtype"]], count=count, offset=offset)
            rec[f["name"]] = arr.reshape(f["shape"]) if f["shape"] else arr[0]
            offset += _field_nbytes(f)
        records.append(rec)
    if offset != len(raw):
        raise ValueError("dataset has trailing or missing bytes")
    return header, records
