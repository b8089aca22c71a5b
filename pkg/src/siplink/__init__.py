"""Uplink MU-MIMO OFDM link simulator with superimposed and orthogonal DMRS."""

from .scenario import (
    DmrsScheme,
    NoiseModel,
    ScenarioConfig,
    SeedPurpose,
    derive_stream_seeds,
    parse_config_file,
    si_tuning,
)
from .waveform import (
    Constellation,
    OrthDmrsConfig,
    ReRole,
    ResourceGrid,
    SiDmrsConfig,
    build_orthogonal_grid,
    build_si_dmrs,
    modulate,
    superimpose,
)
from .channel import ChannelProfile, ChannelRealization, apply_channel, generate_channel
from .chest import ChannelEstimate, WindowSchedule, interpolate, ls_estimate_orthogonal, ls_estimate_sip, smooth
from .detect import (
    EqualizedSymbols,
    LlrGrid,
    build_interference,
    demap_llr,
    genie_lmmse_baseline,
    iterative_receive,
    lmmse_detect,
    one_shot_receive_si,
    remove_pilots,
)
from .fec import CodeSpec, decode, encode, make_code, read_alist, write_alist
from .harness import Receiver, SweepResult, emit_results, export_dataset, read_dataset, run_sweep

__version__ = "0.1.0"
