"""Figure rendering for sweep reports.

Renders coded BER and throughput versus SNR to a PNG file next to the
delimited output, mirroring the usual link-level result plots.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import SweepResult

__all__ = ["render_sweep_figure"]


def render_sweep_figure(
    results: list[tuple[str, SweepResult]] | SweepResult, path: str | Path
) -> Path:
    """Plot one or more sweeps into a two-panel figure (BER, throughput)."""
    if isinstance(results, SweepResult):
        label = results.metadata.get("receiver", "sweep")
        results = [(label, results)]

    fig, (ax_ber, ax_tp) = plt.subplots(1, 2, figsize=(10, 4))
    for label, res in results:
        snr = res.column("snr_db")
        coded = res.column("coded_ber")
        tp = res.column("throughput")
        ax_ber.semilogy(snr, coded.clip(min=1e-7), marker="o", label=label)
        ax_tp.plot(snr, tp, marker="o", label=label)

    ax_ber.set_xlabel("SNR [dB]")
    ax_ber.set_ylabel("coded BER")
    ax_ber.grid(True, which="both", alpha=0.4)
    ax_ber.legend()
    ax_tp.set_xlabel("SNR [dB]")
    ax_tp.set_ylabel("throughput [bits/slot]")
    ax_tp.grid(True, alpha=0.4)
    ax_tp.legend()
    fig.tight_layout()

    path = Path(path)
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
