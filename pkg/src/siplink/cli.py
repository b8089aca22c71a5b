"""Command-line interface: sweep, export, selftest."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fec
from .channel import ChannelProfile
from .harness import (
    DmrsScheme,
    Receiver,
    emit_results,
    export_dataset,
    run_sweep,
)
from .scenario import ScenarioConfig, parse_config_file

_RECEIVERS = {
    "one-shot": Receiver.ONE_SHOT,
    "iterative": Receiver.ITERATIVE,
    "genie-lmmse": Receiver.GENIE_LMMSE,
}
_SCHEMES = {
    "superimposed": DmrsScheme.SUPERIMPOSED,
    "orthogonal": DmrsScheme.ORTHOGONAL,
    "genie-csi": DmrsScheme.GENIE_CSI,
}


def _load_config(args) -> ScenarioConfig:
    cfg = parse_config_file(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "scheme", None):
        overrides["dmrs_scheme"] = _SCHEMES[args.scheme]
    return replace(cfg, **overrides) if overrides else cfg


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat key/value scenario file")
    p.add_argument("--seed", type=int, help="override the master seed")


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    snrs = np.arange(args.snr_start, args.snr_stop + 1e-9, args.snr_step)
    result = run_sweep(
        cfg,
        _RECEIVERS[args.receiver],
        snrs,
        drops=args.drops,
        scheme=_SCHEMES[args.scheme] if args.scheme else None,
        power_ratio=args.power_ratio,
    )
    out = Path(args.out)
    base = out.with_suffix("") if out.suffix else out
    csv_path = emit_results(result, "csv", base.with_suffix(".csv"))
    emit_results(result, "json", base.with_suffix(".json"))
    from .plots import render_sweep_figure

    render_sweep_figure(result, base.with_suffix(".png"))
    print(f"wrote {csv_path}, {base.with_suffix('.json')}, {base.with_suffix('.png')}")
    return 0


def _cmd_export(args) -> int:
    cfg = _load_config(args)
    path = export_dataset(
        cfg,
        num_records=args.records,
        path=args.out,
        scheme=_SCHEMES[args.scheme] if args.scheme else None,
        power_ratio=args.power_ratio,
        snr_db_range=(args.snr_start, args.snr_stop),
    )
    print(f"wrote {path}")
    if args.alist:
        from .harness import _scheme_role, _user_codes
        from .waveform import ReRole

        scheme = _SCHEMES[args.scheme] if args.scheme else cfg.dmrs_scheme
        role = _scheme_role(cfg, scheme)
        n_d = int(np.count_nonzero(role != ReRole.DMRS))
        code = _user_codes(cfg, n_d)[0]
        fec.write_alist(code, args.alist)
        print(f"wrote {args.alist}")
    return 0


def _cmd_selftest(args) -> int:
    """Quick invariant battery; exercises each subsystem once."""
    from .chest import ls_estimate_sip, smooth
    from .detect import lmmse_detect
    from .scenario import SeedPurpose, derive_stream_seeds
    from .waveform import Constellation, SiDmrsConfig, build_si_dmrs, demap_hard, modulate

    failures = 0

    def check(name: str, ok: bool):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    s1 = derive_stream_seeds(7, SeedPurpose.BITS, 0)
    s2 = derive_stream_seeds(7, SeedPurpose.NOISE, 0)
    check("seed derivation is purpose-separated", s1 != s2 and s1 == derive_stream_seeds(7, SeedPurpose.BITS, 0))

    const = Constellation.qam(16)
    bits = np.random.default_rng(0).integers(0, 2, 400)
    check("modulate/demap round trip", np.array_equal(demap_hard(modulate(bits, const), const), bits))

    pil = build_si_dmrs(SiDmrsConfig(power_ratio=0.14, scrambling_seed=3), 8, 4, 4)
    block = pil[:2, :2, :].reshape(4, 4)
    gram = block.conj().T @ block
    check("OCC group orthogonality", np.allclose(gram - np.diag(np.diag(gram)), 0, atol=1e-12))

    code = fec.make_code(96, 0.5)
    u = np.random.default_rng(1).integers(0, 2, code.k, dtype=np.uint8)
    b = fec.encode(u, code)
    check("LDPC encoder satisfies parity", not fec.syndrome(b, code).any())
    llrs = 40.0 * (1 - 2 * b.astype(float))
    u_hat, _, ok = fec.decode(llrs, code)
    check("LDPC noiseless decode", ok and np.array_equal(u_hat, u))

    rng = np.random.default_rng(2)
    h = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    d = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y = (h @ d).reshape(1, 1, 4)
    eq = lmmse_detect(y, h.reshape(1, 1, 4, 2), 1e-9)[0]
    check("LMMSE recovers noiseless streams", np.allclose(eq.symbols.reshape(2), d, atol=1e-4))

    est = ls_estimate_sip(np.full((12, 4, 2), 2.0 + 0j), np.ones((12, 4, 1)), 1.0)
    sm = smooth(est, (4, 2))
    check("smoothing preserves constants", np.allclose(sm.values, 2.0, atol=1e-12))

    print(f"{'OK' if failures == 0 else 'FAILED'}: {7 - failures}/7 checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siplink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a Monte-Carlo SNR sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--receiver", choices=sorted(_RECEIVERS), default="one-shot")
    p_sweep.add_argument("--scheme", choices=sorted(_SCHEMES))
    p_sweep.add_argument("--snr-start", type=float, default=-2.0)
    p_sweep.add_argument("--snr-stop", type=float, default=12.0)
    p_sweep.add_argument("--snr-step", type=float, default=2.0)
    p_sweep.add_argument("--drops", type=int, default=50)
    p_sweep.add_argument("--power-ratio", type=float)
    p_sweep.add_argument("--out", type=Path, required=True, help="output base path")

    p_export = sub.add_parser("export", help="export a training dataset")
    _add_common(p_export)
    p_export.add_argument("--scheme", choices=sorted(_SCHEMES))
    p_export.add_argument("--records", type=int, default=100)
    p_export.add_argument("--snr-start", type=float, default=0.0)
    p_export.add_argument("--snr-stop", type=float, default=20.0)
    p_export.add_argument("--power-ratio", type=float)
    p_export.add_argument("--alist", type=Path, help="also write the LDPC parity matrix")
    p_export.add_argument("--out", type=Path, required=True)

    p_self = sub.add_parser("selftest", help="run quick invariant checks")
    _add_common(p_self)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"sweep": _cmd_sweep, "export": _cmd_export, "selftest": _cmd_selftest}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
