"""Command-line front end: channel analysis, filter design, equalization, BER runs.

Every subcommand reads JSON inputs, writes data (CSV or JSON) to stdout or to
``--out``, and echoes a one-line resolved-argument manifest to stderr.  Exit
status is 0 on success, 2 for unusable configuration or inputs, and 1 for a
runtime failure inside the library.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .channel import (
    ReceivedSignal,
    channel_to_json,
    cir_from_dense,
    load_channel_or_profile,
    PowerProfile,
    SparseCir,
    alphabet_for,
    detect_zero_pad,
    unmap_symbols,
)
from .prefilter import PrefilterFir, apply_filter, design_wmf, minimum_phase
from .trellis import bcjr_map, viterbi_mlse
from .sparse_eq import choose_k, influence_set, pva_mlse, ddfse
from .analysis import complexity_report, mfb_fading, mfb_static
from .harness import (
    PRESETS,
    load_config,
    records_to_csv,
    run_experiment,
    run_manifest,
)

_PRESET_BLURB = """\
built-in experiment presets (pass the name to `ber --config`):
  fig3      static 4-tap channel; decision-feedback trellis K=4 behind a
            40-tap whitening prefilter
  fig4-L6   block-fading 4-tap profile, memory 6; exact trellis search
  fig4-L12  block-fading 4-tap profile, memory 12; decision-feedback trellis
            K=5 behind a 36-tap prefilter
  fig4-L20  block-fading 4-tap profile, memory 20; decision-feedback trellis
            K=5 behind a 60-tap prefilter
"""


def _echo_manifest(sub: str, resolved: dict) -> None:
    doc = {"subcommand": sub}
    doc.update(resolved)
    print("manifest: " + json.dumps(doc, sort_keys=True), file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_cir(path: str) -> SparseCir:
    loaded = load_channel_or_profile(path)
    if not isinstance(loaded, SparseCir):
        raise ValueError(f"{path} holds a power profile, not a fixed channel")
    return loaded


def _read_signal(path: str) -> ReceivedSignal:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, list):
        doc = {"samples": doc, "noise_var": 0.0}
    pairs = np.asarray(doc["samples"], dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("signal samples must be a list of [re, im] pairs")
    return ReceivedSignal(
        samples=pairs[:, 0] + 1j * pairs[:, 1],
        noise_var=float(doc.get("noise_var", 0.0)),
    )


def _pairs(values) -> list[list[float]]:
    arr = np.asarray(values, dtype=np.complex128).ravel()
    return [[float(v.real), float(v.imag)] for v in arr]


def _fir_to_json(fir: PrefilterFir) -> dict:
    return {
        "taps": _pairs(fir.taps),
        "delay": int(fir.delay),
        "target": _pairs(fir.target),
        "design_error": float(fir.design_error),
        "noise_gain": float(fir.noise_gain),
        "whiteness": float(fir.whiteness),
    }


def _fir_from_json(doc: dict) -> PrefilterFir:
    taps = np.asarray(doc["taps"], dtype=np.float64)
    target = np.asarray(doc["target"], dtype=np.float64)
    return PrefilterFir(
        taps=taps[:, 0] + 1j * taps[:, 1],
        delay=int(doc["delay"]),
        target=target[:, 0] + 1j * target[:, 1],
        design_error=float(doc.get("design_error", 0.0)),
        noise_gain=float(doc.get("noise_gain", 0.0)),
        whiteness=float(doc.get("whiteness", 0.0)),
    )


# ---------------------------------------------------------------------------
# subcommands


def _cmd_minphase(args) -> int:
    cir = _load_cir(args.channel)
    mp = minimum_phase(cir.dense())
    _echo_manifest("minphase", {"channel": args.channel, "out": args.out})
    lines = ["kind,index,re,im,magnitude,reflected"]
    zeros = mp.input_zeros
    order = np.lexsort((zeros.imag, zeros.real))
    for i, z in enumerate(zeros[order]):
        refl = int(abs(z) > 1.0)
        lines.append(f"zero,{i},{z.real:.10g},{z.imag:.10g},{abs(z):.10g},{refl}")
    for i, t in enumerate(mp.taps):
        lines.append(f"tap,{i},{t.real:.10g},{t.imag:.10g},{abs(t):.10g},0")
    _emit("\n".join(lines) + "\n", args.out)
    print(
        f"reflected {mp.num_reflected} zero(s); whiteness {mp.whiteness:.3e}",
        file=sys.stderr,
    )
    return 0


def _cmd_designwmf(args) -> int:
    cir = _load_cir(args.channel)
    fir = design_wmf(cir, args.taps, delay=args.delay)
    _echo_manifest(
        "designwmf",
        {
            "channel": args.channel,
            "taps": args.taps,
            "delay": fir.delay,
            "out": args.out,
        },
    )
    _emit(json.dumps(_fir_to_json(fir), indent=2) + "\n", args.out)
    print(
        f"design error {fir.design_error:.3e}, noise gain {fir.noise_gain:.4f},"
        f" whiteness {fir.whiteness:.3e}",
        file=sys.stderr,
    )
    return 0


def _cmd_analyze(args) -> int:
    cir = _load_cir(args.channel)
    report = complexity_report(cir, M=args.alphabet)
    zp = detect_zero_pad(cir)
    infl = influence_set(cir, args.origin, horizon=args.horizon)
    spacing = 0 if zp is None else zp.spacing
    doc = {
        "channel": channel_to_json(cir),
        "zero_pad": None
        if zp is None
        else {"spacing": zp.spacing, "base_length": zp.base_length},
        "complexity": {k: (bool(v) if isinstance(v, bool) else v) for k, v in report.items()},
        "influence": {
            "origin": infl.origin,
            "horizon": infl.horizon,
            "indices": [int(i) for i in infl.indices],
            "offsets": [int(o) for o in infl.offsets()],
        },
        "suggested_memory": choose_k(spacing, cir.num_taps - 1, args.alphabet),
    }
    _echo_manifest(
        "analyze",
        {
            "channel": args.channel,
            "origin": args.origin,
            "horizon": args.horizon,
            "alphabet": args.alphabet,
            "out": args.out,
        },
    )
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def _cmd_equalize(args) -> int:
    cir = _load_cir(args.channel)
    signal = _read_signal(args.signal)
    alphabet = alphabet_for(args.alphabet)
    if args.algo == "ddfse" and args.memory is None:
        raise ValueError("ddfse requires --memory")
    _echo_manifest(
        "equalize",
        {
            "channel": args.channel,
            "signal": args.signal,
            "algo": args.algo,
            "memory": args.memory,
            "prefilter": args.prefilter,
            "alphabet": args.alphabet,
            "out": args.out,
        },
    )
    if args.prefilter is not None:
        with open(args.prefilter, "r", encoding="utf-8") as fh:
            fir = _fir_from_json(json.load(fh))
        signal = apply_filter(signal, fir)
        cir = cir_from_dense(fir.target)
    if args.algo == "va":
        decisions = viterbi_mlse(signal, cir, alphabet, n_data=args.n_data)
    elif args.algo == "pva":
        decisions = pva_mlse(signal, cir, alphabet, n_data=args.n_data)
    elif args.algo == "bcjr":
        decisions = bcjr_map(
            signal, cir, signal.noise_var, alphabet=alphabet, n_data=args.n_data
        ).decisions()
    else:
        decisions = ddfse(signal, cir, args.memory, alphabet, n_data=args.n_data)
    bits = unmap_symbols(decisions, alphabet)
    _emit(json.dumps({"bits": [int(b) for b in bits]}) + "\n", args.out)
    return 0


def _cmd_mfb(args) -> int:
    loaded = load_channel_or_profile(args.channel)
    _echo_manifest(
        "mfb",
        {
            "channel": args.channel,
            "grid": list(args.grid),
            "draws": args.draws,
            "seed": args.seed,
            "out": args.out,
        },
    )
    lines = ["ebn0_db,ber,stderr"]
    if isinstance(loaded, PowerProfile):
        for i, db in enumerate(args.grid):
            ber, sem = mfb_fading(
                loaded, float(db), draws=args.draws, seed=args.seed + i
            )
            lines.append(f"{db:g},{ber:.8e},{sem:.8e}")
    else:
        energy = loaded.energy()
        for db in args.grid:
            lines.append(f"{db:g},{mfb_static(float(db), energy):.8e},0.00000000e+00")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_ber(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    manifest = run_manifest(cfg)
    manifest["threads"] = args.threads
    _echo_manifest(
        "ber",
        {
            "config": str(args.config),
            "config_hash": manifest["config_hash"],
            "threads": args.threads,
            "out": args.out,
        },
    )
    records = run_experiment(cfg, threads=args.threads)
    csv_text = records_to_csv(records)
    if args.out is None:
        sys.stdout.write(csv_text)
        print("manifest-json: " + json.dumps(manifest, sort_keys=True), file=sys.stderr)
    else:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "results.csv"), "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}/results.csv and {args.out}/manifest.json", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseq",
        description="Trellis equalization toolkit for sparse multipath channels.",
        epilog=_PRESET_BLURB,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "minphase",
        help="factor a channel into zeros and its minimum-phase equivalent (CSV)",
    )
    p.add_argument("--channel", required=True, help="channel JSON file")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=_cmd_minphase)

    p = sub.add_parser(
        "designwmf",
        help="design a whitening matched prefilter for a channel (JSON)",
    )
    p.add_argument("--channel", required=True, help="channel JSON file")
    p.add_argument("--taps", required=True, type=int, help="filter length")
    p.add_argument("--delay", type=int, help="decision delay (default: length-1)")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_designwmf)

    p = sub.add_parser(
        "analyze",
        help="report sparsity structure, state counts and influence sets (JSON)",
    )
    p.add_argument("--channel", required=True, help="channel JSON file")
    p.add_argument("--origin", type=int, default=0, help="influence-set start index")
    p.add_argument("--horizon", type=int, default=2, help="influence-set depth factor")
    p.add_argument("--alphabet", type=int, default=2, help="constellation size")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser(
        "equalize",
        help="run one equalizer over a recorded signal, print decided bits (JSON)",
    )
    p.add_argument("--channel", required=True, help="channel JSON file")
    p.add_argument("--signal", required=True, help="received-signal JSON file")
    p.add_argument("--algo", required=True, choices=("va", "pva", "bcjr", "ddfse"))
    p.add_argument("--memory", type=int, help="trellis memory for ddfse")
    p.add_argument("--prefilter", help="filter JSON from `designwmf` to apply first")
    p.add_argument("--alphabet", type=int, default=2, help="constellation size")
    p.add_argument("--n-data", type=int, help="data symbols per block (default inferred)")
    p.add_argument("--out", help="output JSON path (default stdout)")
    p.set_defaults(func=_cmd_equalize)

    p = sub.add_parser(
        "mfb",
        help="matched-filter bound curve for a channel or fading profile (CSV)",
    )
    p.add_argument("--channel", required=True, help="channel or profile JSON file")
    p.add_argument("--grid", required=True, type=float, nargs="+", help="Eb/N0 dB points")
    p.add_argument("--draws", type=int, default=200_000, help="fading draws per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=_cmd_mfb)

    p = sub.add_parser(
        "ber",
        help="run a Monte-Carlo BER experiment from a config file or preset",
        epilog=_PRESET_BLURB,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument(
        "--config",
        required=True,
        help="config JSON path, or one of: " + ", ".join(PRESETS),
    )
    p.add_argument("--out", help="output directory (default: CSV to stdout)")
    p.add_argument("--threads", type=int, default=1, help="parallel block workers")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.set_defaults(func=_cmd_ber)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
