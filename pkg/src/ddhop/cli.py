"""Command-line entry points: simulate, analyze-jammer, make-code, validate-codebook."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness, jamming, report
from .fec import CodeConstructionError, count_4cycles, peg_construct, save_code
from .scma import CodebookError, PartitionScheme, load_codebook


def _parse_grid(text):
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 128x16, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ddhop",
        description="Multiuser OTFS-SCMA uplink simulator with delay-Doppler "
                    "resource hopping under NBI/PIN jamming.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a BER sweep and write CSV + figures")
    sim.add_argument("--config", help="key = value config file")
    sim.add_argument("--preset", choices=sorted(harness.PRESETS), default="desk")
    sim.add_argument("--hop", choices=["on", "off", "both"],
                     help="override scheme.hop from the config (default both)")
    sim.add_argument("--out", default="results.csv")
    sim.add_argument("--seed", type=int, help="master seed override")
    sim.add_argument("--blocks", type=int, help="blocks per point override")
    sim.add_argument("--scenario", choices=["pin-delay", "nbi-doppler"],
                     help="shorthand for jam.type + scheme.axis")
    sim.add_argument("--no-figures", action="store_true",
                     help="skip rendering the BER figure")
    sim.add_argument("--no-resume", action="store_true",
                     help="recompute points already present in the CSV")

    aj = sub.add_parser("analyze-jammer",
                        help="print a jammer's DD footprint and predicted hit set")
    aj.add_argument("--type", choices=["nbi", "pin"], required=True)
    aj.add_argument("--grid", type=_parse_grid, default=(16, 16),
                    metavar="MxN")
    aj.add_argument("--axis", choices=["delay", "doppler"])
    aj.add_argument("--groups", type=int, default=4)
    aj.add_argument("--b", type=float, default=1.0, help="NBI amplitude")
    aj.add_argument("--xi", type=float, default=2.0, help="NBI frequency index")
    aj.add_argument("--phi", type=float, default=0.0, help="NBI phase")
    aj.add_argument("--gamma", type=float, default=1.0, help="PIN response magnitude")
    aj.add_argument("--gamma-phase", type=float, default=0.0)
    aj.add_argument("--period", type=int, help="PIN period in samples (default MN)")
    aj.add_argument("--offset", type=int, default=0, help="PIN offset in samples")
    aj.add_argument("--out", help="write a footprint heatmap PNG here")

    mc = sub.add_parser("make-code", help="construct a (3,6) parity structure")
    mc.add_argument("--n", type=int, default=256)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--out", required=True)

    vc = sub.add_parser("validate-codebook", help="check a codebook file")
    vc.add_argument("path")

    return p


def _cmd_simulate(args) -> int:
    base = harness.PRESETS[args.preset]()
    cfg = harness.parse_config_file(args.config, base) if args.config else base
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.blocks is not None:
        overrides["blocks"] = args.blocks
    if args.scenario == "pin-delay":
        overrides.update(jam_type="pin", axis="delay")
    elif args.scenario == "nbi-doppler":
        overrides.update(jam_type="nbi", axis="doppler")
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)

    hop_choice = args.hop if args.hop is not None else cfg.hop_mode
    hop_modes = {"on": (True,), "off": (False,), "both": (True, False)}[hop_choice]

    def progress(rec):
        print(f"eb={rec.eb_n0_db:g} jnr={rec.jnr_db:g} hop={'on' if rec.hop else 'off'} "
              f"ber_jammed={rec.ber_jammed:.3e} ber_other={rec.ber_unjammed:.3e} "
              f"({rec.runtime_s:.1f}s)")
        sys.stdout.flush()

    records = harness.run_sweep(cfg, hop_modes=hop_modes, out_path=args.out,
                                resume=not args.no_resume, progress=progress)
    print(f"wrote {args.out}")
    if not args.no_figures:
        # include rows computed in earlier (resumed) runs when plotting
        all_records = records if records else []
        if all_records:
            fig_path = os.path.splitext(args.out)[0] + "_ber.png"
            report.save_ber_figure(all_records, fig_path)
            print(f"wrote {fig_path}")
    return 0


def _cmd_analyze_jammer(args) -> int:
    from .ddcore import DDGrid

    M, N = args.grid
    grid = DDGrid(M=M, N=N)
    if args.type == "nbi":
        spec = jamming.NbiSpec(b=args.b, xi=args.xi, phi=args.phi)
        jam = jamming.gen_nbi(spec, grid)
        axis = args.axis or "doppler"
    else:
        period = args.period or grid.size
        spec = jamming.PinSpec(gamma=args.gamma * np.exp(1j * args.gamma_phase),
                               period_samples=period, offset_samples=args.offset)
        jam = jamming.gen_pin(spec, grid, block_index=0)
        axis = args.axis or "delay"

    fp = jamming.dd_footprint(jam, grid)
    power = np.abs(fp) ** 2
    total = power.sum()
    col_share = power.sum(axis=0) / total
    row_share = power.sum(axis=1) / total
    print(f"{args.type.upper()} on a {M}x{N} grid; total footprint power {total:.6g}")
    print(f"dominant Doppler column: {int(col_share.argmax())} "
          f"({100 * col_share.max():.2f}% of power)")
    print(f"dominant delay row:      {int(row_share.argmax())} "
          f"({100 * row_share.max():.2f}% of power)")

    scheme = PartitionScheme(axis=axis, G=args.groups)
    hit = jamming.predict_hit_set(spec, scheme, grid)
    if hit.spread:
        print(f"hit set ({axis} partition, G={args.groups}): spread over all groups")
    else:
        print(f"hit set ({axis} partition, G={args.groups}): "
              f"groups {sorted(hit.groups)}")
    if args.out:
        report.save_footprint_figure(fp, args.out,
                                     title=f"{args.type.upper()} DD footprint")
        print(f"wrote {args.out}")
    return 0


def _cmd_make_code(args) -> int:
    try:
        code = peg_construct(args.n, dv=3, dc=6, seed=args.seed)
    except CodeConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 1
    save_code(code, args.out)
    print(f"n={code.n} k={code.k} checks={code.m} 4-cycles={count_4cycles(code)} "
          f"-> {args.out}")
    return 0


def _cmd_validate_codebook(args) -> int:
    try:
        book = load_codebook(args.path)
    except (CodebookError, OSError, ValueError) as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print(f"OK: J={book.J} K={book.K} Q={book.Q} D={book.D}, "
          f"supports {book.supports}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "analyze-jammer": _cmd_analyze_jammer,
        "make-code": _cmd_make_code,
        "validate-codebook": _cmd_validate_codebook,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
