"""Command-line front end: flat config files, sweeps, theory curves,
conjugacy checking, and a quick self test.

Config files are plain key=value lines ('#' starts a comment, blank lines
ignored). Recognized keys mirror ExperimentConfig:

    method            chaotic-opt | chaotic-subopt | chaotic-zero |
                      rrc-mmse | rrc-noeq | theory-opt | theory-subopt
    channel           static2 | static3 | quasi2 | quasi3 | quasi
    ebn0_grid         comma-separated dB values, e.g. 0,2,4,6,8,10
    n_training_bits   training bits per frame (default 256)
    n_data_bits       payload bits per frame (default 3840)
    trials            static stop rule: payload bits per grid point
    frames            quasi stop rule: frames per grid point
    master_seed       integer seed of the whole sweep
    n_c               samples per symbol (default 8)
    genie             true/false (chaotic-opt only)
    failure_policy    pessimistic | separate

Command-line flags override file keys.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Dict, List, Optional

from . import harness
from . import waveform as wf

_DEFAULT_GRID = "0,2,4,6,8,10"

_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}


def parse_config_file(path: str) -> Dict[str, str]:
    """Flat key=value text, full- or trailing-line '#' comments."""
    mapping: Dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ValueError(f"{path}:{lineno}: empty key or value")
            if key in mapping:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value
    return mapping


_INT_KEYS = ("n_training_bits", "n_data_bits", "trials", "frames",
             "master_seed", "n_c")
_STR_KEYS = ("method", "channel", "failure_policy")


def build_config(mapping: Dict[str, str]) -> harness.ExperimentConfig:
    """Typed ExperimentConfig from string key=value pairs."""
    kwargs: Dict[str, object] = {}
    for key, value in mapping.items():
        if key in _STR_KEYS:
            kwargs[key] = value
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError:
                raise ValueError(f"config key {key} needs an integer, got {value!r}")
        elif key == "ebn0_grid":
            try:
                kwargs[key] = tuple(float(v) for v in value.replace(",", " ").split())
            except ValueError:
                raise ValueError(f"config key ebn0_grid is not a number list: {value!r}")
        elif key == "genie":
            word = value.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"config key genie must be true/false, got {value!r}")
            kwargs[key] = _BOOL_WORDS[word]
        else:
            raise ValueError(f"unknown config key {key!r}")
    for required in ("method", "channel"):
        if required not in kwargs:
            raise ValueError(f"config is missing the {required!r} key")
    kwargs.setdefault("ebn0_grid",
                      tuple(float(v) for v in _DEFAULT_GRID.split(",")))
    return harness.ExperimentConfig(**kwargs)


def _merged_config(args) -> harness.ExperimentConfig:
    mapping: Dict[str, str] = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    if args.seed is not None:
        mapping["master_seed"] = str(args.seed)
    if args.genie:
        mapping["genie"] = "true"
    return build_config(mapping)


def _print_records(records) -> None:
    print(f"{'method':<16}{'channel':<10}{'ebn0_db':>8}{'bits':>10}"
          f"{'errors':>8}  {'ber':<13}{'ci95':<13}")
    for r in records:
        print(f"{r.method:<16}{r.channel:<10}{r.ebn0_db:>8.2f}{r.bits:>10}"
              f"{r.errors:>8}  {r.ber:<13.6g}{r.ci95:<13.6g}")


def _emit(records, args, default_name: str) -> None:
    os.makedirs(args.out, exist_ok=True)
    if args.format in ("csv", "both"):
        path = harness.emit_csv(records,
                                os.path.join(args.out, default_name))
        print(f"wrote {path}")
    if args.format in ("plotdata", "both"):
        for path in harness.emit_plotdata(records,
                                          os.path.join(args.out, "plotdata")):
            print(f"wrote {path}")


def _maybe_bench(config, args) -> None:
    if not args.bench:
        return
    times = harness.bench_stages(config)
    print("per-frame stage timing (ms):")
    for stage, ms in sorted(times.items(), key=lambda kv: -kv[1]):
        print(f"  {stage:<16}{ms:>9.2f}")


def _cmd_sweep_static(args) -> int:
    config = _merged_config(args)
    _maybe_bench(config, args)
    t0 = time.perf_counter()
    records = harness.run_static_sweep(config, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    _print_records(records)
    print(f"swept {len(records)} points in {elapsed:.1f} s "
          f"({records[0].bits} bits/point)")
    _emit(records, args, f"{config.method}_{config.channel}.csv")
    return 0


def _cmd_sweep_quasi(args) -> int:
    config = _merged_config(args)
    _maybe_bench(config, args)
    stats: dict = {}
    t0 = time.perf_counter()
    records = harness.run_quasi_static(config, jobs=args.jobs, stats=stats)
    elapsed = time.perf_counter() - t0
    _print_records(records)
    print(f"swept {len(records)} points in {elapsed:.1f} s "
          f"({config.frames} frames/point, policy {config.failure_policy})")
    for row in stats["per_point"]:
        print(f"  {row['ebn0_db']:.2f} dB: {row['failed_frames']} failed frames, "
              f"est RMS mean {row['est_rms_mean']:.4f} "
              f"p90 {row['est_rms_p90']:.4f} max {row['est_rms_max']:.4f}")
    _emit(records, args, f"{config.method}_{config.channel}.csv")
    return 0


def _cmd_theory(args) -> int:
    if args.config:
        configs = [_merged_config(args)]
    else:
        grid = tuple(float(v) for v in _DEFAULT_GRID.split(","))
        configs = [harness.ExperimentConfig(method=m, channel=c, ebn0_grid=grid)
                   for m in harness.THEORY_METHODS
                   for c in ("static2", "static3")]
    records: List[harness.BerRecord] = []
    for config in configs:
        records.extend(harness.run_theory_curves(config))
    _print_records(records)
    _emit(records, args, "theory_curves.csv")
    return 0


def _cmd_check_conjugacy(args) -> int:
    t0 = time.perf_counter()
    report = wf.check_conjugacy()
    elapsed = time.perf_counter() - t0
    print(f"waveform/symbol equivalence check (beta = ln 2), {elapsed:.2f} s")
    print(f"  repeated-symbol agreement:  {'pass' if report.cond1 else 'FAIL'}")
    print(f"  envelope margin:            {report.cond2_margin:.3e} "
          f"({'pass' if report.cond2_margin > 0 else 'FAIL'})")
    print(f"  integral |p| over [-1,1]x2: {report.integral_inside:.6f}")
    print(f"  integral |p| over [-8,0]:   {report.integral_outside:.6f}")
    print(f"  bounded-tail condition:     {'pass' if report.cond3 else 'FAIL'}")
    ok = report.cond1 and report.cond3 and report.cond2_margin > 0
    return 0 if ok else 1


def _cmd_selftest(args) -> int:
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        tag = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        suffix = f"  ({detail})" if detail else ""
        print(f"[{tag}] {name}{suffix}")

    report = wf.check_conjugacy()
    check("waveform/symbol equivalence",
          report.cond1 and report.cond3 and report.cond2_margin > 0,
          f"integrals {report.integral_inside:.4f}/{report.integral_outside:.4f}")

    grid = (4.0, 8.0)
    cfg = harness.ExperimentConfig(method="chaotic-subopt", channel="static2",
                                   ebn0_grid=grid, trials=40000,
                                   master_seed=11, n_data_bits=2000)
    sim = harness.run_static_sweep(cfg, jobs=args.jobs)
    theory = harness.run_theory_curves(
        harness.ExperimentConfig(method="theory-subopt", channel="static2",
                                 ebn0_grid=grid))
    for s, t in zip(sim, theory):
        lo = 0.5 * t.ber - 3.0 * s.ci95
        hi = 2.0 * t.ber + 3.0 * s.ci95
        check(f"static BER near closed form at {s.ebn0_db:g} dB",
              lo <= s.ber <= hi, f"sim {s.ber:.3e} vs theory {t.ber:.3e}")

    tiny = harness.ExperimentConfig(method="chaotic-subopt", channel="quasi2",
                                    ebn0_grid=(6.0,), frames=6,
                                    n_data_bits=512, n_training_bits=256,
                                    master_seed=7)
    a = harness.run_quasi_static(tiny, jobs=1)
    b = harness.run_quasi_static(tiny, jobs=2)
    check("determinism across worker counts", a == b,
          f"{a[0].errors} errors both ways" if a == b else f"{a} != {b}")

    print(f"{'no failures' if failures == 0 else f'{failures} failure(s)'}")
    return 0 if failures == 0 else 1


def main(argv: Optional[List[str]] = None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="key=value experiment description")
    common.add_argument("--seed", type=int, metavar="N",
                        help="override master_seed")
    common.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (default .)")
    common.add_argument("--jobs", type=int, default=1, metavar="N",
                        help="worker processes (default 1)")
    common.add_argument("--genie", action="store_true",
                        help="genie-aided decoding (chaotic-opt only)")
    common.add_argument("--bench", action="store_true",
                        help="print per-stage frame timing before the sweep")
    common.add_argument("--format", choices=("csv", "plotdata", "both"),
                        default="csv", help="report format (default csv)")

    parser = argparse.ArgumentParser(
        prog="chaosmodem",
        description="Chaotic-baseband modem Monte Carlo experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep-static", parents=[common],
                   help="known-channel BER sweep").set_defaults(fn=_cmd_sweep_static)
    sub.add_parser("sweep-quasi", parents=[common],
                   help="estimated-channel BER sweep").set_defaults(fn=_cmd_sweep_quasi)
    sub.add_parser("theory", parents=[common],
                   help="closed-form BER curves").set_defaults(fn=_cmd_theory)
    sub.add_parser("check-conjugacy", parents=[common],
                   help="waveform/symbol equivalence report").set_defaults(
                       fn=_cmd_check_conjugacy)
    sub.add_parser("selftest", parents=[common],
                   help="quick end-to-end sanity battery").set_defaults(
                       fn=_cmd_selftest)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
