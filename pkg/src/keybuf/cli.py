"""Experiment runner.

Commands: `analyze`, `simulate`, `verify`, `sweep`.  Every command writes
delimited output (CSV) plus a rendered matplotlib figure into the output
directory; all outputs are deterministic under a fixed seed and config.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 enumeration budget exceeded.  The environment variable `KEYBUF_BUDGET`
overrides the enumeration cap.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import leakage, protocol, wiretap
from .channel import analyze as analyze_channels
from .channel import bsc, WiretapChannelSpec
from .config import ExperimentConfig, load_experiment
from .errors import BudgetExceeded, ConfigError, KeybufError

DEFAULT_BUDGET = leakage.DEFAULT_BUDGET

#: Fixed figure metadata so PNG bytes are identical across runs.
_PNG_META = {"Software": "keybuf"}


def _save_figure(fig, path: Path):
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def _budget() -> int:
    raw = os.environ.get("KEYBUF_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET


def _load(args) -> ExperimentConfig:
    config = load_experiment(args.config)
    if args.seed is not None and config.protocol is not None:
        config.protocol.seed = args.seed
    return config


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    config = _load(args)
    if config.channels is None:
        raise ConfigError("analyze requires a [channel] section")
    out = _outdir(args)
    result = analyze_channels(config.channels, config.grid_step)
    print(f"C   (main capacity):     {result.capacity_main:.6f} bits/use")
    print(f"C_e (eve capacity):      {result.capacity_eve:.6f} bits/use")
    print(f"R_s (secrecy capacity):  {result.secrecy_capacity:.6f} bits/use")
    print(f"maximizing input:        {np.array2string(result.maximizing_input, precision=4)}")

    m = config.channels.main.input_alphabet_size
    cols = ",".join(f"p{i}" for i in range(m))
    with open(out / "analysis.csv", "w") as fh:
        fh.write(f"capacity_main,capacity_eve,secrecy_capacity,{cols}\n")
        probs = ",".join(f"{p:.9g}" for p in result.maximizing_input)
        fh.write(
            f"{result.capacity_main:.9g},{result.capacity_eve:.9g},"
            f"{result.secrecy_capacity:.9g},{probs}\n"
        )

    if m == 2:
        from .channel import _entropy_bits

        grid = np.linspace(0.0, 1.0, 401)
        dists = np.stack([grid, 1.0 - grid], axis=1)

        def curve(channel):
            row_h = _entropy_bits(channel.transition)
            return _entropy_bits(dists @ channel.transition) - dists @ row_h

        i_main = curve(config.channels.main)
        i_eve = curve(config.channels.eve)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(grid, i_main, label="I(X;Y)")
        ax.plot(grid, i_eve, label="I(X;Z)")
        ax.plot(grid, i_main - i_eve, label="I(X;Y) - I(X;Z)")
        ax.set_xlabel("p(X = 0)")
        ax.set_ylabel("bits per channel use")
        ax.legend()
        ax.set_title("Channel analysis")
        fig.tight_layout()
        _save_figure(fig, out / "analysis.png")
    print(f"wrote {out / 'analysis.csv'}")
    return 0


def cmd_simulate(args) -> int:
    config = _load(args)
    if config.channels is None or config.protocol is None:
        raise ConfigError("simulate requires [channel] and [protocol] sections")
    out = _outdir(args)
    cfg = config.protocol
    traces = protocol.run_simulation(cfg, config.channels)
    (out / "trace.csv").write_text(protocol.traces_to_csv(traces))

    rate = protocol.achieved_rate(traces, cfg)
    asym = protocol.asymptotic_rate(cfg.rate_secret, cfg.rate_main, cfg.M)
    pe, (lo, hi) = protocol.error_rate(traces)
    peak = max(t.occupancy_after for t in traces)
    starved = sum(t.starved_messages for t in traces)
    print(f"slots simulated:    {len(traces)}")
    print(f"achieved rate:      {rate:.6f} bits/use")
    print(f"asymptotic rate:    {asym:.6f} bits/use  ((R_s + C*M)/(M+1))")
    print(f"slot error rate:    {pe:.6f}  (Wilson 95%: [{lo:.6f}, {hi:.6f}])")
    print(f"buffer peak:        {peak} bits")
    print(f"ramp-up length:     {cfg.message_cap} slots")
    if starved:
        print(f"key starvation:     {starved} messages skipped")

    slots = [t.plan.slot_index for t in traces]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(slots, [t.occupancy_after for t in traces], drawstyle="steps-post")
    ax1.set_ylabel("buffer occupancy B_k (bits)")
    ax2.plot(slots, [t.num_messages for t in traces], drawstyle="steps-post")
    ax2.set_ylabel("messages per slot")
    ax2.set_xlabel("slot k")
    fig.tight_layout()
    _save_figure(fig, out / "simulate.png")
    print(f"wrote {out / 'trace.csv'}")
    return 0


def cmd_verify(args) -> int:
    config = _load(args)
    out = _outdir(args)
    budget = _budget()
    if config.verify_instance == "config":
        if config.channels is None or config.protocol is None:
            raise ConfigError(
                "verify with instance=config requires [channel] and [protocol]"
            )
        instance = leakage.from_protocol(
            config.protocol, config.channels, config.shielded_slots
        )
    else:
        instance = leakage.toy_instance()

    joint = leakage.build_joint(instance, budget)
    report = leakage.verify_window(joint, instance)
    kt = leakage.verify_keyed_term(joint, instance)
    print(report.text_report())
    print(
        f"structural checks: I(msgs;old Z)={kt.independence_old:.2e} "
        f"I(msgs;window Z2)={kt.independence_obs:.2e} markov={kt.markov:.2e}"
    )

    control = leakage.negative_control_instance()
    control_joint = leakage.build_joint(control, budget)
    control_result = leakage.verify_keyed_term(control_joint, control, allow_violation=True)
    control_ok = control_result.term > 0.01
    print(
        f"negative control (key inside window): keyed term = "
        f"{control_result.term:.6f} bits "
        f"({'expected-fail control ok' if control_ok else 'CONTROL FAILED'})"
    )

    with open(out / "leakage_report.csv", "w") as fh:
        fh.write(leakage.LeakageReport.CSV_HEADER + "\n")
        fh.write(report.csv_row() + "\n")
    (out / "leakage_report.txt").write_text(
        report.text_report()
        + f"\n\nnegative control keyed term: {control_result.term:.9f} bits\n"
    )

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 4))
    slots = sorted(report.per_slot_wiretap_leakage)
    ax1.bar([str(j) for j in slots], [report.per_slot_wiretap_leakage[j] for j in slots])
    ax1.set_xlabel("window slot")
    ax1.set_ylabel("wiretap leakage (bits)")
    ax1.set_title("Per-slot wiretap leakage")
    names = ["wiretap", "keyed", "total", "bound"]
    vals = [report.wiretap_term, report.keyed_term, report.total_leakage_bits, report.bound]
    ax2.bar(names, vals)
    ax2.set_ylabel("bits")
    ax2.set_title("Window leakage decomposition")
    fig.tight_layout()
    _save_figure(fig, out / "verify.png")
    print(f"wrote {out / 'leakage_report.csv'}")

    return 0 if (report.passed and control_ok) else 1


# ---------------------------------------------------------------------------


def _sweep_point(task):
    """One sweep point -> list of (metric, value) pairs.  Top-level so the
    process pool can pickle it."""
    variable, value, cfg, channels = task
    rows = []
    if variable == "eve_noise":
        channels = WiretapChannelSpec(main=channels.main, degrading=bsc(value))
    else:
        cfg = replace(cfg, **{variable: int(value)})
    traces = protocol.run_simulation(cfg, channels)
    rows.append(("asymptotic_rate", protocol.asymptotic_rate(cfg.rate_secret, cfg.rate_main, cfg.M)))
    rows.append(("achieved_rate", protocol.achieved_rate(traces, cfg)))
    rows.append(("error_rate", protocol.error_rate(traces)[0]))
    rows.append(("buffer_peak", max(t.occupancy_after for t in traces)))
    rng = np.random.default_rng(cfg.seed)
    dist = protocol.resolve_input_distribution(cfg, channels)
    codebook = wiretap.build_codebook(
        cfg.n, cfg.num_bins, cfg.codewords_per_bin, dist, rng
    )
    try:
        rows.append(
            ("leakage", wiretap.exact_single_slot_leakage(codebook, channels.eve, _budget()))
        )
    except BudgetExceeded:
        pass
    return rows


def cmd_sweep(args) -> int:
    config = _load(args)
    if config.sweep_variable is None:
        raise ConfigError("sweep requires a [sweep] section")
    if config.channels is None or config.protocol is None:
        raise ConfigError("sweep requires [channel] and [protocol] sections")
    out = _outdir(args)
    tasks = [
        (config.sweep_variable, value, config.protocol, config.channels)
        for value in config.sweep_values
    ]
    results = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for value, rows in zip(config.sweep_values, pool.map(_sweep_point, tasks)):
                results.append((value, rows, None))
    else:
        for value, task in zip(config.sweep_values, tasks):
            try:
                results.append((value, _sweep_point(task), None))
            except KeybufError as exc:
                results.append((value, [], f"{type(exc).__name__}: {exc}"))

    with open(out / "sweep.csv", "w") as fh:
        fh.write("variable,value,metric,result\n")
        for value, rows, error in results:
            if error is not None:
                fh.write(f"{config.sweep_variable},{value},error,{error!r}\n")
                continue
            for metric, result in rows:
                fh.write(f"{config.sweep_variable},{value},{metric},{result:.9g}\n")

    by_metric = {}
    for value, rows, error in results:
        for metric, result in rows:
            by_metric.setdefault(metric, []).append((value, result))
    for metric, points in by_metric.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o")
        ax.set_xlabel(config.sweep_variable)
        ax.set_ylabel(metric)
        ax.set_title(f"{metric} vs {config.sweep_variable}")
        fig.tight_layout()
        _save_figure(fig, out / f"sweep_{metric}.png")
    print(f"wrote {out / 'sweep.csv'} ({len(results)} points, {len(by_metric)} metrics)")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keybuf",
        description="Key-buffer wiretap coding simulator and verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (
        ("analyze", cmd_analyze),
        ("simulate", cmd_simulate),
        ("verify", cmd_verify),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
