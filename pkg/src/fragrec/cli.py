"""Command-line interface.

Subcommands: rate, tradeoff, simulate, sweep, cardinality, pairwise.
Options resolve with precedence flag > config file > built-in default; the
config file is flat ``key=value`` with optional ``subcommand.`` prefixes.
Every output file embeds the resolved configuration so any emitted run can
be reproduced from its own header. Exit codes: 0 success, 2 validation
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .charts import write_chart
from .decoder import build_weights, dump_trial, reconstruct
from .distances import DistortionMeasure, chernoff_table
from .experiments import (
    SWEEP_CSV_HEADER,
    SweepPlan,
    estimate_fp,
    pairwise_probability_table,
    run_sweep,
    tradeoff_experiment,
)
from .model import (
    ChannelKernel,
    FragmentConfig,
    Pmf,
    RngStream,
    SourceSpec,
    ValidationError,
    shannon_entropy,
)
from .rates import (
    min_pair_distance_at_distortion,
    rate_report,
    tradeoff_curve,
    transposition_exponent,
)
from .sequences import (
    CARDINALITY_CSV_HEADER,
    cardinality_concentration_experiment,
    fragment_and_shuffle,
)

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# option table: (name, converter, default, help)

def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _float_list(text):
    """Comma list or start:stop:count linspace."""
    text = str(text)
    if ":" in text:
        start, stop, count = text.split(":")
        return tuple(np.linspace(float(start), float(stop), int(count)).tolist())
    return tuple(float(v) for v in text.split(",") if v != "")


def _bool(text):
    return str(text).lower() in ("1", "true", "yes", "on")


_COMMON = [
    ("seed", int, 1234, "master seed for all random streams"),
    ("threads", int, 0, "worker processes; 0 means hardware count"),
    ("out", str, "out", "output directory"),
    ("config", str, "", "flat key=value config file"),
    ("bits", _bool, False, "print entropies/exponents in bits (files stay in nats)"),
]

_OPTIONS = {
    "rate": [
        ("source", str, "uniform:2", "source preset: uniform:Q | bernoulli:P | file:PATH"),
        ("channel", str, "bsc:0.1", "channel preset: bsc:A | symmetric:A:Q | file:PATH"),
        ("measure", str, "hamming", "distortion: hamming | file:PATH"),
        ("k-max", int, 8, "largest cycle length to report"),
        ("deltas", _float_list, _float_list("0:1:21"), "distortion grid"),
        ("family-sizes", _int_list, (2, 4, 8, 16), "alphabet sizes for the chart families"),
        ("alpha-points", int, 60, "points per curve in the chart families"),
    ],
    "tradeoff": [
        ("source", str, "bernoulli:0.0205", "source preset"),
        ("channel", str, "symmetric:0.1:2", "channel preset"),
        ("measure", str, "hamming", "distortion: hamming | file:PATH"),
        ("m-grid", _int_list, (64, 128, 256), "fragment counts"),
        ("beta", float, 0.5, "fragment length parameter"),
        ("delta", float, 0.5, "distortion level"),
        ("xi-grid", _float_list, (), "failure levels; empty = auto around the threshold"),
        ("trials", int, 400, "Monte Carlo trials per cell"),
    ],
    "simulate": [
        ("source", str, "uniform:2", "source preset"),
        ("channel", str, "bsc:0.1", "channel preset"),
        ("measure", str, "hamming", "distortion: hamming | file:PATH"),
        ("m", int, 32, "fragment count"),
        ("beta", float, 0.0, "fragment length parameter (give beta or l)"),
        ("l", int, 0, "fragment length (give beta or l)"),
        ("delta", float, 0.0, "distortion level"),
        ("xi", float, 0.0, "failure level"),
        ("trials", int, 1000, "Monte Carlo trials"),
        ("dump-trial", _bool, False, "write a JSON debug dump of the first trial"),
    ],
    "sweep": [
        ("plan", str, "", "JSON sweep plan file (overrides the grid flags)"),
        ("source", str, "uniform:2", "source preset"),
        ("channel", str, "bsc:0.1", "channel: bsc:A | symmetric:A:Q | file:PATH, "
                                    "or a family (bsc, symmetric:Q) with alpha-grid"),
        ("measure", str, "hamming", "distortion: hamming | file:PATH"),
        ("m-grid", _int_list, (16, 32, 64), "fragment counts"),
        ("beta-grid", _float_list, (), "beta grid (or use l-grid)"),
        ("l-grid", _int_list, (), "fragment length grid"),
        ("alpha-grid", _float_list, (), "channel parameter grid"),
        ("delta-grid", _float_list, (0.0,), "distortion levels"),
        ("xi-grid", _float_list, (0.0,), "failure levels"),
        ("trials", int, 1000, "Monte Carlo trials per cell"),
    ],
    "cardinality": [
        ("source", str, "bernoulli:0.0889", "source preset"),
        ("m-grid", _int_list, (64, 256, 1024), "fragment counts"),
        ("beta", float, 0.5, "fragment length parameter"),
        ("eta", float, 0.2, "tail margin above the typical log-cardinality"),
        ("trials", int, 1000, "trials per fragment count"),
    ],
    "pairwise": [
        ("source", str, "uniform:2", "source preset"),
        ("channel", str, "bsc:0.1", "channel preset"),
        ("l-min", int, 1, "smallest fragment length"),
        ("l-max", int, 6, "largest fragment length"),
    ],
}


def parse_source(text: str) -> tuple[Pmf, str]:
    parts = str(text).split(":")
    kind = parts[0]
    if kind == "uniform":
        size = int(parts[1]) if len(parts) > 1 else 2
        return Pmf.uniform(size), f"uniform:{size}"
    if kind == "bernoulli":
        if len(parts) != 2:
            raise ValidationError("bernoulli source needs a parameter, e.g. bernoulli:0.1")
        p = float(parts[1])
        return Pmf.bernoulli(p), f"bernoulli:{parts[1]}"
    if kind == "file":
        vec = np.loadtxt(parts[1], dtype=np.float64).ravel()
        return Pmf(vec), text
    raise ValidationError(f"unknown source preset {text!r}")


def parse_channel(text: str, alpha: float | None = None) -> tuple[ChannelKernel, str]:
    """Returns (kernel, channel_param label). ``alpha`` fills in a family
    preset like "bsc" or "symmetric:4" used by sweeps."""
    parts = str(text).split(":")
    kind = parts[0]
    if kind == "bsc":
        if len(parts) == 2:
            a = float(parts[1])
        elif alpha is not None:
            a = float(alpha)
        else:
            raise ValidationError("bsc channel needs a parameter, e.g. bsc:0.1")
        return ChannelKernel.bsc(a), f"{a:g}"
    if kind == "symmetric":
        if len(parts) == 3:
            a, q = float(parts[1]), int(parts[2])
        elif len(parts) == 2 and alpha is not None:
            a, q = float(alpha), int(parts[1])
        else:
            raise ValidationError(
                "symmetric channel needs parameters, e.g. symmetric:0.1:4 "
                "(or symmetric:4 with an alpha grid)"
            )
        return ChannelKernel.symmetric(a, q), f"{a:g}"
    if kind == "file":
        return ChannelKernel.from_file(parts[1]), text
    raise ValidationError(f"unknown channel preset {text!r}")


def parse_measure(text: str, size: int) -> DistortionMeasure:
    if text == "hamming":
        return DistortionMeasure.hamming(size)
    if text.startswith("file:"):
        return DistortionMeasure.from_file(text.split(":", 1)[1])
    raise ValidationError(f"unknown distortion measure {text!r}")


def build_spec(source_text: str, channel_text: str, alpha=None):
    p_x, source_label = parse_source(source_text)
    channel, channel_label = parse_channel(channel_text, alpha)
    if channel.x_size < p_x.size:
        raise ValidationError(
            f"channel has {channel.x_size} input rows but the source has {p_x.size} symbols"
        )
    if channel.x_size > p_x.size:
        channel = ChannelKernel(channel.rows[: p_x.size])
    return SourceSpec.make(p_x, channel), source_label, channel_label


# ---------------------------------------------------------------------------
# config file + option resolution

def load_config(path: str) -> dict:
    """Flat key=value config. The provenance blocks emitted at the top of
    output files are '# key=value' lines, so those parse too after the
    comment marker is stripped; commented lines without '=' are ignored."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            comment = line.startswith("#")
            if comment:
                line = line.lstrip("#").strip()
            if "=" not in line:
                if comment:
                    continue
                raise ValidationError(f"bad config line (expected key=value): {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def resolve_options(sub: str, args: argparse.Namespace) -> dict:
    config = {}
    if args.config:
        config = load_config(args.config)
    resolved = {}
    for name, conv, default, _ in _COMMON + _OPTIONS[sub]:
        attr = name.replace("-", "_")
        given = getattr(args, attr)
        if given is not None:
            resolved[attr] = given
        elif f"{sub}.{name}" in config:
            resolved[attr] = conv(config[f"{sub}.{name}"])
        elif name in config:
            resolved[attr] = conv(config[name])
        else:
            resolved[attr] = default
    if resolved["threads"] == 0:
        resolved["threads"] = os.cpu_count() or 1
    return resolved


def echo_dict(sub: str, opts: dict) -> dict:
    echo = {"tool": f"fragrec {__version__}", "command": sub}
    for key in sorted(opts):
        if key == "config":
            continue
        val = opts[key]
        if isinstance(val, tuple):
            val = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in val)
        echo[f"{sub}.{key.replace('_', '-')}"] = val
    return echo


def _write_csv(path, header, rows, echo):
    with open(path, "w", newline="") as fh:
        for k, v in echo.items():
            fh.write(f"# {k}={v}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, payload, echo):
    with open(path, "w") as fh:
        json.dump({"config": echo, **payload}, fh, indent=2)
        fh.write("\n")


def _display(value: float, bits: bool) -> str:
    if bits:
        return f"{value / LN2:.6f} bits"
    return f"{value:.6f} nats"


# ---------------------------------------------------------------------------
# subcommands

def cmd_rate(opts: dict) -> int:
    spec, source_label, channel_label = build_spec(opts["source"], opts["channel"])
    measure = parse_measure(opts["measure"], spec.x_size)
    deltas = [d for d in opts["deltas"] if 0.0 <= d <= measure.max_value]
    report = rate_report(spec, measure, deltas, k_max=opts["k_max"])
    echo = echo_dict("rate", opts)

    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    _write_csv(
        os.path.join(out, "rate_report.csv"),
        ["quantity", "parameter", "value", "method"],
        [[q, p, repr(v), m] for q, p, v, m in report.to_rows()],
        echo,
    )
    _write_json(os.path.join(out, "rate_report.json"), report.to_dict(), echo)

    chart_note = _rate_charts(opts, out)

    bits = opts["bits"]
    print(f"source={source_label} channel_param={channel_label}")
    print(f"transposition exponent: {_display(report.transposition_exponent, bits)}")
    print(f"critical beta         : {report.critical_beta:.6f}")
    print(f"source entropy        : {_display(report.source_entropy, bits)}")
    print(
        "pairwise lower-bound condition (exponent < half collision entropy): "
        f"{report.pair_lower_bound_condition}"
    )
    for pt in report.tradeoff:
        tag = "  [trade-off vacuous at this delta]" if pt.vacuous else ""
        print(f"  delta={pt.delta:g} min_distance={pt.min_distance:.6g} xi_min={pt.xi_min:.6g}{tag}")
    if chart_note:
        print(chart_note)
    print(f"wrote {out}/rate_report.csv, rate_report.json")
    return 0


def _rate_charts(opts: dict, out: str) -> str:
    """Exponent-vs-alpha and xi-vs-delta curve families over alphabet sizes."""
    sizes = opts["family_sizes"]
    points = opts["alpha_points"]
    series_exp = []
    for q in sizes:
        alphas = np.linspace(0.0, (q - 1) / q, points)
        vals = []
        for a in alphas:
            s = SourceSpec.make(Pmf.uniform(q), ChannelKernel.symmetric(float(a), q))
            vals.append(transposition_exponent(s))
        series_exp.append((f"|X|={q}", alphas.tolist(), vals))
    write_chart(
        os.path.join(out, "exponent_vs_alpha.svg"),
        series_exp,
        title="transposition exponent, uniform source, uniform-error channel",
        x_label="channel parameter",
        y_label="exponent (nats)",
    )

    spec, _, _ = build_spec(opts["source"], opts["channel"])
    h = shannon_entropy(spec.p_x)
    alpha = 0.1
    ch_parts = str(opts["channel"]).split(":")
    if ch_parts[0] in ("bsc", "symmetric") and len(ch_parts) >= 2:
        try:
            alpha = float(ch_parts[1])
        except ValueError:
            pass
    series_trade = []
    deltas = np.linspace(0.01, 1.0, 100)
    for q in sizes:
        kernel = ChannelKernel.symmetric(alpha, q, x_size=spec.x_size)
        fam_spec = SourceSpec.make(spec.p_x, kernel)
        measure = DistortionMeasure.hamming(spec.x_size)
        pts = tradeoff_curve(fam_spec, measure, deltas.tolist())
        xs = [p.delta for p in pts if not p.vacuous]
        ys = [p.xi_min for p in pts if not p.vacuous]
        series_trade.append((f"|Y|={q}", xs, ys))
    write_chart(
        os.path.join(out, "tradeoff_xi_delta.svg"),
        series_trade,
        title=f"minimal failure level vs distortion (H={h:.3g} nats, alpha={alpha:g})",
        x_label="distortion level",
        y_label="minimal failure level",
    )
    return f"wrote {out}/exponent_vs_alpha.svg, tradeoff_xi_delta.svg"


def cmd_pairwise(opts: dict) -> int:
    spec, source_label, channel_label = build_spec(opts["source"], opts["channel"])
    l_values = list(range(opts["l_min"], opts["l_max"] + 1))
    report = pairwise_probability_table(spec, l_values)
    echo = echo_dict("pairwise", opts)
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    rows = [
        [l, repr(p), repr(b), repr(r)]
        for l, p, b, r in zip(
            report.l_values, report.probabilities, report.bounds, report.rates
        )
    ]
    _write_csv(
        os.path.join(out, "pairwise.csv"),
        ["l", "exact_probability", "exponent_bound", "rate_per_symbol"],
        rows,
        echo,
    )
    bits = opts["bits"]
    print(f"source={source_label} channel_param={channel_label}")
    print(f"transposition exponent: {_display(report.exponent, bits)}")
    print(f"lower-bound condition holds: {report.condition_holds}")
    print(f"{'l':>3} {'exact P':>13} {'bound':>13} {'-log P/(2l)':>12}")
    for l, p, b, r in zip(report.l_values, report.probabilities, report.bounds, report.rates):
        print(f"{l:>3} {p:>13.6e} {b:>13.6e} {r:>12.6f}")
    print(f"wrote {out}/pairwise.csv")
    return 0


def cmd_simulate(opts: dict) -> int:
    spec, source_label, channel_label = build_spec(opts["source"], opts["channel"])
    measure = parse_measure(opts["measure"], spec.x_size)
    if (opts["beta"] > 0) == (opts["l"] > 0):
        raise ValidationError("give exactly one of beta or l")
    if opts["beta"] > 0:
        config = FragmentConfig(m=opts["m"], beta=opts["beta"])
    else:
        config = FragmentConfig(m=opts["m"], l=opts["l"])
    echo = echo_dict("simulate", opts)
    out = opts["out"]
    os.makedirs(out, exist_ok=True)

    cell = estimate_fp(
        spec, config, measure, opts["delta"], opts["xi"], opts["trials"],
        RngStream(opts["seed"], 0), threads=opts["threads"],
        source_label=source_label, channel_label=channel_label,
    )
    _write_csv(os.path.join(out, "simulate.csv"), SWEEP_CSV_HEADER, [cell.csv_row()], echo)

    if opts["dump_trial"]:
        inst = fragment_and_shuffle(spec, config, RngStream(opts["seed"], 0))
        weights = build_weights(inst, spec)
        recon = reconstruct(inst, spec, measure, opts["delta"])
        _write_json(
            os.path.join(out, "trial_dump.json"),
            {"trial": dump_trial(inst, weights, recon)},
            echo,
        )
        print(f"wrote {out}/trial_dump.json")

    print(
        f"M={cell.m} L={cell.l} beta_eff={cell.beta:.4f} trials={cell.trials} "
        f"failures={cell.failures} fp_hat={cell.fp_hat:.6g} "
        f"ci=[{cell.ci_lo:.6g}, {cell.ci_hi:.6g}] mean_fail_fraction={cell.mean_xi:.6g}"
    )
    print(f"wrote {out}/simulate.csv")
    return 0


def cmd_sweep(opts: dict) -> int:
    if opts["plan"]:
        plan = SweepPlan.from_json(opts["plan"])
    else:
        plan = SweepPlan(
            source=opts["source"],
            channel=opts["channel"],
            m_grid=opts["m_grid"],
            delta_grid=opts["delta_grid"],
            xi_grid=opts["xi_grid"],
            trials=opts["trials"],
            seed=opts["seed"],
            beta_grid=opts["beta_grid"],
            l_grid=opts["l_grid"],
            alpha_grid=opts["alpha_grid"],
        )
    echo = echo_dict("sweep", opts)
    echo["sweep.plan-resolved"] = json.dumps(plan.to_json(), separators=(",", ":"))
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "sweep.csv")

    measure_cache = {}

    def resolve(source_text, channel_text, alpha):
        spec, _, channel_label = build_spec(source_text, channel_text, alpha)
        key = spec.x_size
        if key not in measure_cache:
            measure_cache[key] = parse_measure(opts.get("measure", "hamming"), key)
        return spec, measure_cache[key], channel_label

    new_cells = run_sweep(plan, path, threads=opts["threads"], resolve=resolve, echo=echo)
    print(f"computed {len(new_cells)} new cell(s); output {path}")
    return 0


def cmd_cardinality(opts: dict) -> int:
    p_x, source_label = parse_source(opts["source"])
    spec = SourceSpec.make(p_x, ChannelKernel.identity(p_x.size))
    echo = echo_dict("cardinality", opts)
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    rows = []
    reports = []
    for idx, m in enumerate(opts["m_grid"]):
        config = FragmentConfig(m=int(m), beta=opts["beta"])
        rng = RngStream(opts["seed"], idx * opts["trials"])
        rep = cardinality_concentration_experiment(
            spec, config, opts["eta"], opts["trials"], rng
        )
        reports.append(rep)
        rows.append(rep.csv_row(opts["seed"]))
    _write_csv(os.path.join(out, "cardinality.csv"), CARDINALITY_CSV_HEADER, rows, echo)
    print(f"source={source_label} entropy={shannon_entropy(p_x):.6f} nats")
    print(f"{'M':>6} {'L':>3} {'tail_rate':>10} {'ci':>22} {'mean_logcard':>14}")
    for rep in reports:
        print(
            f"{rep.m:>6} {rep.l:>3} {rep.tail_rate:>10.4g} "
            f"[{rep.ci_lo:.4g}, {rep.ci_hi:.4g}]".rjust(22)
            + f" {rep.mean_logcard:>14.4f}"
        )
    print(f"wrote {out}/cardinality.csv")
    return 0


def cmd_tradeoff(opts: dict) -> int:
    spec, source_label, channel_label = build_spec(opts["source"], opts["channel"])
    measure = parse_measure(opts["measure"], spec.x_size)
    h = shannon_entropy(spec.p_x)
    table = chernoff_table(spec.channel, 0.5)
    dstar = min_pair_distance_at_distortion(table, measure, opts["delta"])
    xi_min = h / dstar if dstar > 0 else math.inf
    xi_grid = opts["xi_grid"]
    if not xi_grid:
        if math.isfinite(xi_min) and xi_min > 0:
            xi_grid = tuple(
                round(f * xi_min, 6) for f in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
                if f * xi_min < 1.0
            )
        else:
            xi_grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    report = tradeoff_experiment(
        spec, opts["beta"], opts["m_grid"], measure, opts["delta"], xi_grid,
        opts["trials"], RngStream(opts["seed"], 0), threads=opts["threads"],
        source_label=source_label, channel_label=channel_label,
    )
    echo = echo_dict("tradeoff", opts)
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    _write_csv(
        os.path.join(out, "tradeoff_fp.csv"),
        SWEEP_CSV_HEADER,
        [c.csv_row() for c in report.cells],
        echo,
    )
    series = []
    for m in opts["m_grid"]:
        xs = [c.xi for c in report.cells if c.m == m]
        ys = [c.fp_hat for c in report.cells if c.m == m]
        series.append((f"M={m}", xs, ys))
    write_chart(
        os.path.join(out, "tradeoff_fp.svg"),
        series,
        title=f"failure probability vs failure level (threshold {report.xi_min:.3g})",
        x_label="failure level",
        y_label="estimated failure probability",
    )
    print(f"source={source_label} channel_param={channel_label}")
    print(f"threshold xi: {report.xi_min:.6g} (beta condition holds: {report.beta_condition_holds})")
    for m, xi in sorted(report.transition_xi.items()):
        print(f"  M={m}: estimate drops below 1/2 at xi={xi:g}")
    print(f"wrote {out}/tradeoff_fp.csv, tradeoff_fp.svg")
    return 0


_COMMANDS = {
    "rate": cmd_rate,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "cardinality": cmd_cardinality,
    "pairwise": cmd_pairwise,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragrec",
        description="Simulation and rate analysis for reference-guided fragment reordering.",
    )
    parser.add_argument("--version", action="version", version=f"fragrec {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for sub, options in _OPTIONS.items():
        sp = subs.add_parser(sub, help=f"{sub} command")
        for name, conv, default, help_text in _COMMON + options:
            flag = f"--{name}"
            if conv is _bool:
                sp.add_argument(flag, nargs="?", const=True, default=None,
                                type=_bool, help=help_text)
            else:
                sp.add_argument(flag, type=conv, default=None,
                                help=f"{help_text} (default: {default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = resolve_options(args.command, args)
        return _COMMANDS[args.command](opts)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
