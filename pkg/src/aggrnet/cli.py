"""Command-line front end: INI experiment files, parameter sweeps and CSV output.

    aggrnet run <config> [--scenario NAME] [--out DIR] [--seed N] [--threads K] [--gnuplot]
    aggrnet tables <config> [--out FILE]
    aggrnet check

Exit status: 0 success, 2 configuration error, 3 numerical non-convergence,
4 a point outside the stability region where a stable one was required.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import itertools
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import __version__
from .channel import ChannelParams, LinkGeometry, build_tables
from .errors import (AggrnetError, BranchPointError, ConfigError, InstabilityError,
                     InvalidParameterError, NonConvergenceError)
from .network import CALIBRATED_NOISE, Geometry, NetworkConfig

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INSTABILITY = 0, 1, 2, 3, 4

SCENARIOS = ("custom", "table1", "fig2", "fig3-6", "fig7")
ANALYSES = ("throughput", "stability", "delay-closed", "delay-bvp", "simulate")
SWEEPABLE = ("m", "m1", "m2", "t", "t1", "t2", "alpha", "alpha1", "alpha2", "gamma", "noise")


def _count(v):
    x = float(v)
    if x != int(x) or x < 0:
        raise ValueError("must be a non-negative integer")
    return int(x)


def _prob(v):
    x = float(v)
    if not 0.0 <= x <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return x


def _positive(v):
    x = float(v)
    if not x > 0 or not np.isfinite(x):
        raise ValueError("must be positive")
    return x


def _pair(conv):
    """One value for both areas or 'v1, v2'."""
    def parse(v):
        parts = [p for p in re.split(r"[,\s]+", v.strip()) if p]
        if len(parts) not in (1, 2):
            raise ValueError("expected one or two values")
        vals = [conv(p) for p in parts]
        return (vals[0], vals[-1])
    return parse


def _noise(v):
    if v.strip().lower() == "calibrated":
        return CALIBRATED_NOISE
    x = float(v)
    if x < 0 or not np.isfinite(x):
        raise ValueError("must be >= 0")
    return x


def _choice(options):
    def parse(v):
        v = v.strip()
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


def _analyses(v):
    items = tuple(x for x in re.split(r"[,\s]+", v.strip()) if x)
    bad = [x for x in items if x not in ANALYSES]
    if bad:
        raise ValueError(f"unknown analyses {bad}; choose from {', '.join(ANALYSES)}")
    return items


# section -> key -> (parser, default)
SCHEMA = {
    "network": {
        "m": (_count, None), "m1": (_count, None), "m2": (_count, None),
        "t": (_prob, None), "t1": (_prob, 0.1), "t2": (_prob, 0.1),
        "alpha": (_prob, None), "alpha1": (_prob, 0.8), "alpha2": (_prob, 0.8),
        "d_sensor_sink": (_pair(_positive), (130.0, 130.0)),
        "d_sensor_agg": (_pair(_positive), (60.0, 60.0)),
        "d_agg_sink": (_pair(_positive), (80.0, 80.0)),
        "sensor_power": (_positive, 1e-3), "agg_power": (_positive, 1e-2),
        "path_loss_exp": (_positive, 4.0), "fading": (_positive, 1.0),
    },
    "channel": {"gamma": (_positive, 0.5), "noise": (_noise, CALIBRATED_NOISE)},
    "sim": {
        "slots": (_count, 10**6), "warmup": (_count, None), "seed": (_count, 0),
        "replications": (_count, 5), "mode": (_choice(("independent", "full-sinr")), "independent"),
        "batches": (_count, 20), "workers": (_count, 1),
    },
    "experiment": {
        "scenario": (_choice(SCENARIOS), "custom"), "analyses": (_analyses, ("throughput", "stability")),
        "output": (str, None), "bvp_m": (_count, 512), "points": (_count, 6),
        "rho_max": (_prob, 0.85), "resolution": (_count, 40), "gnuplot": (lambda v: v.strip().lower() in ("1", "yes", "true", "on"), False),
    },
}
REQUIRED = ("network",)


def _sweep_values(name, text):
    """'a, b, c', inclusive ranges 'a:b' / 'a:b:step', or 'linspace(a, b, n)'."""
    text = text.strip()
    if not text:
        return []
    m = re.fullmatch(r"linspace\(\s*([^,]+),([^,]+),([^)]+)\)", text)
    if m:
        vals = list(np.linspace(float(m[1]), float(m[2]), int(m[3])))
    elif ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError("range must be start:stop or start:stop:step")
        step = parts[2] if len(parts) == 3 else 1.0
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(np.floor((parts[1] - parts[0]) / step + 1e-9)) + 1
        vals = [parts[0] + k * step for k in range(max(n, 0))]
    else:
        vals = [float(v) for v in re.split(r"[,\s]+", text) if v]
    conv = {"m": _count, "m1": _count, "m2": _count, "gamma": _positive, "noise": _noise}.get(name, _prob)
    return [conv(repr(float(v))) for v in vals]


@dataclass
class ExperimentSpec:
    scenario: str
    network: NetworkConfig
    sweep: list  # [(name, [values])] in file order
    analyses: tuple
    output: str
    sim: dict
    options: dict
    resolved: dict = field(default_factory=dict)  # section -> key -> value, for provenance
    source: str = ""

    def resolved_text(self) -> str:
        lines = []
        for sec in sorted(self.resolved):
            for key in sorted(self.resolved[sec]):
                lines.append(f"{sec}.{key} = {self.resolved[sec][key]}")
        return "\n".join(lines)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()[:16]

    def sim_config(self, **overrides):
        from .simulator import SimConfig
        s = dict(self.sim)
        s.update(overrides)
        return SimConfig(slots=s["slots"], warmup=s["warmup"], seed=s["seed"],
                         replications=max(s["replications"], 1), mode=s["mode"],
                         batches=s["batches"], workers=max(s["workers"], 1))


def _line_index(text):
    """(section, key) -> line number, for error context."""
    out, sec = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            sec = m[1].strip().lower()
            out[(sec, None)] = no
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and sec is not None:
            out.setdefault((sec, m[1].strip().lower()), no)
    return out


def _parse_text(text, source="<string>") -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _line_index(text)

    def where(sec, key=None):
        no = lines.get((sec, key))
        return f"{source}:{no}" if no else source

    for sec in cp.sections():
        if sec not in SCHEMA and sec != "sweep":
            raise ConfigError(f"{where(sec)}: unknown section [{sec}]")
    for sec in REQUIRED:
        if not cp.has_section(sec):
            raise ConfigError(f"{source}: missing section [{sec}]")

    vals = {}
    for sec, keys in SCHEMA.items():
        vals[sec] = {}
        given = cp[sec] if cp.has_section(sec) else {}
        for key in given:
            if key not in keys:
                raise ConfigError(f"{where(sec, key)}: unknown key '{key}' in [{sec}]")
        for key, (conv, default) in keys.items():
            if key in given:
                try:
                    vals[sec][key] = conv(given[key])
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{where(sec, key)}: [{sec}] {key} = {given[key]!r}: {exc}") from None
            else:
                vals[sec][key] = default

    sweep = []
    if cp.has_section("sweep"):
        for key, text_val in cp["sweep"].items():
            if key not in SWEEPABLE:
                raise ConfigError(f"{where('sweep', key)}: cannot sweep unknown parameter '{key}'")
            try:
                sweep.append((key, _sweep_values(key, text_val)))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{where('sweep', key)}: [sweep] {key}: {exc}") from None

    net = vals["network"]
    for short, pair in (("m", ("m1", "m2")), ("t", ("t1", "t2")), ("alpha", ("alpha1", "alpha2"))):
        if net[short] is not None:
            if any(k in (cp["network"] if cp.has_section("network") else {}) for k in pair):
                raise ConfigError(f"{where('network', short)}: '{short}' conflicts with {pair[0]}/{pair[1]}")
            net[pair[0]] = net[pair[1]] = net[short]
    for k in ("m1", "m2"):
        if net[k] is None:
            raise ConfigError(f"{where('network')}: [network] needs m (or m1 and m2)")
    geo = _geometry(net)
    ch = vals["channel"]
    cfg = NetworkConfig(net["m1"], net["m2"], net["t1"], net["t2"], net["alpha1"], net["alpha2"],
                        geo, ChannelParams(ch["gamma"], ch["noise"]))

    exp = vals["experiment"]
    if not exp["analyses"]:
        raise ConfigError(f"{where('experiment', 'analyses')}: at least one analysis is required")
    scenario = exp["scenario"]
    output = exp["output"] or f"{scenario}.csv"
    sim = vals["sim"]
    if sim["warmup"] is not None and sim["warmup"] >= sim["slots"]:
        raise ConfigError(f"{where('sim', 'warmup')}: warmup must be below slots")
    if sim["replications"] < 1:
        raise ConfigError(f"{where('sim', 'replications')}: replications must be >= 1")

    resolved = {}
    for sec in ("network", "channel", "sim", "experiment"):
        resolved[sec] = {k: _fmt(v) for k, v in vals[sec].items() if v is not None and k not in ("m", "t", "alpha")}
    resolved["sweep"] = {k: _fmt(v) for k, v in sweep}
    options = {k: exp[k] for k in ("bvp_m", "points", "rho_max", "resolution", "gnuplot")}
    return ExperimentSpec(scenario, cfg, sweep, exp["analyses"], output, sim, options, resolved, source)


def _geometry(net):
    ls = lambda d, p: LinkGeometry(d, p, net["path_loss_exp"], net["fading"])
    return Geometry(tuple(ls(d, net["sensor_power"]) for d in net["d_sensor_sink"]),
                    tuple(ls(d, net["sensor_power"]) for d in net["d_sensor_agg"]),
                    tuple(ls(d, net["agg_power"]) for d in net["d_agg_sink"]))


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def load_config(path) -> ExperimentSpec:
    """Parse an experiment file (sections [network], [channel], [sweep], [sim], [experiment])."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return _parse_text(text, str(path))


def shipped_config(name: str) -> str:
    """Path of a configuration file shipped with the package (e.g. 'table1')."""
    ref = resources.files("aggrnet") / "configs" / f"{name}.ini"
    if not ref.is_file():
        raise ConfigError(f"no shipped configuration named {name!r}")
    return str(ref)


# ---------------------------------------------------------------- evaluation


def _apply(cfg: NetworkConfig, point: dict) -> NetworkConfig:
    kw = dict(point)
    for k in ("m", "m1", "m2"):
        if k in kw:
            kw[k] = int(kw[k])
    return cfg.with_(**kw)


class PointError(Exception):
    def __init__(self, point, exc):
        super().__init__(f"at {point}: {type(exc).__name__}: {exc}")
        self.point, self.exc = point, exc


def _custom_columns(analyses):
    cols = []
    if "throughput" in analyses:
        cols += ["lambda1", "lambda2", "t_direct1", "t_relayed1", "t_direct2", "t_relayed2",
                 "network_throughput", "no_aggregator_throughput"]
    if "stability" in analyses:
        cols += ["stable"]
    if "delay-closed" in analyses:
        cols += ["D_low", "D_up"]
    if "delay-bvp" in analyses:
        cols += ["D1_bvp", "D2_bvp"]
    if "simulate" in analyses:
        cols += ["lambda1_sim", "lambda1_sim_se", "D1_sim", "D1_sim_se", "D2_sim", "D2_sim_se",
                 "goodput_sim", "goodput_sim_se", "stability_sim"]
    return cols


def _custom_row(spec, cfg, seed):
    from . import throughput as tp
    from .stability import is_stable
    tables = build_tables(cfg)
    out = []
    a = spec.analyses
    if "throughput" in a:
        rep = tp.throughput_report(cfg, tables)
        out += [rep.lam[0], rep.lam[1], rep.t_direct[0], rep.t_relayed[0], rep.t_direct[1],
                rep.t_relayed[1], rep.network, rep.no_aggregator]
    if "stability" in a:
        lam = (tp.arrival_rate(1, cfg, tables), tp.arrival_rate(2, cfg, tables))
        out += [int(is_stable(lam[0], lam[1], cfg, tables))]
    if "delay-closed" in a:
        from .delay import SymmetricParams, delay_bounds
        b = delay_bounds(SymmetricParams.from_tables(cfg, tables))
        out += [b.lower, b.upper]
    if "delay-bvp" in a:
        from .bvp import KernelParams, mean_delays, solve
        kp = KernelParams.from_network(cfg, tables)
        out += list(mean_delays(kp, solve(kp, M=spec.options["bvp_m"])))
    if "simulate" in a:
        from .simulator import estimate_stability, run
        st = run(cfg, tables, spec.sim_config(seed=seed))
        out += [st.lam[0], st.lam_se[0], st.mean_sojourn[0], st.mean_sojourn_se[0],
                st.mean_sojourn[1], st.mean_sojourn_se[1], st.goodput, st.goodput_se,
                estimate_stability(st)]
    return out


def _points(sweep):
    names = [n for n, _ in sweep]
    if any(len(v) == 0 for _, v in sweep):
        return names, []
    return names, [dict(zip(names, combo)) for combo in itertools.product(*[v for _, v in sweep])]


def _scenario_custom(spec, seed, threads):
    names, points = _points(spec.sweep)
    header = names + _custom_columns(spec.analyses)

    def job(k):
        pt = points[k]
        try:
            cfg = _apply(spec.network, pt)
            return [pt[n] for n in names] + _custom_row(spec, cfg, seed + k)
        except (AggrnetError, ValueError) as exc:
            raise PointError(pt, exc) from exc

    return _collect(spec.output, header, job, len(points), threads)


def _collect(name, header, job, n, threads):
    """{name: (header, rows)}; on failure the rows finished so far travel with the error."""
    try:
        return {name: (header, _ordered(job, n, threads))}
    except PointError as exc:
        exc.outputs = {name: (header, exc.rows)}
        raise


def _ordered(job, n, threads):
    """Results in point order; stops at the first failing point (earlier rows are kept)."""
    rows = []
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futures = [ex.submit(job, k) for k in range(n)]
            for f in futures:
                try:
                    rows.append(f.result())
                except PointError as exc:
                    for g in futures:
                        g.cancel()
                    exc.rows = rows
                    raise
    else:
        for k in range(n):
            try:
                rows.append(job(k))
            except PointError as exc:
                exc.rows = rows
                raise
    return rows


def _axis(spec, name, default):
    for n, v in spec.sweep:
        if n == name:
            return v
    return default


def _scenario_table1(spec, seed, threads):
    from .stability import classify_sensor_counts
    gammas = _axis(spec, "gamma", [0.2, 0.5, 1.2, 2.0])
    ts = _axis(spec, "t", [0.1, 0.2])
    ms = _axis(spec, "m", list(range(1, 31)))
    pairs = [(g, t) for g in gammas for t in ts]

    def job(k):
        g, t = pairs[k]
        try:
            return classify_sensor_counts(spec.network, g, t, ms)
        except (AggrnetError, ValueError) as exc:
            raise PointError({"gamma": g, "t": t}, exc) from exc

    res = _ordered(job, len(pairs), threads)
    long_rows = [[g, t, m, lam, lab] for (g, t), r in zip(pairs, res) for m, lam, lab in r]
    wide_header = ["M"] + [f"gamma{_fmt(g)}_t{_fmt(t)}" for g, t in pairs]
    wide_rows = [[m] + [r[i][2] for r in res] for i, m in enumerate(ms)]
    base = os.path.splitext(spec.output)[0]
    return {spec.output: (wide_header, wide_rows),
            f"{base}_long.csv": (["gamma", "t", "M", "lambda", "label"], long_rows)}


def _scenario_fig2(spec, seed, threads):
    from .stability import region_closure
    gammas = _axis(spec, "gamma", [0.5, 1.2])

    def job(k):
        g = gammas[k]
        cfg = spec.network.with_(gamma=g)
        front, alphas = region_closure(cfg, build_tables(cfg), spec.options["resolution"])
        return [[g, p[0], p[1], a[0], a[1]] for p, a in zip(front, alphas)]

    rows = [r for block in _ordered(job, len(gammas), threads) for r in block]
    return {spec.output: (["gamma", "lambda1", "lambda2", "alpha1", "alpha2"], rows)}


def _scenario_fig36(spec, seed, threads):
    from . import throughput as tp
    gammas = _axis(spec, "gamma", [0.2, 0.5, 1.2, 2.0])
    ts = _axis(spec, "t", [0.1, 0.2])
    ms = _axis(spec, "m", list(range(1, 31)))
    pts = [(g, t, m) for g in gammas for t in ts for m in ms]

    def job(k):
        g, t, m = pts[k]
        try:
            cfg = spec.network.with_(gamma=g, t=t, m=int(m))
            rep = tp.throughput_report(cfg, build_tables(cfg))
        except (AggrnetError, ValueError) as exc:
            raise PointError({"gamma": g, "t": t, "m": m}, exc) from exc
        return [g, t, int(m), rep.network, rep.no_aggregator, rep.t_direct[0], rep.t_relayed[0],
                rep.relayed_fraction[0], rep.lam[0], int(all(rep.stable))]

    header = ["gamma", "t", "M", "network_throughput", "no_aggregator_throughput", "t_direct",
              "t_relayed", "relayed_fraction", "lambda", "stable"]
    return _collect(spec.output, header, job, len(pts), threads)


def stable_access_points(cfg, n, rho_max):
    """Access probabilities t giving n loads evenly spread up to ``rho_max`` of the stability limit.

    One sensor per area, symmetric setup. Returns a list of (t, lam, rho).
    """
    from .delay import SymmetricParams, symmetric_arrival_rate
    from scipy.optimize import brentq

    def rho(t):
        c = cfg.with_(m=1, t=t)
        p = SymmetricParams.from_tables(c, build_tables(c))
        return symmetric_arrival_rate(p) / p.service

    grid = np.linspace(1e-3, 1.0, 400)
    r = np.array([rho(t) for t in grid])
    peak = float(np.max(r))
    targets = np.linspace(0.0, min(rho_max, 0.999) * min(peak, 1.0), n + 1)[1:]
    out = []
    for target in targets:
        # first crossing of the load curve
        k = int(np.argmax(r >= target))
        lo = grid[k - 1] if k > 0 else 0.0
        t = brentq(lambda s: rho(s) - target, lo, grid[k], xtol=1e-12) if k > 0 else grid[0]
        out.append(float(t))
    return out


def _scenario_fig7(spec, seed, threads):
    from .delay import SymmetricParams, delay_bounds
    from .simulator import run
    gammas = _axis(spec, "gamma", [0.2, 0.5, 1.2, 2.0])
    use_sim = "simulate" in spec.analyses
    pts = []
    for g in gammas:
        base = spec.network.with_(gamma=g, m=1)
        ts = _axis(spec, "t", None) or stable_access_points(base, spec.options["points"], spec.options["rho_max"])
        pts += [(g, t) for t in ts]

    def job(k):
        g, t = pts[k]
        try:
            cfg = spec.network.with_(gamma=g, t=t, m=1)
            tables = build_tables(cfg)
            b = delay_bounds(SymmetricParams.from_tables(cfg, tables))
            row = [g, t, b.lam, b.lower, b.upper]
            if use_sim:
                st = run(cfg, tables, spec.sim_config(seed=seed + k))
                row += [st.mean_sojourn[0], st.mean_sojourn_se[0]]
            else:
                row += ["", ""]
            return row
        except (AggrnetError, ValueError) as exc:
            raise PointError({"gamma": g, "t": t}, exc) from exc

    header = ["gamma", "t", "lambda", "D_low", "D_up", "D_sim", "sim_stderr"]
    return _collect(spec.output, header, job, len(pts), threads)


_RUNNERS = {"custom": _scenario_custom, "table1": _scenario_table1, "fig2": _scenario_fig2,
            "fig3-6": _scenario_fig36, "fig7": _scenario_fig7}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, spec: ExperimentSpec, seed):
    with open(path, "w", newline="") as fh:
        fh.write(f"# aggrnet {__version__} scenario={spec.scenario} seed={seed} config_sha256={spec.config_hash}\n")
        for line in spec.resolved_text().splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([_cell(v) for v in r] for r in rows)


GNUPLOT = {
    "fig2": "plot for [g in GAMMAS] '{csv}' using 2:($1==g?$3:1/0) with linespoints title sprintf('gamma=%s', g)\n",
    "fig3-6": "plot '{csv}' using 3:4 with linespoints title 'with aggregators', '' using 3:5 with linespoints title 'without'\n",
    "fig7": "plot '{csv}' using 3:4 with lines title 'D_low', '' using 3:5 with lines title 'D_up', '' using 3:6:7 with yerrorbars title 'simulation'\n",
}


def _gnuplot(path, csv_path, spec):
    body = GNUPLOT.get(spec.scenario)
    if body is None:
        return
    gammas = " ".join(_fmt(g) for g in _axis(spec, "gamma", [0.5, 1.2]))
    with open(path, "w") as fh:
        fh.write("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n")
        fh.write(f"GAMMAS = '{gammas}'\n")
        fh.write(body.format(csv=os.path.basename(csv_path)))


def run_experiment(spec: ExperimentSpec, out_dir=".", seed=None, threads=1, gnuplot=None) -> int:
    """Run the scenario and write its CSV files into ``out_dir``. Returns an exit status."""
    seed = spec.sim["seed"] if seed is None else int(seed)
    if seed != spec.sim["seed"]:
        spec = replace(spec, sim={**spec.sim, "seed": seed})
        spec.resolved = {**spec.resolved, "sim": {**spec.resolved["sim"], "seed": str(seed)}}
    os.makedirs(out_dir, exist_ok=True)
    try:
        outputs = _RUNNERS[spec.scenario](spec, seed, max(int(threads), 1))
        status = EXIT_OK
    except PointError as exc:
        for name, (h, r) in getattr(exc, "outputs", {}).items():
            write_csv(os.path.join(out_dir, name), h, r, spec, seed)
        print(f"error {exc}", file=sys.stderr)
        return _status(exc.exc)
    except AggrnetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _status(exc)
    for name, (header, rows) in outputs.items():
        path = os.path.join(out_dir, name)
        write_csv(path, header, rows, spec, seed)
        if gnuplot if gnuplot is not None else spec.options["gnuplot"]:
            _gnuplot(os.path.splitext(path)[0] + ".gp", path, spec)
    return status


def _status(exc):
    if isinstance(exc, (ConfigError, InvalidParameterError, ValueError)):
        return EXIT_CONFIG
    if isinstance(exc, (NonConvergenceError, BranchPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, InstabilityError):
        return EXIT_INSTABILITY
    return EXIT_ERROR


# ---------------------------------------------------------------- self test


def self_check(verbose=True):
    """Quick invariant checks on the reference configuration. Returns [(name, ok, detail)]."""
    from . import throughput as tp
    from .bvp import (KernelParams, circle_contour, contour, root_in_unit_disk, theodorsen)
    from .delay import SymmetricParams, delay_bounds, exact_delay
    from .simulator import SimConfig, run
    from .stability import StabilityRegion

    res = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res.append((name, bool(ok), detail))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    cfg = NetworkConfig.symmetric(3, 0.2, 0.8, 0.5, CALIBRATED_NOISE)
    tables = build_tables(cfg)

    def closure():
        worst = max(abs(sum(j) - 1) for j in tables.joint2.values())
        pmf = tp.arrival_pmf(1, cfg, tables)
        worst = max(worst, abs(pmf.sum() - 1))
        return worst < 1e-12, f"max probability-closure error {worst:.1e}"

    def throughput_split():
        td, tr = tp.direct_throughput(1, cfg, tables), tp.relayed_throughput(1, cfg, tables)
        lam = tp.arrival_rate(1, cfg, tables)
        err = abs(cfg.m1 * tr - lam)
        return err < 1e-12 and 0 <= td + tr <= cfg.t1, f"|M T_relayed - lambda| = {err:.1e}"

    def swap():
        r = StabilityRegion.from_rates(0.7, 0.4, [0.9, 0.8], [0.5, 0.3])
        s = StabilityRegion.from_rates(0.4, 0.7, [0.8, 0.9], [0.3, 0.5])
        ok = np.allclose(r.e, s.e[::-1]) and np.allclose(r.a, s.a[::-1])
        return ok, "regions map onto each other under area swap"

    def circle():
        cm = theodorsen(circle_contour(0.7, 64))
        err = float(np.max(np.abs(cm.psi - cm.phi)))
        return err < 1e-12, f"circle boundary correspondence error {err:.1e}"

    kp = KernelParams(0.15, 0.10, 0.03, 0.8, 0.6, 0.95, 0.9, 0.45, 0.35)

    def root_in_disk():
        y = np.exp(1j * np.linspace(0.01, 2 * np.pi - 0.01, 200))
        x0 = root_in_unit_disk(y, kp)
        ok = np.max(np.abs(x0)) < 1 and abs(root_in_unit_disk(1.0, kp) - 1) < 1e-12
        return ok, f"max |X0| on the unit circle {np.max(np.abs(x0)):.4f}"

    def conformal():
        cm = theodorsen(contour(kp, "M", 256))
        return cm.history[-1] < 1e-6, f"Theodorsen converged in {cm.iterations} iterations"

    def delay_vs_sim():
        c = NetworkConfig.symmetric(1, 0.4, 0.8, 0.5, CALIBRATED_NOISE)
        tb = build_tables(c)
        p = SymmetricParams.from_tables(c, tb)
        b = delay_bounds(p)
        st = run(c, tb, SimConfig(slots=200_000, seed=7))
        d = exact_delay(p, st.p_both_busy)
        ok = b.lower - 4 * st.mean_sojourn_se[0] <= st.mean_sojourn[0] <= b.upper + 4 * st.mean_sojourn_se[0]
        return ok, f"simulated {st.mean_sojourn[0]:.3f} in [{b.lower:.3f}, {b.upper:.3f}] (exact given busy prob {d:.3f})"

    for name, fn in (("probability closure", closure), ("throughput split", throughput_split),
                     ("stability swap symmetry", swap), ("conformal map of a circle", circle),
                     ("kernel root in the unit disk", root_in_disk), ("Theodorsen convergence", conformal),
                     ("delay bounds vs simulation", delay_vs_sim)):
        check(name, fn)
    return res


# ---------------------------------------------------------------- entry point


def _resolve_path(path):
    if os.path.exists(path):
        return path
    try:
        return shipped_config(path)
    except ConfigError:
        return path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="aggrnet", description="Sensor networks with relaying aggregators.")
    ap.add_argument("--version", action="version", version=f"aggrnet {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment file")
    r.add_argument("config", help="INI file, or the name of a shipped configuration")
    r.add_argument("--scenario", choices=SCENARIOS)
    r.add_argument("--out", default=".")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--gnuplot", action="store_true", default=None, help="also write a gnuplot script")
    t = sub.add_parser("tables", help="dump success-probability tables as CSV")
    t.add_argument("config")
    t.add_argument("--out", help="output file (default: stdout)")
    sub.add_parser("check", help="run the invariant self-test")
    args = ap.parse_args(argv)

    if args.cmd == "check":
        res = self_check()
        return EXIT_OK if all(ok for _, ok, _ in res) else EXIT_ERROR
    try:
        spec = load_config(_resolve_path(args.config))
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd == "tables":
        try:
            tables = build_tables(spec.network)
        except AggrnetError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return _status(exc)
        tables.to_csv(args.out or sys.stdout)
        return EXIT_OK
    if args.scenario:
        exp = {**spec.resolved["experiment"], "scenario": args.scenario}
        output = exp.get("output") or f"{args.scenario}.csv"
        spec = replace(spec, scenario=args.scenario, output=output,
                       resolved={**spec.resolved, "experiment": exp})
    return run_experiment(spec, args.out, args.seed, args.threads, args.gnuplot)


if __name__ == "__main__":
    sys.exit(main())
