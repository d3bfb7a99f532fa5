"""Command-line front end.

    fastswitch run CONFIG
    fastswitch validate CONFIG
    fastswitch reproduce-paper [--out DIR] [--fast]

Exit status: 0 on success, 2 when the configuration is invalid, 3 when a
computation fails.  ``FASTSWITCH_THREADS`` caps the worker threads.
"""

import argparse
import json
import os
import sys
import time
import traceback

import numpy as np

from . import __version__
from .averaged import (
    average_field,
    cycle_occupation_measure,
    detect_limit_cycle,
    find_equilibria,
    integrate_ode,
)
from .config import ExperimentConfig, build_model
from .ctmc import stationary_distribution
from .errors import ConfigurationError, ValidationError
from .experiments import (
    _jsonable,
    assumption_audit,
    closeness_probability,
    convergence_sweep,
    exit_time_experiment,
)
from .hybrid_sde import simulate_batch, simulate_path
from .measures import empirical_occupation, histogram, sliced_wasserstein
from .svg import PlotSpec, emit_svg

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
MAX_ROWS = 20000


class Outputs:
    """Writes files only inside one directory, each stamped with the config echo."""

    def __init__(self, root, echo):
        self.root = os.path.realpath(root)
        self.echo = echo
        self.written = []
        os.makedirs(self.root, exist_ok=True)

    def path(self, name):
        p = os.path.realpath(os.path.join(self.root, name))
        if os.path.commonpath([p, self.root]) != self.root:
            raise ValidationError(f"refusing to write outside the output directory: {name}")
        return p

    def _stamp(self):
        return f"fastswitch {__version__} config: " + json.dumps(_jsonable(self.echo), sort_keys=True)

    def csv(self, name, header, data, fmt="%.17g"):
        with open(self.path(name), "w") as fh:
            fh.write("# " + self._stamp() + "\n")
            np.savetxt(fh, data, delimiter=",", header=",".join(header), comments="", fmt=fmt)
        self.written.append(name)
        return name

    def json(self, name, payload):
        body = {"version": __version__, "config": self.echo}
        body.update(payload)
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.written.append(name)
        return name

    def text(self, name, content):
        with open(self.path(name), "w") as fh:
            fh.write("# " + self._stamp() + "\n" + content)
        self.written.append(name)
        return name

    def svg(self, name, plot, data):
        missing = [s for s in plot.series if s not in self.written]
        if missing:
            raise ValidationError(f"plot {name} references unwritten series {missing}")
        plot.echo = {"version": __version__, "config": _jsonable(self.echo), "series": plot.series}
        emit_svg(plot, data, self.path(name))
        self.written.append(name)
        return name

    def report(self, stem, rep):
        rep.config = {"experiment": rep.config, "run": self.echo}
        self.text(stem + ".txt", rep.to_text())
        with open(self.path(stem + ".json"), "w") as fh:
            fh.write(rep.to_json() + "\n")
        self.written.append(stem + ".json")


def _trajectory_csv(out, name, traj):
    g = traj.grid()
    data = np.column_stack([g.times, g.states, g.regimes])
    fmt = ["%.17g"] * (1 + g.states.shape[1]) + ["%d"]
    return out.csv(name, ["t"] + [f"x_{k + 1}" for k in range(g.states.shape[1])] + ["regime"], data, fmt)


def _stride(T, h):
    return max(1, int(round(T / h)) // MAX_ROWS)


def _tag(v):
    return f"{v:g}".replace("-0", "-").replace(".", "p")


# ---------------------------------------------------------------- kinds

def _run_simulate(cfg, model, out):
    s = cfg.sim
    p = cfg.sim_params(s["eps"], s["delta"], record_stride=max(s["record_stride"], _stride(s["T"], s["h"])))
    if s["n_paths"] == 1:
        traj = simulate_path(model, p, s["x0"], s["i0"])
        name = _trajectory_csv(out, "trajectory.csv", traj)
        if cfg.plots:
            g = traj.grid()
            out.svg("trajectory_x.svg", PlotSpec("time_series", "prey", "t", "x", [name]),
                    {"x": (g.times, g.states[:, 0])})
            out.svg("trajectory_y.svg", PlotSpec("time_series", "predator", "t", "y", [name]),
                    {"y": (g.times, g.states[:, 1])})
            out.svg("trajectory_phase.svg", PlotSpec("phase_portrait", "phase portrait", "x", "y", [name]),
                    {"path": (g.states[:, 0], g.states[:, 1])})
        return
    b = simulate_batch(model, p, s["x0"], s["i0"], s["n_paths"])
    name = out.csv("batch.csv", ["t", "mean_x", "mean_y", "second_moment"],
                   np.column_stack([b.times, b.mean, b.second_moment]))
    out.json("batch.json", {"n_paths": b.n_paths, "params": b.to_dict()["params"]})
    if cfg.plots:
        out.svg("batch_mean.svg", PlotSpec("time_series", "ensemble mean", "t", "mean", [name]),
                {"x": (b.times, b.mean[:, 0]), "y": (b.times, b.mean[:, 1])})


def _run_average(cfg, model, out):
    from .models import fit_holling_coefficients
    fbar = average_field(model, stationary_distribution(model.generator))
    eqs = find_equilibria(fbar, cfg.section["box"])
    payload = {"nu": stationary_distribution(model.generator), "equilibria": [e.to_dict() for e in eqs]}
    if hasattr(model, "holling") and len(set(model.holling.a)) == 1 and len(set(model.holling.b)) == 1:
        payload["coefficients"] = fit_holling_coefficients(fbar, model.holling.a[0], model.holling.b[0])
    out.json("average.json", payload)
    t, z = integrate_ode(fbar, np.asarray(cfg.sim["x0"], float), cfg.sim["T"], cfg.sim["h"])
    k = _stride(cfg.sim["T"], cfg.sim["h"])
    name = out.csv("averaged_trajectory.csv", ["t", "x_1", "x_2"], np.column_stack([t, z])[::k])
    if cfg.plots:
        out.svg("averaged_phase.svg", PlotSpec("phase_portrait", "averaged flow", "x", "y", [name]),
                {"averaged": (z[::k, 0], z[::k, 1])})


def _run_cycle(cfg, model, out):
    fbar = average_field(model, stationary_distribution(model.generator))
    cyc = detect_limit_cycle(fbar, np.asarray(cfg.section["seed_point"], float))
    out.json("cycle.json", {"cycle": cyc.to_dict()})
    name = out.csv("cycle_orbit.csv", ["x_1", "x_2"], cyc.orbit)
    if cfg.plots:
        out.svg("cycle_phase.svg", PlotSpec("phase_portrait", "limit cycle", "x", "y", [name]),
                {"cycle": (cyc.orbit[:, 0], cyc.orbit[:, 1])})


def _run_measure(cfg, model, out):
    s, sec = cfg.sim, cfg.section
    p = cfg.sim_params(s["eps"], s["delta"], record_switches=False)
    traj = simulate_path(model, p, s["x0"], s["i0"])
    mu = empirical_occupation(traj, burn=sec["burn_frac"] * s["T"])
    hist = histogram(mu, sec["box"], sec["bins"])
    fbar = average_field(model, stationary_distribution(model.generator))
    payload = {"atoms": len(mu), "outside_mass": hist.outside}
    try:
        mu0 = cycle_occupation_measure(detect_limit_cycle(fbar, np.asarray(s["x0"], float)))
        payload["sliced_wasserstein_to_cycle"] = sliced_wasserstein(mu, mu0, seed=cfg.seed)
    except Exception as e:  # the distance is optional; record why it is missing
        payload["sliced_wasserstein_to_cycle"] = None
        payload["cycle_error"] = str(e)
    name = out.csv("histogram.csv", [f"col_{j}" for j in range(hist.masses.shape[1])], hist.masses)
    out.json("measure.json", payload)
    if cfg.plots:
        out.svg("histogram.svg", PlotSpec("histogram_heatmap", "occupation histogram", "x", "y", [name]),
                {"masses": hist.masses, "box": hist.box})


def _run_closeness(cfg, model, out):
    s, sec = cfg.sim, cfg.section
    rep = closeness_probability(model, s["x0"], s["i0"], sec["gamma"], s["T"], cfg.regime_spec(),
                                sec["n_paths"], h=s["h"], seed=cfg.seed, scheme=s["scheme"] or None)
    out.report("closeness", rep)


def _run_exit(cfg, model, out):
    s = cfg.sim
    rep = exit_time_experiment(model, cfg.exit_spec(), cfg.regime_spec(), h=s["h"], seed=cfg.seed,
                               scheme=s["scheme"] or None)
    out.report("exit", rep)


def _run_sweep(cfg, model, out):
    s, sec = cfg.sim, cfg.section
    rep = convergence_sweep(model, cfg.regime_spec(), sec["horizon"], sec["n_seeds"], x0=s["x0"], i0=s["i0"],
                            h=s["h"], burn_frac=sec["burn_frac"], n_proj=sec["n_proj"], seed=cfg.seed,
                            scheme=s["scheme"] or None)
    out.report("sweep", rep)
    rows = [r for r in rep.rows if "sw_mean" in r]
    data = np.array([[r["eps"] + r["delta"], r["sw_mean"], r["sw_sd"]] for r in rows])
    name = out.csv("sweep.csv", ["eps_plus_delta", "sw_mean", "sw_sd"], data)
    if cfg.plots and len(data):
        out.svg("sweep.svg", PlotSpec("convergence_curve", "distance to the cycle measure",
                                      "log10(eps + delta)", "sliced Wasserstein", [name]),
                {"sw": (np.log10(data[:, 0]), data[:, 1])})


def _run_audit(cfg, model, out):
    out.report("audit", assumption_audit(model, cfg.section["box"], seed=cfg.seed))


def reproduce_paper(out_dir, fast=False, seed=0, x0=(1.0, 1.0), i0=0, T=200.0, h=1e-4, stream=sys.stdout):
    """Time series and phase portraits of the two-regime example.

    Writes x and y series at ``(eps, delta) = (1e-3, 1e-3)`` and
    ``(5e-5, 5e-5)``, the averaged-flow series, and a phase portrait for
    each of the three.  ``fast`` divides the horizon by 10.
    """
    from .models import paper_example_model
    if fast:
        T = T / 10
    echo = {"kind": "reproduce-paper", "fast": fast, "seed": seed, "x0": list(x0), "i0": i0, "T": T, "h": h,
            "model": {"preset": "paper_example"}, "cells": [[1e-3, 1e-3], [5e-5, 5e-5]]}
    print(f"initial condition (x0, y0) = {tuple(x0)}, regime {i0}, horizon T = {T:g} "
          "(defaults; pass --x0/--i0/--T to change)", file=stream)
    out = Outputs(out_dir, echo)
    model = paper_example_model()
    from .hybrid_sde import SimParams
    stride = _stride(T, h)
    phase = {}
    for eps, delta in echo["cells"]:
        p = SimParams(eps=eps, delta=delta, h=h, T=T, seed=seed, scheme="log_euler",
                      record_stride=stride, record_switches=False)
        g = simulate_path(model, p, x0, i0).grid()
        tag = _tag(eps)
        name = _trajectory_csv(out, f"path_eps{tag}.csv", g)
        out.svg(f"x_eps{tag}.svg", PlotSpec("time_series", f"prey, eps = delta = {eps:g}", "t", "x", [name]),
                {"x": (g.times, g.states[:, 0])})
        out.svg(f"y_eps{tag}.svg", PlotSpec("time_series", f"predator, eps = delta = {eps:g}", "t", "y", [name]),
                {"y": (g.times, g.states[:, 1])})
        phase[f"phase_eps{tag}.svg"] = (f"phase portrait, eps = delta = {eps:g}", name, g.states)
    fbar = average_field(model, stationary_distribution(model.generator))
    t, z = integrate_ode(fbar, np.asarray(x0, float), T, h)
    t, z = t[::stride], z[::stride]
    name = out.csv("path_averaged.csv", ["t", "x_1", "x_2"], np.column_stack([t, z]))
    out.svg("x_averaged.svg", PlotSpec("time_series", "prey, averaged system", "t", "x", [name]), {"x": (t, z[:, 0])})
    out.svg("y_averaged.svg", PlotSpec("time_series", "predator, averaged system", "t", "y", [name]),
            {"y": (t, z[:, 1])})
    phase["phase_averaged.svg"] = ("phase portrait, averaged system", name, z)
    for fname, (title, series, states) in phase.items():
        out.svg(fname, PlotSpec("phase_portrait", title, "x", "y", [series]), {"path": (states[:, 0], states[:, 1])})
    out.json("manifest.json", {"files": sorted(out.written)})
    return out.written


RUNNERS = {
    "simulate": _run_simulate, "average": _run_average, "cycle": _run_cycle, "measure": _run_measure,
    "closeness": _run_closeness, "exit": _run_exit, "sweep": _run_sweep, "audit": _run_audit,
}


def run_config(cfg, out_dir=None):
    out_dir = out_dir or cfg.out
    if cfg.kind == "reproduce-paper":
        s = cfg.sim
        return reproduce_paper(out_dir, cfg.section["fast"], cfg.seed, s["x0"], s["i0"], s["T"], s["h"])
    out = Outputs(out_dir, cfg.to_dict())
    model = build_model(cfg.model)
    t0 = time.perf_counter()
    RUNNERS[cfg.kind](cfg, model, out)
    out.json("run.json", {"wall_time": time.perf_counter() - t0, "files": sorted(out.written)})
    return out.written


def _where(exc):
    frames = [f for f in traceback.extract_tb(exc.__traceback__) if "fastswitch" in f.filename]
    if not frames:
        return "fastswitch"
    return "fastswitch." + os.path.splitext(os.path.basename(frames[-1].filename))[0]


def build_parser():
    ap = argparse.ArgumentParser(prog="fastswitch", description="Simulate fast-switching slow-noise systems.")
    ap.add_argument("--version", action="version", version=f"fastswitch {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a TOML config")
    r.add_argument("config")
    r.add_argument("--out", help="override the config's output directory")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    rp = sub.add_parser("reproduce-paper", help="time series and phase portraits of the built-in example")
    rp.add_argument("--out", default="reproduce")
    rp.add_argument("--fast", action="store_true", help="horizon divided by 10")
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--x0", type=float, nargs=2, default=(1.0, 1.0))
    rp.add_argument("--i0", type=int, default=0)
    rp.add_argument("--T", type=float, default=200.0)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = ExperimentConfig.load(args.config)
            print(f"ok: {cfg.kind} config is valid")
            return EXIT_OK
        if args.command == "run":
            cfg = ExperimentConfig.load(args.config)
            files = run_config(cfg, args.out)
        else:
            files = reproduce_paper(args.out, args.fast, args.seed, tuple(args.x0), args.i0, args.T)
        print(f"wrote {len(files)} files")
        return EXIT_OK
    except (ValidationError, ConfigurationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        print(f"runtime error in {_where(e)}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
