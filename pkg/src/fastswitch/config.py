"""Experiment configuration: one TOML file per experiment.

Example::

    kind = "closeness"
    out = "results/closeness"
    seed = 7

    [model]
    preset = "paper_example"

    [sim]
    h = 0.001
    T = 10.0
    x0 = [1.0, 1.0]
    i0 = 0

    [regimes]
    pairs = [[0.1, 0.1], [0.01, 0.01], [0.001, 0.001]]
    tag = "case1"

    [closeness]
    gamma = 0.5
    n_paths = 2000

Inline models replace ``preset`` with a ``generator`` matrix and either a
``holling`` table (``r K m a b d e f lam rho``) or a ``general`` table
(``a b c d f lam rho`` plus a ``response`` subtable of kind ``holling2`` or
``beddington_deangelis``).
"""

import copy
from dataclasses import dataclass, field

import tomli
import tomli_w

from .ctmc import Generator
from .errors import ValidationError
from .experiments import ExitSpec, RegimeSpec
from .hybrid_sde import SCHEMES, SimParams

KINDS = ("simulate", "average", "cycle", "measure", "closeness", "exit", "sweep", "audit", "reproduce-paper")
PRESETS = ("paper_example",)
HOLLING_KEYS = ("r", "K", "m", "a", "b", "d", "e", "f", "lam", "rho")
GENERAL_KEYS = ("a", "b", "c", "d", "f", "lam", "rho")

# defaults per section; keys absent here are rejected as unknown
SIM_DEFAULTS = {"eps": 1e-3, "delta": 1e-3, "h": 1e-4, "T": 10.0, "scheme": "", "x0": [1.0, 1.0],
                "i0": 0, "n_paths": 1, "record_stride": 1, "guard": 1e6}
SECTION_DEFAULTS = {
    "closeness": {"gamma": 0.5, "n_paths": 2000},
    "exit": {"equilibrium": [5.0, 0.0], "theta1": 0.1, "theta3": 0.5, "H": 20.0, "n_paths": 1000,
             "Delta": 1.0, "radius": 0.0},
    "sweep": {"horizon": 200.0, "n_seeds": 20, "burn_frac": 0.25, "n_proj": 256},
    "average": {"box": [[-0.5, 6.0], [-0.5, 6.0]]},
    "audit": {"box": [[0.0, 6.0], [0.0, 6.0]]},
    "measure": {"box": [[0.0, 6.0], [0.0, 6.0]], "bins": 60, "burn_frac": 0.25},
    "cycle": {"seed_point": [1.0, 1.0]},
    "reproduce-paper": {"fast": False},
}


def _merge(defaults, given, section, errs):
    out = copy.deepcopy(defaults)
    for k, v in (given or {}).items():
        if k not in defaults:
            errs.append(f"[{section}] unknown key {k!r}")
            continue
        d = defaults[k]
        if isinstance(d, float) and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if isinstance(d, list) and isinstance(v, list):
            v = [[float(u) for u in row] if isinstance(row, list) else float(row) for row in v]
        out[k] = v
    return out


@dataclass
class ExperimentConfig:
    """Resolved experiment configuration.

    Construct with :meth:`from_dict` or :meth:`load`; both validate every
    section and raise one :class:`ValidationError` listing all problems.
    """

    kind: str
    out: str
    seed: int
    model: dict
    sim: dict
    regimes: dict = None
    section: dict = field(default_factory=dict)
    plots: bool = True

    @classmethod
    def from_dict(cls, d):
        errs = []
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in KINDS:
            errs.append(f"kind must be one of {KINDS}, got {kind!r}")
        out = d.pop("out", "out")
        if not isinstance(out, str) or not out:
            errs.append("out must be a nonempty path")
        seed = d.pop("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            errs.append("seed must be a nonnegative integer")
        plots = d.pop("plots", True)
        if not isinstance(plots, bool):
            errs.append("plots must be true or false")
        model = d.pop("model", {"preset": "paper_example"})
        errs += model_problems(model)
        sim = _merge(SIM_DEFAULTS, d.pop("sim", {}), "sim", errs)
        regimes = d.pop("regimes", None)
        section = {}
        if kind in SECTION_DEFAULTS:
            section = _merge(SECTION_DEFAULTS[kind], d.pop(kind, {}), kind, errs)
        for k in d:
            errs.append(f"unknown top-level key {k!r}")
        cfg = cls(kind, out, seed, model, sim, regimes, section, plots)
        try:
            errs += [e for e in cfg._semantic_problems() if e not in errs]
        except (TypeError, ValueError, KeyError) as e:
            errs.append(f"malformed values: {e!r}")
        if errs:
            raise ValidationError("invalid configuration:\n  - " + "\n  - ".join(errs))
        return cfg

    def _semantic_problems(self):
        errs = []
        s = self.sim
        if s["scheme"] and s["scheme"] not in SCHEMES:
            errs.append(f"[sim] scheme must be one of {SCHEMES}")
        seed_ok = isinstance(self.seed, int) and self.seed >= 0
        try:
            # the seed is reported separately
            self.sim_params(s["eps"], s["delta"], seed=self.seed if seed_ok else 0)
        except ValidationError as e:
            errs += [f"[sim] {m}" for m in str(e).split("; ")]
        except TypeError as e:
            errs.append(f"[sim] {e}")
        if not isinstance(s["n_paths"], int) or s["n_paths"] < 1:
            errs.append("[sim] n_paths must be a positive integer")
        if len(s["x0"]) != 2:
            errs.append("[sim] x0 must have two entries")
        needs_regimes = self.kind in ("closeness", "exit", "sweep")
        if needs_regimes and self.regimes is None:
            errs.append(f"kind {self.kind!r} needs a [regimes] table")
        if self.regimes is not None:
            try:
                RegimeSpec(self.regimes.get("pairs", []), self.regimes.get("tag", "case1"))
            except (ValidationError, TypeError, ValueError) as e:
                errs.append(f"[regimes] {e}")
        sec = self.section
        if self.kind == "closeness" and not sec["gamma"] >= 0:
            errs.append("[closeness] gamma must be nonnegative")
        if self.kind == "closeness" and (s["T"] / s["h"]) % 1 > 1e-9 and 1 - (s["T"] / s["h"]) % 1 > 1e-9:
            errs.append("[sim] T must be a multiple of h for closeness")
        if self.kind == "exit":
            try:
                self.exit_spec()
            except ValidationError as e:
                errs.append(f"[exit] {e}")
        if self.kind == "sweep":
            if sec["n_seeds"] < 1:
                errs.append("[sweep] n_seeds must be >= 1")
            if not 0 <= sec["burn_frac"] < 1:
                errs.append("[sweep] burn_frac must lie in [0, 1)")
            if not sec["horizon"] > 0:
                errs.append("[sweep] horizon must be positive")
        return errs

    def sim_params(self, eps, delta, **kw):
        s = self.sim
        args = dict(eps=eps, delta=delta, h=s["h"], T=s["T"], seed=self.seed,
                    scheme=s["scheme"] or "log_euler", guard=s["guard"], record_stride=s["record_stride"])
        args.update(kw)
        return SimParams(**args)

    def regime_spec(self):
        return RegimeSpec(self.regimes["pairs"], self.regimes.get("tag", "case1"))

    def exit_spec(self):
        e = self.section
        return ExitSpec(e["equilibrium"], e["theta1"], e["theta3"], e["H"], e["n_paths"],
                        e["radius"] or None, e["Delta"])

    def to_dict(self):
        d = {"kind": self.kind, "out": self.out, "seed": self.seed, "plots": self.plots,
             "model": copy.deepcopy(self.model), "sim": copy.deepcopy(self.sim)}
        if self.regimes is not None:
            d["regimes"] = copy.deepcopy(self.regimes)
        if self.section:
            d[self.kind] = copy.deepcopy(self.section)
        return d

    def dumps(self):
        return tomli_w.dumps(self.to_dict())

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as e:
            raise ValidationError(f"config is not valid TOML: {e}") from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def model_problems(m):
    errs = []
    if not isinstance(m, dict):
        return ["[model] must be a table"]
    if "preset" in m:
        if m["preset"] not in PRESETS:
            errs.append(f"[model] unknown preset {m['preset']!r}; known: {PRESETS}")
        return errs
    try:
        build_model(m)
    except ValidationError as e:
        errs.append(f"[model] {e}")
    except (KeyError, TypeError, ValueError) as e:
        errs.append(f"[model] malformed inline model: {e!r}")
    return errs


def build_model(m):
    """Model from a ``[model]`` table."""
    from .models import (
        HollingParams,
        PredatorPreyParams,
        beddington_deangelis,
        holling_type2,
        paper_example_model,
        predator_prey_model,
    )
    if "preset" in m:
        if m["preset"] != "paper_example":
            raise ValidationError(f"unknown preset {m['preset']!r}")
        return paper_example_model()
    Q = Generator(m["generator"])
    if "holling" in m:
        t = m["holling"]
        missing = [k for k in HOLLING_KEYS if k not in t]
        if missing:
            raise ValidationError(f"holling table lacks {missing}")
        hp = HollingParams(**{k: tuple(t[k]) for k in HOLLING_KEYS})
        model = predator_prey_model(hp.to_general(), Q, name="holling")
        model.holling = hp
        return model
    t = m["general"]
    missing = [k for k in GENERAL_KEYS if k not in t]
    if missing:
        raise ValidationError(f"general table lacks {missing}")
    r = t["response"]
    if r["kind"] == "holling2":
        h = holling_type2(r["m"], r["a"], r["b"])
    elif r["kind"] == "beddington_deangelis":
        h = beddington_deangelis(r["m1"], r["m2"], r["m3"], r["m4"])
    else:
        raise ValidationError(f"unknown response kind {r['kind']!r}")
    p = PredatorPreyParams(*(t[k] for k in GENERAL_KEYS), response=h)
    return predator_prey_model(p, Q, name="general")
