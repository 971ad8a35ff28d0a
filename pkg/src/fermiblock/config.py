"""Experiment configuration files (INI-style key-value text)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .oracles import Disorder, Domain, Hopping, LatticeSpec

COMMANDS = (
    "thermal-entry",
    "dynamics-entry",
    "greens",
    "energy-density",
    "particle-density",
    "free-energy",
    "clock-overlap",
    "theorem1-demo",
    "baseline-compare",
    "approx-bound",
)
MODEL_FREE = {"clock-overlap", "approx-bound"}
MODEL_TYPES = ("chain", "lattice", "margulis", "clock", "fermi-sea")

# parameter name -> (kind, is_sweep)
PARAMS = {
    "beta": (float, True),
    "t": (float, True),
    "t1": (float, True),
    "t2": (float, True),
    "eta": (float, True),
    "omega": (float, True),
    "c": (float, True),
    "d": (int, True),
    "L": (int, True),
    "degree": (int, False),
    "eps_pa": (float, False),
    "eps": (float, False),
    "eps2": (float, False),
    "delta": (float, False),
    "samples": (int, False),
    "K": (int, False),
    "K_time": (int, False),
    "estimator": (str, False),
    "entries": (str, False),
    "m0_sites": (str, False),
}
POSITIVE = {"eta", "degree", "eps_pa", "eps", "eps2", "delta", "samples", "K", "K_time", "d", "L", "c"}
NON_NEGATIVE = {"beta"}
DEFAULTS = {"delta": 0.05, "eps2": 0.05, "estimator": "exact"}


class ConfigError(ValueError):
    """Raised with every validation problem found, not only the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    command: str
    model: dict
    params: dict
    seed: int = 0
    csv: str = ""
    report: str = ""
    base_dir: Path = field(default_factory=Path)

    def sweep(self, name: str, default=None) -> list:
        v = self.params.get(name)
        if v is None:
            return [] if default is None else list(default)
        return v

    def get(self, name: str, default=None):
        return self.params.get(name, default)


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def parse_lattice_spec(section: configparser.SectionProxy, errors: list[str]) -> LatticeSpec | None:
    """Lattice geometry, domains, hopping table and disorder from a model section.

    Hopping lines read ``o1 o2 D1 D2 t_1 .. t_d re im`` with ``*`` as a
    wildcard domain. Domain lines read ``label lo_1 .. lo_d hi_1 .. hi_d``.
    Disorder reads ``key domain W``.
    """
    n_err = len(errors)
    try:
        dims = tuple(int(v) for v in _split_list(section.get("dims", "")))
    except ValueError:
        errors.append("model.dims: expected comma-separated integers")
        dims = ()
    if not dims:
        errors.append("model.dims: missing")
        return None
    d = len(dims)
    boundary = section.get("boundary", "open").strip()
    if boundary not in ("open", "periodic"):
        errors.append(f"model.boundary: expected open or periodic, got {boundary!r}")
    try:
        orbitals = int(section.get("orbitals", "1"))
        hop_range = int(section.get("range", "1"))
    except ValueError:
        errors.append("model.orbitals/range: expected integers")
        orbitals, hop_range = 1, 1

    domains = []
    for k, line in enumerate(_lines(section.get("domains", "")), 1):
        tok = line.split()
        try:
            if len(tok) != 1 + 2 * d:
                raise ValueError
            lo = tuple(int(v) for v in tok[1 : 1 + d])
            hi = tuple(int(v) for v in tok[1 + d :])
            domains.append(Domain(tok[0], lo, hi))
        except ValueError:
            errors.append(f"model.domains line {k}: expected 'label' + {2 * d} integers")

    hoppings = []
    for k, line in enumerate(_lines(section.get("hoppings", "")), 1):
        tok = line.split()
        try:
            if len(tok) != 6 + d:
                raise ValueError
            o1, o2 = int(tok[0]), int(tok[1])
            d1 = None if tok[2] == "*" else tok[2]
            d2 = None if tok[3] == "*" else tok[3]
            t = tuple(int(v) for v in tok[4 : 4 + d])
            amp = complex(float(tok[4 + d]), float(tok[5 + d]))
            hoppings.append(Hopping(o1, o2, t, amp, (d1, d2)))
        except ValueError:
            errors.append(f"model.hoppings line {k}: expected 'o1 o2 D1 D2' + {d} offsets + 're im'")

    disorder = None
    if section.get("disorder"):
        tok = section["disorder"].split()
        try:
            disorder = Disorder(int(tok[0]), tok[1], float(tok[2]))
        except (ValueError, IndexError):
            errors.append("model.disorder: expected 'key domain W'")
    if len(errors) > n_err:
        return None
    return LatticeSpec(dims, boundary, orbitals, tuple(domains), hop_range, tuple(hoppings), disorder)


def _parse_model(cp: configparser.ConfigParser, errors: list[str], base_dir: Path) -> dict:
    if not cp.has_section("model"):
        return {}
    sec = cp["model"]
    kind = sec.get("type", "").strip()
    if kind not in MODEL_TYPES:
        errors.append(f"model.type: expected one of {', '.join(MODEL_TYPES)}, got {kind!r}")
        return {}
    model: dict = {"type": kind}
    try:
        if kind == "chain":
            model["length"] = int(sec.get("length", ""))
            model["hop"] = float(sec.get("hop", "-1"))
            model["boundary"] = sec.get("boundary", "open").strip()
            if model["length"] < 1:
                errors.append("model.length: must be positive")
        elif kind == "lattice":
            model["spec"] = parse_lattice_spec(sec, errors)
        elif kind == "margulis":
            model["N"] = int(sec.get("N", ""))
            if model["N"] < 2:
                errors.append("model.N: must be at least 2")
        elif kind == "fermi-sea":
            model["n"] = int(sec.get("n", ""))
            model["fill"] = float(sec.get("fill", ""))
            if not 0 <= model["fill"] <= 1:
                errors.append("model.fill: must lie in [0, 1]")
        elif kind == "clock":
            if "gates" in sec:
                model["gate_text"] = (base_dir / sec["gates"].strip()).read_text(encoding="utf-8")
            elif "circuit" in sec:
                model["gate_text"] = sec["circuit"]
            else:
                errors.append("model: clock needs 'gates' (file) or 'circuit' (inline)")
    except ValueError as exc:
        errors.append(f"model: malformed value ({exc})")
    except OSError as exc:
        errors.append(f"model.gates: cannot read gate file ({exc})")
    return model


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse and validate an experiment config; raises ``ConfigError`` listing all problems."""
    base_dir = Path(base_dir)
    errors: list[str] = []
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None

    exp = cp["experiment"] if cp.has_section("experiment") else {}
    command = exp.get("command", "").strip()
    if not command:
        errors.append("experiment.command: missing")
    elif command not in COMMANDS:
        errors.append(f"experiment.command: unknown command {command!r}")
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError:
        errors.append("experiment.seed: expected an integer")
        seed = 0

    model = _parse_model(cp, errors, base_dir)
    if command and command not in MODEL_FREE and not model and not cp.has_section("model"):
        errors.append("model: missing [model] section")

    params = dict(DEFAULTS)
    sec = cp["parameters"] if cp.has_section("parameters") else {}
    for key, raw in sec.items():
        if key not in PARAMS:
            errors.append(f"parameters.{key}: unknown parameter")
            continue
        kind, is_sweep = PARAMS[key]
        if kind is str:
            params[key] = raw.strip()
            continue
        items = _split_list(raw)
        if not items:
            errors.append(f"parameters.{key}: empty value")
            continue
        try:
            values = [kind(v) for v in items]
        except ValueError:
            errors.append(f"parameters.{key}: malformed number in {raw.strip()!r}")
            continue
        if not is_sweep and len(values) != 1:
            errors.append(f"parameters.{key}: expected a single value")
            continue
        if key in POSITIVE and any(v <= 0 for v in values):
            errors.append(f"parameters.{key}: must be positive")
        if key in NON_NEGATIVE and any(v < 0 for v in values):
            errors.append(f"parameters.{key}: must be non-negative")
        params[key] = values if is_sweep else values[0]
    if params.get("estimator") not in ("exact", "hadamard"):
        errors.append("parameters.estimator: expected exact or hadamard")
    if not 0 < params.get("delta", 0.05) < 1:
        errors.append("parameters.delta: must lie in (0, 1)")

    if errors:
        raise ConfigError(errors)
    csv_name = exp.get("csv", f"{command}.csv").strip()
    report = exp.get("report", f"{command}.report.txt").strip()
    return ExperimentConfig(command, model, params, seed, csv_name, report, base_dir)


def parse_entries(text: str | None, default=((0, 0),)) -> list[tuple[int, int]]:
    """``"0 0; 0 1"`` -> ``[(0, 0), (0, 1)]``."""
    if not text:
        return list(default)
    out = []
    for part in text.split(";"):
        tok = part.split()
        if tok:
            if len(tok) != 2:
                raise ValueError(f"entry {part!r}: expected 'i j'")
            out.append((int(tok[0]), int(tok[1])))
    return out
