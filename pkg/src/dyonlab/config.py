"""Experiment configuration: TOML parsing, validation and canonical serialisation.

Layout::

    command = "simulate"        # simulate | spectrum | fields-check | selection-rules | poincare | verify-all
    seed = 0

    [system]                    # kind = "micz" (default) or "nbody"
    [metric]
    [[centers]]
    [integrator]
    [quantum]
    [poincare]
    [output]

Unknown keys are rejected by name. Missing keys take the defaults in
``SCHEMA``; ``normalize`` fills them syntactically on the raw document while
``serialize`` rebuilds the document from a parsed :class:`ExperimentConfig`,
so ``serialize(parse_config(x)) == normalize(x)`` is a genuine round-trip check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import tomli
import tomli_w

from .dynamics import Integrator, IntegratorConfig, Section, auto_step, build_initial_state
from .errors import ConfigError, DyonlabError
from .fields import DyonCenter
from .geometry import Curvature, MetricSpec
from .model import (Coulomb, LinearStark, NBodySpec, Oscillator, PhaseState, Replacement, Sum,
                    SystemSpec, Zero)
from .quantum import RadialGrid

__all__ = ["COMMANDS", "ExperimentConfig", "parse_config", "load_config", "serialize", "normalize"]

COMMANDS = ("simulate", "spectrum", "fields-check", "selection-rules", "poincare", "verify-all")
_FORMATS = ("csv", "json")

_NOTHING = object()  # "no default, may be absent"

# section -> key -> (type, default); default None means "derived at parse time"
SCHEMA = {
    "": {"command": (str, "simulate"), "seed": (int, 0)},
    "system": {
        "kind": (str, "micz"), "mu": (float, 1.0), "alpha": (float, -1.0), "omega": (float, 0.0),
        "field": (list, [0.0, 0.0, 0.0]), "replacement": (str, None), "kappa": (float, _NOTHING),
        "energy": (float, _NOTHING), "angular_momentum": (float, _NOTHING), "branch": (str, "perihelion"),
        "x": (list, _NOTHING), "pi": (list, _NOTHING),
        "charges": (list, _NOTHING), "monopoles": (list, _NOTHING),
        "positions": (list, _NOTHING), "momenta": (list, _NOTHING),
    },
    "metric": {"curvature": (str, "flat"), "r0": (float, 1.0)},
    "centers": {"position": (list, [0.0, 0.0, 0.0]), "g": (float, 0.0), "q": (float, 0.0)},
    "integrator": {
        "method": (str, "rk4"), "h": (float, None), "t_end": (float, 100.0), "stride": (int, 1),
        "tol": (float, 1e-13), "maxiter": (int, 50),
    },
    "quantum": {
        "s": (float, None), "n_max": (int, 5), "l_max": (float, None),
        "r_min": (float, 1e-4), "r_max": (float, 200.0), "nodes": (int, 4000), "scheme": (str, "log"),
    },
    "poincare": {
        "point": (list, [0.0, 0.0, 0.0]), "normal": (list, [0.0, 0.0, 1.0]), "direction": (int, 1),
        "crossings": (int, 300), "t_max": (float, 5e4), "tol": (float, 1e-10), "regularity_tol": (float, 1e-3),
    },
    "output": {
        "format": (str, "csv"), "trajectory": (str, "trajectory"), "spectrum": (str, "spectrum"),
        "selection": (str, "selection_rules"), "section": (str, "section"), "report": (str, "report.json"),
    },
}
_TABLES = ("system", "metric", "integrator", "quantum", "poincare", "output")


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    system: SystemSpec | NBodySpec
    initial: PhaseState | None
    integrator: IntegratorConfig
    grid: RadialGrid
    quantum_s: float
    n_max: int
    l_max: float
    section: Section
    section_settings: dict
    output: dict
    raw: dict = field(default_factory=dict, repr=False)  # normalised document

    @property
    def is_nbody(self) -> bool:
        return isinstance(self.system, NBodySpec)


# -- syntactic layer ---------------------------------------------------------

def _coerce(section, key, value, typ):
    where = f"{section}.{key}" if section else key
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected an array, got {value!r}")
    return _floats(value, where)


def _floats(value, where):
    if isinstance(value, list):
        return [_floats(v, where) for v in value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: array entries must be numbers, got {value!r}")
    return float(value)


def _check_keys(section, table):
    allowed = SCHEMA[section]
    for key in table:
        if key not in allowed:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown key {key!r} in {where}")


def _fill(section, table):
    _check_keys(section, table)
    out = {}
    for key, (typ, default) in SCHEMA[section].items():
        if key in table:
            out[key] = _coerce(section, key, table[key], typ)
        elif default is not _NOTHING:
            out[key] = default
    return out


def _derived(doc):
    """Resolve defaults that depend on other keys, in place."""
    system, integ, quantum = doc["system"], doc["integrator"], doc["quantum"]
    centers = doc["centers"]
    if system["replacement"] is None:
        one = len(centers) == 1 and not any(centers[0]["position"])
        system["replacement"] = "one_center" if one else ("multi_center" if centers else "none")
    if not system["mu"] > 0:
        raise ConfigError(f"system.mu: mass must be positive, got {system['mu']!r}")
    if integ["h"] is None:
        integ["h"] = auto_step(system["alpha"], system["mu"], system.get("energy"))
    s_total = float(sum(c["g"] for c in centers))
    if quantum["s"] is None:
        quantum["s"] = s_total
    if quantum["l_max"] is None:
        quantum["l_max"] = abs(quantum["s"]) + quantum["n_max"] - 1
    return doc


def _syntactic(doc) -> dict:
    """Check keys and types and fill every default; pure function of the raw document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a table")
    top = {k: v for k, v in doc.items() if k not in _TABLES and k != "centers"}
    out = _fill("", top)
    for name in _TABLES:
        table = doc.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        out[name] = _fill(name, table)
    centers = doc.get("centers", [])
    if not isinstance(centers, list) or not all(isinstance(c, dict) for c in centers):
        raise ConfigError("centers must be an array of tables ([[centers]])")
    out["centers"] = [_fill("centers", c) for c in centers]
    return _derived(out)


def _order(doc):
    """Canonical key order, so TOML output is byte-stable."""
    out = {"command": doc["command"], "seed": doc["seed"]}
    for name in ("system", "metric"):
        out[name] = {k: doc[name][k] for k in SCHEMA[name] if k in doc[name]}
    out["centers"] = [{k: c[k] for k in SCHEMA["centers"]} for c in doc["centers"]]
    for name in ("integrator", "quantum", "poincare", "output"):
        out[name] = {k: doc[name][k] for k in SCHEMA[name] if k in doc[name]}
    if not out["centers"]:
        del out["centers"]
    return out


def normalize(text: str) -> str:
    """Canonical TOML form of a raw document, with every default filled in."""
    return tomli_w.dumps(_order(_syntactic(_loads(text))))


def _loads(text):
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc


# -- semantic layer ----------------------------------------------------------

def _vec3(value, where):
    if len(value) != 3 or any(isinstance(v, list) for v in value):
        raise ConfigError(f"{where}: expected 3 numbers")
    return tuple(value)


def _potential(system):
    terms = []
    if system["alpha"]:
        terms.append(Coulomb(system["alpha"]))
    if system["omega"]:
        terms.append(Oscillator(system["omega"]))
    E = _vec3(system["field"], "system.field")
    if any(E):
        terms.append(LinearStark(E))
    if not terms:
        return Zero()
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def _build(doc) -> ExperimentConfig:
    if doc["command"] not in COMMANDS:
        raise ConfigError(f"unknown command {doc['command']!r}; expected one of {', '.join(COMMANDS)}")
    if doc["seed"] < 0:
        raise ConfigError("seed must be non-negative")
    system = doc["system"]
    try:
        Curvature(doc["metric"]["curvature"])
    except ValueError:
        raise ConfigError(f"metric.curvature: unknown value {doc['metric']['curvature']!r}") from None
    out = doc["output"]
    if out["format"] not in _FORMATS:
        raise ConfigError(f"output.format must be one of {_FORMATS}")
    try:
        metric = MetricSpec(Curvature(doc["metric"]["curvature"]), doc["metric"]["r0"])
        integ = doc["integrator"]
        integrator = IntegratorConfig(Integrator(integ["method"]), integ["h"], integ["t_end"], integ["stride"],
                                      integ["tol"], integ["maxiter"])
        q = doc["quantum"]
        grid = RadialGrid(q["r_min"], q["r_max"], q["nodes"], q["scheme"])
        pc = doc["poincare"]
        section = Section(_vec3(pc["point"], "poincare.point"), _vec3(pc["normal"], "poincare.normal"),
                          pc["direction"])
        if system["kind"] == "nbody":
            spec, initial = _nbody(system), None
        elif system["kind"] == "micz":
            centers = tuple(DyonCenter(_vec3(c["position"], "centers.position"), c["g"], c["q"])
                            for c in doc["centers"])
            spec = SystemSpec(metric, centers, _potential(system), system["mu"],
                              Replacement(system["replacement"]), system.get("kappa"))
            initial = _initial(spec, system)
        else:
            raise ConfigError(f"system.kind must be 'micz' or 'nbody', got {system['kind']!r}")
    except ConfigError:
        raise
    except (DyonlabError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return ExperimentConfig(doc["command"], doc["seed"], spec, initial, integrator, grid, q["s"], q["n_max"],
                            q["l_max"], section, dict(pc), dict(out), _order(doc))


def _initial(spec, system):
    explicit = "x" in system or "pi" in system
    shell = "energy" in system or "angular_momentum" in system
    if explicit and shell:
        raise ConfigError("give either system.x/system.pi or system.energy/system.angular_momentum, not both")
    if explicit:
        if "x" not in system or "pi" not in system:
            raise ConfigError("system.x and system.pi must be given together")
        return PhaseState(_vec3(system["x"], "system.x"), _vec3(system["pi"], "system.pi"))
    if shell:
        if "energy" not in system or "angular_momentum" not in system:
            raise ConfigError("system.energy and system.angular_momentum must be given together")
        return build_initial_state(spec, system["energy"], system["angular_momentum"], branch=system["branch"])
    return None


def _nbody(system):
    for key in ("charges", "monopoles", "positions", "momenta"):
        if key not in system:
            raise ConfigError(f"nbody system needs system.{key}")
    n = len(system["charges"])
    if len(system["monopoles"]) != n or len(system["positions"]) != n or len(system["momenta"]) != n:
        raise ConfigError("nbody arrays charges, monopoles, positions, momenta must have equal length")
    return NBodySpec(tuple(system["charges"]), tuple(system["monopoles"]), system["omega"])


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment document; raises :class:`ConfigError`."""
    return _build(_syntactic(_loads(text)))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def serialize(config: ExperimentConfig) -> str:
    """Canonical TOML of a parsed config, rebuilt from its typed fields."""
    doc = {"command": config.command, "seed": config.seed}
    sysd = dict(config.raw["system"])
    if isinstance(config.system, SystemSpec):
        spec = config.system
        metric = {"curvature": spec.metric.curvature.value, "r0": float(spec.metric.r0)}
        centers = [{"position": [float(v) for v in c.position], "g": float(c.g), "q": float(c.q)}
                   for c in spec.centers]
        sysd["mu"] = float(spec.mu)
        sysd["replacement"] = spec.replacement.value
    else:
        metric = dict(config.raw["metric"])
        centers = []
        sysd["omega"] = float(config.system.omega)
        sysd["charges"] = [float(v) for v in config.system.e]
        sysd["monopoles"] = [float(v) for v in config.system.g]
    doc["system"] = sysd
    doc["metric"] = metric
    doc["centers"] = centers
    ic = config.integrator
    doc["integrator"] = {"method": ic.integrator.value, "h": float(ic.h), "t_end": float(ic.t_end),
                         "stride": int(ic.stride), "tol": float(ic.tol), "maxiter": int(ic.maxiter)}
    g = config.grid
    doc["quantum"] = {"s": float(config.quantum_s), "n_max": int(config.n_max), "l_max": float(config.l_max),
                      "r_min": float(g.r_min), "r_max": float(g.r_max), "nodes": int(g.nodes), "scheme": g.scheme}
    sec = dict(config.section_settings)
    sec.update(point=[float(v) for v in config.section.point], normal=[float(v) for v in config.section.normal],
               direction=int(config.section.direction))
    doc["poincare"] = sec
    doc["output"] = dict(config.output)
    return tomli_w.dumps(_order(doc))
