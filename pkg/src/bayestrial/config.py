"""JSON run configurations.

A configuration is one JSON object. Its ``design`` (or ``designs``) entries
are discriminated by ``variant``; the remaining keys of a design are the
fields of the matching design class. Nested parameter objects are written as
objects (``{"alpha": 1, "beta": 1}``) or as positional lists (``[1, 1]``).
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass
from typing import Any, Optional

from .decision_rules import PosteriorProbRule
from .designs import (
    BorrowingBinaryDesign,
    FutilitySurvivalDesign,
    GsdBinaryDesign,
    MultiplicityDesign,
    SampleSizeSearchSpec,
    SingleBinaryDesign,
    TdfDesign,
    Variant,
)
from .engine import SimulationSettings
from .mcmc import BhmConfig, EssConfig
from .stats_dist import BetaParams, GammaParams
from .trial_model import ErrorRequirements, Hypothesis, PilotData, ScenarioSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "design_from_dict"]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self.describe())

    def describe(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.path:
            where.append(f"field '{self.path}'")
        prefix = ", ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


DESIGN_CLASSES = {
    Variant.SINGLE_BINARY: SingleBinaryDesign,
    Variant.BORROWING_BINARY: BorrowingBinaryDesign,
    Variant.GSD_BINARY: GsdBinaryDesign,
    Variant.FUTILITY_SURVIVAL: FutilitySurvivalDesign,
    Variant.MULTIPLICITY: MultiplicityDesign,
    Variant.TDF_TEST: TdfDesign,
}

# nested parameter types that may appear as objects or positional lists
_RECORDS = (BetaParams, GammaParams, Hypothesis, PilotData, BhmConfig, EssConfig)


def _record(cls, value, path: str):
    if isinstance(value, cls):
        return value
    names = [f.name for f in dataclasses.fields(cls)]
    if isinstance(value, list):
        if len(value) > len(names):
            raise ConfigError(f"expected at most {len(names)} values {names}", path)
        kwargs = dict(zip(names, value))
    elif isinstance(value, dict):
        unknown = set(value) - set(names)
        if unknown:
            bad = sorted(unknown)[0]
            raise ConfigError(f"unknown key (allowed: {', '.join(names)})", f"{path}.{bad}")
        kwargs = dict(value)
    else:
        raise ConfigError(f"expected an object or list for {cls.__name__}", path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    if tp in _RECORDS:
        return _record(tp, value, path)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError("expected an integer", path)
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    if tp is tuple or origin is tuple:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (value,)
        if not isinstance(value, list):
            raise ConfigError("expected a list", path)
        return tuple(value)
    return value


def _design_fields(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def design_from_dict(d: dict, path: str = "design"):
    """Build a design object from its JSON form."""
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    if "variant" not in d:
        raise ConfigError("missing 'variant'", path)
    try:
        variant = Variant(str(d["variant"]).upper())
    except ValueError:
        allowed = ", ".join(v.value for v in Variant)
        raise ConfigError(f"unknown variant {d['variant']!r} (allowed: {allowed})", f"{path}.variant") from None
    cls = DESIGN_CLASSES[variant]
    fields = _design_fields(cls)
    kwargs = {}
    for key, value in d.items():
        if key in ("variant", "name"):
            continue
        if key not in fields:
            raise ConfigError(f"unknown key for {variant.value} (allowed: {', '.join(fields)})", f"{path}.{key}")
        kwargs[key] = _convert(fields[key], value, f"{path}.{key}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), path) from None
    except ValueError as exc:
        # validators name the offending field first ("lam must lie in ...")
        msg = str(exc)
        head = msg.split(" ", 1)[0]
        where = f"{path}.{head}" if head in kwargs else path
        raise ConfigError(msg, where) from None


def _scenario(d, path: str) -> ScenarioSpec:
    if isinstance(d, (int, float)) and not isinstance(d, bool):
        return ScenarioSpec((float(d),))
    if isinstance(d, list):
        return ScenarioSpec(tuple(d))
    if not isinstance(d, dict):
        raise ConfigError("expected a number, list or object", path)
    unknown = set(d) - {"true_params", "label"}
    if unknown:
        raise ConfigError("unknown key (allowed: true_params, label)", f"{path}.{sorted(unknown)[0]}")
    if "true_params" not in d:
        raise ConfigError("missing 'true_params'", path)
    try:
        params = d["true_params"]
        params = tuple(params) if isinstance(params, list) else (params,)
        return ScenarioSpec(params, d.get("label", "CUSTOM"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


@dataclass(frozen=True)
class RunConfig:
    designs: tuple
    names: tuple
    scenarios: tuple
    settings: SimulationSettings
    output: str = "csv"
    output_path: Optional[str] = None
    exact: bool = False
    extra: dict = dataclasses.field(default_factory=dict)

    @property
    def design(self):
        return self.designs[0]


_TOP_KEYS = {
    "description", "command", "design", "designs", "scenarios", "settings", "output", "exact",
    "search", "grid", "priors", "n", "rule", "a0_grid", "n_grid", "p_values", "alpha",
}
_SETTINGS_KEYS = {"replications", "inner_samples", "master_seed", "parallelism"}


def _settings(d: dict, path: str = "settings") -> SimulationSettings:
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    unknown = set(d) - _SETTINGS_KEYS
    if unknown:
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(_SETTINGS_KEYS))})", f"{path}.{sorted(unknown)[0]}")
    kwargs = {}
    for key, value in d.items():
        if value is None and key == "inner_samples":
            continue
        kwargs[key] = _convert(int, value, f"{path}.{key}")
    try:
        return SimulationSettings(**kwargs)
    except ValueError as exc:
        key = next((k for k in kwargs if k in str(exc)), None)
        raise ConfigError(str(exc), f"{path}.{key}" if key else path) from None


def parse_config(doc: Any, overrides: Optional[dict] = None) -> RunConfig:
    """Validate a decoded JSON document.

    ``overrides`` may hold ``replications``, ``master_seed``, ``parallelism``
    and ``inner_samples`` values that replace the document's settings.
    """
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError("unknown top-level key", sorted(unknown)[0])

    raw_settings = dict(doc.get("settings", {}) or {})
    if not isinstance(doc.get("settings", {}), dict):
        raise ConfigError("expected an object", "settings")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw_settings[key] = value
    settings = _settings(raw_settings)

    designs, names = [], []
    if "design" in doc and "designs" in doc:
        raise ConfigError("give either 'design' or 'designs', not both", "designs")
    if "design" in doc:
        designs.append(design_from_dict(doc["design"], "design"))
        names.append(str(doc["design"].get("name", "design")))
    elif "designs" in doc:
        if not isinstance(doc["designs"], list) or not doc["designs"]:
            raise ConfigError("expected a nonempty list", "designs")
        for i, d in enumerate(doc["designs"]):
            designs.append(design_from_dict(d, f"designs[{i}]"))
            names.append(str(d.get("name", f"design{i + 1}")))

    scen = doc.get("scenarios", [])
    if not isinstance(scen, list):
        raise ConfigError("expected a list", "scenarios")
    scenarios = tuple(_scenario(s, f"scenarios[{i}]") for i, s in enumerate(scen))

    out = doc.get("output", {}) or {}
    if not isinstance(out, dict):
        raise ConfigError("expected an object", "output")
    fmt = str(out.get("format", "csv")).lower()
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'", "output.format")
    exact = doc.get("exact", False)
    if not isinstance(exact, bool):
        raise ConfigError("expected true or false", "exact")

    extra = {k: doc[k] for k in ("search", "grid", "priors", "n", "rule", "a0_grid", "n_grid", "p_values", "alpha")
             if k in doc}
    return RunConfig(tuple(designs), tuple(names), scenarios, settings, fmt, out.get("path"), exact, extra)


def _locate(text: str, path: str) -> Optional[int]:
    """Best-effort line number of a dotted field path in the JSON source."""
    if not path:
        return None
    pos = 0
    line = None
    for part in path.replace("]", "").replace("[", ".").split("."):
        if not part or part.isdigit():
            continue
        idx = text.find(f'"{part}"', pos)
        if idx < 0:
            break
        pos = idx + 1
        line = text.count("\n", 0, idx) + 1
    return line


def load_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    try:
        return parse_config(doc, overrides)
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _locate(text, exc.path)
            exc.args = (exc.describe(),)
        raise


# helpers for command-specific sections


def search_spec(extra: dict, scenarios: tuple) -> SampleSizeSearchSpec:
    s = extra.get("search")
    if not isinstance(s, dict):
        raise ConfigError("search-n needs a 'search' object", "search")
    unknown = set(s) - {"candidates", "alpha", "beta"}
    if unknown:
        raise ConfigError("unknown key (allowed: candidates, alpha, beta)", f"search.{sorted(unknown)[0]}")
    if len(scenarios) != 2:
        raise ConfigError("search-n needs exactly two scenarios: null then alternative", "scenarios")
    cands = s.get("candidates")
    if not isinstance(cands, list):
        raise ConfigError("expected a list of sample sizes", "search.candidates")
    try:
        req = ErrorRequirements(float(s.get("alpha", 0.025)), float(s.get("beta", 0.2)))
        return SampleSizeSearchSpec(tuple(cands), req, scenarios[0], scenarios[1])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "search") from None


def claim_inputs(extra: dict) -> tuple[list, int, PosteriorProbRule]:
    priors = extra.get("priors")
    if not isinstance(priors, list) or not priors:
        raise ConfigError("prior-claim needs a nonempty 'priors' list", "priors")
    parsed = [_record(BetaParams, p, f"priors[{i}]") for i, p in enumerate(priors)]
    n = _convert(int, extra.get("n"), "n")
    rule = extra.get("rule", {})
    if not isinstance(rule, dict):
        raise ConfigError("expected an object", "rule")
    unknown = set(rule) - {"hypothesis", "lam"}
    if unknown:
        raise ConfigError("unknown key (allowed: hypothesis, lam)", f"rule.{sorted(unknown)[0]}")
    hyp = _record(Hypothesis, rule.get("hypothesis", {"theta0": 0.12, "direction": "LESS"}), "rule.hypothesis")
    try:
        pr = PosteriorProbRule(hyp, float(rule.get("lam", 0.975)))
    except ValueError as exc:
        raise ConfigError(str(exc), "rule.lam") from None
    return parsed, n, pr


def float_list(extra: dict, key: str, ascending: bool = False) -> list:
    v = extra.get(key)
    if not isinstance(v, list) or not v:
        raise ConfigError("expected a nonempty list", key)
    out = [_convert(float, x, f"{key}[{i}]") for i, x in enumerate(v)]
    if ascending and any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError("values must be strictly ascending", key)
    return out
