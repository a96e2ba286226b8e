"""Experiment configuration: strict parsing, validation, canonical digest.

Configs are JSON records in a fixed per-kind schema.  Parsing is strict:
unknown fields, duplicate keys, and malformed atoms are all collected as
located errors rather than silently ignored.  The digest is the SHA-256 of
the canonicalized record (sorted keys), so field order never matters.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigurationError, ValidationError
from .groups import Element, GroupHandle, GroupSpec, WreathGroup, make_group
from .measures import (MeasureFamily, ProbMeasure, heavy_tail_family,
                       make_measure, mixture_family)

EXPERIMENT_KINDS = (
    "escape",
    "entropy-profile",
    "continuity",
    "discontinuity-demo",
    "heat-kernel-compare",
    "coarse-diagnostics",
)

_SCALE_FIELDS: Dict[str, Dict[str, Any]] = {
    "escape": {"steps": 10_000, "samples": 1_000, "green_n_max": 60,
               "grid": 64, "refinements": 3, "tail_fit_lo": 2,
               "tail_fit_hi": 40, "tail_inflation": 1.2},
    "entropy-profile": {"n_max": 10},
    "continuity": {"k_list": [2, 4, 8, 16, 32], "n_max": 4},
    "discontinuity-demo": {"k_list": [4, 16, 64], "steps_list": [1_000, 10_000],
                           "samples": 1_000},
    "heat-kernel-compare": {"n_max": 200, "fit_lo": 2, "fit_hi": 60},
    "coarse-diagnostics": {"n": 6, "samples": 10_000},
}

_TOP_FIELDS = {
    "escape": {"measure"},
    "entropy-profile": {"measure"},
    "continuity": {"family"},
    "discontinuity-demo": {"family"},
    "heat-kernel-compare": {"measure_symmetric", "measure_compared", "d"},
    "coarse-diagnostics": {"measure", "coarse"},
}


class ConfigError(ConfigurationError):
    """Carries the full list of located validation errors."""

    def __init__(self, errors: List[Tuple[Optional[int], str, str]]):
        self.errors = errors
        lines = "; ".join(
            f"{'line ' + str(ln) + ', ' if ln else ''}{path}: {reason}"
            for ln, path, reason in errors)
        super().__init__(f"invalid config: {lines}")


@dataclass
class ExperimentConfig:
    kind: str
    record: Dict[str, Any]  # validated, defaults materialized
    group: GroupHandle

    @property
    def master_seed(self) -> int:
        return self.record["master_seed"]

    @property
    def scales(self) -> Dict[str, Any]:
        return self.record["scales"]

    @property
    def tolerances(self) -> Dict[str, float]:
        return self.record.get("tolerances", {})

    def digest(self) -> str:
        canonical = json.dumps(self.record, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


class _Collector:
    """Accumulates located errors; raises once at the end of parsing."""

    def __init__(self, text: str):
        self.text = text
        self.errors: List[Tuple[Optional[int], str, str]] = []

    def add(self, path: str, reason: str) -> None:
        self.errors.append((self._line_of(path.split(".")[-1]), path, reason))

    def _line_of(self, token: str) -> Optional[int]:
        # best-effort location: first occurrence of the quoted field name
        needle = f'"{token}"'
        pos = self.text.find(needle)
        if pos < 0:
            return None
        return self.text.count("\n", 0, pos) + 1

    def finish(self) -> None:
        if self.errors:
            raise ConfigError(self.errors)


def _reject_duplicates(pairs):
    seen = set()
    out = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError([(None, k, "duplicate field")])
        seen.add(k)
        out[k] = v
    return out


def parse_element(group: GroupHandle, value, path: str,
                  errors: _Collector) -> Optional[Element]:
    """Parse one element in the kind-specific config syntax."""
    try:
        kind = group.spec.kind
        if kind == "integer-lattice":
            if not (isinstance(value, list)
                    and len(value) == group.spec.d
                    and all(isinstance(x, int) for x in value)):
                raise ValueError(f"expected a list of {group.spec.d} integers")
            return group.element(tuple(value))
        if kind == "cyclic":
            if not isinstance(value, int):
                raise ValueError("expected an integer residue")
            return group.element(value)
        if kind == "infinite-dihedral":
            if not (isinstance(value, list) and len(value) == 2):
                raise ValueError("expected [translation, flip]")
            return group.element((value[0], value[1]))
        if kind == "free":
            if not (isinstance(value, list)
                    and all(isinstance(x, int) and x != 0 for x in value)):
                raise ValueError("expected a list of nonzero letter indices")
            return group.element(tuple(value))
        if kind == "wreath":
            if not (isinstance(value, dict)
                    and set(value) <= {"lamps", "pos"}):
                raise ValueError('expected {"lamps": [...], "pos": ...}')
            assert isinstance(group, WreathGroup)
            pos = parse_element(group.base_group, value.get("pos", None),
                                path + ".pos", errors) \
                if value.get("pos") is not None else group.base_group.identity()
            lamps = []
            for i, pair in enumerate(value.get("lamps", [])):
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise ValueError(f"lamp entry {i} must be [base, value]")
                b = parse_element(group.base_group, pair[0],
                                  f"{path}.lamps[{i}][0]", errors)
                v = parse_element(group.lamp_group, pair[1],
                                  f"{path}.lamps[{i}][1]", errors)
                if b is None or v is None:
                    return None
                lamps.append((b, v))
            if pos is None:
                return None
            return group.pair(lamps, pos)
        raise ValueError(f"no element syntax for kind {kind}")
    except (ValueError, TypeError, ConfigurationError) as exc:
        errors.add(path, f"bad element {value!r}: {exc}")
        return None


def parse_measure(group: GroupHandle, record, path: str,
                  errors: _Collector) -> Optional[ProbMeasure]:
    if not (isinstance(record, dict) and set(record) == {"atoms"}):
        errors.add(path, 'measure must be a record {"atoms": [[element, '
                         'mass], ...]}')
        return None
    pairs = []
    for i, entry in enumerate(record["atoms"]):
        if not (isinstance(entry, list) and len(entry) == 2):
            errors.add(f"{path}.atoms[{i}]", "expected [element, mass]")
            return None
        g = parse_element(group, entry[0], f"{path}.atoms[{i}]", errors)
        if g is None:
            return None
        pairs.append((g, entry[1]))
    try:
        return make_measure(group, pairs)
    except (ValidationError, ConfigurationError) as exc:
        errors.add(path, str(exc))
        return None


def build_family(config: "ExperimentConfig") -> MeasureFamily:
    """Materialize the declarative family record of a parsed config."""
    rec = config.record["family"]
    if rec["type"] == "mixture":
        errors = _Collector("")
        base = parse_measure(config.group, rec["base"], "family.base", errors)
        contaminant = parse_element(config.group, rec["contaminant"],
                                    "family.contaminant", errors)
        errors.finish()
        return mixture_family(base, contaminant)
    if rec["type"] == "heavy-tail":
        return heavy_tail_family(config.group, rec.get("exponent", 1.5),
                                 rec.get("proxy_k", 4096))
    raise ConfigurationError(f"unknown family type {rec['type']!r}")


def build_measure(config: "ExperimentConfig",
                  field_name: str = "measure") -> ProbMeasure:
    errors = _Collector("")
    mu = parse_measure(config.group, config.record[field_name], field_name,
                       errors)
    errors.finish()
    return mu


def _validate_scales(kind: str, scales, errors: _Collector) -> Dict[str, Any]:
    defaults = dict(_SCALE_FIELDS[kind])
    if scales is None:
        return defaults
    if not isinstance(scales, dict):
        errors.add("scales", "must be a record")
        return defaults
    for key, value in scales.items():
        if key not in defaults:
            errors.add(f"scales.{key}", "unknown scale field")
            continue
        proto = defaults[key]
        if isinstance(proto, list):
            if not (isinstance(value, list)
                    and all(isinstance(x, int) for x in value) and value):
                errors.add(f"scales.{key}", "must be a non-empty integer list")
                continue
        elif isinstance(proto, float):
            if not isinstance(value, (int, float)):
                errors.add(f"scales.{key}", "must be a number")
                continue
        elif not isinstance(value, int) or isinstance(value, bool):
            errors.add(f"scales.{key}", "must be an integer")
            continue
        defaults[key] = value
    return defaults


def _validate_family(kind: str, rec, errors: _Collector):
    if not isinstance(rec, dict) or "type" not in rec:
        errors.add("family", 'must be a record with a "type" field')
        return None
    if rec["type"] == "mixture":
        allowed = {"type", "base", "contaminant", "weight"}
        required = {"base", "contaminant"}
    elif rec["type"] == "heavy-tail":
        allowed = {"type", "exponent", "proxy_k"}
        required = set()
    else:
        errors.add("family.type", f"unknown family type {rec['type']!r}")
        return None
    unknown = set(rec) - allowed
    for f in sorted(unknown):
        errors.add(f"family.{f}", "unknown field")
    for f in sorted(required - set(rec)):
        errors.add(f"family.{f}", "required field missing")
    return rec


def _validate_coarse(group: GroupHandle, rec, errors: _Collector):
    if not isinstance(group, WreathGroup):
        errors.add("coarse", "coarse diagnostics need a wreath-product group")
        return None
    allowed = {"t0", "N", "n0", "L", "R", "F"}
    if not isinstance(rec, dict):
        errors.add("coarse", "must be a record")
        return None
    for f in sorted(set(rec) - allowed):
        errors.add(f"coarse.{f}", "unknown field")
    for f in ("t0", "N", "n0", "L", "R"):
        if f not in rec:
            errors.add(f"coarse.{f}", "required field missing")
            return None
    out = {"t0": rec["t0"], "N": rec["N"], "n0": rec["n0"]}
    for name, subgroup in (("L", group.lamp_group), ("R", group.base_group),
                           ("F", group.base_group)):
        if name == "F" and "F" not in rec:
            continue
        vals = []
        for i, v in enumerate(rec[name]):
            e = parse_element(subgroup, v, f"coarse.{name}[{i}]", errors)
            if e is not None:
                vals.append(e)
        out[name] = vals
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config, or raise ConfigError listing every
    located problem (line where recoverable, field path, reason)."""
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError([(exc.lineno, "<syntax>", exc.msg)])
    errors = _Collector(text)
    if not isinstance(raw, dict):
        raise ConfigError([(None, "<root>", "config must be a JSON record")])
    kind = raw.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError([(errors._line_of("kind"), "kind",
                            f"must be one of {EXPERIMENT_KINDS}, got {kind!r}")])
    allowed = {"kind", "group", "master_seed", "scales", "tolerances",
               "output_dir"} | _TOP_FIELDS[kind]
    for f in sorted(set(raw) - allowed):
        errors.add(f, "unknown field")
    for f in sorted(_TOP_FIELDS[kind] | {"group"}):
        if f not in raw:
            errors.add(f, "required field missing")
    errors.finish()

    try:
        spec = GroupSpec.from_dict(raw["group"])
        group = make_group(spec)
    except ConfigurationError as exc:
        raise ConfigError([(errors._line_of("group"), "group", str(exc))])

    record: Dict[str, Any] = {
        "kind": kind,
        "group": spec.to_dict(),
        "master_seed": raw.get("master_seed", 0),
        "scales": _validate_scales(kind, raw.get("scales"), errors),
    }
    if not isinstance(record["master_seed"], int):
        errors.add("master_seed", "must be an integer")
    if "tolerances" in raw:
        tol = raw["tolerances"]
        if not (isinstance(tol, dict)
                and all(isinstance(v, (int, float)) for v in tol.values())):
            errors.add("tolerances", "must be a record of numbers")
        else:
            record["tolerances"] = tol
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            errors.add("output_dir", "must be a string")
        else:
            record["output_dir"] = raw["output_dir"]

    # kind-specific payloads; measures are parsed now so that atom or mass
    # problems surface as located errors at validate time
    if kind in ("escape", "entropy-profile", "coarse-diagnostics"):
        if parse_measure(group, raw["measure"], "measure", errors) is not None:
            record["measure"] = raw["measure"]
    if kind == "heat-kernel-compare":
        for f in ("measure_symmetric", "measure_compared"):
            if parse_measure(group, raw[f], f, errors) is not None:
                record[f] = raw[f]
        d = raw.get("d")
        if not isinstance(d, (int, float)) or d < 1:
            errors.add("d", "must be a number >= 1")
        else:
            record["d"] = d
    if kind in ("continuity", "discontinuity-demo"):
        fam = _validate_family(kind, raw["family"], errors)
        if fam is not None:
            if fam["type"] == "mixture":
                parse_measure(group, fam.get("base"), "family.base", errors)
                parse_element(group, fam.get("contaminant"),
                              "family.contaminant", errors)
            record["family"] = fam
    if kind == "coarse-diagnostics":
        coarse = _validate_coarse(group, raw.get("coarse"), errors)
        if coarse is not None:
            record["coarse"] = raw["coarse"]
    errors.finish()
    return ExperimentConfig(kind, record, group)
