"""Scenario files: YAML, versioned schema, line-accurate validation errors."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .calculus import QuadratureSpec
from .dynamics import BallMap, HamiltonianShear, MapWord, TubeTwist, check_in_plane, make_push_map
from .fragmentation import HamiltonianTwist
from .plane import GeometryError, PuncturedPlane, Rect
from .words import CountingQuasimorphism, RankError, ReducedWord

SCHEMA_VERSION = 1
KINDS = ("defect-audit", "push-value", "stable-norm", "essential-claim", "hamiltonian-profile", "fragment-verify")

_num = {"type": "number"}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_int = {"type": "integer"}


def _prim(kind, props, required):
    return {
        "type": "object",
        "properties": {"type": {"const": kind}, "exponent": {"enum": [1, -1]}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


_FACTOR = {
    "oneOf": [
        _prim(
            "push",
            {
                "enclose": {"type": "array", "items": _int, "minItems": 1},
                "area": _num,
                "core_fraction": _num,
                "turns": _num,
                "center": _point,
                "r_inner": _num,
            },
            ["enclose", "area"],
        ),
        _prim(
            "tube-twist",
            {"center": _point, "r_inner": _num, "r_outer": _num, "turns": _num, "core_fraction": _num},
            ["center", "r_inner", "r_outer"],
        ),
        _prim(
            "hamiltonian-shear",
            {"center": _point, "r_inner": _num, "r_outer": _num, "strength": _num},
            ["center", "r_inner", "r_outer"],
        ),
        _prim(
            "hamiltonian-twist",
            {"center": _point, "r_inner": _num, "r_outer": _num, "turns": _num},
            ["center", "r_inner", "r_outer"],
        ),
        _prim("ball", {"center": _point, "radius": _num, "turns": _num}, ["center", "radius"]),
    ]
}

SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": "^[a-z0-9][a-z0-9-]*$"},
        "description": {"type": "string"},
        "kind": {"enum": list(KINDS)},
        "plane": {
            "type": "object",
            "properties": {
                "punctures": {"type": "array", "items": _point, "minItems": 1},
                "basepoint": _point,
                "rays": {"type": "array", "items": _point},
            },
            "required": ["punctures", "basepoint"],
            "additionalProperties": False,
        },
        "psi": {
            "type": "object",
            "properties": {
                "pattern": {"type": "string", "pattern": "^[a-zA-Z]+$"},
                "defect_bound": {"type": "number", "exclusiveMinimum": 0},
                "homogenized_integrand": {"type": "boolean"},
            },
            "required": ["pattern"],
            "additionalProperties": False,
        },
        "maps": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": _FACTOR},
        },
        "quadrature": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["grid", "monte-carlo"]},
                "resolution": {"type": "integer", "minimum": 1},
                "samples": {"type": "integer", "minimum": 1},
                "seed": _int,
                "region": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
            },
            "additionalProperties": False,
        },
        "experiment": {"type": "object"},
        "output": {"type": "string"},
    },
    "required": ["schema", "name", "kind", "experiment"],
    "additionalProperties": False,
}

# per-kind experiment parameters: name -> (schema, required)
EXPERIMENT = {
    "push-value": ({"map": {"type": "string"}}, ["map"]),
    "stable-norm": ({"map": {"type": "string"}, "k_max": {"type": "integer", "minimum": 2}}, ["map", "k_max"]),
    "defect-audit": (
        {
            "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}},
            "random_pairs": {"type": "integer", "minimum": 0},
            "max_factors": {"type": "integer", "minimum": 1},
            "seed": _int,
        },
        [],
    ),
    "essential-claim": (
        {"alpha": {"type": "string"}, "beta": {"type": "string"}, "k_max": {"type": "integer", "minimum": 1}},
        ["alpha", "beta"],
    ),
    "hamiltonian-profile": (
        {"tolerance": {"type": "number", "exclusiveMinimum": 0}, "samples": {"type": "integer", "minimum": 2}},
        [],
    ),
    "fragment-verify": (
        {
            "map": {"type": "string"},
            "max_piece_measure": {"type": "number", "exclusiveMinimum": 0},
            "samples": {"type": "integer", "minimum": 1},
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "check_pieces": {"type": "boolean"},
            "k_max": {"type": "integer", "minimum": 1},
        },
        ["map"],
    ),
}

NEEDS_PLANE = {"push-value", "stable-norm", "defect-audit", "essential-claim", "fragment-verify"}
NEEDS_PSI = {"push-value", "stable-norm", "defect-audit", "essential-claim"}


class ScenarioError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        where += f"{line}: " if line is not None else (" " if source else "")
        super().__init__(f"{where}{message}")


@dataclass
class Scenario:
    name: str
    kind: str
    description: str
    plane: PuncturedPlane | None
    psi: CountingQuasimorphism | None
    maps: dict
    quad: QuadratureSpec
    params: dict
    output: str
    source: str = ""


def _line_index(node, path=(), out=None):
    """Map key paths to 1-based line numbers using YAML node marks."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def _line_for(lines, path):
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def _schema_check(data, schema, lines, source, prefix=()):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        # for oneOf, report the branch whose declared type matches
        if err.validator == "oneOf" and isinstance(err.instance, dict):
            for sub in err.context:
                if sub.validator != "const":
                    branch = err.schema["oneOf"][sub.schema_path[0]]
                    if branch["properties"]["type"].get("const") == err.instance.get("type"):
                        err = sub
                        break
            else:
                kinds = sorted(b["properties"]["type"]["const"] for b in err.schema["oneOf"])
                raise ScenarioError(
                    f"unknown map factor type {err.instance.get('type')!r} (expected one of {kinds})",
                    _line_for(lines, prefix + tuple(err.absolute_path)),
                    source,
                )
        path = prefix + tuple(err.absolute_path)
        msg = err.message
        if err.validator == "additionalProperties":
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            path += tuple(extra[:1])
            msg = f"unknown key {extra[0]!r}" if extra else msg
        loc = ".".join(map(str, path)) or "<root>"
        raise ScenarioError(f"{loc}: {msg}", _line_for(lines, path), source)


def load_text(text: str, source: str = "<string>") -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source)
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping", 1, source)
    lines = _line_index(node)
    if data.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema version {data.get('schema')!r} (this build reads {SCHEMA_VERSION})",
            _line_for(lines, ("schema",)),
            source,
        )
    _schema_check(data, SCHEMA, lines, source)
    kind = data["kind"]
    props, required = EXPERIMENT[kind]
    _schema_check(
        data["experiment"],
        {"type": "object", "properties": props, "required": required, "additionalProperties": False},
        lines,
        source,
        ("experiment",),
    )
    return _build(data, lines, source)


def load(path) -> Scenario:
    path = Path(path)
    return load_text(path.read_text(), str(path))


def _build(data, lines, source) -> Scenario:
    kind = data["kind"]

    def fail(msg, *path):
        raise ScenarioError(msg, _line_for(lines, path), source)

    plane = None
    if "plane" in data:
        p = data["plane"]
        try:
            plane = PuncturedPlane(p["punctures"], p["basepoint"], p.get("rays"))
        except (GeometryError, ValueError) as exc:
            fail(f"plane: {exc}", "plane")
    elif kind in NEEDS_PLANE:
        fail(f"kind {kind} needs a plane", "kind")

    psi = None
    if "psi" in data:
        q = data["psi"]
        if plane is None:
            fail("psi given without a plane", "psi")
        try:
            psi = CountingQuasimorphism(ReducedWord.parse(q["pattern"], plane.rank), q.get("defect_bound"))
        except (RankError, ValueError) as exc:
            fail(f"psi: {exc} (plane has {plane.rank} punctures)", "psi", "pattern")
    elif kind in NEEDS_PSI:
        fail(f"kind {kind} needs a psi section", "kind")

    maps = {}
    for name, factors in data.get("maps", {}).items():
        items = []
        for i, spec in enumerate(factors):
            try:
                prim = _primitive(spec, plane)
                if plane is not None:
                    check_in_plane(plane, prim)
            except (GeometryError, ValueError) as exc:
                fail(f"maps.{name}[{i}]: {exc}", "maps", name, i)
            items.append((prim, spec.get("exponent", 1)))
        maps[name] = MapWord(tuple(items))

    qd = data.get("quadrature", {})
    region = qd.get("region")
    if region is not None:
        x0, x1, y0, y1 = region
        if not (x0 < x1 and y0 < y1):
            fail("quadrature.region must be [xmin, xmax, ymin, ymax] with min < max", "quadrature", "region")
        region = Rect(x0, x1, y0, y1)
    quad = QuadratureSpec(
        mode=qd.get("mode", "grid"),
        resolution=qd.get("resolution", 256),
        samples=qd.get("samples", 100_000),
        seed=qd.get("seed", 0),
        region=region,
        homogenized_integrand=data.get("psi", {}).get("homogenized_integrand", True),
    )

    params = dict(data["experiment"])
    for key in ("map", "alpha", "beta"):
        if key in params and params[key] not in maps:
            fail(f"experiment.{key}: no map named {params[key]!r}", "experiment", key)
    for i, pair in enumerate(params.get("pairs", [])):
        for name in pair:
            if name not in maps:
                fail(f"experiment.pairs[{i}]: no map named {name!r}", "experiment", "pairs", i)
    if region is not None:
        _check_region_covers(maps, region, fail)
    return Scenario(
        data["name"],
        kind,
        data.get("description", ""),
        plane,
        psi,
        maps,
        quad,
        params,
        data.get("output", f"{data['name']}.csv"),
        source,
    )


def _check_region_covers(maps, region, fail):
    from .dynamics import bounding_rect

    for name, f in maps.items():
        b = bounding_rect(f)
        if b is None:
            continue
        if b.xmin < region.xmin or b.xmax > region.xmax or b.ymin < region.ymin or b.ymax > region.ymax:
            fail(f"quadrature.region does not cover the supports of map {name!r}", "quadrature", "region")


def _primitive(spec, plane):
    t = spec["type"]
    if t == "push":
        if plane is None:
            raise ValueError("push maps need a plane")
        return make_push_map(
            plane,
            spec["enclose"],
            spec["area"],
            spec.get("core_fraction", 0.9),
            turns=spec.get("turns", 1),
            center=spec.get("center"),
            r_inner=spec.get("r_inner"),
        )
    if t == "tube-twist":
        return TubeTwist(spec["center"], spec["r_inner"], spec["r_outer"], spec.get("turns", 1), spec.get("core_fraction", 0.9))
    if t == "hamiltonian-shear":
        return HamiltonianShear(spec["center"], spec["r_inner"], spec["r_outer"], spec.get("strength", 1.0))
    if t == "hamiltonian-twist":
        return HamiltonianTwist(spec["center"], spec["r_inner"], spec["r_outer"], spec.get("turns", 1.0))
    if t == "ball":
        return BallMap(spec["center"], spec["radius"], spec.get("turns", 0.25))
    raise ValueError(f"unknown factor type {t!r}")


def bundled() -> list[tuple[str, str]]:
    """(name, file path) of the bundled scenarios, sorted by name."""
    root = resources.files("fragnorm") / "scenarios"
    out = []
    for entry in root.iterdir():
        if entry.name.endswith(".yaml"):
            out.append((entry.name[: -len(".yaml")], str(entry)))
    return sorted(out)
