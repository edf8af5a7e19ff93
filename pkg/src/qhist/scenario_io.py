"""Scenario file format: canonical JSON with [re, im] complex pairs.

A scenario file bundles dimension, initial condition, dynamics segments,
named decompositions, and named families bound to the grid implied by the
segment durations. Serialization is canonical (sorted keys, two-space
indent, shortest round-tripping floats), so a loaded scenario re-serializes
byte-for-byte.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ScenarioFormatError
from .events import (
    Decomposition,
    Projector,
    make_decomposition,
    spin_decomposition,
    trivial_decomposition,
)
from .histories import Dynamics, family_on_grid
from .linalg import (
    DEFAULT_TOLERANCES,
    DensityOperator,
    Tolerances,
    dim_cap,
    evolution_unitary,
)
from .models import Scenario

FORMAT = "qhist-scenario/1"


def _fail(path: str, message: str):
    raise ScenarioFormatError(f"{path}: {message}")


def _as_complex(value, path: str) -> complex:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
    ):
        _fail(path, f"expected a [re, im] pair, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def _parse_vector(data, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        _fail(path, "expected a non-empty list of [re, im] pairs")
    return np.array([_as_complex(v, f"{path}[{i}]") for i, v in enumerate(data)], dtype=complex)


def _parse_matrix(data, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        _fail(path, "expected a non-empty list of rows")
    rows = [_parse_vector(row, f"{path}[{i}]") for i, row in enumerate(data)]
    widths = {r.shape[0] for r in rows}
    if len(widths) != 1:
        _fail(path, "rows have unequal lengths")
    return np.array(rows, dtype=complex)


def _encode_complex(c: complex) -> list[float]:
    return [float(c.real), float(c.imag)]


def _encode_vector(v: np.ndarray) -> list:
    return [_encode_complex(c) for c in v.tolist()]


def _encode_matrix(m: np.ndarray) -> list:
    return [[_encode_complex(c) for c in row] for row in m.tolist()]


def _parse_tolerances(data, path: str) -> tuple[Tolerances, float | None]:
    if not isinstance(data, dict):
        _fail(path, "expected an object of tolerance overrides")
    overrides = dict(data)
    consistency = overrides.pop("consistency", None)
    if consistency is not None and (
        not isinstance(consistency, (int, float)) or isinstance(consistency, bool)
    ):
        _fail(f"{path}.consistency", f"expected a number, got {consistency!r}")
    try:
        tol = DEFAULT_TOLERANCES.merged(overrides)
    except (ValueError, TypeError) as exc:
        _fail(path, str(exc))
    return tol, None if consistency is None else float(consistency)


def _parse_initial(data, dim: int, tol: Tolerances) -> DensityOperator:
    if not isinstance(data, dict) or len(set(data) & {"state", "density"}) != 1:
        _fail("initial", 'expected exactly one of "state" or "density"')
    if "state" in data:
        vec = _parse_vector(data["state"], "initial.state")
        if vec.shape[0] != dim:
            _fail("initial.state", f"length {vec.shape[0]} does not match dim {dim}")
        try:
            return DensityOperator.from_state(vec, tol)
        except ValueError as exc:
            _fail("initial.state", str(exc))
    mat = _parse_matrix(data["density"], "initial.density")
    if mat.shape != (dim, dim):
        _fail("initial.density", f"shape {mat.shape} does not match dim {dim}")
    try:
        return DensityOperator.from_matrix(mat, tol)
    except ValueError as exc:
        _fail("initial.density", str(exc))


def _parse_dynamics(data, dim: int, tol: Tolerances) -> Dynamics:
    if not isinstance(data, list) or not data:
        _fail("dynamics", "expected a non-empty list of segments")
    segments = []
    for k, entry in enumerate(data):
        path = f"dynamics[{k}]"
        if not isinstance(entry, dict):
            _fail(path, "expected an object")
        duration = entry.get("duration")
        if not isinstance(duration, (int, float)) or isinstance(duration, bool) or duration < 0:
            _fail(f"{path}.duration", f"expected a nonnegative number, got {duration!r}")
        if len(set(entry) & {"unitary", "generator"}) != 1:
            _fail(path, 'expected exactly one of "unitary" or "generator"')
        if "unitary" in entry:
            u = _parse_matrix(entry["unitary"], f"{path}.unitary")
        else:
            h = _parse_matrix(entry["generator"], f"{path}.generator")
            try:
                u = evolution_unitary(h, float(duration))
            except ValueError as exc:
                _fail(f"{path}.generator", str(exc))
        if u.shape != (dim, dim):
            _fail(path, f"operator shape {u.shape} does not match dim {dim}")
        segments.append((float(duration), u))
    try:
        return Dynamics.build(segments, tol)
    except ValueError as exc:
        _fail("dynamics", str(exc))


def _parse_decomposition(name: str, entry, dim: int, tol: Tolerances) -> Decomposition:
    path = f"decompositions.{name}"
    if not isinstance(entry, dict):
        _fail(path, "expected an object")
    kinds = set(entry) & {"spin", "projectors", "trivial"}
    if len(kinds) != 1:
        _fail(path, 'expected exactly one of "spin", "projectors", or "trivial"')
    if "trivial" in entry:
        if entry["trivial"] is not True:
            _fail(f"{path}.trivial", "must be true")
        return trivial_decomposition(dim)
    if "spin" in entry:
        if dim != 2:
            _fail(path, f"spin shorthand needs dim 2, scenario has dim {dim}")
        block = entry["spin"]
        if not isinstance(block, dict) or "direction" not in block:
            _fail(f"{path}.spin", 'expected an object with a "direction"')
        direction = block["direction"]
        if (
            not isinstance(direction, list)
            or len(direction) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in direction)
        ):
            _fail(f"{path}.spin.direction", "expected a 3-vector of numbers")
        try:
            return spin_decomposition([float(x) for x in direction], name, tol)
        except ValueError as exc:
            _fail(f"{path}.spin.direction", str(exc))
    labels = entry.get("labels")
    mats = entry.get("projectors")
    if not isinstance(mats, list) or not mats:
        _fail(f"{path}.projectors", "expected a non-empty list of matrices")
    if not isinstance(labels, list) or len(labels) != len(mats) or not all(
        isinstance(s, str) for s in labels
    ):
        _fail(f"{path}.labels", "expected one string label per projector")
    projectors = []
    for i, m in enumerate(mats):
        mat = _parse_matrix(m, f"{path}.projectors[{i}]")
        if mat.shape != (dim, dim):
            _fail(f"{path}.projectors[{i}]", f"shape {mat.shape} does not match dim {dim}")
        try:
            projectors.append(Projector.build(mat, tol))
        except ValueError as exc:
            _fail(f"{path}.projectors[{i}]", str(exc))
    try:
        return make_decomposition(projectors, labels, tol)
    except ValueError as exc:
        _fail(path, str(exc))


def scenario_from_dict(data: Any) -> Scenario:
    """Build and fully validate a Scenario from parsed JSON data."""
    if not isinstance(data, dict):
        _fail("$", "scenario file must contain a JSON object")
    fmt = data.get("format")
    if fmt != FORMAT:
        _fail("format", f"expected {FORMAT!r}, got {fmt!r}")
    dim = data.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim <= 0:
        _fail("dim", f"expected a positive integer, got {dim!r}")
    cap = dim_cap()
    if dim > cap:
        _fail("dim", f"{dim} exceeds the dimension cap {cap}")
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        _fail("name", "expected a string")
    t0 = data.get("t0", 0.0)
    if not isinstance(t0, (int, float)) or isinstance(t0, bool):
        _fail("t0", f"expected a number, got {t0!r}")
    meta = data.get("meta", {})
    if not isinstance(meta, dict):
        _fail("meta", "expected an object")

    tolerances, consistency_tol = DEFAULT_TOLERANCES, None
    if "tolerances" in data:
        tolerances, consistency_tol = _parse_tolerances(data["tolerances"], "tolerances")

    initial = _parse_initial(data.get("initial"), dim, tolerances)
    dynamics = _parse_dynamics(data.get("dynamics"), dim, tolerances)

    raw_decs = data.get("decompositions", {})
    if not isinstance(raw_decs, dict):
        _fail("decompositions", "expected an object of named decompositions")
    decompositions = {
        str(n): _parse_decomposition(str(n), entry, dim, tolerances)
        for n, entry in raw_decs.items()
    }

    raw_fams = data.get("families", {})
    if not isinstance(raw_fams, dict):
        _fail("families", "expected an object of named families")
    families = {}
    for fam_name, entry in raw_fams.items():
        path = f"families.{fam_name}"
        if not isinstance(entry, dict) or "slots" not in entry:
            _fail(path, 'expected an object with a "slots" list')
        slots = entry["slots"]
        if not isinstance(slots, list) or not all(isinstance(s, str) for s in slots):
            _fail(f"{path}.slots", "expected a list of decomposition names")
        if len(slots) != dynamics.n_segments:
            _fail(
                f"{path}.slots",
                f"expected {dynamics.n_segments} entries (one per dynamics segment), "
                f"got {len(slots)}",
            )
        missing = [s for s in slots if s not in decompositions]
        if missing:
            _fail(f"{path}.slots", f"unknown decomposition {missing[0]!r}")
        try:
            families[str(fam_name)] = family_on_grid(
                dynamics, [decompositions[s] for s in slots], initial, float(t0)
            )
        except ValueError as exc:
            _fail(path, str(exc))

    try:
        return Scenario(
            name=name,
            dim=dim,
            t0=float(t0),
            initial=initial,
            dynamics=dynamics,
            decompositions=decompositions,
            families=families,
            tolerances=tolerances,
            consistency_tol=consistency_tol,
            meta=meta,
        )
    except ValueError as exc:
        _fail("$", str(exc))


def load_scenario(path) -> Scenario:
    """Load and validate a scenario file, with line-level diagnostics."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioFormatError(f"{p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        return scenario_from_dict(data)
    except ScenarioFormatError as exc:
        raise ScenarioFormatError(f"{p}: {exc}") from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    """Plain-JSON form of a scenario; inverse of ``scenario_from_dict``."""
    slot_names: dict[str, list[str]] = {}
    by_identity = {id(d): n for n, d in scenario.decompositions.items()}
    for fam_name, family in scenario.families.items():
        names = []
        for slot in family.slots:
            if id(slot) not in by_identity:
                raise ValueError(
                    f"family {fam_name!r} uses a decomposition that is not in the "
                    f"scenario's named decompositions"
                )
            names.append(by_identity[id(slot)])
        slot_names[fam_name] = names

    data: dict[str, Any] = {
        "format": FORMAT,
        "name": scenario.name,
        "dim": scenario.dim,
        "t0": float(scenario.t0),
        "initial": (
            {"state": _encode_vector(scenario.initial.vector)}
            if scenario.initial.vector is not None
            else {"density": _encode_matrix(scenario.initial.matrix)}
        ),
        "dynamics": [
            {"duration": float(duration), "unitary": _encode_matrix(u)}
            for duration, u in scenario.dynamics.segments
        ],
        "decompositions": {
            n: {
                "labels": list(d.labels),
                "projectors": [_encode_matrix(p.matrix) for p in d.projectors],
            }
            for n, d in scenario.decompositions.items()
        },
        "families": {n: {"slots": slot_names[n]} for n in scenario.families},
    }
    if scenario.meta:
        data["meta"] = scenario.meta
    if scenario.tolerances != DEFAULT_TOLERANCES or scenario.consistency_tol is not None:
        block = {
            k: getattr(scenario.tolerances, k)
            for k in scenario.tolerances.__dataclass_fields__
        }
        if scenario.consistency_tol is not None:
            block["consistency"] = scenario.consistency_tol
        data["tolerances"] = block
    return data


def dumps_scenario(scenario: Scenario) -> str:
    """Canonical textual form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(scenario))
