"""Versioned JSON document formats: annotations, solutions, scenes, keyframes.

All numbers are plain 64-bit JSON decimals so files stay hand-editable and
round-trip to identical values (Python emits shortest round-trip reprs). NaN
restitution values are stored as null. Validation errors carry the offending
document path.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .composer import PlacedPair, PredictedEvent, SceneComposition
from .errors import SchemaError
from .observations import BodyObservations, ObservationSet
from .residuals import SingleBodyLayout, UnknownLayout
from .solver import SolutionRecord, SolveFlags

FORMAT_VERSION = 1


def _require(data: dict, key: str, kind, path: str):
    if not isinstance(data, dict):
        raise SchemaError(path, f"expected an object, got {type(data).__name__}")
    if key not in data:
        raise SchemaError(f"{path}.{key}", "missing required field")
    value = data[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"{path}.{key}", f"expected a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"{path}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _vector(data: dict, key: str, length: int, path: str) -> np.ndarray:
    raw = _require(data, key, list, path)
    if len(raw) != length or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
        raise SchemaError(f"{path}.{key}", f"expected {length} numbers")
    return np.array(raw, dtype=float)


def _check_version(data: dict, path: str) -> None:
    version = _require(data, "version", int, path)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}.version", f"unsupported version {version}")


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


def _single_body_slot_names() -> list[str]:
    names = ["b1", "beta_x", "beta_y1"]
    for seg in ("pre", "post"):
        names += [f"b2[{seg}]", f"b3[{seg}]", f"beta_y0[{seg}]"]
    names += [f"b4.{ax}" for ax in "xyz"]
    for seg in ("pre", "post"):
        names += [f"k[{seg}].{ax}" for ax in "xyz"]
    names += [f"q_c.{c}" for c in "wxyz"]
    names += [f"x_c.{ax}" for ax in "xyz"]
    names.append("j")
    return names


# -- annotations ---------------------------------------------------------------


def annotation_to_dict(obs: ObservationSet) -> dict:
    return {
        "version": FORMAT_VERSION,
        "fps": float(obs.fps),
        "bodies": [
            {
                "name": body.name,
                "dims": _floats(body.dims),
                "observations": [
                    {"frame": float(t), "p": _floats(p), "q": _floats(q)}
                    for t, p, q in zip(body.t, body.p, body.q)
                ],
            }
            for body in obs.bodies
        ],
    }


def annotation_from_dict(data: dict, path: str = "annotation") -> ObservationSet:
    _check_version(data, path)
    fps = _require(data, "fps", float, path)
    raw_bodies = _require(data, "bodies", list, path)
    if len(raw_bodies) not in (1, 2):
        raise SchemaError(f"{path}.bodies", f"expected 1 or 2 bodies, got {len(raw_bodies)}")
    bodies = []
    for i, raw in enumerate(raw_bodies):
        bpath = f"{path}.bodies[{i}]"
        name = _require(raw, "name", str, bpath)
        dims = _vector(raw, "dims", 3, bpath)
        raw_obs = _require(raw, "observations", list, bpath)
        t, p, q = [], [], []
        for j, o in enumerate(raw_obs):
            opath = f"{bpath}.observations[{j}]"
            t.append(_require(o, "frame", float, opath))
            p.append(_vector(o, "p", 3, opath))
            q.append(_vector(o, "q", 4, opath))
        if len(t) < 2:
            raise SchemaError(f"{bpath}.observations", "at least two observations required")
        if any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise SchemaError(f"{bpath}.observations", "frames must be strictly increasing")
        try:
            bodies.append(BodyObservations(name=name, dims=dims, t=np.array(t), p=np.array(p), q=np.array(q)))
        except ValueError as exc:
            raise SchemaError(bpath, str(exc)) from exc
    if fps <= 0:
        raise SchemaError(f"{path}.fps", "fps must be positive")
    return ObservationSet(bodies=tuple(bodies), fps=fps)


# -- solutions -----------------------------------------------------------------


def solution_to_dict(record: SolutionRecord) -> dict:
    names = _single_body_slot_names() if record.single_body else UnknownLayout.slot_names()
    c = record.restitution
    doc = {
        "version": FORMAT_VERSION,
        "single_body": record.single_body,
        "fps": float(record.fps),
        "t_c": float(record.t_c),
        "restitution": None if math.isnan(c) else float(c),
        "mass_ratio": None if record.single_body else float(record.mass_ratio),
        "unknowns": {name: float(v) for name, v in zip(names, record.x)},
        "flags": {
            "mass_at_bound": record.flags.mass_at_bound,
            "restitution_out_of_range": record.flags.restitution_out_of_range,
            "non_converged": record.flags.non_converged,
        },
        "residual_norms": {k: float(v) for k, v in record.residual_norms.items()},
        "cost": float(record.cost),
        "observations": annotation_to_dict(record.obs),
    }
    if record.single_body:
        doc["plane"] = {
            "point": _floats(record.plane_point),
            "normal": _floats(record.plane_normal),
        }
    return doc


def solution_from_dict(data: dict, path: str = "solution") -> SolutionRecord:
    _check_version(data, path)
    single = bool(_require(data, "single_body", bool, path))
    names = _single_body_slot_names() if single else UnknownLayout.slot_names()
    size = SingleBodyLayout.SIZE if single else UnknownLayout.SIZE
    unknowns = _require(data, "unknowns", dict, path)
    x = np.empty(size)
    for i, name in enumerate(names):
        if name not in unknowns:
            raise SchemaError(f"{path}.unknowns.{name}", "missing unknown slot")
        x[i] = float(unknowns[name])
    raw_flags = _require(data, "flags", dict, path)
    flags = SolveFlags(
        mass_at_bound=bool(raw_flags.get("mass_at_bound", False)),
        restitution_out_of_range=bool(raw_flags.get("restitution_out_of_range", False)),
        non_converged=bool(raw_flags.get("non_converged", False)),
    )
    restitution = data.get("restitution")
    obs = annotation_from_dict(_require(data, "observations", dict, path), f"{path}.observations")
    plane_point = plane_normal = None
    if single:
        plane = _require(data, "plane", dict, path)
        plane_point = _vector(plane, "point", 3, f"{path}.plane")
        plane_normal = _vector(plane, "normal", 3, f"{path}.plane")
    return SolutionRecord(
        x=x,
        t_c=_require(data, "t_c", float, path),
        restitution=math.nan if restitution is None else float(restitution),
        flags=flags,
        residual_norms={k: float(v) for k, v in _require(data, "residual_norms", dict, path).items()},
        cost=_require(data, "cost", float, path),
        obs=obs,
        single_body=single,
        plane_point=plane_point,
        plane_normal=plane_normal,
    )


# -- scenes --------------------------------------------------------------------


def scene_to_dict(comp: SceneComposition) -> dict:
    return {
        "version": FORMAT_VERSION,
        "duration": int(comp.duration),
        "pairs": [
            {
                "record": solution_to_dict(pair.record),
                "translation": _floats(pair.translation),
                "rotation_about_gravity": float(pair.rotation_about_gravity),
                "time_offset": float(pair.time_offset),
                "reference_mass": float(pair.reference_mass),
            }
            for pair in comp.pairs
        ],
        "predicted_events": [
            {
                "frame": int(ev.frame),
                "bodies": [list(bp) for bp in ev.bodies],
                "x_c": _floats(ev.x_c),
                "jn": _floats(ev.jn),
            }
            for ev in comp.predicted_events
        ],
    }


def scene_from_dict(data: dict, path: str = "scene") -> SceneComposition:
    _check_version(data, path)
    raw_pairs = _require(data, "pairs", list, path)
    pairs = []
    for i, raw in enumerate(raw_pairs):
        ppath = f"{path}.pairs[{i}]"
        record = solution_from_dict(_require(raw, "record", dict, ppath), f"{ppath}.record")
        pairs.append(
            PlacedPair(
                record=record,
                translation=_vector(raw, "translation", 3, ppath),
                rotation_about_gravity=_require(raw, "rotation_about_gravity", float, ppath),
                time_offset=_require(raw, "time_offset", float, ppath),
                reference_mass=_require(raw, "reference_mass", float, ppath),
            )
        )
    events = []
    for i, raw in enumerate(_require(data, "predicted_events", list, path)):
        epath = f"{path}.predicted_events[{i}]"
        bodies = _require(raw, "bodies", list, epath)
        events.append(
            PredictedEvent(
                frame=int(_require(raw, "frame", float, epath)),
                bodies=tuple((int(b[0]), int(b[1])) for b in bodies),
                x_c=_vector(raw, "x_c", 3, epath),
                jn=_vector(raw, "jn", 3, epath),
            )
        )
    return SceneComposition(
        pairs=pairs,
        duration=int(_require(data, "duration", float, path)),
        predicted_events=events,
    )


# -- keyframes -----------------------------------------------------------------


def validate_keyframes(data: dict, path: str = "keyframes") -> dict:
    _check_version(data, path)
    _require(data, "fps", float, path)
    _require(data, "duration", float, path)
    for i, track in enumerate(_require(data, "bodies", list, path)):
        tpath = f"{path}.bodies[{i}]"
        _require(track, "pair", int, tpath)
        _require(track, "body", str, tpath)
        for j, key in enumerate(_require(track, "keys", list, tpath)):
            kpath = f"{tpath}.keys[{j}]"
            _require(key, "frame", float, kpath)
            _vector(key, "p", 3, kpath)
            _vector(key, "q", 4, kpath)
    return data


# -- file helpers ----------------------------------------------------------------


def save_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON: {exc}") from exc
