"""Scene files: deterministic box-surface sampling and bit-exact JSON round trips.

A scene document stores parts (cloud source, mass, movability), their true
joints with limits and current positions, the collision pairs, and free-form
metadata (ground-truth labels, goals). Saving is canonical, so
save(load(save(w))) == save(w) byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidSpecError
from .geometry import MAX_CLOUD_POINTS
from .kinematics import JointSpec, JointState, JointType
from .world import Part, World

SCENE_FORMAT = "artiprobe-scene/1"

_FACE_ORDER = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))


def box_surface_cloud(center, size, n_points: int, seed: int) -> np.ndarray:
    """Uniform samples on the surface of an axis-aligned box, area weighted.

    Deterministic in (center, size, n_points, seed); face point counts use
    largest-remainder allocation so coverage is exactly proportional.
    """
    if not (0 < n_points <= MAX_CLOUD_POINTS):
        raise ValueError(f"n_points must be in (0, {MAX_CLOUD_POINTS}]")
    c = np.asarray(center, dtype=float).reshape(3)
    s = np.asarray(size, dtype=float).reshape(3)
    if (s <= 0).any():
        raise ValueError("box size must be positive")
    areas = np.array([s[1] * s[2], s[1] * s[2], s[0] * s[2],
                      s[0] * s[2], s[0] * s[1], s[0] * s[1]])
    quota = n_points * areas / areas.sum()
    counts = np.floor(quota).astype(int)
    remainder = n_points - counts.sum()
    order = np.argsort(-(quota - counts), kind="stable")
    counts[order[:remainder]] += 1

    rng = np.random.default_rng(seed)
    chunks = []
    for (axis, sign), count in zip(_FACE_ORDER, counts):
        if count == 0:
            continue
        others = [i for i in range(3) if i != axis]
        pts = np.empty((count, 3))
        pts[:, axis] = c[axis] + sign * s[axis] / 2.0
        for o in others:
            pts[:, o] = c[o] + s[o] * (rng.random(count) - 0.5)
        chunks.append(pts)
    return np.concatenate(chunks, axis=0)


def realize_cloud(source: dict) -> np.ndarray:
    kind = source.get("kind")
    if kind == "box_surface":
        return box_surface_cloud(source["center"], source["size"],
                                 source["n_points"], source["seed"])
    if kind == "points":
        return np.asarray(source["points"], dtype=float)
    raise InvalidSpecError(f"unknown cloud source kind {kind!r}")


def _joint_doc(joint: JointState) -> dict:
    if joint.spec.kind is JointType.FIXED:
        return {"kind": "fixed"}
    return {
        "kind": joint.spec.kind.value,
        "anchor": joint.spec.anchor.tolist(),
        "axis": joint.spec.axis.tolist(),
        "limits": [joint.theta_low, joint.theta_high],
        "position": joint.theta_cur,
    }


def _joint_from_doc(doc: dict) -> JointState:
    kind = JointType(doc["kind"])
    if kind is JointType.FIXED:
        return JointState(JointSpec.fixed())
    spec = JointSpec(kind, np.asarray(doc["anchor"], dtype=float),
                     np.asarray(doc["axis"], dtype=float))
    low, high = doc["limits"]
    return JointState(spec, float(low), float(high), float(doc["position"]))


def world_to_doc(world: World) -> dict:
    parts = []
    for pid in sorted(world.parts):
        part = world.parts[pid]
        cloud_doc = part.source if part.source is not None else \
            {"kind": "points", "points": part.rest_cloud.tolist()}
        parts.append({
            "id": part.id,
            "name": part.name,
            "movable": part.movable,
            "mass": part.mass,
            "cloud": cloud_doc,
            "joint": _joint_doc(part.joint),
        })
    return {
        "format": SCENE_FORMAT,
        "rng_seed": world.rng_seed,
        "base_id": world.base_id,
        "collision_pairs": sorted(list(p) for p in world.collision_pairs),
        "parts": parts,
        "meta": world.meta,
    }


def doc_to_world(doc: dict) -> World:
    if doc.get("format") != SCENE_FORMAT:
        raise InvalidSpecError(f"unsupported scene format {doc.get('format')!r}")
    parts = []
    for pdoc in doc["parts"]:
        source = pdoc["cloud"]
        parts.append(Part(
            id=int(pdoc["id"]),
            rest_cloud=realize_cloud(source),
            joint=_joint_from_doc(pdoc["joint"]),
            mass=float(pdoc["mass"]),
            movable=bool(pdoc["movable"]),
            name=pdoc.get("name", ""),
            source=source,
        ))
    return World(parts,
                 collision_pairs=[tuple(p) for p in doc.get("collision_pairs", [])],
                 rng_seed=int(doc.get("rng_seed", 0)),
                 base_id=doc.get("base_id"),
                 meta=doc.get("meta"))


def dumps_scene(world: World) -> str:
    return json.dumps(world_to_doc(world), sort_keys=True, indent=2) + "\n"


def save_scene(world: World, path) -> None:
    Path(path).write_text(dumps_scene(world))


def load_scene(path) -> World:
    return doc_to_world(json.loads(Path(path).read_text()))
