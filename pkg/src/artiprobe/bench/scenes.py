"""Procedural scene generation: single-joint category analogues and the
multi-lock puzzle boxes.

Every scene is a box assembly: a static base plus movable leaves whose true
joints are drawn from the canonical proposal classes. Puzzle boxes place a
hinged door behind chains of sliding bolts and turn-latches whose boxes
geometrically block the next element; generation ends with an omniscient
solvability sweep so an unsolvable scene can never escape the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidSpecError
from ..geometry import BoundingBox, transform_cloud
from ..kinematics import CLASSES, JointSpec, JointState, JointType, forward_transform
from ..scene import box_surface_cloud
from ..world import Part, World, _clamped_bounds, _posed_bounds_many

CLOSED = "closed"
HALF_OPENED = "half_opened"
SETTINGS = (CLOSED, HALF_OPENED)

SINGLE_KINDS = ("door", "box", "drawer", "safe", "panel")
KIND_DEFAULT_CLASS = {"door": "rev_left", "box": "rev_top",
                      "drawer": "pris_x", "safe": "rev_bottom", "panel": "fixed"}
CLASS_KIND = {"rev_left": "door", "rev_right": "door", "rev_top": "box",
              "rev_bottom": "safe", "pris_x": "drawer", "pris_y": "drawer",
              "pris_z": "drawer", "fixed": "panel"}

# +1 means the part opens outward (toward +y) with increasing joint value.
CLASS_OPEN_SIGN = {"rev_left": 1, "rev_right": -1, "rev_top": 1, "rev_bottom": -1,
                   "pris_x": 1, "pris_y": 1, "pris_z": 1}

PUZZLE_LEVELS = ((1, 0), (1, 1), (2, 1), (3, 1), (1, 2), (1, 3))

DOOR_RANGE = 1.25
DOOR_THRESHOLD = math.pi / 3.0

LEAF_POINTS = 200
BASE_POINTS = 96
LOCK_POINTS = 120


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one benchmark scene."""

    kind: str
    setting: str = CLOSED
    true_class: str | None = None
    seed: int = 0
    chain: int = 1
    locks: int = 1
    with_dummies: bool = False

    def __post_init__(self):
        if self.kind not in SINGLE_KINDS + ("puzzle",):
            raise InvalidSpecError(f"unknown scene kind {self.kind!r}")
        if self.setting not in SETTINGS:
            raise InvalidSpecError(f"unknown setting {self.setting!r}")
        if self.kind == "puzzle":
            if (self.chain, self.locks) not in PUZZLE_LEVELS:
                raise InvalidSpecError(
                    f"puzzle level ({self.chain}, {self.locks}) not supported")
        else:
            cls = self.true_class or KIND_DEFAULT_CLASS[self.kind]
            if cls not in CLASSES:
                raise InvalidSpecError(f"unknown joint class {cls!r}")

    @property
    def resolved_class(self) -> str:
        return self.true_class or KIND_DEFAULT_CLASS[self.kind]


def spec_for_class(true_class: str, setting: str = CLOSED, seed: int = 0) -> SceneSpec:
    if true_class not in CLASS_KIND:
        raise InvalidSpecError(f"unknown joint class {true_class!r}")
    return SceneSpec(CLASS_KIND[true_class], setting, true_class, seed)


def puzzle_spec(chain: int, locks: int, seed: int = 0,
                with_dummies: bool = False) -> SceneSpec:
    return SceneSpec("puzzle", CLOSED, None, seed, chain, locks, with_dummies)


def _scene_rng(spec: SceneSpec) -> np.random.Generator:
    cls = spec.resolved_class if spec.kind != "puzzle" else "puzzle"
    key = [spec.seed, SETTINGS.index(spec.setting),
           (CLASSES.index(cls) if cls in CLASSES else 99),
           spec.chain, spec.locks, int(spec.with_dummies)]
    return np.random.default_rng(key)


def _box_part(pid: int, name: str, center, size, n_points: int, cloud_seed: int,
              joint: JointState, mass: float, movable: bool) -> Part:
    center = [float(c) for c in center]
    size = [float(s) for s in size]
    source = {"kind": "box_surface", "center": center, "size": size,
              "n_points": n_points, "seed": cloud_seed}
    return Part(pid, box_surface_cloud(center, size, n_points, cloud_seed),
                joint, mass, movable, name, source)


def _leaf_joint(true_class: str, center, size, magnitude: float,
                setting: str) -> tuple[JointState, int]:
    """True joint for a leaf box, signed so that opening moves toward +y."""
    box = BoundingBox(np.asarray(center), np.eye(3), np.asarray(size) / 2.0)
    if true_class == "fixed":
        return JointState(JointSpec.fixed()), 0
    sign = CLASS_OPEN_SIGN[true_class]
    if true_class.startswith("pris"):
        axis_index = "xyz".index(true_class[-1])
        spec = JointSpec(JointType.PRISMATIC, box.center, np.eye(3)[axis_index])
    else:
        face = {"rev_left": (0, -1), "rev_right": (0, 1),
                "rev_top": (2, 1), "rev_bottom": (2, -1)}[true_class]
        axis = np.eye(3)[2] if true_class in ("rev_left", "rev_right") else np.eye(3)[0]
        spec = JointSpec(JointType.REVOLUTE, box.face_center(*face), axis)
    low, high = (0.0, magnitude) if sign > 0 else (-magnitude, 0.0)
    cur = 0.0 if setting == CLOSED else (low + high) / 2.0
    return JointState(spec, low, high, cur), sign


def _single_joint_scene(spec: SceneSpec) -> World:
    rng = _scene_rng(spec)
    cls = spec.resolved_class
    offset = rng.uniform(-0.05, 0.05, 3)

    if cls.startswith("pris"):
        size = np.array([0.30, 0.26, 0.18]) * rng.uniform(0.9, 1.1, 3)
        magnitude = float(rng.uniform(0.30, 0.40))
    else:
        size = np.array([0.40 * rng.uniform(0.9, 1.1), 0.04,
                         0.50 * rng.uniform(0.9, 1.1)])
        magnitude = float(rng.uniform(0.9, 1.1))
    center = offset + np.array([size[0] / 2.0, size[1] / 2.0, size[2] / 2.0])

    joint, sign = _leaf_joint(cls, center, size, magnitude, spec.setting)
    leaf_seed = int(rng.integers(0, 2**31 - 1))
    base_seed = int(rng.integers(0, 2**31 - 1))
    leaf = _box_part(1, "leaf", center, size, LEAF_POINTS, leaf_seed, joint,
                     mass=1.0, movable=(cls != "fixed"))

    base_center = offset + np.array([size[0] / 2.0, -0.05, size[2] / 2.0])
    base_size = [size[0] + 0.2, 0.04, size[2] + 0.2]
    base = _box_part(0, "base", base_center, base_size, BASE_POINTS, base_seed,
                     JointState(JointSpec.fixed()), mass=5.0, movable=False)

    meta = {
        "scene": {"kind": spec.kind, "setting": spec.setting, "seed": spec.seed,
                  "class": cls},
        "target": 1,
        "labels": {"1": cls},
        "opening_sign": sign,
        "theta_init": float(joint.theta_cur),
        "range": [float(joint.theta_low), float(joint.theta_high)],
    }
    return World([base, leaf], collision_pairs=(), rng_seed=spec.seed,
                 base_id=0, meta=meta)


# --- puzzle boxes -----------------------------------------------------------

_LOCK_Y = (0.07, 0.11)
_DUMMY_Y = (0.13, 0.17)
_Z_BANDS = ((0.08, 0.14), (0.22, 0.28), (0.36, 0.42))


@dataclass
class _LockPlan:
    name: str
    kind: str                 # bolt_x | bolt_z | latch
    x: tuple[float, float]
    z: tuple[float, float]
    travel: float             # magnitude of the true range
    target: float             # clearing joint value (unsigned, canonical frame)
    blocks: str               # "door", the name of the lock it blocks, or "none"
    y: tuple[float, float] = _LOCK_Y


def _plan_locks(chain: int, locks: int, rng: np.random.Generator,
                with_dummies: bool) -> list[_LockPlan]:
    plans: list[_LockPlan] = []
    if chain >= 2:
        j = float(rng.uniform(0.0, 0.02))
        plans.append(_LockPlan("lock1", "bolt_x", (0.28 + j, 0.42 + j),
                               _Z_BANDS[0], 0.18, 0.18, "door"))
        plans.append(_LockPlan("lock2", "bolt_z", (0.48, 0.53),
                               _Z_BANDS[0], 0.12, 0.12, "lock1"))
        if chain >= 3:
            plans.append(_LockPlan("lock3", "bolt_x", (0.46, 0.55),
                                   (0.18, 0.24), 0.12, 0.12, "lock2"))
    else:
        for k in range(locks):
            j = float(rng.uniform(0.0, 0.02))
            use_latch = (k == locks - 1) and bool(rng.integers(0, 2))
            if use_latch:
                # A turn-latch is a mini door: a long bar hinged at the end
                # nearest the door's free edge, swinging horizontally away
                # from the door leaf. The long arm keeps its motion clearly
                # visible to the chamfer update.
                plans.append(_LockPlan(f"lock{k + 1}", "latch", (0.30, 0.58),
                                       _Z_BANDS[k], math.pi / 2.0,
                                       -math.pi / 2.0, "door"))
            else:
                plans.append(_LockPlan(f"lock{k + 1}", "bolt_x",
                                       (0.28 + j, 0.42 + j), _Z_BANDS[k],
                                       0.18, 0.18, "door"))
    if with_dummies:
        # Already-clear bolt, outside every motion path and the door's sweep.
        plans.append(_LockPlan("dummy", "bolt_x", (0.66, 0.80), _Z_BANDS[1],
                               0.15, 0.0, "none", _DUMMY_Y))
    return plans


def _lock_joint(plan: _LockPlan, center: np.ndarray, mirror: bool) -> JointState:
    if plan.kind == "bolt_x":
        spec = JointSpec(JointType.PRISMATIC, center, np.eye(3)[0])
        low, high = (-plan.travel, 0.0) if mirror else (0.0, plan.travel)
    elif plan.kind == "bolt_z":
        spec = JointSpec(JointType.PRISMATIC, center, np.eye(3)[2])
        low, high = 0.0, plan.travel
    elif plan.kind == "latch":
        # Hinged at the vertical edge nearest the door's free edge; the
        # opening swing carries the bar away from the door leaf, which is the
        # negative rotation sense in the canonical frame.
        sign = -1 if mirror else 1
        anchor = center.copy()
        anchor[0] = center[0] + sign * (plan.x[1] - plan.x[0]) / 2.0
        spec = JointSpec(JointType.REVOLUTE, anchor, np.eye(3)[2])
        low, high = (0.0, plan.travel) if mirror else (-plan.travel, 0.0)
    else:
        raise InvalidSpecError(f"unknown lock kind {plan.kind}")
    return JointState(spec, low, high, 0.0)


def _puzzle_scene(spec: SceneSpec) -> World:
    rng = _scene_rng(spec)
    mirror = bool(rng.integers(0, 2))
    width = float(rng.uniform(0.38, 0.42))
    height = float(rng.uniform(0.48, 0.52))
    plans = _plan_locks(spec.chain, max(spec.locks, 0), rng, spec.with_dummies)

    def mx(iv: tuple[float, float]) -> tuple[float, float]:
        return (-iv[1], -iv[0]) if mirror else iv

    parts: list[Part] = []
    labels: dict[str, str] = {}
    pairs: list[tuple[int, int]] = []
    solution: list[list] = []

    door_x = mx((0.0, width))
    door_center = [(door_x[0] + door_x[1]) / 2.0, 0.02, height / 2.0]
    door_size = [width, 0.04, height]
    hinge_x = 0.0  # hinge at x=0 in both orientations
    anchor = np.array([hinge_x, 0.02, height / 2.0])
    axis = np.eye(3)[2]
    door_sign = -1 if mirror else 1
    low, high = (-DOOR_RANGE, 0.0) if mirror else (0.0, DOOR_RANGE)
    door_joint = JointState(JointSpec(JointType.REVOLUTE, anchor, axis), low, high, 0.0)
    door_seed = int(rng.integers(0, 2**31 - 1))
    door = _box_part(1, "door", door_center, door_size, LEAF_POINTS, door_seed,
                     door_joint, mass=2.0, movable=True)
    parts.append(door)
    labels["1"] = "rev_right" if mirror else "rev_left"

    base_center = [door_center[0], -0.05, height / 2.0]
    base = _box_part(0, "base", base_center, [width + 0.2, 0.04, height + 0.2],
                     BASE_POINTS, int(rng.integers(0, 2**31 - 1)),
                     JointState(JointSpec.fixed()), mass=5.0, movable=False)
    parts.append(base)

    name_to_pid = {"door": 1}
    lock_infos = []
    for i, plan in enumerate(plans):
        pid = 2 + i
        name_to_pid[plan.name] = pid
        x = mx(plan.x)
        center = np.array([(x[0] + x[1]) / 2.0, (plan.y[0] + plan.y[1]) / 2.0,
                           (plan.z[0] + plan.z[1]) / 2.0])
        size = [x[1] - x[0], plan.y[1] - plan.y[0], plan.z[1] - plan.z[0]]
        joint = _lock_joint(plan, center, mirror)
        part = _box_part(pid, plan.name, center, size, LOCK_POINTS,
                         int(rng.integers(0, 2**31 - 1)), joint,
                         mass=0.5, movable=True)
        parts.append(part)
        if plan.kind == "bolt_x":
            labels[str(pid)] = "pris_x"
        elif plan.kind == "bolt_z":
            labels[str(pid)] = "pris_z"
        else:
            labels[str(pid)] = "rev_left" if mirror else "rev_right"
        pairs.append((1, pid))
        if plan.blocks not in ("door", "none"):
            pairs.append((name_to_pid[plan.blocks], pid))
        target = -plan.target if (mirror and plan.kind != "bolt_z") else plan.target
        lock_infos.append((plan, pid, target))

    # Unlock deepest dependency first.
    for plan, pid, target in reversed(lock_infos):
        if plan.blocks != "none":
            solution.append([pid, float(target)])
    blocked_by = {str(name_to_pid[p.blocks]): name_to_pid[p.name]
                  for p in plans if p.blocks not in ("door", "none")}

    meta = {
        "scene": {"kind": "puzzle", "seed": spec.seed, "chain": spec.chain,
                  "locks": spec.locks, "with_dummies": spec.with_dummies,
                  "mirrored": mirror},
        "target": 1,
        "labels": labels,
        "goal": {"part": 1, "threshold": DOOR_THRESHOLD, "direction": door_sign},
        "opening_sign": door_sign,
        "theta_init": 0.0,
        "range": [float(low), float(high)],
        "solution": solution,
        "blocked_by": blocked_by,
        "dummies": [name_to_pid[p.name] for p in plans if p.blocks == "none"],
    }
    world = World(parts, collision_pairs=pairs, rng_seed=spec.seed,
                  base_id=0, meta=meta)
    verify_solvable(world)
    return world


def generate_scene(spec: SceneSpec) -> World:
    """Deterministic world from a scene spec; same spec, same scene."""
    if spec.kind == "puzzle":
        return _puzzle_scene(spec)
    return _single_joint_scene(spec)


# --- omniscient generation-time checks --------------------------------------

def sweep_first_block(world: World, part_id: int, target_theta: float,
                      samples: int = 200) -> tuple[float, int | None]:
    """March a part's true joint toward a target; stop at the first pose whose
    box overlaps a collision partner. Returns (reached theta, blocker id)."""
    part = world.part(part_id)
    joint = part.joint
    cur = joint.theta_cur
    if target_theta == cur:
        return cur, None
    partners = world.partners_of(part_id)
    thetas = np.linspace(cur, target_theta, samples + 1)[1:]
    if partners:
        lo, hi = _posed_bounds_many(part.rest_cloud, joint, thetas)
        plo = np.array([_clamped_bounds(world.part_cloud(p))[0] for p in partners])
        phi = np.array([_clamped_bounds(world.part_cloud(p))[1] for p in partners])
        overlap = ((lo[:, None, :] <= phi[None, :, :]).all(axis=2)
                   & (plo[None, :, :] <= hi[:, None, :]).all(axis=2))
        hit_steps = overlap.any(axis=1)
        if hit_steps.any():
            k = int(np.argmax(hit_steps))
            blocker = partners[int(np.flatnonzero(overlap[k])[0])]
            prev = cur if k == 0 else float(thetas[k - 1])
            return prev, blocker
    return float(target_theta), None


def verify_solvable(world: World, margin: float = 0.05) -> None:
    """Assert the scripted dependency-order solution opens the door.

    Checks, on a copy with true joints: the door is initially blocked (when
    locks exist), every chained lock is blocked by exactly its designed
    blocker until that blocker clears, every scripted move then completes
    without contact, and the door finally sweeps past the threshold plus
    margin.
    """
    w = world.copy()
    goal = w.meta["goal"]
    door = goal["part"]
    sign = goal["direction"]
    threshold = goal["threshold"]
    door_target = sign * (threshold + margin)
    solution = w.meta.get("solution", [])
    blocked_by = {int(k): v for k, v in w.meta.get("blocked_by", {}).items()}

    if solution:
        reached, blocker = sweep_first_block(w, door, door_target)
        if blocker is None:
            raise InvalidSpecError("puzzle door is not blocked by any lock")
        if abs(reached) >= threshold:
            raise InvalidSpecError("puzzle door opens past threshold while locked")
        fresh = world.copy()
        for pid, target in solution:
            _, blk = sweep_first_block(fresh, pid, target)
            expected = blocked_by.get(pid)
            if blk != expected:
                raise InvalidSpecError(
                    f"part {pid}: expected initial blocker {expected}, got {blk}")

    for pid, target in solution:
        reached, blocker = sweep_first_block(w, pid, target)
        if blocker is not None:
            raise InvalidSpecError(
                f"scripted unlock of part {pid} is blocked by part {blocker}")
        w.parts[pid].joint.theta_cur = float(target)
        w._cloud_cache.pop(pid, None)

    reached, blocker = sweep_first_block(w, door, door_target)
    if blocker is not None or abs(reached) < threshold + margin / 2.0:
        raise InvalidSpecError(
            f"door cannot reach threshold after unlocking (stopped at {reached}, "
            f"blocker {blocker})")
