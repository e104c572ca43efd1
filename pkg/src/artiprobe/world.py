"""Quasi-static articulated-object surrogate engine.

Gravity is identically zero and parts joined by an articulated joint never
collide with each other; blocking is detected between explicitly registered
collision pairs using per-part world-aligned bounding boxes recomputed at
every substep pose. Force on a point converts to joint displacement through
the alignment of the force direction with the point's instantaneous motion
direction; mass is carried for fidelity but does not enter the displacement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PointNotOnPartError, UnknownPartError
from .geometry import (MIN_HALF_EXTENT, as_cloud, bounds_overlap,
                       rotations_about_line, transform_cloud)
from .kinematics import JointState, JointType, forward_transform, point_velocity_direction

# Joint displacement per perfectly aligned interaction (rad or m).
ETA = 0.1

# Each interaction integrates motion in this many equal substeps.
SUBSTEPS = 10

POINT_TOL = 1e-3


@dataclass
class Part:
    """One rigid part: its surface at joint position zero, plus its joint."""

    id: int
    rest_cloud: np.ndarray
    joint: JointState
    mass: float = 1.0
    movable: bool = True
    name: str = ""
    source: dict | None = None

    def __post_init__(self):
        self.rest_cloud = as_cloud(self.rest_cloud)
        if self.mass <= 0:
            raise ValueError("part mass must be positive")


@dataclass(frozen=True)
class Action:
    """A directed push: application point and unit force direction."""

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float).reshape(3)
        direction = np.asarray(self.direction, dtype=float).reshape(3)
        if not np.isfinite(point).all():
            raise ValueError("action point must be finite")
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise ValueError("action direction must be a unit vector")
        object.__setattr__(self, "point", point)
        object.__setattr__(self, "direction", direction)


@dataclass(frozen=True)
class Contact:
    moving_part: int
    blocking_part: int
    theta: float


@dataclass
class StepOutcome:
    """Result of one interaction: displacements, contacts, and the new clouds."""

    part_id: int
    delta_theta: dict[int, float]
    new_theta: dict[int, float]
    contacts: list[Contact] = field(default_factory=list)
    observed_clouds: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def moved(self) -> float:
        return self.delta_theta[self.part_id]


class World:
    """A set of parts plus the collision pairs subject to blocking.

    Worlds are cheap to copy; copies are fully independent (clouds are shared
    read-only, joint states are duplicated).
    """

    def __init__(self, parts, collision_pairs=(), rng_seed: int = 0,
                 base_id: int | None = None, meta: dict | None = None):
        self.parts: dict[int, Part] = {}
        for part in parts:
            if part.id in self.parts:
                raise ValueError(f"duplicate part id {part.id}")
            self.parts[part.id] = part
        pairs = set()
        for a, b in collision_pairs:
            if a == b:
                raise ValueError("a part cannot collide with itself")
            if a not in self.parts or b not in self.parts:
                raise ValueError(f"collision pair ({a}, {b}) references unknown parts")
            if base_id is not None and base_id in (a, b):
                raise ValueError("parts joined to the base by their joint cannot be "
                                 "collision partners of it")
            pairs.add((min(a, b), max(a, b)))
        self.collision_pairs = frozenset(pairs)
        self.rng_seed = rng_seed
        self.base_id = base_id
        self.meta = dict(meta) if meta else {}
        self.interactions = 0
        self._rng: np.random.Generator | None = None
        self._partners: dict[int, tuple[int, ...]] = {}
        for a, b in sorted(pairs):
            self._partners.setdefault(a, ())
            self._partners.setdefault(b, ())
            self._partners[a] = self._partners[a] + (b,)
            self._partners[b] = self._partners[b] + (a,)
        self._cloud_cache: dict[int, tuple[float, np.ndarray]] = {}

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.default_rng(self.rng_seed)
        return self._rng

    def part(self, part_id: int) -> Part:
        try:
            return self.parts[part_id]
        except KeyError:
            raise UnknownPartError(f"no part with id {part_id}") from None

    def partners_of(self, part_id: int) -> tuple[int, ...]:
        return self._partners.get(part_id, ())

    def movable_ids(self) -> list[int]:
        return [pid for pid, p in self.parts.items() if p.movable]

    def part_cloud(self, part_id: int) -> np.ndarray:
        """The part surface posed at its current joint position."""
        part = self.part(part_id)
        cached = self._cloud_cache.get(part_id)
        if cached is not None and cached[0] == part.joint.theta_cur:
            return cached[1]
        cloud = transform_cloud(part.rest_cloud, forward_transform(part.joint))
        self._cloud_cache[part_id] = (part.joint.theta_cur, cloud)
        return cloud

    def observe(self) -> dict[int, np.ndarray]:
        """Current posed cloud of every part."""
        return {pid: self.part_cloud(pid) for pid in self.parts}

    def true_theta(self, part_id: int) -> float:
        return self.part(part_id).joint.theta_cur

    def copy(self) -> "World":
        parts = [Part(p.id, p.rest_cloud, p.joint.copy(), p.mass, p.movable, p.name, p.source)
                 for p in self.parts.values()]
        clone = World(parts, self.collision_pairs, self.rng_seed, self.base_id, self.meta)
        clone.interactions = self.interactions
        return clone


def _clamped_bounds(cloud: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """AABB bounds with the same degenerate clamp fit_bounding_box applies."""
    lo = cloud.min(axis=0)
    hi = cloud.max(axis=0)
    center = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, MIN_HALF_EXTENT)
    return center - half, center + half


def _posed(rest_cloud: np.ndarray, joint: JointState, theta: float) -> np.ndarray:
    return transform_cloud(rest_cloud, forward_transform(joint, theta))


def _posed_bounds_many(rest_cloud: np.ndarray, joint: JointState,
                       thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clamped AABB bounds of the part posed at each theta: two (k, 3) arrays."""
    kind = joint.spec.kind
    if kind is JointType.PRISMATIC:
        lo0 = rest_cloud.min(axis=0)
        hi0 = rest_cloud.max(axis=0)
        offsets = thetas[:, None] * joint.spec.axis
        lo, hi = lo0 + offsets, hi0 + offsets
    elif kind is JointType.REVOLUTE:
        rots, trans = rotations_about_line(joint.spec.axis, joint.spec.anchor, thetas)
        posed = np.einsum("kij,nj->kni", rots, rest_cloud) + trans[:, None, :]
        lo = posed.min(axis=1)
        hi = posed.max(axis=1)
    else:
        lo0 = rest_cloud.min(axis=0)
        hi0 = rest_cloud.max(axis=0)
        lo = np.broadcast_to(lo0, (len(thetas), 3)).copy()
        hi = np.broadcast_to(hi0, (len(thetas), 3)).copy()
    center = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, MIN_HALF_EXTENT)
    return center - half, center + half


def _project_to_cloud(point: np.ndarray, cloud: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = ((cloud - point) ** 2).sum(axis=1)
    idx = int(np.argmin(d2))
    return cloud[idx], float(np.sqrt(d2[idx]))


def apply_action(world: World, part_id: int, action: Action, *,
                 commit: bool = True, strict_point: bool = True,
                 substeps: int = SUBSTEPS, observe: bool = True) -> StepOutcome:
    """Apply one directed push to a part and integrate the joint response.

    The raw displacement is ETA times the alignment of the force with the
    application point's motion direction, clamped to the joint limits. Motion
    is swept in equal substeps; the first substep whose part box intersects a
    collision partner's box truncates motion at the previous substep and
    records a contact. Only the target part moves.

    With commit=False the world is left untouched (pure rollout); with
    commit=True the joint advances and the interaction counter increments.
    observe=False skips building the outcome clouds (cheap score-only rollouts).
    """
    part = world.part(part_id)
    cloud = world.part_cloud(part_id)
    point = np.asarray(action.point, dtype=float)
    nearest, dist = _project_to_cloud(point, cloud)
    if dist > POINT_TOL:
        if strict_point:
            raise PointNotOnPartError(
                f"action point is {dist:.4f} m from part {part_id} (tol {POINT_TOL})")
        point = nearest
    joint = part.joint
    vhat = point_velocity_direction(joint, point)
    raw = ETA * float(action.direction @ vhat)
    cur = joint.theta_cur
    target = joint.clamp(cur + raw)

    contacts: list[Contact] = []
    new_theta = target
    partners = world.partners_of(part_id)
    if partners and target != cur:
        steps = cur + (target - cur) * np.arange(1, substeps + 1) / substeps
        lo, hi = _posed_bounds_many(part.rest_cloud, joint, steps)
        plo = np.empty((len(partners), 3))
        phi = np.empty((len(partners), 3))
        for i, pid in enumerate(partners):
            plo[i], phi[i] = _clamped_bounds(world.part_cloud(pid))
        # overlap[k, p]: posed box k intersects partner box p
        overlap = ((lo[:, None, :] <= phi[None, :, :]).all(axis=2)
                   & (plo[None, :, :] <= hi[:, None, :]).all(axis=2))
        hit_steps = overlap.any(axis=1)
        if hit_steps.any():
            k = int(np.argmax(hit_steps))
            new_theta = cur if k == 0 else float(steps[k - 1])
            hits = sorted(partners[p] for p in np.flatnonzero(overlap[k]))
            contacts = [Contact(part_id, pid, new_theta) for pid in hits]

    delta = {pid: 0.0 for pid in world.parts}
    delta[part_id] = new_theta - cur
    thetas = {pid: p.joint.theta_cur for pid, p in world.parts.items()}
    thetas[part_id] = new_theta

    if commit:
        joint.theta_cur = new_theta
        world._cloud_cache.pop(part_id, None)
        world.interactions += 1
        observed = world.observe() if observe else {}
    elif observe:
        observed = world.observe()
        if new_theta != cur:
            observed = dict(observed)
            observed[part_id] = _posed(part.rest_cloud, joint, new_theta)
    else:
        observed = {}

    return StepOutcome(part_id, delta, thetas, contacts, observed)


def apply_noisy_action(world: World, part_id: int, action: Action, sigma: float, *,
                       rng: np.random.Generator | None = None,
                       commit: bool = True, strict_point: bool = True) -> StepOutcome:
    """Execute an action under uniform actuation noise of half-width sigma.

    The application point is offset by a uniform [-sigma, sigma]^3 draw and
    re-projected onto the part surface; the direction is offset the same way
    and renormalized. sigma=0 reduces exactly to apply_action.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return apply_action(world, part_id, action,
                            commit=commit, strict_point=strict_point)
    gen = rng if rng is not None else world.rng
    cloud = world.part_cloud(part_id)
    point = action.point + gen.uniform(-sigma, sigma, 3)
    point, _ = _project_to_cloud(point, cloud)
    direction = action.direction + gen.uniform(-sigma, sigma, 3)
    norm = np.linalg.norm(direction)
    direction = direction / norm if norm > 1e-12 else action.direction
    noisy = Action(point, direction)
    return apply_action(world, part_id, noisy, commit=commit, strict_point=strict_point)


def clone_with_joint(world: World, part_id: int, hypothesis: JointState) -> World:
    """Independent replica whose target part carries the hypothesis joint.

    The replica's rest cloud is re-anchored so that, posed at the hypothesis'
    current position, it reproduces the part's currently observed cloud: the
    replica imitates the real object at the moment of cloning.
    """
    world.part(part_id)
    observed_now = world.part_cloud(part_id)
    clone = world.copy()
    part = clone.parts[part_id]
    part.rest_cloud = transform_cloud(observed_now, forward_transform(hypothesis).inverse())
    part.joint = hypothesis.copy()
    clone._cloud_cache.clear()
    return clone
