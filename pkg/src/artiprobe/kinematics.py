"""Joint models: proposal generation from bounding boxes, the eight-way
evaluation labels, forward kinematics, and point velocity directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import UnknownProposalError
from .geometry import BoundingBox, RigidTransform

AXIS_NAMES = ("x", "y", "z")

# Default limit magnitudes for the uniform limit priors, per joint kind.
THETA_MAX_REVOLUTE = math.pi / 2.0   # rad, covers doors opening 90 degrees
THETA_MAX_PRISMATIC = 0.5            # m, drawer travel at benchmark scale

# The eight evaluation classes, in canonical order. Argmax ties break toward
# the lowest index here.
CLASSES = ("rev_right", "rev_left", "rev_top", "rev_bottom",
           "pris_x", "pris_y", "pris_z", "fixed")
CLASS_INDEX = {name: i for i, name in enumerate(CLASSES)}

# Face name -> (axis index, sign). "+x" is the right face, "+z" the top face.
FACES = ("+x", "-x", "+y", "-y", "+z", "-z")
_FACE_PARAMS = {"+x": (0, 1), "-x": (0, -1), "+y": (1, 1), "-y": (1, -1),
                "+z": (2, 1), "-z": (2, -1)}
_NAMED_FACE_CLASS = {"+x": "rev_right", "-x": "rev_left",
                     "+z": "rev_top", "-z": "rev_bottom"}
# Tie preference when several named faces are equally near an anchor.
_TIE_ORDER = ("rev_left", "rev_bottom", "rev_right", "rev_top")

PROPOSAL_MATCH_TOL = 1e-6


class JointType(Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


@dataclass(frozen=True)
class JointSpec:
    """Joint kind plus axis placement. Anchor and axis are ignored for FIXED."""

    kind: JointType
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float).reshape(3)
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if self.kind is not JointType.FIXED:
            if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
                raise ValueError(f"{self.kind.value} joint axis must be unit length")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "axis", axis)

    @staticmethod
    def fixed() -> "JointSpec":
        return JointSpec(JointType.FIXED)


@dataclass
class JointState:
    """A joint with limits and a current position.

    Limits straddle zero (the pose the state was defined in); FIXED joints
    pin everything to zero.
    """

    spec: JointSpec
    theta_low: float = 0.0
    theta_high: float = 0.0
    theta_cur: float = 0.0

    def __post_init__(self):
        if self.spec.kind is JointType.FIXED:
            if self.theta_low != 0.0 or self.theta_high != 0.0 or self.theta_cur != 0.0:
                raise ValueError("fixed joints admit no motion; limits must be zero")
        if self.theta_low > 0.0 or self.theta_high < 0.0:
            raise ValueError("limits must satisfy theta_low <= 0 <= theta_high")
        if not (self.theta_low <= self.theta_cur <= self.theta_high):
            raise ValueError("theta_cur must lie within [theta_low, theta_high]")

    def copy(self) -> "JointState":
        return JointState(self.spec, self.theta_low, self.theta_high, self.theta_cur)

    def clamp(self, theta: float) -> float:
        return min(max(theta, self.theta_low), self.theta_high)


def forward_transform(state: JointState, theta: float | None = None) -> RigidTransform:
    """Rigid transform moving the part from its zero pose to joint position theta.

    Defaults to the state's current position.
    """
    if theta is None:
        theta = state.theta_cur
    kind = state.spec.kind
    if kind is JointType.FIXED or theta == 0.0:
        return RigidTransform.identity()
    if kind is JointType.PRISMATIC:
        return RigidTransform.from_translation(theta * state.spec.axis)
    return RigidTransform.rotation_about_line(state.spec.axis, state.spec.anchor, theta)


def point_velocity_direction(state: JointState, point) -> np.ndarray:
    """Unit direction a surface point moves under positive unit joint velocity.

    Returns the zero vector for FIXED joints and for points on a revolute axis.
    """
    kind = state.spec.kind
    if kind is JointType.FIXED:
        return np.zeros(3)
    if kind is JointType.PRISMATIC:
        return state.spec.axis.copy()
    arm = np.asarray(point, dtype=float) - state.spec.anchor
    vel = np.cross(state.spec.axis, arm)
    norm = np.linalg.norm(vel)
    if norm < 1e-9:
        return np.zeros(3)
    return vel / norm


@dataclass(frozen=True)
class JointProposal:
    """One candidate joint plus the provenance used for classification."""

    spec: JointSpec
    anchor_face: str | None   # face name for revolute anchors, None otherwise
    axis_index: int | None    # 0/1/2 for revolute and prismatic, None for fixed


@dataclass(frozen=True)
class JointProposalSet:
    """The 19 candidate joints derived from one part bounding box.

    Ordering is stable: revolutes grouped by axis (x, y, z), each axis listing
    its own +face first (the merged representative of the two collinear face
    anchors) followed by the four parallel faces in +x,-x,+y,-y,+z,-z order;
    then prismatic x, y, z; then fixed.
    """

    box: BoundingBox
    proposals: tuple[JointProposal, ...]

    def __len__(self) -> int:
        return len(self.proposals)

    def __getitem__(self, i: int) -> JointProposal:
        return self.proposals[i]


def propose_joints(box: BoundingBox) -> JointProposalSet:
    """Generate the 19 joint proposals (15 revolute, 3 prismatic, 1 fixed)."""
    proposals: list[JointProposal] = []
    for axis_index, axis_name in enumerate(AXIS_NAMES):
        axis = box.axes[axis_index]
        keep = [f"+{axis_name}"] + [f for f in FACES if _FACE_PARAMS[f][0] != axis_index]
        for face in keep:
            fa, sign = _FACE_PARAMS[face]
            anchor = box.face_center(fa, sign)
            spec = JointSpec(JointType.REVOLUTE, anchor, axis)
            proposals.append(JointProposal(spec, face, axis_index))
    for axis_index in range(3):
        spec = JointSpec(JointType.PRISMATIC, box.center.copy(), box.axes[axis_index])
        proposals.append(JointProposal(spec, None, axis_index))
    proposals.append(JointProposal(JointSpec.fixed(), None, None))
    return JointProposalSet(box, tuple(proposals))


def match_proposal(spec: JointSpec, proposal_set: JointProposalSet,
                   tol: float = PROPOSAL_MATCH_TOL) -> int:
    """Index of the proposal matching `spec` within `tol`, else UnknownProposalError."""
    for i, prop in enumerate(proposal_set.proposals):
        cand = prop.spec
        if cand.kind is not spec.kind:
            continue
        if spec.kind is JointType.FIXED:
            return i
        if (np.abs(cand.axis - spec.axis) <= tol).all() and \
           (np.abs(cand.anchor - spec.anchor) <= tol).all():
            return i
    raise UnknownProposalError(f"{spec.kind.value} joint matches no proposal of this box")


def classify_face(face: str | None, anchor: np.ndarray, box: BoundingBox) -> str:
    """Map a revolute anchor onto one of the four named hinge classes.

    Anchors on the +/-x and +/-z faces name their class directly; anything
    else (front/back faces) goes to the nearest named face center, with ties
    preferring left, then bottom.
    """
    if face in _NAMED_FACE_CLASS:
        return _NAMED_FACE_CLASS[face]
    dists = {}
    for named, cls in _NAMED_FACE_CLASS.items():
        fa, sign = _FACE_PARAMS[named]
        dists[cls] = float(np.linalg.norm(anchor - box.face_center(fa, sign)))
    best = min(dists.values())
    candidates = {cls for cls, d in dists.items() if abs(d - best) <= 1e-12}
    for cls in _TIE_ORDER:
        if cls in candidates:
            return cls
    raise AssertionError("unreachable")


def classify_proposal(spec: JointSpec, box: BoundingBox) -> str:
    """Eight-way evaluation label of a joint spec drawn from the box's proposals."""
    proposal_set = propose_joints(box)
    idx = match_proposal(spec, proposal_set)
    return classify_index(proposal_set, idx)


def classify_index(proposal_set: JointProposalSet, index: int) -> str:
    prop = proposal_set.proposals[index]
    kind = prop.spec.kind
    if kind is JointType.FIXED:
        return "fixed"
    if kind is JointType.PRISMATIC:
        return f"pris_{AXIS_NAMES[prop.axis_index]}"
    return classify_face(prop.anchor_face, prop.spec.anchor, proposal_set.box)


def proposal_classes(proposal_set: JointProposalSet) -> tuple[str, ...]:
    """Evaluation label of every proposal, aligned with proposal order."""
    return tuple(classify_index(proposal_set, i) for i in range(len(proposal_set)))


def theta_max_for(kind: JointType) -> float:
    if kind is JointType.REVOLUTE:
        return THETA_MAX_REVOLUTE
    if kind is JointType.PRISMATIC:
        return THETA_MAX_PRISMATIC
    return 0.0
