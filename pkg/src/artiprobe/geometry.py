"""Point-cloud primitives: rigid transforms, bounding boxes, chamfer distance.

Clouds are float64 arrays of shape (n, 3) in world-frame meters. Everything
here is a pure function over immutable values; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloudError

# Degenerate boxes (flat parts, single points) are clamped to this half extent
# so joint proposals on them stay well defined.
MIN_HALF_EXTENT = 1e-6

# Containment checks inflate the box by this much to absorb rounding.
BOX_INFLATION = 1e-9

# Per-part clouds are capped; samplers must respect this.
MAX_CLOUD_POINTS = 2048

ORTHONORMAL_TOL = 1e-9


def as_cloud(points) -> np.ndarray:
    """Coerce input to a non-empty (n, 3) float64 array, validating finiteness."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise EmptyCloudError(f"expected a non-empty (n, 3) cloud, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise EmptyCloudError("cloud contains non-finite coordinates")
    return arr


def _check_rotation(rot: np.ndarray) -> None:
    if rot.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {rot.shape}")
    if not np.allclose(rot.T @ rot, np.eye(3), atol=ORTHONORMAL_TOL):
        raise ValueError("rotation is not orthonormal within 1e-9")
    if not np.isclose(np.linalg.det(rot), 1.0, atol=ORTHONORMAL_TOL):
        raise ValueError("rotation determinant is not +1")


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion x -> R x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        tra = np.asarray(self.translation, dtype=float).reshape(3)
        _check_rotation(rot)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tra)

    @staticmethod
    def identity() -> "RigidTransform":
        return _trusted(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(t) -> "RigidTransform":
        return _trusted(np.eye(3), np.asarray(t, dtype=float).reshape(3))

    @staticmethod
    def rotation_about_line(axis, anchor, angle: float) -> "RigidTransform":
        """Rotation by `angle` radians about the line through `anchor` along `axis`."""
        rot = _rodrigues(axis, angle)
        a = np.asarray(anchor, dtype=float)
        return _trusted(rot, a - rot @ a)

    def apply(self, cloud: np.ndarray) -> np.ndarray:
        pts = np.asarray(cloud, dtype=float)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Returns the transform equivalent to applying `other` first, then self."""
        return _trusted(self.rotation @ other.rotation,
                        self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rot_inv = np.ascontiguousarray(self.rotation.T)
        return _trusted(rot_inv, -rot_inv @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)


def _trusted(rotation: np.ndarray, translation: np.ndarray) -> RigidTransform:
    """Construct without re-validating; for internally produced matrices only."""
    t = object.__new__(RigidTransform)
    object.__setattr__(t, "rotation", rotation)
    object.__setattr__(t, "translation", translation)
    return t


def _rodrigues(axis, angle: float) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(k)
    if norm == 0:
        raise ValueError("rotation axis must be non-zero")
    k = k / norm
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return (np.eye(3) * np.cos(angle) + np.sin(angle) * kx
            + (1.0 - np.cos(angle)) * np.outer(k, k))


def rotations_about_line(axis, anchor, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched rotations about one line: (k, 3, 3) matrices and (k, 3) offsets."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    a = np.asarray(anchor, dtype=float)
    angles = np.asarray(angles, dtype=float)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    cos = np.cos(angles)[:, None, None]
    sin = np.sin(angles)[:, None, None]
    rots = cos * np.eye(3) + sin * kx + (1.0 - cos) * np.outer(k, k)
    trans = a - np.einsum("kij,j->ki", rots, a)
    return rots, trans


@dataclass(frozen=True)
class BoundingBox:
    """Box given by center, orthonormal axis rows, and positive half extents.

    Boxes produced by `fit_bounding_box` are world-aligned (axes == identity);
    the overlap test below relies on that.
    """

    center: np.ndarray
    axes: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3)
        axes = np.asarray(self.axes, dtype=float)
        he = np.asarray(self.half_extents, dtype=float).reshape(3)
        if axes.shape != (3, 3) or not np.allclose(axes @ axes.T, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValueError("box axes must be orthonormal within 1e-9")
        if not (he > 0).all():
            raise ValueError("half extents must be strictly positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "half_extents", he)

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_extents

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_extents

    def contains(self, cloud: np.ndarray) -> bool:
        pts = as_cloud(cloud)
        local = (pts - self.center) @ self.axes.T
        return bool((np.abs(local) <= self.half_extents + BOX_INFLATION).all())

    def face_center(self, axis_index: int, sign: int) -> np.ndarray:
        return self.center + sign * self.half_extents[axis_index] * self.axes[axis_index]


def fit_bounding_box(cloud) -> BoundingBox:
    """Tight world-aligned box of a cloud; degenerate extents clamped to 1e-6."""
    pts = as_cloud(cloud)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    half = np.maximum((hi - lo) / 2.0, MIN_HALF_EXTENT)
    return BoundingBox((lo + hi) / 2.0, np.eye(3), half)


def boxes_overlap(a: BoundingBox, b: BoundingBox) -> bool:
    """Interval-overlap test for world-aligned boxes (touching counts)."""
    return bool((a.lo <= b.hi).all() and (b.lo <= a.hi).all())


def aabb_bounds(cloud: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Raw (lo, hi) bounds without the degenerate clamp; used on hot paths."""
    return cloud.min(axis=0), cloud.max(axis=0)


def bounds_overlap(lo_a, hi_a, lo_b, hi_b) -> bool:
    return bool((lo_a <= hi_b).all() and (lo_b <= hi_a).all())


def chamfer(o1, o2) -> float:
    """One-directional chamfer: mean over o1 of squared distance to nearest o2 point.

    Asymmetric by definition; callers wanting symmetry must average both
    directions themselves.
    """
    a = as_cloud(o1)
    b = as_cloud(o2)
    dists, _ = cKDTree(b).query(a, k=1)
    return float(np.mean(dists * dists))


def transform_cloud(cloud, transform: RigidTransform) -> np.ndarray:
    """Map every point x -> R x + t, preserving count and order."""
    return transform.apply(as_cloud(cloud))


def cloud_centroid(cloud) -> np.ndarray:
    return as_cloud(cloud).mean(axis=0)
