"""Particle pool over articulation hypotheses: prior sampling, learned prior
ingestion with the minimum-weight floor, class posteriors, and systematic
resampling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateWeightsError, EmptyPoolError, InvalidPriorError
from .geometry import fit_bounding_box
from .kinematics import (CLASS_INDEX, CLASSES, JointProposalSet, JointState,
                         JointType, propose_joints, proposal_classes,
                         theta_max_for)
from .world import World, clone_with_joint

log = logging.getLogger(__name__)

DEFAULT_POOL_SIZE = 110
N_PROPOSALS = 19

# Floor applied to prior weights: no entry may fall below 1/16 of the uniform
# mass over the vector's length.
PRIOR_FLOOR_FRACTION = 1.0 / 16.0

# Std of the optional post-resample limit jitter, as a fraction of theta_max.
LIMIT_JITTER_STD = 0.05

# A hypothesis whose limit range has collapsed below this admits no motion
# and counts as a fixed joint in the class posterior.
DEGENERATE_RANGE = 1e-6


def systematic_resample_indices(weights, n_out: int | None = None,
                                rng: np.random.Generator | None = None,
                                offset: float | None = None) -> np.ndarray:
    """Systematic resampling: n_out indices drawn with one uniform offset.

    Produces exactly proportional counts whenever n_out * weight is integral,
    regardless of the offset.
    """
    w = np.asarray(weights, dtype=float)
    if (w < 0).any():
        raise DegenerateWeightsError("negative weights")
    total = w.sum()
    if total <= 0:
        raise DegenerateWeightsError("all weights are zero")
    w = w / total
    n = len(w) if n_out is None else int(n_out)
    if offset is None:
        offset = float(rng.random()) if rng is not None else 0.5
    positions = (np.arange(n) + offset) / n
    cumulative = np.cumsum(w)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right").astype(int)


def floor_weights(weights, floor_fraction: float = PRIOR_FLOOR_FRACTION) -> np.ndarray:
    """Normalize, then raise every entry to at least floor_fraction of uniform.

    Mass is taken proportionally from entries above the floor, iterating until
    the vector both respects the floor and sums to one.
    """
    w = np.asarray(weights, dtype=float)
    if (w < 0).any() or not np.isfinite(w).all():
        raise InvalidPriorError("prior weights must be finite and non-negative")
    if w.sum() <= 0:
        raise InvalidPriorError("prior weights must not be all zero")
    w = w / w.sum()
    floor = floor_fraction / len(w)
    for _ in range(len(w) + 1):
        low = w < floor - 1e-15
        if not low.any():
            break
        w = w.copy()
        w[low] = floor
        free = ~low
        w[free] *= (1.0 - floor * low.sum()) / w[free].sum()
    return w


@dataclass(frozen=True)
class PriorWeights:
    """Per-class or per-proposal prior probabilities, floored on construction."""

    probs: np.ndarray
    per_class: bool

    def __post_init__(self):
        probs = floor_weights(self.probs)
        if len(probs) == len(CLASSES):
            per_class = True
        elif len(probs) == N_PROPOSALS:
            per_class = False
        else:
            raise InvalidPriorError(
                f"prior must have {len(CLASSES)} class or {N_PROPOSALS} proposal "
                f"entries, got {len(probs)}")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "per_class", per_class)

    @staticmethod
    def from_class_dict(mapping: dict) -> "PriorWeights":
        unknown = set(mapping) - set(CLASSES)
        if unknown:
            raise InvalidPriorError(f"unknown class names: {sorted(unknown)}")
        probs = np.array([float(mapping.get(name, 0.0)) for name in CLASSES])
        return PriorWeights(probs, True)

    @staticmethod
    def load(path) -> "PriorWeights":
        doc = json.loads(Path(path).read_text())
        if isinstance(doc, dict) and "proposals" in doc:
            return PriorWeights(np.asarray(doc["proposals"], dtype=float), False)
        if isinstance(doc, dict):
            return PriorWeights.from_class_dict(doc)
        raise InvalidPriorError("prior file must be a JSON object")

    def proposal_probs(self, classes: tuple[str, ...]) -> np.ndarray:
        """Probability of each proposal; class mass splits evenly over members."""
        if not self.per_class:
            return self.probs.copy()
        counts = {name: classes.count(name) for name in CLASSES}
        out = np.array([self.probs[CLASSES.index(c)] / counts[c] for c in classes])
        return out / out.sum()


@dataclass
class HypothesisParticle:
    """One articulation hypothesis paired with its simulatable replica.

    `joint` aliases the replica's target-part joint state, so replica rollouts
    advance the hypothesis position.
    """

    proposal_index: int
    joint: JointState
    replica: World


class ParticlePool:
    """K weighted hypotheses about one part's articulation."""

    def __init__(self, target_part: int, proposal_set: JointProposalSet,
                 particles: list[HypothesisParticle], weights: np.ndarray,
                 rng: np.random.Generator, limit_jitter: bool = False):
        if not particles:
            raise EmptyPoolError("particle pool must not be empty")
        self.target_part = target_part
        self.proposal_set = proposal_set
        self.classes = proposal_classes(proposal_set)
        self.particles = particles
        self.weights = np.asarray(weights, dtype=float)
        self.weights = self.weights / self.weights.sum()
        self.rng = rng
        self.limit_jitter = limit_jitter
        self.last_observed: dict[int, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.particles)

    def particle_class(self, k: int) -> str:
        particle = self.particles[k]
        joint = particle.joint
        if joint.theta_high - joint.theta_low <= DEGENERATE_RANGE:
            return "fixed"
        return self.classes[particle.proposal_index]

    def sample_particle_index(self) -> int:
        return int(self.rng.choice(len(self.particles), p=self.weights))

    def best_particle_index(self) -> int:
        return int(np.argmax(self.weights))


def _copy_particle(particle: HypothesisParticle, target_part: int) -> HypothesisParticle:
    replica = particle.replica.copy()
    return HypothesisParticle(particle.proposal_index,
                              replica.parts[target_part].joint, replica)


def sample_prior(world: World, target_part: int, k: int = DEFAULT_POOL_SIZE,
                 prior: PriorWeights | None = None, seed: int = 0,
                 limit_jitter: bool = False) -> ParticlePool:
    """Draw K hypotheses from the articulation prior and build their replicas.

    Joint choice is uniform over the 19 proposals unless a (floored) prior is
    given; limits draw from Unif[0, theta_max] and Unif[-theta_max, 0]; the
    current position starts at zero; weights start uniform.
    """
    if k < 1:
        raise ValueError("need at least one particle")
    cloud = world.part_cloud(target_part)
    box = fit_bounding_box(cloud)
    proposal_set = propose_joints(box)
    classes = proposal_classes(proposal_set)
    probs = (np.full(N_PROPOSALS, 1.0 / N_PROPOSALS) if prior is None
             else prior.proposal_probs(classes))

    rng = np.random.default_rng(seed)
    choices = rng.choice(N_PROPOSALS, size=k, p=probs)
    highs = rng.uniform(0.0, 1.0, size=k)
    lows = rng.uniform(-1.0, 0.0, size=k)

    particles = []
    for i in range(k):
        prop = proposal_set[int(choices[i])]
        tmax = theta_max_for(prop.spec.kind)
        if prop.spec.kind is JointType.FIXED:
            joint = JointState(prop.spec)
        else:
            joint = JointState(prop.spec, float(lows[i] * tmax),
                               float(highs[i] * tmax), 0.0)
        replica = clone_with_joint(world, target_part, joint)
        particles.append(HypothesisParticle(int(choices[i]),
                                            replica.parts[target_part].joint, replica))
    pool = ParticlePool(target_part, proposal_set, particles,
                        np.full(k, 1.0 / k), rng, limit_jitter)
    pool.last_observed = world.observe()
    return pool


def posterior_by_class(pool: ParticlePool) -> np.ndarray:
    """Particle weight mass grouped by the eight evaluation classes.

    Hypotheses whose limit range has collapsed to nothing admit no motion and
    are counted as fixed regardless of their proposal's nominal type.
    """
    out = np.zeros(len(CLASSES))
    for k in range(len(pool.particles)):
        out[CLASS_INDEX[pool.particle_class(k)]] += pool.weights[k]
    total = out.sum()
    if total <= 0:
        raise DegenerateWeightsError("pool weights sum to zero")
    return out / total


def _jitter_limits(particle: HypothesisParticle, rng: np.random.Generator) -> None:
    joint = particle.joint
    kind = joint.spec.kind
    if kind is JointType.FIXED:
        return
    tmax = theta_max_for(kind)
    std = LIMIT_JITTER_STD * tmax
    low = float(np.clip(joint.theta_low + rng.normal(0.0, std), -tmax, 0.0))
    high = float(np.clip(joint.theta_high + rng.normal(0.0, std), 0.0, tmax))
    # Jitter must never orphan the current position.
    joint.theta_low = min(low, joint.theta_cur)
    joint.theta_high = max(high, joint.theta_cur)


def resample(pool: ParticlePool, weights=None) -> ParticlePool:
    """Systematic resampling into a same-size pool with uniform weights.

    Resampled duplicates get independent replica copies. Raises
    DegenerateWeightsError when every weight is zero; callers are expected to
    fall back to uniform weights in that case.
    """
    w = pool.weights if weights is None else np.asarray(weights, dtype=float)
    indices = systematic_resample_indices(w, len(pool), rng=pool.rng)
    particles = [_copy_particle(pool.particles[i], pool.target_part) for i in indices]
    if pool.limit_jitter:
        for particle in particles:
            _jitter_limits(particle, pool.rng)
    new_pool = ParticlePool(pool.target_part, pool.proposal_set, particles,
                            np.full(len(pool), 1.0 / len(pool)), pool.rng,
                            pool.limit_jitter)
    new_pool.last_observed = pool.last_observed
    return new_pool
