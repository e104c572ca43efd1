"""Action selection by a nested particle filter over candidate pushes.

One hypothesis is sampled from the pool; candidate actions (cloud point plus
one of six axis directions) are rolled out on its replica, weighted by the
deformation they cause (or by closeness to a goal joint value), resampled,
and position-jittered. Rollouts never mutate the replica.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPoolError
from .geometry import as_cloud
from .hypotheses import HypothesisParticle, ParticlePool, systematic_resample_indices
from .world import Action, apply_action

AXIS_DIRECTIONS = (
    (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
    (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
)


@dataclass(frozen=True)
class ActionSelectConfig:
    n_action_particles: int = 100
    n_updates: int = 3
    position_noise_std: float = 0.02
    directions: tuple = AXIS_DIRECTIONS
    goal_epsilon: float = 1e-6

    def __post_init__(self):
        if self.n_updates < 1:
            raise ValueError("n_updates must be at least 1")
        if self.n_action_particles < 1:
            raise ValueError("need at least one action particle")


@dataclass(frozen=True)
class Desired:
    """Goal for a joint: an explicit target value, or a signed direction
    meaning 'toward that limit of whichever hypothesis is simulated'."""

    kind: str
    value: float

    @staticmethod
    def to_value(theta: float) -> "Desired":
        return Desired("value", float(theta))

    @staticmethod
    def direction(sign: int) -> "Desired":
        if sign not in (1, -1):
            raise ValueError("direction sign must be +1 or -1")
        return Desired("direction", float(sign))

    def target_theta(self, theta_low: float, theta_high: float) -> float:
        if self.kind == "value":
            return self.value
        return theta_high if self.value > 0 else theta_low


@dataclass
class ActionParticle:
    action: Action
    score: float = 0.0


def _run_filter(pool: ParticlePool, target_part: int, score_factory,
                cfg: ActionSelectConfig, seed: int) -> tuple[ActionParticle, HypothesisParticle]:
    if len(pool) == 0:
        raise EmptyPoolError("cannot select an action from an empty pool")
    rng = np.random.default_rng(seed)
    hyp = pool.particles[int(rng.choice(len(pool), p=pool.weights))]
    replica = hyp.replica
    score_fn = score_factory(hyp)

    if pool.last_observed is not None and target_part in pool.last_observed:
        cloud = as_cloud(pool.last_observed[target_part])
    else:
        cloud = replica.part_cloud(target_part)

    n = cfg.n_action_particles
    dirs = np.asarray(cfg.directions, dtype=float)
    points = cloud[rng.integers(0, len(cloud), size=n)]
    dir_idx = rng.integers(0, len(dirs), size=n)
    particles = [ActionParticle(Action(points[i], dirs[dir_idx[i]])) for i in range(n)]

    def evaluate() -> np.ndarray:
        scores = np.empty(n)
        for i, ap in enumerate(particles):
            outcome = apply_action(replica, target_part, ap.action,
                                   commit=False, strict_point=False, observe=False)
            ap.score = score_fn(outcome)
            scores[i] = ap.score
        return scores

    scores = evaluate()
    for _ in range(cfg.n_updates - 1):
        best = particles[int(np.argmax(scores))]
        if scores.sum() > 0:
            idx = systematic_resample_indices(scores, n, rng=rng)
            particles = [ActionParticle(particles[i].action, particles[i].score)
                         for i in idx]
        # Jitter positions and re-project onto the observed surface;
        # directions stay in the discrete set. The elite keeps slot 0
        # untouched so the best score never regresses across rounds.
        offsets = rng.normal(0.0, cfg.position_noise_std, size=(n, 3))
        for i in range(1, n):
            moved = particles[i].action.point + offsets[i]
            nearest = cloud[int(np.argmin(((cloud - moved) ** 2).sum(axis=1)))]
            particles[i] = ActionParticle(Action(nearest, particles[i].action.direction))
        particles[0] = ActionParticle(best.action, best.score)
        scores = evaluate()

    return particles[int(np.argmax(scores))], hyp


def select_informative_action(pool: ParticlePool, target_part: int,
                              cfg: ActionSelectConfig | None = None,
                              seed: int = 0, with_score: bool = False):
    """Action approximately maximizing single-step deformation of the part
    under one hypothesis sampled from the pool.

    With with_score=True also returns the winning action's simulated
    deformation; a zero score tells the caller the sampled hypothesis deems
    every action uninformative.
    """
    cfg = cfg or ActionSelectConfig()

    def factory(_hyp: HypothesisParticle):
        def deformation(outcome) -> float:
            return abs(outcome.delta_theta[target_part])
        return deformation

    best, _hyp = _run_filter(pool, target_part, factory, cfg, seed)
    return (best.action, best.score) if with_score else best.action


def select_goal_action(pool: ParticlePool, target_part: int, desired: Desired,
                       cfg: ActionSelectConfig | None = None,
                       seed: int = 0, with_motion: bool = False):
    """Same filter, but actions are weighted by how close the resulting joint
    value lands to the desired one.

    With with_motion=True also returns the winning action's simulated joint
    displacement on the sampled hypothesis, so callers can detect picks that
    are not expected to move anything.
    """
    cfg = cfg or ActionSelectConfig()

    def factory(hyp: HypothesisParticle):
        target = desired.target_theta(hyp.joint.theta_low, hyp.joint.theta_high)

        def closeness(outcome) -> float:
            return 1.0 / (abs(outcome.new_theta[target_part] - target) + cfg.goal_epsilon)
        return closeness

    best, hyp = _run_filter(pool, target_part, factory, cfg, seed)
    if not with_motion:
        return best.action
    outcome = apply_action(hyp.replica, target_part, best.action,
                           commit=False, strict_point=False, observe=False)
    return best.action, abs(outcome.delta_theta[target_part])
