"""Interactive joint-type estimation: act on the real object, score every
hypothesis by simulating the same action on its replica, update the particle
weights, and stop on confidence or budget. Includes both the chamfer and the
cosine observation likelihoods.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import ActionSelectConfig, select_informative_action
from .geometry import chamfer, cloud_centroid
from .hypotheses import (DEFAULT_POOL_SIZE, HypothesisParticle, ParticlePool,
                         PriorWeights, posterior_by_class, resample, sample_prior)
from .kinematics import CLASSES, JointType, point_velocity_direction, theta_max_for
from .world import (ETA, Action, World, _posed, _project_to_cloud, apply_action,
                    apply_noisy_action)

log = logging.getLogger(__name__)

CHAMFER = "chamfer"
COSINE = "cosine"


@dataclass(frozen=True)
class EstimatorConfig:
    n_particles: int = DEFAULT_POOL_SIZE
    confidence_threshold: float = 0.90
    max_interactions: int = 10
    min_interactions: int = 1
    likelihood: str = CHAMFER
    chamfer_epsilon: float = 1e-6
    motion_threshold: float = 1e-4
    noise_sigma: float = 0.0
    limit_jitter: bool = False
    # Limit refitting lets a particle adopt "the stop is right here" or "the
    # range extends farther" when that explains the observation better than
    # its sampled limits; without it, parts resting against a limit starve
    # the correct joint family of survivors.
    limit_refit: bool = True
    action: ActionSelectConfig = field(default_factory=ActionSelectConfig)

    def __post_init__(self):
        if not (0.0 < self.confidence_threshold):
            raise ValueError("confidence threshold must be positive")
        if self.max_interactions < 1:
            raise ValueError("need at least one interaction")
        if self.likelihood not in (CHAMFER, COSINE):
            raise ValueError(f"unknown likelihood {self.likelihood!r}")


@dataclass
class EstimationResult:
    best_class: str
    posterior: np.ndarray
    interactions_used: int
    contact_interrupt: int | None
    trajectory: list[dict]
    pool: ParticlePool

    @property
    def best_particle(self) -> HypothesisParticle:
        return self.pool.particles[self.pool.best_particle_index()]


def chamfer_likelihood(observed, predicted, epsilon: float = 1e-6) -> float:
    """Inverse chamfer score 1 / (dist(observed, predicted) + epsilon)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 1.0 / (chamfer(observed, predicted) + epsilon)


def cosine_likelihood(real_disp, hyp_disp, motion_threshold: float = 1e-4) -> float:
    """Agreement of centroid displacement directions, in [0, 1].

    Both moving: (cos angle + 1) / 2. Neither moving: 1. Exactly one moving:
    0, on the grounds that such a hypothesis cannot be right.
    """
    d = np.asarray(real_disp, dtype=float)
    dh = np.asarray(hyp_disp, dtype=float)
    n1 = np.linalg.norm(d)
    n2 = np.linalg.norm(dh)
    real_moves = n1 > motion_threshold
    hyp_moves = n2 > motion_threshold
    if real_moves and hyp_moves:
        return float((np.dot(d, dh) / (n1 * n2) + 1.0) / 2.0)
    if not real_moves and not hyp_moves:
        return 1.0
    return 0.0


@dataclass
class UpdateDiagnostics:
    likelihoods: np.ndarray
    pre_resample_weights: np.ndarray
    degenerate: bool


def _refit_limits(particle, target: int, action: Action, obs_cloud, pre_theta: float,
                  pre_cloud, outcome, base_w: float, cfg: EstimatorConfig) -> float:
    """Local move over a particle's limits after a mispredicted step.

    Evaluates two alternative explanations of the observation: the joint has
    a stop at the pre-action position, or the range extends beyond the
    particle's sampled limit. Adopts whichever fits best and returns its
    likelihood. Never fires for fixed joints or contact-truncated motion.
    """
    joint = particle.joint
    if joint.spec.kind is JointType.FIXED or outcome.contacts:
        return base_w
    post_theta = joint.theta_cur
    best_w = base_w

    if post_theta != pre_theta:
        w_stop = chamfer_likelihood(obs_cloud, pre_cloud, cfg.chamfer_epsilon)
        if w_stop > best_w:
            moved_up = post_theta > pre_theta
            if moved_up and pre_theta >= 0.0:
                joint.theta_high = pre_theta
            elif not moved_up and pre_theta <= 0.0:
                joint.theta_low = pre_theta
            joint.theta_cur = pre_theta
            best_w = w_stop

    if joint.theta_cur == post_theta:
        # Consider that the limit cut the motion short of the real part's.
        point, _ = _project_to_cloud(np.asarray(action.point), pre_cloud)
        vhat = point_velocity_direction(joint, point)
        raw = ETA * float(action.direction @ vhat)
        tmax = theta_max_for(joint.spec.kind)
        free = float(np.clip(pre_theta + raw, -tmax, tmax))
        if free != post_theta:
            part = particle.replica.parts[target]
            ext_cloud = _posed(part.rest_cloud, joint, free)
            w_ext = chamfer_likelihood(obs_cloud, ext_cloud, cfg.chamfer_epsilon)
            if w_ext > best_w:
                joint.theta_high = max(joint.theta_high, free)
                joint.theta_low = min(joint.theta_low, free)
                joint.theta_cur = free
                best_w = w_ext
    return best_w


def update_posterior(pool: ParticlePool, action: Action,
                     observed: dict[int, np.ndarray], cfg: EstimatorConfig,
                     prev_observed: dict[int, np.ndarray] | None = None) -> UpdateDiagnostics:
    """Bayes update of the pool after an action produced `observed` clouds.

    Every replica receives the same action (committing, so each hypothesis'
    joint position advances with its own dynamics), is scored against the
    target part's observed cloud, and the pool is reweighted and resampled.
    """
    target = pool.target_part
    obs_cloud = observed[target]
    if cfg.likelihood == COSINE:
        if prev_observed is None:
            raise ValueError("cosine likelihood needs the previous observation")
        real_disp = cloud_centroid(obs_cloud) - cloud_centroid(prev_observed[target])

    likelihoods = np.empty(len(pool))
    for k, particle in enumerate(pool.particles):
        pre_theta = particle.joint.theta_cur
        pre_cloud = particle.replica.part_cloud(target)
        outcome = apply_action(particle.replica, target, action,
                               commit=True, strict_point=False)
        predicted = outcome.observed_clouds[target]
        if cfg.likelihood == CHAMFER:
            w = chamfer_likelihood(obs_cloud, predicted, cfg.chamfer_epsilon)
            if cfg.limit_refit:
                w = _refit_limits(particle, target, action, obs_cloud,
                                  pre_theta, pre_cloud, outcome, w, cfg)
            likelihoods[k] = w
        else:
            hyp_disp = cloud_centroid(predicted) - cloud_centroid(pre_cloud)
            likelihoods[k] = cosine_likelihood(real_disp, hyp_disp, cfg.motion_threshold)

    raw = pool.weights * likelihoods
    degenerate = bool(raw.sum() <= 0.0)
    if degenerate:
        # Every hypothesis was ruled out (possible under the cosine scorer);
        # keep the pool alive with a uniform fallback.
        log.warning("degenerate particle weights; falling back to uniform")
        pre = np.full(len(pool), 1.0 / len(pool))
    else:
        pre = raw / raw.sum()
    pool.weights = pre
    pool.last_observed = observed
    new_pool = resample(pool)
    pool.particles = new_pool.particles
    pool.weights = new_pool.weights
    return UpdateDiagnostics(likelihoods, pre, degenerate)


def _posterior_dict(posterior: np.ndarray) -> dict[str, float]:
    return {name: float(posterior[i]) for i, name in enumerate(CLASSES)}


def _trajectory_record(step, action, posterior, diag, contact) -> dict:
    rec = {
        "step": int(step),
        "action": {"point": [float(x) for x in action.point],
                   "direction": [float(x) for x in action.direction]},
        "posterior": _posterior_dict(posterior),
        "contact": None,
        "likelihood": None,
    }
    if diag is not None:
        rec["likelihood"] = {"min": float(diag.likelihoods.min()),
                             "mean": float(diag.likelihoods.mean()),
                             "max": float(diag.likelihoods.max()),
                             "degenerate": diag.degenerate}
    if contact is not None:
        rec["contact"] = {"blocker": int(contact.blocking_part),
                          "theta": float(contact.theta)}
    return rec


def estimate_joint(world: World, target_part: int,
                   cfg: EstimatorConfig | None = None,
                   prior: PriorWeights | None = None, seed: int = 0,
                   log_path=None, step_callback=None) -> EstimationResult:
    """Run the full hypothesize-simulate-act-update loop on one part.

    Stops early once one class holds more than the confidence threshold of
    the posterior mass, or immediately if the part's motion is truncated by
    contact with another movable part (returned as contact_interrupt for a
    dependency-aware caller to handle). Real-world interactions never exceed
    max_interactions; simulated rollouts are not counted.
    """
    cfg = cfg or EstimatorConfig()
    world.part(target_part)
    seeds = np.random.SeedSequence(seed).spawn(cfg.max_interactions + 2)
    noise_rng = np.random.default_rng(seeds[-1])
    pool = sample_prior(world, target_part, cfg.n_particles, prior,
                        seed=seeds[0], limit_jitter=cfg.limit_jitter)
    prev_observed = world.observe()
    trajectory: list[dict] = []
    contact_interrupt: int | None = None
    interactions = 0
    posterior = posterior_by_class(pool)

    sink = open(log_path, "w") if log_path is not None else None
    try:
        for t in range(cfg.max_interactions):
            # A zero predicted deformation means the sampled hypothesis finds
            # every action uninformative; re-sample a few times before
            # settling, so immobile hypotheses cannot starve exploration.
            for attempt_seed in seeds[t + 1].spawn(5):
                action, score = select_informative_action(
                    pool, target_part, cfg.action,
                    seed=int(attempt_seed.generate_state(1)[0]), with_score=True)
                if score > 0.0:
                    break
            outcome = apply_noisy_action(world, target_part, action,
                                         cfg.noise_sigma, rng=noise_rng)
            interactions += 1
            if step_callback is not None:
                step_callback(world, outcome)
            observed = outcome.observed_clouds

            movable_contact = next(
                (c for c in outcome.contacts if world.part(c.blocking_part).movable),
                None)
            if movable_contact is not None:
                contact_interrupt = movable_contact.blocking_part
                record = _trajectory_record(t, action, posterior, None, movable_contact)
                trajectory.append(record)
                if sink:
                    sink.write(json.dumps(record) + "\n")
                break

            diag = update_posterior(pool, action, observed, cfg, prev_observed)
            prev_observed = observed
            posterior = posterior_by_class(pool)
            record = _trajectory_record(t, action, posterior, diag, None)
            trajectory.append(record)
            if sink:
                sink.write(json.dumps(record) + "\n")
            if posterior.max() > cfg.confidence_threshold \
                    and t + 1 >= cfg.min_interactions:
                break
    finally:
        if sink:
            sink.close()

    best_class = CLASSES[int(np.argmax(posterior))]
    return EstimationResult(best_class, posterior, interactions,
                            contact_interrupt, trajectory, pool)
