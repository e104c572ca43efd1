"""Reusable episode and suite runners behind the experiment harness."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..actions import Desired, select_goal_action
from ..estimator import EstimatorConfig, estimate_joint
from ..hypotheses import PriorWeights
from ..kinematics import CLASSES
from ..puzzle import PuzzleConfig, proportion_opened, solve_puzzle
from ..world import apply_action, apply_noisy_action
from .affordance import eval_affordance, generate_probes
from .baselines import run_baseline
from .scenes import CLOSED, SceneSpec, generate_scene, puzzle_spec, spec_for_class

MOVABLE_CLASSES = tuple(c for c in CLASSES if c != "fixed")


def _episode_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def run_estimation_episode(true_class: str, setting: str, seed: int,
                           cfg: EstimatorConfig,
                           prior: PriorWeights | None = None) -> dict:
    world = generate_scene(spec_for_class(true_class, setting, seed))
    target = world.meta["target"]
    result = estimate_joint(world, target, cfg, prior=prior,
                            seed=_episode_seed(seed, 1))
    return {
        "experiment": "joint_estimation",
        "class": true_class,
        "setting": setting,
        "seed": seed,
        "sigma": cfg.noise_sigma,
        "likelihood": cfg.likelihood,
        "predicted": result.best_class,
        "correct": result.best_class == true_class,
        "interactions": result.interactions_used,
        "confidence": float(result.posterior.max()),
    }


def run_estimation_suite(classes=CLASSES, settings=("closed", "half_opened"),
                         seeds=range(10), cfg: EstimatorConfig | None = None,
                         prior: PriorWeights | None = None) -> list[dict]:
    cfg = cfg or EstimatorConfig()
    return [run_estimation_episode(cls, setting, seed, cfg, prior)
            for setting in settings for cls in classes for seed in seeds]


def accuracy(records: list[dict]) -> float:
    if not records:
        return float("nan")
    return sum(r["correct"] for r in records) / len(records)


def run_manipulation_episode(true_class: str, seed: int, cfg: EstimatorConfig,
                             total_interactions: int = 15) -> dict:
    """Estimate for up to cfg.max_interactions, then spend the remaining
    budget opening the part; reports the max proportion opened."""
    world = generate_scene(spec_for_class(true_class, CLOSED, seed))
    target = world.meta["target"]
    sign = world.meta["opening_sign"]
    low, high = world.meta["range"]
    magnitude = high - low
    snapshots = [{target: sign * world.true_theta(target)}]

    def record_step(w, _outcome):
        snapshots.append({target: sign * w.true_theta(target)})

    result = estimate_joint(world, target, cfg, seed=_episode_seed(seed, 2),
                            step_callback=record_step)
    desired = Desired.direction(sign)
    noise_rng = np.random.default_rng(_episode_seed(seed, 3))
    step = 0
    while world.interactions < total_interactions:
        for attempt in range(5):
            action, motion = select_goal_action(
                result.pool, target, desired, cfg.action,
                seed=_episode_seed(seed, 4, step, attempt), with_motion=True)
            if motion > 0.0:
                break
        apply_noisy_action(world, target, action, cfg.noise_sigma, rng=noise_rng)
        for particle in result.pool.particles:
            apply_action(particle.replica, target, action,
                         commit=True, strict_point=False)
        snapshots.append({target: sign * world.true_theta(target)})
        step += 1

    r = proportion_opened(snapshots, target, 0.0, magnitude)
    return {
        "experiment": "manipulation",
        "class": true_class,
        "seed": seed,
        "predicted": result.best_class,
        "estimation_interactions": result.interactions_used,
        "total_interactions": world.interactions,
        "proportion_opened": r,
    }


def run_manipulation_suite(classes=MOVABLE_CLASSES, seeds=range(10),
                           cfg: EstimatorConfig | None = None,
                           total_interactions: int = 15) -> list[dict]:
    cfg = cfg or EstimatorConfig()
    return [run_manipulation_episode(cls, seed, cfg, total_interactions)
            for cls in classes for seed in seeds]


def mean_proportion_opened(records: list[dict]) -> float:
    return float(np.mean([r["proportion_opened"] for r in records]))


def run_affordance_episode(true_class: str, seed: int, cfg: EstimatorConfig,
                           n_probes: int = 200) -> dict:
    world = generate_scene(spec_for_class(true_class, CLOSED, seed))
    target = world.meta["target"]
    probes = generate_probes(world, target, n=n_probes,
                             seed=_episode_seed(seed, 5))
    est_world = world.copy()
    result = estimate_joint(est_world, target, cfg, seed=_episode_seed(seed, 6))
    acc, l1 = eval_affordance(world, result, probes, target)
    return {
        "experiment": "affordance",
        "class": true_class,
        "seed": seed,
        "predicted": result.best_class,
        "accuracy": acc,
        "l1_error": l1,
        "n_probes": len(probes),
    }


def run_affordance_suite(classes=MOVABLE_CLASSES, seeds=range(3),
                         cfg: EstimatorConfig | None = None,
                         n_probes: int = 200) -> list[dict]:
    # Affordance wants refined limit estimates, so the default protocol runs
    # the full interaction budget instead of stopping at class confidence.
    cfg = cfg or EstimatorConfig(confidence_threshold=1.1)
    return [run_affordance_episode(cls, seed, cfg, n_probes)
            for cls in classes for seed in seeds]


def run_puzzle_episode(chain: int, locks: int, seed: int, method: str = "ours",
                       budget: int = 100, cfg: EstimatorConfig | None = None,
                       with_dummies: bool = False) -> dict:
    # A short minimum estimation phase keeps joint-limit estimates honest
    # before the solver commits to an unblocking direction.
    cfg = cfg or EstimatorConfig(min_interactions=3)
    world = generate_scene(puzzle_spec(chain, locks, seed, with_dummies))
    if method == "ours":
        result = solve_puzzle(world, PuzzleConfig(max_interactions=budget),
                              estimator_cfg=cfg, seed=_episode_seed(seed, 7))
    else:
        result = run_baseline(world, method, budget, seed=_episode_seed(seed, 8))
    return {
        "experiment": "puzzle",
        "level": f"{chain}-chain-{locks}-locks",
        "chain": chain,
        "locks": locks,
        "with_dummies": with_dummies,
        "seed": seed,
        "method": method,
        "solved": result.success,
        "interactions": result.interactions_used,
    }


def run_puzzle_suite(levels=((1, 1), (2, 1), (3, 1), (1, 2), (1, 3)),
                     seeds=range(30), methods=("ours", "random"),
                     budget: int = 100,
                     cfg: EstimatorConfig | None = None) -> list[dict]:
    cfg = cfg or EstimatorConfig(min_interactions=3)
    return [run_puzzle_episode(chain, locks, seed, method, budget, cfg)
            for chain, locks in levels for method in methods for seed in seeds]


def solve_rate(records: list[dict]) -> float:
    if not records:
        return float("nan")
    return sum(r["solved"] for r in records) / len(records)
