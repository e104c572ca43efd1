"""Learning-free puzzle policies: uniform random pushes, and a heuristic that
keeps repeating an action while it moves something."""

from __future__ import annotations

import math

import numpy as np

from ..puzzle import PuzzleResult
from ..world import Action, World, apply_action

POLICIES = ("random", "heuristic")


def _unit_sphere(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(0.0, 1.0, 3)
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            return v / norm


def run_baseline(world: World, policy: str, budget: int, seed: int = 0) -> PuzzleResult:
    """Run a baseline policy against the same success test as the solver."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    goal = world.meta.get("goal", {})
    goal_part = goal.get("part")
    threshold = goal.get("threshold", math.pi / 3.0)
    sign = goal.get("direction", 1)
    rng = np.random.default_rng(seed)
    movables = sorted(world.movable_ids())
    start = world.interactions
    trace = []

    def achieved() -> bool:
        return sign * world.true_theta(goal_part) >= threshold

    last: tuple[int, Action] | None = None
    moved_last = False
    for _ in range(budget):
        if achieved():
            break
        if policy == "heuristic" and moved_last and last is not None:
            part, prev = last
            cloud = world.part_cloud(part)
            point = cloud[int(np.argmin(((cloud - prev.point) ** 2).sum(axis=1)))]
            action = Action(point, prev.direction)
        else:
            part = movables[int(rng.integers(len(movables)))]
            cloud = world.part_cloud(part)
            point = cloud[int(rng.integers(len(cloud)))]
            action = Action(point, _unit_sphere(rng))
        outcome = apply_action(world, part, action)
        moved_last = abs(outcome.moved) > 1e-9
        last = (part, action)
        trace.append({"event": "baseline_step", "part": part,
                      "delta": outcome.moved})

    outcome_name = "success" if achieved() else "failure"
    return PuzzleResult(outcome_name, world.interactions - start, trace)
