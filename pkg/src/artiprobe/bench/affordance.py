"""Affordance evaluation: counterbalanced probe actions labeled by true
rollouts, predicted by rolling the same probes out on the estimated joint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyProbeSetError
from ..estimator import EstimationResult
from ..kinematics import JointState, forward_transform
from ..world import Action, World, apply_action, clone_with_joint

# An action succeeds when it moves the joint by more than this fraction of
# the joint's full range.
SUCCESS_RANGE_FRACTION = 0.05


@dataclass(frozen=True)
class AffordanceLabel:
    action: Action
    success: bool
    displacement: float  # translation magnitude of the action point


def _point_displacement(joint: JointState, theta_from: float, theta_to: float,
                        point: np.ndarray) -> float:
    motion = forward_transform(joint, theta_to).compose(
        forward_transform(joint, theta_from).inverse())
    return float(np.linalg.norm(motion.apply(point.reshape(1, 3))[0] - point))


def _unit_sphere(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(0.0, 1.0, 3)
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            return v / norm


def success_threshold(joint: JointState) -> float:
    return SUCCESS_RANGE_FRACTION * (joint.theta_high - joint.theta_low)


def generate_probes(world: World, part_id: int, n: int = 200, seed: int = 0,
                    max_draws: int = 50000) -> list[AffordanceLabel]:
    """Draw probe actions on the part until successes and failures balance.

    Each probe is labeled by a non-committing rollout on the true world from
    its current state; success means the joint moved more than 5% of its full
    range.
    """
    if n < 1:
        raise EmptyProbeSetError("need at least one probe")
    joint = world.part(part_id).joint
    threshold = success_threshold(joint)
    cloud = world.part_cloud(part_id)
    rng = np.random.default_rng(seed)
    want_success = n // 2
    want_failure = n - want_success
    successes: list[AffordanceLabel] = []
    failures: list[AffordanceLabel] = []
    for _ in range(max_draws):
        if len(successes) >= want_success and len(failures) >= want_failure:
            break
        point = cloud[int(rng.integers(len(cloud)))]
        action = Action(point, _unit_sphere(rng))
        outcome = apply_action(world, part_id, action, commit=False)
        moved = abs(outcome.moved)
        success = moved > threshold
        disp = _point_displacement(joint, joint.theta_cur,
                                   outcome.new_theta[part_id], action.point)
        label = AffordanceLabel(action, success, disp)
        bucket = successes if success else failures
        if success and len(successes) < want_success:
            bucket.append(label)
        elif not success and len(failures) < want_failure:
            bucket.append(label)
    if len(successes) < want_success or len(failures) < want_failure:
        raise EmptyProbeSetError(
            f"could not counterbalance probes on part {part_id}: "
            f"{len(successes)} successes, {len(failures)} failures")
    return successes + failures


def eval_affordance(initial_world: World, result: EstimationResult,
                    probes: list[AffordanceLabel],
                    part_id: int) -> tuple[float, float]:
    """Binary accuracy and mean L1 displacement error of the estimate.

    Probes roll out on a replica rebuilt from the posterior-argmax hypothesis
    at the initial state, mirroring the labeling rollouts on the true world.
    """
    if not probes:
        raise EmptyProbeSetError("empty probe set")
    best = result.best_particle
    hyp = JointState(best.joint.spec, best.joint.theta_low,
                     best.joint.theta_high, 0.0)
    replica = clone_with_joint(initial_world, part_id, hyp)
    hyp_joint = replica.parts[part_id].joint
    threshold = success_threshold(hyp_joint)

    correct = 0
    l1_sum = 0.0
    for label in probes:
        outcome = apply_action(replica, part_id, label.action,
                               commit=False, strict_point=False)
        moved = abs(outcome.moved)
        predicted_success = moved > threshold
        predicted_disp = _point_displacement(hyp_joint, hyp_joint.theta_cur,
                                             outcome.new_theta[part_id],
                                             label.action.point)
        correct += int(predicted_success == label.success)
        l1_sum += abs(predicted_disp - label.displacement)
    return correct / len(probes), l1_sum / len(probes)
