"""Interactive articulation estimation and manipulation toolkit.

Hypothesize joint configurations for an unknown articulated object, simulate
candidate actions on imagined replicas, act on the real object, and update
beliefs by comparing predicted and observed point clouds; includes the
quasi-static surrogate simulator and the procedural puzzle-box benchmark.
"""

from .actions import (ActionSelectConfig, Desired, select_goal_action,
                      select_informative_action)
from .errors import (ArtiprobeError, ConfigError, DegenerateRangeError,
                     DegenerateWeightsError, EmptyCloudError, EmptyPoolError,
                     EmptyProbeSetError, InvalidPriorError, InvalidSpecError,
                     PointNotOnPartError, UnknownPartError, UnknownProposalError)
from .estimator import (EstimationResult, EstimatorConfig, chamfer_likelihood,
                        cosine_likelihood, estimate_joint, update_posterior)
from .geometry import (BoundingBox, RigidTransform, chamfer, fit_bounding_box,
                       transform_cloud)
from .hypotheses import (HypothesisParticle, ParticlePool, PriorWeights,
                         posterior_by_class, resample, sample_prior,
                         systematic_resample_indices)
from .kinematics import (CLASSES, JointProposalSet, JointSpec, JointState,
                         JointType, classify_proposal, forward_transform,
                         point_velocity_direction, propose_joints)
from .puzzle import (PoiEntry, PuzzleConfig, PuzzleResult, proportion_opened,
                     resolve_direction, solve_puzzle)
from .scene import box_surface_cloud, dumps_scene, load_scene, save_scene
from .world import (Action, Contact, Part, StepOutcome, World, apply_action,
                    apply_noisy_action, clone_with_joint)

__version__ = "0.1.0"
