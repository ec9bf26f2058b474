"""Parameterized skill learning on a simulated dart-throwing arm."""

from ._accel import NUMBA_ENABLED, backend_name
from .armsim import (ArmConfig, ArmState, GeometryError, NumericDomainError, PidGains, Task,
                     ThrowOutcome, ballistic_impact, pid_torque, simulate_throw, step,
                     throw_reward)
from .dmp import (DmpConstants, ParameterDomainError, PolicyVector, canonical_phase,
                  default_theta, forcing, integrate_dmp)
from .manifold import (PointCloud, classical_mds, detect_charts, estimate_dimension,
                       geodesic_distances, isomap, knn_graph, residual_variance)
from .pipeline import (ExperimentConfig, ExperimentError, TaskDistribution, build_training_set,
                       emit_figures, run_experiment, sample_tasks)
from .power import (ExplorationConfig, SimContext, importance_select, learn_policy, perturb,
                    power_update)
from .skill import (SkillFileError, SkillModel, TaskSpace, TrainingSet, load_skill, predict,
                    save_skill, train_classifier, train_regressors, train_skill)

__version__ = "0.1.0"
