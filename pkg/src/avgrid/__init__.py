"""Deterministic grid-based aerial navigation harness.

Agents fly a voxel city by repeatedly picking one of six view-derived
candidate positions (plus a pool of carried-over candidates), with a
three-way vertical offset per candidate, and a low-level controller that
turns/moves/climbs in fixed increments. Teacher labels come from windowed
trajectory alignment against a reference path.
"""

from .core import (Action, Heading, Path, Pose, StepConfig, Vec3,
                   apply_action, relative_heading)
from .env import (Box, Observation, Scene, SceneBoundsError, Skybox,
                  ViewDirection, generate_city, get_skybox, load_scene,
                  save_scene)
from .metrics import MetricsReport, dtw, evaluate_episode, ndtw
from .candidates import (AlignmentTracker, Candidate, VerticalClass,
                         alignment_similarity, decode_vertical,
                         encode_vertical, gt_window, make_candidates,
                         nearest_index, teacher_candidate, teacher_vertical,
                         vertical_accuracy, vertical_loss)
from .controller import ControlOutcome, StuckError, go_to
from .bevmap import BevMap, GruCell
from .pool import CandidatePool
from .policy import (Decision, HeuristicPolicy, OraclePolicy, Policy,
                     PolicyContext, RandomPolicy, ReplayPolicy)
from .runner import (Episode, EpisodeResult, RunConfig, SuiteResult,
                     generate_dataset, load_episodes, run_episode, run_suite,
                     save_episodes)

__version__ = "0.1.0"
