"""
Anchorloop: perceptual anchoring with a relational particle filter for occluded objects.
"""

from .anchorstore import Anchor, AnchorStatus, AnchorStore
from .config import AnchorloopConfig, RunConfig
from .errors import AnchorloopError
from .matcher import LabeledSample, SimilarityVector, associate, build_similarity_vector, predict, train
from .models import MatchModel, load_model, make_model, save_model
from .percepts import GroundingTable, Percept
from .rpf import ParticleEnsemble, TrackerConfig
from .worldloop import FrameInput, FrameReport, WorldLoop, consonance_check

from .simkit import Scenario, evaluate, generate_frame, generate_matcher_dataset, run_scenario
from .scenarios import builtin_scenarios

__all__ = [
    "Anchor",
    "AnchorStatus",
    "AnchorStore",
    "AnchorloopConfig",
    "RunConfig",
    "AnchorloopError",
    "LabeledSample",
    "SimilarityVector",
    "associate",
    "build_similarity_vector",
    "predict",
    "train",
    "MatchModel",
    "load_model",
    "make_model",
    "save_model",
    "GroundingTable",
    "Percept",
    "ParticleEnsemble",
    "TrackerConfig",
    "FrameInput",
    "FrameReport",
    "WorldLoop",
    "consonance_check",
    "Scenario",
    "evaluate",
    "generate_frame",
    "generate_matcher_dataset",
    "run_scenario",
    "builtin_scenarios",
]
