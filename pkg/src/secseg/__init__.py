"""Temporal segmentation and recognition of manipulation actions from event chains."""

from .extract import ExtractionOptions, extract_event_chain
from .learn import ModelSEC, learn_model, representative_model
from .manipulator import NoManipulatorError, estimate_manipulators, manipulator_probabilities
from .model import (ActionSegment, EventChain, InputError, Node, Params, Relation, SceneGraphFrame,
                    validate_event_chain)
from .recognize import (RecognitionResult, analyze, assign_roles, enumerate_hypotheses, enumerate_subsets,
                        recognize_segment, results_timeline, scan_match, stream_chain)
from .segment import candidate_segments, decompose, denoise_manipulator_rows, segment_chain
from .similarity import semantic_similarity

__version__ = "0.1.0"

__all__ = [
    "ActionSegment", "EventChain", "ExtractionOptions", "InputError", "ModelSEC", "NoManipulatorError", "Node",
    "Params", "RecognitionResult", "Relation", "SceneGraphFrame", "analyze", "assign_roles", "candidate_segments",
    "decompose", "denoise_manipulator_rows", "enumerate_hypotheses", "enumerate_subsets", "estimate_manipulators",
    "extract_event_chain", "learn_model", "manipulator_probabilities", "recognize_segment", "representative_model", "results_timeline",
    "scan_match", "semantic_similarity", "segment_chain", "stream_chain", "validate_event_chain",
]
