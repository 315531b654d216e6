"""Obfuscation-resilient x86-64 disassembly engine."""

from .classify import (
    ClassifyRequest,
    ClassifyResult,
    GroundTruthClassifier,
    HeuristicClassifier,
    NoisyOracleClassifier,
    RemoteClassifier,
)
from .config import Config
from .corpus import GenParams, GroundTruth, generate_sample
from .graph import Block, DisasmGraph, Interval, group_overlapping_intervals
from .initial import CodeRegion, initial_disassemble
from .isa import Instruction, Kind, decode_at, reverse_decode, reverse_tree_bfs
from .pipeline import FinalListing, Pipeline, disassemble
from .scoring import Scope, score, score_report

__version__ = "0.1.0"

__all__ = [
    "Block",
    "ClassifyRequest",
    "ClassifyResult",
    "CodeRegion",
    "Config",
    "DisasmGraph",
    "FinalListing",
    "GenParams",
    "GroundTruth",
    "GroundTruthClassifier",
    "HeuristicClassifier",
    "Instruction",
    "Interval",
    "Kind",
    "NoisyOracleClassifier",
    "Pipeline",
    "RemoteClassifier",
    "Scope",
    "decode_at",
    "disassemble",
    "generate_sample",
    "group_overlapping_intervals",
    "initial_disassemble",
    "reverse_decode",
    "reverse_tree_bfs",
    "score",
    "score_report",
]
