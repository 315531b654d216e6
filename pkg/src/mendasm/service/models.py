"""Request/response schemas for the engine service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SampleMeta(BaseModel):
    base: int
    entry_points: list[int] = Field(default_factory=list)
    instruction_starts: list[int] = Field(default_factory=list)
    junk_ranges: list[list[int]] = Field(default_factory=list)
    first_after_junk: list[int] = Field(default_factory=list)


class ClassifierSpec(BaseModel):
    kind: Literal["oracle", "noisy", "heuristic", "remote"] = "heuristic"
    epsilon: float = 0.0
    seed: int = 0
    endpoint: Optional[str] = None


class ConfigOverrides(BaseModel):
    prefilter_window: Optional[int] = None
    hi_threshold: Optional[float] = None
    lo_threshold: Optional[float] = None
    single_threshold: Optional[float] = None
    bfs_limit: Optional[int] = None
    batch_size: Optional[int] = None
    seed: Optional[int] = None


class DisassembleRequest(BaseModel):
    code_b64: str
    meta: SampleMeta
    classifier: ClassifierSpec = Field(default_factory=ClassifierSpec)
    config: Optional[ConfigOverrides] = None
    dump_graph: bool = False


class ListingInstruction(BaseModel):
    address: int
    length: int
    text: str


class ListingDataByte(BaseModel):
    address: int
    value: int


class DisassembleResponse(BaseModel):
    instructions: list[ListingInstruction]
    data_bytes: list[ListingDataByte]
    overlapping_valid_pairs: list[list[int]] = Field(default_factory=list)
    text: str
    graph: Optional[dict] = None
    fix_report: list[dict] = Field(default_factory=list)


class GenerateRequest(BaseModel):
    seed: int = 0
    count: int = 1
    blocks: int = 50
    junk_max: int = 15
    junk_prob: float = 0.6
    bogus_jump_prob: float = 0.5


class GeneratedSample(BaseModel):
    name: str
    code_b64: str
    meta: SampleMeta


class GenerateResponse(BaseModel):
    samples: list[GeneratedSample]


class ScoreRequest(BaseModel):
    code_b64: str
    meta: SampleMeta
    predicted_addresses: list[int]


class ScopeScore(BaseModel):
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    zero_division: bool = False


class ScoreResponse(BaseModel):
    scores: dict[str, ScopeScore]
    table: str
    csv: str


class EmitDatasetRequest(BaseModel):
    code_b64: str
    meta: SampleMeta
    format: Literal["mntp", "supervised"]
    seed: int = 0


class EmitDatasetResponse(BaseModel):
    text: Optional[str] = None
    entries: Optional[list[dict]] = None
