"""FastAPI service exposing the disassembly engine."""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, HTTPException

from ..classify import (
    ClassifierTransportError,
    GroundTruthClassifier,
    HeuristicClassifier,
    NoisyOracleClassifier,
    RemoteClassifier,
)
from ..config import Config
from ..corpus import (
    GenParams,
    GroundTruth,
    emit_mntp_text,
    emit_supervised_entries,
    generate_sample,
)
from ..initial import CodeRegion
from ..isa import decode_at
from ..pipeline import Pipeline
from ..scoring import report_csv, report_table, score_report
from . import models

app = FastAPI(title="mendasm", version="0.1.0")


def _decode_region(code_b64: str, meta: models.SampleMeta) -> CodeRegion:
    try:
        data = base64.b64decode(code_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"bad code_b64: {exc}") from exc
    try:
        return CodeRegion(meta.base, data, list(meta.entry_points))
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from exc


def _truth_from_meta(region: CodeRegion, meta: models.SampleMeta) -> GroundTruth:
    starts = sorted(meta.instruction_starts)
    lengths = {}
    for addr in starts:
        if not region.contains(addr):
            raise HTTPException(400, f"truth address {addr:#x} outside region")
        lengths[addr] = decode_at(region.data, region.base,
                                  addr - region.base).length
    try:
        return GroundTruth(starts, [tuple(r) for r in meta.junk_ranges],
                           sorted(meta.first_after_junk), lengths)
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from exc


def _build_classifier(spec: models.ClassifierSpec, truth: GroundTruth):
    if spec.kind == "oracle":
        return GroundTruthClassifier(truth.instruction_starts)
    if spec.kind == "noisy":
        return NoisyOracleClassifier(truth.instruction_starts,
                                     epsilon=spec.epsilon, seed=spec.seed)
    if spec.kind == "heuristic":
        return HeuristicClassifier()
    try:
        return RemoteClassifier(spec.endpoint)
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from exc


def _config_from(overrides: models.ConfigOverrides | None) -> Config:
    if overrides is None:
        return Config()
    kwargs = {k: v for k, v in overrides.model_dump().items() if v is not None}
    try:
        return Config(**kwargs)
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from exc


@app.get("/healthz")
def healthz():
    return {"status": "ok", "service": "mendasm"}


@app.post("/v1/disassemble", response_model=models.DisassembleResponse)
def disassemble(request: models.DisassembleRequest):
    region = _decode_region(request.code_b64, request.meta)
    truth = _truth_from_meta(region, request.meta)
    if request.classifier.kind in ("oracle", "noisy") and not truth.instruction_starts:
        raise HTTPException(
            400, "oracle classifiers need instruction_starts in the metadata")
    classifier = _build_classifier(request.classifier, truth)
    pipeline = Pipeline(region, classifier, _config_from(request.config))
    try:
        listing = pipeline.run()
    except ClassifierTransportError as exc:
        raise HTTPException(502, f"classifier unreachable: {exc}") from exc
    doc = listing.to_json()
    return models.DisassembleResponse(
        instructions=doc["instructions"],
        data_bytes=doc["data_bytes"],
        overlapping_valid_pairs=doc.get("overlapping_valid_pairs", []),
        text=listing.text,
        graph=pipeline.graph.to_json() if request.dump_graph else None,
        fix_report=pipeline.fix_report,
    )


@app.post("/v1/generate", response_model=models.GenerateResponse)
def generate(request: models.GenerateRequest):
    if request.count < 1:
        raise HTTPException(400, "count must be >= 1")
    try:
        params = GenParams(block_count=request.blocks,
                           junk_max=request.junk_max,
                           junk_prob=request.junk_prob,
                           bogus_jump_prob=request.bogus_jump_prob)
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from exc
    samples = []
    for i in range(request.count):
        seed = request.seed + i
        region, truth = generate_sample(seed, params)
        samples.append(models.GeneratedSample(
            name=f"sample-{seed:04d}",
            code_b64=base64.b64encode(region.data).decode(),
            meta=models.SampleMeta(
                base=region.base,
                entry_points=list(region.entry_points),
                instruction_starts=list(truth.instruction_starts),
                junk_ranges=[list(r) for r in truth.junk_ranges],
                first_after_junk=list(truth.first_after_junk),
            ),
        ))
    return models.GenerateResponse(samples=samples)


@app.post("/v1/score", response_model=models.ScoreResponse)
def score(request: models.ScoreRequest):
    region = _decode_region(request.code_b64, request.meta)
    truth = _truth_from_meta(region, request.meta)
    predicted = set()
    for addr in request.predicted_addresses:
        if not region.contains(addr):
            raise HTTPException(400, f"prediction {addr:#x} outside region")
        insn = decode_at(region.data, region.base, addr - region.base)
        predicted.add((addr, insn.length))
    scores = score_report(predicted, truth)
    return models.ScoreResponse(
        scores={
            name: models.ScopeScore(
                precision=s.precision, recall=s.recall, f1=s.f1,
                tp=s.counts.tp, fp=s.counts.fp, fn=s.counts.fn,
                zero_division=s.zero_division)
            for name, s in scores.items()
        },
        table=report_table(scores),
        csv=report_csv(scores),
    )


@app.post("/v1/emit-dataset", response_model=models.EmitDatasetResponse)
def emit_dataset(request: models.EmitDatasetRequest):
    region = _decode_region(request.code_b64, request.meta)
    truth = _truth_from_meta(region, request.meta)
    if not truth.instruction_starts:
        raise HTTPException(400, "dataset emission needs instruction_starts")
    if request.format == "mntp":
        return models.EmitDatasetResponse(
            text=emit_mntp_text(region, truth, seed=request.seed))
    entries = emit_supervised_entries(region, truth)
    return models.EmitDatasetResponse(entries=entries)
