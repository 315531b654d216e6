import base64
import json

import pytest
from fastapi.testclient import TestClient

from mendasm.corpus import GenParams, generate_sample
from mendasm.service.app import app

client = TestClient(app)


def _sample_payload(seed=0, params=None):
    region, truth = generate_sample(seed, params or GenParams(block_count=6))
    meta = {
        "base": region.base,
        "entry_points": [],
        "instruction_starts": list(truth.instruction_starts),
        "junk_ranges": [list(r) for r in truth.junk_ranges],
        "first_after_junk": list(truth.first_after_junk),
    }
    return base64.b64encode(region.data).decode(), meta, truth


def test_healthz():
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_disassemble_with_oracle():
    code_b64, meta, truth = _sample_payload()
    r = client.post("/v1/disassemble", json={
        "code_b64": code_b64,
        "meta": meta,
        "classifier": {"kind": "oracle"},
    })
    assert r.status_code == 200
    body = r.json()
    got = {i["address"] for i in body["instructions"]}
    assert got == set(truth.instruction_starts)
    assert body["text"].startswith(f"{meta['base']:#x}:")


def test_disassemble_dump_graph():
    code_b64, meta, _ = _sample_payload()
    r = client.post("/v1/disassemble", json={
        "code_b64": code_b64, "meta": meta,
        "classifier": {"kind": "oracle"}, "dump_graph": True,
    })
    graph = r.json()["graph"]
    assert graph is not None
    assert {"blocks", "edges"} <= set(graph)


def test_disassemble_rejects_bad_b64():
    r = client.post("/v1/disassemble", json={
        "code_b64": "!!!", "meta": {"base": 0x1000},
    })
    assert r.status_code == 400


def test_disassemble_oracle_requires_truth():
    r = client.post("/v1/disassemble", json={
        "code_b64": base64.b64encode(b"\x90").decode(),
        "meta": {"base": 0x1000},
        "classifier": {"kind": "oracle"},
    })
    assert r.status_code == 400


def test_generate_deterministic_and_count():
    r1 = client.post("/v1/generate", json={"seed": 7, "count": 2, "blocks": 4})
    r2 = client.post("/v1/generate", json={"seed": 7, "count": 2, "blocks": 4})
    assert r1.status_code == 200
    assert r1.json() == r2.json()
    assert len(r1.json()["samples"]) == 2
    names = [s["name"] for s in r1.json()["samples"]]
    assert names == ["sample-0007", "sample-0008"]


def test_score_round_trip():
    code_b64, meta, truth = _sample_payload(3)
    r = client.post("/v1/score", json={
        "code_b64": code_b64, "meta": meta,
        "predicted_addresses": list(truth.instruction_starts),
    })
    assert r.status_code == 200
    body = r.json()
    assert body["scores"]["All"]["precision"] == 1.0
    assert body["scores"]["All"]["recall"] == 1.0
    assert body["scores"]["Junk"]["recall"] == 1.0
    assert body["csv"].splitlines()[0] == "Scope,Precision,Recall,F1,TP,FP,FN"


def test_emit_mntp_dataset():
    code_b64, meta, _ = _sample_payload(5, GenParams(block_count=4))
    r = client.post("/v1/emit-dataset", json={
        "code_b64": code_b64, "meta": meta, "format": "mntp", "seed": 1,
    })
    assert r.status_code == 200
    text = r.json()["text"]
    assert "; valid" in text
    from mendasm.corpus import classify_mntp_line

    for line in text.splitlines():
        classify_mntp_line(line)


def test_emit_supervised_dataset():
    code_b64, meta, _ = _sample_payload(6, GenParams(block_count=4))
    r = client.post("/v1/emit-dataset", json={
        "code_b64": code_b64, "meta": meta, "format": "supervised",
    })
    assert r.status_code == 200
    entries = r.json()["entries"]
    assert entries
    for entry in entries:
        assert len(entry["words"]) == len(entry["labels"])


def test_validation_errors_are_422():
    r = client.post("/v1/disassemble", json={"meta": {"base": 0}})
    assert r.status_code == 422
