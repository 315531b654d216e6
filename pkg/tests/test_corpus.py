import json

import pytest

from mendasm.corpus import (
    IGNORE_LABEL,
    INVALID_LABEL,
    VALID_LABEL,
    GenParams,
    GroundTruth,
    classify_mntp_line,
    emit_mntp_text,
    emit_supervised_entries,
    generate_sample,
    load_sample,
    save_sample,
    truth_instructions,
    write_stub_bundle,
)
from mendasm.initial import initial_disassemble
from mendasm.isa import decode_at

SMALL = GenParams(block_count=8, junk_prob=0.7, bogus_jump_prob=0.5)


def test_zero_junk_means_full_recovery():
    region, truth = generate_sample(3, GenParams(block_count=6, junk_prob=0.0))
    assert truth.junk_ranges == []
    assert truth.first_after_junk == []
    g = initial_disassemble(region)
    decoded = {i.address for i in g.instructions()}
    assert set(truth.instruction_starts) <= decoded


def test_seed_determinism():
    a_region, a_truth = generate_sample(42, SMALL)
    b_region, b_truth = generate_sample(42, SMALL)
    assert a_region.data == b_region.data
    assert a_truth.instruction_starts == b_truth.instruction_starts
    assert a_truth.junk_ranges == b_truth.junk_ranges
    c_region, _ = generate_sample(43, SMALL)
    assert c_region.data != a_region.data


def test_every_junk_range_has_follower():
    region, truth = generate_sample(7, SMALL)
    followers = dict(zip([b for _, b in truth.junk_ranges],
                         truth.first_after_junk))
    assert len(truth.first_after_junk) == len(truth.junk_ranges)
    for (a, b), follower in zip(truth.junk_ranges, truth.first_after_junk):
        assert 1 <= b - a <= 15
        assert follower >= b
        # nothing but junk between the range end and its follower
        assert follower == min(s for s in truth.instruction_starts if s >= b)


def test_junk_disjoint_from_instructions():
    region, truth = generate_sample(11, SMALL)
    for a, b in truth.junk_ranges:
        for addr in truth.instruction_starts:
            end = addr + truth.lengths[addr]
            assert not (addr < b and a < end)


def test_redecoding_reproduces_generated_instructions():
    region, truth = generate_sample(5, SMALL)
    for insn in truth_instructions(region, truth):
        assert insn.length == truth.lengths[insn.address]
        assert insn.text != "(bad)"


def test_branch_displacements_point_at_block_starts():
    region, truth = generate_sample(9, SMALL)
    starts = set(truth.instruction_starts)
    junk_starts = {a for a, _ in truth.junk_ranges}
    for insn in truth_instructions(region, truth):
        if insn.branch_target is not None and region.contains(insn.branch_target):
            assert insn.branch_target in starts | junk_starts


def test_sample_round_trips_through_disk(tmp_path):
    region, truth = generate_sample(13, SMALL)
    bin_path, json_path = save_sample(tmp_path, "s13", region, truth)
    loaded_region, loaded_truth = load_sample(bin_path, json_path)
    assert loaded_region.data == region.data
    assert loaded_region.base == region.base
    assert loaded_truth.instruction_starts == truth.instruction_starts
    assert loaded_truth.junk_ranges == list(truth.junk_ranges)
    assert loaded_truth.lengths == truth.lengths
    meta = json.loads(json_path.read_text())
    assert set(meta) == {"base", "entry_points", "instruction_starts",
                         "junk_ranges", "first_after_junk"}


def test_stub_bundle_table_is_total(tmp_path):
    region, truth = generate_sample(2, GenParams(block_count=3))
    path = write_stub_bundle(tmp_path / "s.stub.json", region, truth)
    doc = json.loads(path.read_text())
    assert len(doc["decode"]) == len(region.data)
    for off, (length, text) in enumerate(doc["decode"]):
        insn = decode_at(region.data, region.base, off)
        assert (insn.length, insn.text) == (length, text)


def test_mntp_junk_byte_line():
    # a lone 0xc9 junk byte decodes to leave
    region, truth = generate_sample(21, SMALL)
    text = emit_mntp_text(region, truth, seed=1)
    for line in text.splitlines():
        if line.startswith(".byte 0xc9"):
            assert line == ".byte 0xc9 ; leave ; invalid"
            break


def test_mntp_single_byte_instruction_has_no_offset_comment():
    region, truth = generate_sample(4, SMALL)
    lines = emit_mntp_text(region, truth, seed=0).splitlines()
    starts = {a: truth.lengths[a] for a in truth.instruction_starts}
    insns = {a: decode_at(region.data, region.base, a - region.base)
             for a in truth.instruction_starts}
    by_text = {}
    for idx, line in enumerate(lines):
        if classify_mntp_line(line) == "instruction-line":
            by_text.setdefault(line[: -len(" ; valid")], []).append(idx)
    for addr, insn in insns.items():
        if insn.length == 1 and insn.text in by_text:
            for idx in by_text[insn.text]:
                if idx + 1 < len(lines):
                    assert not lines[idx + 1].startswith("; offset")


def test_mntp_offset_comments_within_bounds():
    region, truth = generate_sample(17, SMALL)
    lines = emit_mntp_text(region, truth, seed=3).splitlines()
    pending_len = None
    for line in lines:
        kind = classify_mntp_line(line)
        if kind == "instruction-line" and line.endswith("; valid"):
            continue
        if kind == "offset-comment":
            k = int(line[len("; offset "):].split(":", 1)[0])
            assert 1 <= k <= 14


def test_mntp_grammar_round_trip():
    region, truth = generate_sample(29, SMALL)
    text = emit_mntp_text(region, truth, seed=7)
    kinds = [classify_mntp_line(line) for line in text.splitlines()]
    assert "byte-line" in kinds
    assert "instruction-line" in kinds
    assert "offset-comment" in kinds
    # labels appear whenever a referenced in-region address exists
    assert all(k in ("byte-line", "instruction-line", "offset-comment",
                     "label", "blank") for k in kinds)


def test_mntp_emission_deterministic():
    region, truth = generate_sample(31, SMALL)
    assert emit_mntp_text(region, truth, 5) == emit_mntp_text(region, truth, 5)
    assert emit_mntp_text(region, truth, 5) != emit_mntp_text(region, truth, 6)


def test_supervised_entries_label_scheme():
    region, truth = generate_sample(1, GenParams(block_count=6, junk_prob=0.5))
    entries = emit_supervised_entries(region, truth)
    assert entries
    seen_labels = set()
    for entry in entries:
        assert len(entry["words"]) == len(entry["labels"])
        seen_labels.update(entry["labels"])
        for word, label in zip(entry["words"], entry["labels"]):
            assert word.strip()
            if label == IGNORE_LABEL:
                continue
            assert label in (VALID_LABEL, INVALID_LABEL)
    assert IGNORE_LABEL in seen_labels
    assert VALID_LABEL in seen_labels
    assert INVALID_LABEL in seen_labels


def test_supervised_label_count_cross_check():
    region, truth = generate_sample(2, GenParams(block_count=6, junk_prob=0.5))
    counted = {"queried": 0}

    from mendasm.classify import GroundTruthClassifier
    from mendasm.pipeline import Pipeline

    entries = []

    def record(request, result):
        counted["queried"] += len(request.queried)
        from mendasm.corpus import _entry_from

        entries.append(_entry_from(request, result))

    Pipeline(region, GroundTruthClassifier(truth.instruction_starts),
             recorder=record).run()
    labeled = sum(1 for e in entries for lb in e["labels"]
                  if lb != IGNORE_LABEL)
    assert labeled == counted["queried"]


def test_supervised_empty_region_zero_entries():
    from mendasm.initial import CodeRegion

    entries = emit_supervised_entries(
        CodeRegion(0x1000, b"", []),
        GroundTruth([], [], [], {}))
    assert entries == []


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        GenParams(block_count=0)
    with pytest.raises(ValueError):
        GenParams(junk_max=16)
