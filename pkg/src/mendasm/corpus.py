"""Synthetic obfuscated-sample generation and training-dataset emitters.

The generator lays out real x86-64 basic blocks connected by direct control
flow, inserts junk byte runs between blocks (optionally targeted by bogus
never-taken jumps), and records exact ground truth. Byte-level synthesis
replaces a compiler+obfuscator toolchain while exercising the same
junk-byte threat model.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from .classify import GroundTruthClassifier
from .config import Config
from .initial import CodeRegion
from .isa import Instruction, decode_at
from .pipeline import Pipeline

# Supervised token-classification label scheme (one documented constant,
# because prose and figures disagree on the 0/1 mapping):
VALID_LABEL = 1
INVALID_LABEL = 0
IGNORE_LABEL = -100


@dataclass
class GroundTruth:
    instruction_starts: list[int]
    junk_ranges: list[tuple[int, int]]
    first_after_junk: list[int]
    lengths: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        starts = set(self.instruction_starts)
        if not set(self.first_after_junk) <= starts:
            raise ValueError("first_after_junk must be instruction starts")
        for a, b in self.junk_ranges:
            for addr, ln in self.lengths.items():
                if addr < b and a < addr + ln:
                    raise ValueError(
                        f"junk range [{a:#x},{b:#x}) overlaps instruction "
                        f"{addr:#x}")


@dataclass
class GenParams:
    block_count: int = 50
    junk_max: int = 15          # junk run lengths drawn from [1, junk_max]
    junk_prob: float = 0.6      # chance of a junk run after each block
    bogus_jump_prob: float = 0.5
    min_block_insns: int = 5
    max_block_insns: int = 10
    pointer_prob: float = 0.1   # mov reg, <block address> frequency

    def __post_init__(self):
        if self.block_count < 1:
            raise ValueError("need at least one block")
        if not 1 <= self.junk_max <= 15:
            raise ValueError("junk_max must be within [1, 15]")


_GPR32 = list(range(8))  # eax..edi encodings


class _Asm:
    """Just enough of an assembler for the generator's instruction menu."""

    @staticmethod
    def mov_r32_imm32(r, imm):
        return bytes([0xB8 + r]) + struct.pack("<I", imm & 0xFFFFFFFF)

    @staticmethod
    def mov_r32_r32(dst, src):
        return bytes([0x89, 0xC0 | (src << 3) | dst])

    @staticmethod
    def alu_r32_r32(opcode, dst, src):
        return bytes([opcode, 0xC0 | (src << 3) | dst])

    @staticmethod
    def mov_mem_rbp_r32(disp8, src):
        return bytes([0x89, 0x45 | (src << 3), disp8 & 0xFF])

    @staticmethod
    def mov_r32_mem_rbp(disp8, dst):
        return bytes([0x8B, 0x45 | (dst << 3), disp8 & 0xFF])

    @staticmethod
    def mov_mem_rbp_imm32(disp8, imm):
        return bytes([0xC7, 0x45, disp8 & 0xFF]) + struct.pack("<I", imm)

    @staticmethod
    def lea_r64_abs(r, addr):
        return bytes([0x48, 0x8D, 0x04 | (r << 3), 0x25]) + struct.pack("<I", addr)

    @staticmethod
    def push_r64(r):
        return bytes([0x50 + r])

    @staticmethod
    def pop_r64(r):
        return bytes([0x58 + r])

    @staticmethod
    def movzx_r32_r8(dst, src):
        return bytes([0x0F, 0xB6, 0xC0 | (dst << 3) | src])

    @staticmethod
    def nop():
        return b"\x90"

    @staticmethod
    def ret():
        return b"\xC3"

    # branch encodings use fixed rel32 displacements, patched after layout
    JMP_LEN = 5
    JCC_LEN = 6
    CALL_LEN = 5

    @staticmethod
    def jmp_rel32(disp):
        return b"\xE9" + struct.pack("<i", disp)

    @staticmethod
    def jcc_rel32(cc, disp):
        return bytes([0x0F, 0x80 + cc]) + struct.pack("<i", disp)

    @staticmethod
    def call_rel32(disp):
        return b"\xE8" + struct.pack("<i", disp)


@dataclass
class _PlannedInsn:
    length: int
    encode: object          # callable(addr, resolve) -> bytes
    target_block: int | None = None  # patched to a block start
    bogus: bool = False              # patched to a junk-run start


def _plan_block(rng: Random, params: GenParams, block_idx: int,
                base: int) -> list[_PlannedInsn]:
    alu_opcodes = [0x01, 0x29, 0x31, 0x39, 0x21, 0x09, 0x85]
    body_count = rng.randint(params.min_block_insns, params.max_block_insns) - 1
    plan: list[_PlannedInsn] = []
    for _ in range(body_count):
        kind = rng.randrange(10)
        r1, r2 = rng.choice(_GPR32), rng.choice(_GPR32)
        disp = -4 * rng.randint(1, 16)
        if kind == 0:
            if rng.random() < params.pointer_prob:
                # a block-address load exercising immediate tracking
                plan.append(_PlannedInsn(
                    5, lambda a, rs, r=r1: _Asm.mov_r32_imm32(r, rs()),
                    target_block=rng.randrange(params.block_count)))
            else:
                imm = rng.randrange(0x1000)
                plan.append(_PlannedInsn(
                    5, lambda a, rs, r=r1, i=imm: _Asm.mov_r32_imm32(r, i)))
        elif kind == 1:
            plan.append(_PlannedInsn(
                2, lambda a, rs, d=r1, s=r2: _Asm.mov_r32_r32(d, s)))
        elif kind == 2:
            op = rng.choice(alu_opcodes)
            plan.append(_PlannedInsn(
                2, lambda a, rs, o=op, d=r1, s=r2: _Asm.alu_r32_r32(o, d, s)))
        elif kind == 3:
            plan.append(_PlannedInsn(
                3, lambda a, rs, d=disp, s=r1: _Asm.mov_mem_rbp_r32(d, s)))
        elif kind == 4:
            plan.append(_PlannedInsn(
                3, lambda a, rs, d=disp, s=r1: _Asm.mov_r32_mem_rbp(d, s)))
        elif kind == 5:
            imm = rng.randrange(0x100)
            plan.append(_PlannedInsn(
                7, lambda a, rs, d=disp, i=imm: _Asm.mov_mem_rbp_imm32(d, i)))
        elif kind == 6:
            data_addr = 0x402000 + 8 * rng.randrange(64)
            reg = rng.choice([0, 1, 2, 3, 6, 7])
            plan.append(_PlannedInsn(
                8, lambda a, rs, r=reg, d=data_addr: _Asm.lea_r64_abs(r, d)))
        elif kind == 7:
            plan.append(_PlannedInsn(
                1, lambda a, rs, r=r1: _Asm.push_r64(r)))
        elif kind == 8:
            plan.append(_PlannedInsn(
                3, lambda a, rs, d=r1, s=r2: _Asm.movzx_r32_r8(d, s)))
        else:
            plan.append(_PlannedInsn(1, lambda a, rs: _Asm.nop()))
    # occasional direct call in the body keeps blocks multi-exit
    if rng.random() < 0.25:
        plan.append(_PlannedInsn(
            _Asm.CALL_LEN,
            lambda a, rs: _Asm.call_rel32(rs() - (a + _Asm.CALL_LEN)),
            target_block=rng.randrange(params.block_count)))
    roll = rng.random()
    if roll < 0.40:
        cc = rng.randrange(16)
        bogus = rng.random() < params.bogus_jump_prob
        plan.append(_PlannedInsn(
            _Asm.JCC_LEN,
            lambda a, rs, c=cc: _Asm.jcc_rel32(c, rs() - (a + _Asm.JCC_LEN)),
            target_block=None if bogus else rng.randrange(params.block_count),
            bogus=bogus))
    elif roll < 0.70:
        plan.append(_PlannedInsn(
            _Asm.JMP_LEN,
            lambda a, rs: _Asm.jmp_rel32(rs() - (a + _Asm.JMP_LEN)),
            target_block=rng.randrange(params.block_count)))
    else:
        plan.append(_PlannedInsn(1, lambda a, rs: _Asm.ret()))
    return plan


def generate_sample(seed: int, params: GenParams | None = None,
                    base: int = 0x401000) -> tuple[CodeRegion, GroundTruth]:
    """Deterministically synthesize one obfuscated code region."""
    params = params or GenParams()
    rng = Random(seed)
    blocks = [_plan_block(rng, params, i, base)
              for i in range(params.block_count)]
    junk_lens = []
    for i in range(params.block_count):
        last = i == params.block_count - 1
        if not last and rng.random() < params.junk_prob:
            junk_lens.append(rng.randint(1, params.junk_max))
        else:
            junk_lens.append(0)

    # layout pass: addresses for every instruction and junk run
    addr = base
    block_starts = []
    insn_addrs: list[list[int]] = []
    junk_ranges: list[tuple[int, int]] = []
    for plan, junk_len in zip(blocks, junk_lens):
        block_starts.append(addr)
        addrs = []
        for insn in plan:
            addrs.append(addr)
            addr += insn.length
        insn_addrs.append(addrs)
        if junk_len:
            junk_ranges.append((addr, addr + junk_len))
            addr += junk_len
    end = addr

    def bogus_target(block_idx: int) -> int:
        # never-taken jumps point at the nearest following junk run
        if not junk_ranges:
            return block_starts[(block_idx + 1) % params.block_count]
        block_end = insn_addrs[block_idx][-1] + blocks[block_idx][-1].length
        for a, _ in junk_ranges:
            if a >= block_end:
                return a
        return junk_ranges[0][0]

    # encoding pass with patched displacements
    out = bytearray()
    lengths: dict[int, int] = {}
    for bi, (plan, addrs) in enumerate(zip(blocks, insn_addrs)):
        for insn, a in zip(plan, addrs):
            def resolve(insn=insn, bi=bi):
                if insn.bogus:
                    return bogus_target(bi)
                return block_starts[insn.target_block]

            enc = insn.encode(a, resolve)
            if len(enc) != insn.length:
                raise AssertionError(
                    f"planned length {insn.length} != encoded {len(enc)}")
            out.extend(enc)
            lengths[a] = insn.length
        ji = junk_lens[bi]
        if ji:
            out.extend(_junk_bytes(rng, ji, blocks, bi))

    region = CodeRegion(base, bytes(out), [])
    starts = sorted(lengths)
    first_after = []
    for a, b in junk_ranges:
        nxt = next((s for s in starts if s >= b), None)
        if nxt is not None:
            first_after.append(nxt)
    truth = GroundTruth(starts, junk_ranges, first_after, lengths)
    _check_roundtrip(region, truth)
    return region, truth


def _junk_bytes(rng: Random, length: int, blocks, bi) -> bytes:
    if rng.random() < 0.5:
        return bytes(rng.randrange(256) for _ in range(length))
    # prefix of a real encoding, padded with uniform bytes if short
    donor_plan = rng.choice(blocks)
    donor = rng.choice(donor_plan)
    enc = donor.encode(0x401000, lambda: 0x401000)
    piece = enc[:length]
    if len(piece) < length:
        piece += bytes(rng.randrange(256) for _ in range(length - len(piece)))
    return piece


def _check_roundtrip(region: CodeRegion, truth: GroundTruth) -> None:
    for addr in truth.instruction_starts:
        insn = decode_at(region.data, region.base, addr - region.base)
        if insn.length != truth.lengths[addr]:
            raise AssertionError(
                f"decode length mismatch at {addr:#x}: emitted "
                f"{truth.lengths[addr]}, decoded {insn.length} ({insn.text})")


def truth_instructions(region: CodeRegion, truth: GroundTruth) -> list[Instruction]:
    return [decode_at(region.data, region.base, a - region.base)
            for a in truth.instruction_starts]


# -- on-disk formats ---------------------------------------------------------

def save_sample(directory, name: str, region: CodeRegion,
                truth: GroundTruth) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    bin_path = directory / f"{name}.bin"
    json_path = directory / f"{name}.json"
    bin_path.write_bytes(region.data)
    json_path.write_text(json.dumps({
        "base": region.base,
        "entry_points": list(region.entry_points),
        "instruction_starts": list(truth.instruction_starts),
        "junk_ranges": [list(r) for r in truth.junk_ranges],
        "first_after_junk": list(truth.first_after_junk),
    }, indent=1))
    return bin_path, json_path


def load_sample(bin_path, json_path) -> tuple[CodeRegion, GroundTruth]:
    data = Path(bin_path).read_bytes()
    meta = json.loads(Path(json_path).read_text())
    region = CodeRegion(meta["base"], data, list(meta.get("entry_points", [])))
    starts = sorted(meta["instruction_starts"])
    lengths = {a: decode_at(data, region.base, a - region.base).length
               for a in starts}
    truth = GroundTruth(
        starts,
        [tuple(r) for r in meta.get("junk_ranges", [])],
        sorted(meta.get("first_after_junk", [])),
        lengths,
    )
    return region, truth


def write_stub_bundle(path, region: CodeRegion, truth: GroundTruth) -> Path:
    """Truth plus a per-offset decode table, for the wire-protocol stub.

    The stub resolves snippet labels to instruction addresses by walking this
    table, so it needs no instruction decoder of its own.
    """
    table = []
    for off in range(len(region.data)):
        insn = decode_at(region.data, region.base, off)
        table.append([insn.length, insn.text])
    path = Path(path)
    path.write_text(json.dumps({
        "base": region.base,
        "instruction_starts": list(truth.instruction_starts),
        "decode": table,
    }))
    return path


# -- MNTP dataset (unsupervised fine-tuning text) -----------------------------

def emit_mntp_text(region: CodeRegion, truth: GroundTruth,
                   seed: int = 0) -> str:
    """Listing-style fine-tuning text: junk bytes as `.byte` lines with their
    decode, valid instructions tagged `; valid` with one random interior
    offset decoded as an extra `; invalid` comment, referenced addresses
    labeled."""
    rng = Random(seed)
    starts = set(truth.instruction_starts)
    insns = {a: decode_at(region.data, region.base, a - region.base)
             for a in truth.instruction_starts}
    referenced = set()
    for insn in insns.values():
        if insn.branch_target in starts:
            referenced.add(insn.branch_target)
        for imm in insn.immediates:
            if imm in starts:
                referenced.add(imm)

    lines: list[str] = []
    addr = region.base
    while addr < region.end:
        if addr in referenced and lines:
            lines.append("")
            lines.append(f"{addr:#x}:")
        if addr in starts:
            insn = insns[addr]
            lines.append(f"{insn.text} ; valid")
            if insn.length > 1:
                k = rng.randint(1, insn.length - 1)
                alt = decode_at(region.data, region.base,
                                addr - region.base + k)
                lines.append(f"; offset {k}: {alt.text} ; invalid")
            addr += insn.length
        else:
            value = region.data[addr - region.base]
            alt = decode_at(region.data, region.base, addr - region.base)
            lines.append(f".byte 0x{value:02x} ; {alt.text} ; invalid")
            addr += 1
    return "\n".join(lines) + "\n"


MNTP_LINE_KINDS = ("byte-line", "instruction-line", "offset-comment",
                   "label", "blank")


def classify_mntp_line(line: str) -> str:
    """Grammar check for one emitted line; raises on anything malformed."""
    if line == "":
        return "blank"
    if line.startswith(".byte 0x"):
        rest = line[len(".byte 0x"):]
        value, sep, comment = rest.partition(" ; ")
        if len(value) == 2 and sep and comment.endswith(" ; invalid"):
            int(value, 16)
            return "byte-line"
        raise ValueError(f"malformed byte line: {line!r}")
    if line.startswith("; offset "):
        head, sep, comment = line[len("; offset "):].partition(": ")
        if sep and head.isdigit() and comment.endswith(" ; invalid"):
            return "offset-comment"
        raise ValueError(f"malformed offset comment: {line!r}")
    if line.endswith(":") and line.startswith("0x"):
        int(line[:-1], 16)
        return "label"
    if line.endswith(" ; valid") or line.endswith(" ; invalid"):
        return "instruction-line"
    raise ValueError(f"unclassifiable line: {line!r}")


# -- supervised dataset (classifier training entries) ------------------------

def emit_supervised_entries(region: CodeRegion, truth: GroundTruth,
                            config: Config | None = None) -> list[dict]:
    """Run the pipeline with the ground-truth classifier and record every
    classification as one words/labels entry (checked instructions labeled,
    everything else -100)."""
    entries: list[dict] = []

    def record(request, result):
        entries.append(_entry_from(request, result))

    pipeline = Pipeline(region, GroundTruthClassifier(truth.instruction_starts),
                        config, recorder=record)
    pipeline.run()
    return entries


def _entry_from(request, result) -> dict:
    text = request.snippet.text
    words: list[str] = []
    labels: list[int] = []
    cursor = 0
    for span, p in zip(request.snippet.word_spans, result.probabilities):
        filler = text[cursor:span.start].strip()
        if filler:
            words.append(filler)
            labels.append(IGNORE_LABEL)
        words.append(text[span.start:span.end])
        labels.append(VALID_LABEL if p >= 0.5 else INVALID_LABEL)
        cursor = span.end
    tail = text[cursor:].strip()
    if tail:
        words.append(tail)
        labels.append(IGNORE_LABEL)
    return {"words": words, "labels": labels}


def write_supervised_jsonl(path, entries: list[dict]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return path
