"""Textual representation of extracted blocks.

Regions of adjacent blocks get a start label and an end-address comment;
transitively overlapping blocks are wrapped in git-style conflict markers,
one alternative per block. Known verdicts append ``; valid`` / ``; invalid``
comments, and the byte spans of queried instruction lines are reported so a
token classifier can be pointed at them. The full grammar is documented in
docs/snippet-format.md.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import Block, group_overlapping_intervals

CONFLICT_OPEN = "<<<<<<<"
CONFLICT_SEP = "======="
CONFLICT_CLOSE = ">>>>>>>"

VALID_COMMENT = "; valid"
INVALID_COMMENT = "; invalid"


@dataclass(frozen=True)
class WordSpan:
    start: int  # byte offset into the snippet text
    end: int
    address: int


@dataclass(frozen=True)
class Snippet:
    text: str
    word_spans: tuple[WordSpan, ...]


def render_gap_byte(addr: int, value: int) -> str:
    """A raw data byte the listing could not attribute to any instruction."""
    return f"db 0x{value:02X}"


def render_blocks(blocks: list[Block],
                  refs: set[int] | frozenset[int] = frozenset(),
                  annotations: dict[int, str] | None = None,
                  queried: set[int] | frozenset[int] = frozenset()) -> Snippet:
    """Render blocks (sorted ascending by start) into snippet text.

    ``refs`` marks addresses referenced by instruction operands: a referenced
    block start in the middle of a region gets its own label line.
    ``annotations`` maps instruction addresses to "valid"/"invalid".
    """
    annotations = annotations or {}
    for prev, cur in zip(blocks, blocks[1:]):
        if cur.start < prev.start:
            raise ValueError("blocks must be sorted ascending by start address")

    lines: list[str] = []
    spans: list[tuple[int, int]] = []  # (line index, address) fixed up later
    span_lines: dict[int, int] = {}

    def emit(line: str) -> None:
        lines.append(line)

    def emit_insn(insn) -> None:
        text = insn.text
        if insn.address in queried:
            if insn.address in span_lines:
                raise ValueError(
                    f"queried address {insn.address:#x} rendered twice")
            span_lines[insn.address] = len(lines)
        note = annotations.get(insn.address)
        if note == "valid":
            text += f" {VALID_COMMENT}"
        elif note == "invalid":
            text += f" {INVALID_COMMENT}"
        emit(text)

    def emit_region(run: list[Block]) -> None:
        emit(f"{run[0].start:#x}:")
        for idx, block in enumerate(run):
            if idx > 0 and block.start in refs:
                emit(f"{block.start:#x}:")
            for insn in block.instructions:
                emit_insn(insn)
        emit(f"; {run[-1].end:#x}")

    units: list[list[list[Block]]] = []  # each unit: list of adjacent runs
    for group in _block_groups(blocks):
        if len(group) == 1:
            block = group[0]
            if (units and len(units[-1][-1]) >= 1 and not _is_conflict(units[-1])
                    and units[-1][-1][-1].end == block.start):
                units[-1][-1].append(block)
            else:
                units.append([[block]])
        else:
            units.append([[b] for b in group])

    first = True
    for unit in units:
        if not first:
            emit("")
        first = False
        if _is_conflict(unit):
            emit(CONFLICT_OPEN)
            for idx, alternative in enumerate(unit):
                if idx > 0:
                    emit(CONFLICT_SEP)
                emit_region(alternative)
            emit(CONFLICT_CLOSE)
        else:
            emit_region(unit[0])

    missing = set(queried) - set(span_lines)
    if missing:
        raise ValueError(
            "queried addresses not rendered: "
            + ", ".join(f"{a:#x}" for a in sorted(missing)))

    text = "\n".join(lines) + ("\n" if lines else "")
    word_spans = []
    offset = 0
    offsets = []
    for line in lines:
        offsets.append(offset)
        offset += len(line) + 1
    for addr in sorted(span_lines):
        line_idx = span_lines[addr]
        line = lines[line_idx]
        body = line
        for comment in (VALID_COMMENT, INVALID_COMMENT):
            suffix = f" {comment}"
            if body.endswith(suffix):
                body = body[: -len(suffix)]
        word_spans.append(WordSpan(offsets[line_idx],
                                   offsets[line_idx] + len(body), addr))
    word_spans.sort(key=lambda s: s.start)
    return Snippet(text=text, word_spans=tuple(word_spans))


def _block_groups(blocks: list[Block]) -> list[list[Block]]:
    if not blocks:
        return []
    by_iv: dict[tuple[int, int], list[Block]] = {}
    for b in blocks:
        by_iv.setdefault((b.start, b.end), []).append(b)
    groups = []
    for g in group_overlapping_intervals([b.interval for b in blocks]):
        members = [by_iv[(iv.a, iv.b)].pop(0) for iv in g]
        groups.append(sorted(members, key=lambda b: (b.start, b.end)))
    return groups


def _is_conflict(unit: list[list[Block]]) -> bool:
    return len(unit) > 1
