"""Disassembly graph: blocks, typed reference edges, splitting, overlap handling."""

from __future__ import annotations

from dataclasses import dataclass, field

from .isa import BLOCK_TERMINATORS, Instruction, Kind


class EdgeKind:
    CONTROL_FLOW = "control-flow"
    IMMEDIATE = "immediate-ref"
    FALLTHROUGH_AFTER_BRANCH = "fallthrough-after-branch"
    SPLIT_CONTINUATION = "split-continuation"


@dataclass(frozen=True)
class Interval:
    a: int  # inclusive
    b: int  # exclusive

    def __post_init__(self):
        if self.a >= self.b:
            raise ValueError(f"empty interval [{self.a}, {self.b})")


def group_overlapping_intervals(intervals: list[Interval]) -> list[list[Interval]]:
    """Group transitively overlapping intervals.

    Sweep over the list sorted by start, carrying the running maximum end b'
    of the open group; an interval with a < b' joins the group, anything else
    starts a new one. Touching intervals (a == b') do NOT overlap.
    """
    if not intervals:
        return []
    ordered = sorted(intervals, key=lambda iv: (iv.a, iv.b))
    groups: list[list[Interval]] = []
    group = [ordered[0]]
    b_max = ordered[0].b
    for iv in ordered[1:]:
        if iv.a < b_max:
            group.append(iv)
            b_max = max(b_max, iv.b)
        else:
            groups.append(group)
            group = [iv]
            b_max = iv.b
    groups.append(group)
    return groups


@dataclass
class Block:
    instructions: list[Instruction]

    def __post_init__(self):
        if not self.instructions:
            raise ValueError("block must hold at least one instruction")
        for cur, nxt in zip(self.instructions, self.instructions[1:]):
            if cur.end != nxt.address:
                raise ValueError(
                    f"non-contiguous block member at {nxt.address:#x}")
        for insn in self.instructions[:-1]:
            if insn.kind in BLOCK_TERMINATORS:
                raise ValueError(
                    f"terminator {insn.text!r} not at block end ({insn.address:#x})")

    @property
    def start(self) -> int:
        return self.instructions[0].address

    @property
    def end(self) -> int:
        return self.instructions[-1].end

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)

    def boundaries(self) -> list[int]:
        """Interior instruction boundaries (block start and end excluded)."""
        return [i.address for i in self.instructions[1:]]


@dataclass(frozen=True)
class Edge:
    src: int  # source block start address
    dst: int  # destination block start address
    kind: str
    src_insn: int  # address of the referencing instruction


class DisasmGraph:
    """Blocks keyed by start address plus typed edges between them.

    Blocks may overlap byte-wise (competing decode streams), but no two
    blocks share a start address and no two blocks contain an instruction
    starting at the same address.
    """

    def __init__(self):
        self.blocks: dict[int, Block] = {}
        self._edges: set[Edge] = set()
        # address of an instruction -> start of the block containing it
        self._insn_index: dict[int, int] = {}

    # -- queries ------------------------------------------------------------

    def __contains__(self, start: int) -> bool:
        return start in self.blocks

    def sorted_blocks(self) -> list[Block]:
        return [self.blocks[s] for s in sorted(self.blocks)]

    def edges(self) -> list[Edge]:
        return sorted(self._edges, key=lambda e: (e.src, e.dst, e.kind))

    def block_of(self, insn_addr: int) -> Block | None:
        start = self._insn_index.get(insn_addr)
        return self.blocks[start] if start is not None else None

    def has_instruction(self, addr: int) -> bool:
        return addr in self._insn_index

    def instruction_at(self, addr: int) -> Instruction | None:
        block = self.block_of(addr)
        if block is None:
            return None
        for insn in block.instructions:
            if insn.address == addr:
                return insn
        return None

    def instructions(self) -> list[Instruction]:
        out = []
        for block in self.sorted_blocks():
            out.extend(block.instructions)
        out.sort(key=lambda i: i.address)
        return out

    # -- mutation -------------------------------------------------------------

    def insert_block(self, block: Block) -> int:
        existing = self.blocks.get(block.start)
        if existing is not None:
            return existing.start
        for insn in block.instructions:
            if insn.address in self._insn_index:
                raise ValueError(
                    f"instruction at {insn.address:#x} already in graph; "
                    "split or reuse the host block instead")
        self.blocks[block.start] = block
        for insn in block.instructions:
            self._insn_index[insn.address] = block.start
        return block.start

    def add_edge(self, src: int, dst: int, kind: str, src_insn: int) -> None:
        if dst not in self.blocks:
            raise ValueError(f"edge destination {dst:#x} is not a block start")
        if src not in self.blocks:
            raise ValueError(f"edge source {src:#x} is not a block start")
        self._edges.add(Edge(src, dst, kind, src_insn))

    def split_block(self, start: int, at: int) -> tuple[int, int]:
        """Split the block starting at ``start`` on the boundary ``at``.

        The first part keeps all incoming edges, the second inherits the
        outgoing ones; a split-continuation edge ties them together.
        """
        block = self.blocks[start]
        if not block.start < at < block.end:
            raise ValueError(f"{at:#x} not strictly inside block {start:#x}")
        idx = next((k for k, i in enumerate(block.instructions)
                    if i.address == at), None)
        if idx is None:
            raise ValueError(f"{at:#x} is not an instruction boundary")
        head = Block(block.instructions[:idx])
        tail = Block(block.instructions[idx:])
        del self.blocks[start]
        self.blocks[head.start] = head
        self.blocks[tail.start] = tail
        for insn in tail.instructions:
            self._insn_index[insn.address] = tail.start
        moved = set()
        for edge in list(self._edges):
            if edge.src == start and edge.src_insn >= at:
                self._edges.discard(edge)
                moved.add(Edge(tail.start, edge.dst, edge.kind, edge.src_insn))
        self._edges |= moved
        self._edges.add(Edge(head.start, tail.start,
                             EdgeKind.SPLIT_CONTINUATION, head.instructions[-1].address))
        return head.start, tail.start

    def ensure_block_at(self, addr: int) -> int | None:
        """Make ``addr`` a block start if it currently sits on an interior
        instruction boundary; returns the block start or None if the address
        hosts no instruction."""
        if addr in self.blocks:
            return addr
        host_start = self._insn_index.get(addr)
        if host_start is None:
            return None
        self.split_block(host_start, addr)
        return addr

    def delete_block(self, start: int) -> None:
        block = self.blocks.pop(start)
        for insn in block.instructions:
            del self._insn_index[insn.address]
        self._edges = {e for e in self._edges
                       if e.src != start and e.dst != start}

    def remove_instructions(self, addrs: set[int]) -> None:
        """Drop the given instructions, re-forming blocks from the survivors.

        Surviving contiguous runs become standalone blocks; edges anchored on
        removed instructions (or pointing at removed block starts) are dropped.
        """
        for start in [s for s, b in self.blocks.items()
                      if any(i.address in addrs for i in b.instructions)]:
            block = self.blocks.pop(start)
            for insn in block.instructions:
                del self._insn_index[insn.address]
            runs: list[list[Instruction]] = [[]]
            for insn in block.instructions:
                if insn.address in addrs:
                    if runs[-1]:
                        runs.append([])
                else:
                    runs[-1].append(insn)
            for run in runs:
                for piece in _terminator_pieces(run):
                    self.blocks[piece.start] = piece
                    for insn in piece.instructions:
                        self._insn_index[insn.address] = piece.start
        # drop edges with dead endpoints; re-anchor survivors to their host block
        fixed = set()
        for e in self._edges:
            if e.dst not in self.blocks or e.src_insn not in self._insn_index:
                continue
            fixed.add(Edge(self._insn_index[e.src_insn], e.dst, e.kind, e.src_insn))
        self._edges = fixed

    def reference(self, src_insn: int, dst: int, kind: str) -> None:
        """Record a reference from an instruction to an address, splitting the
        destination's host block first if the address is an interior boundary."""
        if self.ensure_block_at(dst) is None:
            raise ValueError(f"reference target {dst:#x} hosts no instruction")
        src_block = self._insn_index.get(src_insn)
        if src_block is None:
            raise ValueError(f"reference source {src_insn:#x} not in graph")
        self.add_edge(src_block, dst, kind, src_insn)

    # -- overlap minimization -------------------------------------------------

    def overlap_groups(self) -> list[list[Block]]:
        blocks = self.sorted_blocks()
        by_iv = {}
        for b in blocks:
            by_iv.setdefault((b.start, b.end), []).append(b)
        groups = group_overlapping_intervals([b.interval for b in blocks])
        out = []
        for g in groups:
            members = []
            for iv in g:
                members.append(by_iv[(iv.a, iv.b)].pop(0))
            out.append(sorted(members, key=lambda b: b.start))
        return out

    def minimize_overlap(self) -> list[tuple[int, int]]:
        """Split overlapped blocks so conflict groups span only truly
        overlapping instruction ranges. Returns the (block, at) splits made."""
        report: list[tuple[int, int]] = []
        for group in self.overlap_groups():
            if len(group) <= 1:
                continue
            insn_ivs = [Interval(i.address, i.end)
                        for b in group for i in b.instructions]
            cut_points: set[int] = set()
            for ig in group_overlapping_intervals(insn_ivs):
                if len(ig) > 1:
                    cut_points.add(min(iv.a for iv in ig))
                    cut_points.add(max(iv.b for iv in ig))
            for at in sorted(cut_points):
                for start in sorted(self.blocks):
                    block = self.blocks[start]
                    if (block.start < at < block.end
                            and at in block.boundaries()):
                        self.split_block(start, at)
                        report.append((start, at))
        return report

    # -- export ---------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "blocks": [
                {
                    "start": b.start,
                    "end": b.end,
                    "instructions": [
                        {
                            "address": i.address,
                            "length": i.length,
                            "text": i.text,
                            "kind": i.kind.value,
                        }
                        for i in b.instructions
                    ],
                }
                for b in self.sorted_blocks()
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "kind": e.kind}
                for e in self.edges()
            ],
        }


def _terminator_pieces(run: list[Instruction]) -> list[Block]:
    """Cut an instruction run after every block terminator."""
    pieces: list[Block] = []
    cur: list[Instruction] = []
    for insn in run:
        cur.append(insn)
        if insn.kind in BLOCK_TERMINATORS:
            pieces.append(Block(cur))
            cur = []
    if cur:
        pieces.append(Block(cur))
    return pieces
