"""Combined linear + recursive initial disassembly over a code region."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .graph import Block, DisasmGraph, EdgeKind
from .isa import BLOCK_TERMINATORS, Instruction, Kind, decode_at


@dataclass
class CodeRegion:
    base: int
    data: bytes
    entry_points: list[int] = field(default_factory=list)

    def __post_init__(self):
        for ep in self.entry_points:
            if not self.base <= ep < self.end:
                raise ValueError(f"entry point {ep:#x} outside region")

    @property
    def end(self) -> int:
        return self.base + len(self.data)

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end


def initial_disassemble(region: CodeRegion) -> DisasmGraph:
    """Worklist disassembly seeded at the region base and entry points.

    Direct branch/call targets are followed recursively; branch end addresses
    and in-region immediate operands become linear-sweep candidates. Decode
    streams stop when they run into an instruction the graph already holds
    (splitting its block if needed), so every instruction address appears at
    most once while byte-overlapping streams still coexist.
    """
    if not region.data:
        raise ValueError("empty code region")
    graph = DisasmGraph()
    queue: deque[int] = deque()
    queued: set[int] = set()
    # (src instruction, target, edge kind), resolved after the target decodes
    deferred_edges: list[tuple[int, int, str]] = []

    def enqueue(addr: int) -> None:
        if region.contains(addr) and addr not in queued:
            queued.add(addr)
            queue.append(addr)

    enqueue(region.base)
    for ep in region.entry_points:
        enqueue(ep)

    while queue:
        addr = queue.popleft()
        if graph.has_instruction(addr):
            graph.ensure_block_at(addr)
            continue
        _decode_stream(graph, region, addr, enqueue, deferred_edges)

    for src_insn, target, kind in deferred_edges:
        if graph.has_instruction(target) and graph.has_instruction(src_insn):
            graph.reference(src_insn, target, kind)
    return graph


def _decode_stream(graph, region, addr, enqueue, deferred_edges):
    insns: list[Instruction] = []

    def flush(continuation: tuple[int, str] | None):
        if not insns:
            return
        block = Block(list(insns))
        graph.insert_block(block)
        if continuation is not None:
            target, kind = continuation
            deferred_edges.append((insns[-1].address, target, kind))
        insns.clear()

    cur = addr
    while region.contains(cur):
        if graph.has_instruction(cur):
            # converged with an existing stream: natural fallthrough
            flush((cur, EdgeKind.CONTROL_FLOW))
            return
        insn = decode_at(region.data, region.base, cur - region.base)
        insns.append(insn)
        src = insn.address

        if insn.branch_target is not None and region.contains(insn.branch_target):
            enqueue(insn.branch_target)
            deferred_edges.append((src, insn.branch_target, EdgeKind.CONTROL_FLOW))
        if insn.kind == Kind.SEQUENTIAL:
            for imm in insn.immediates:
                if region.contains(imm):
                    enqueue(imm)
                    deferred_edges.append((src, imm, EdgeKind.IMMEDIATE))

        if insn.kind == Kind.COND_BRANCH:
            # fallthrough is real control flow for a conditional branch
            enqueue(insn.end)
            flush((insn.end, EdgeKind.CONTROL_FLOW) if region.contains(insn.end) else None)
            return
        if insn.kind in BLOCK_TERMINATORS:
            # jmp/ret/halt/(bad): the next byte is only a linear-sweep candidate
            enqueue(insn.end)
            flush((insn.end, EdgeKind.FALLTHROUGH_AFTER_BRANCH)
                  if region.contains(insn.end) else None)
            return
        cur = insn.end
    flush(None)
