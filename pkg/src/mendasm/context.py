"""Selecting the related instructions that accompany classification targets."""

from __future__ import annotations

from .graph import Block, DisasmGraph

DEFAULT_CONTEXT_LIMIT = 32


def related_instructions(graph: DisasmGraph, targets: set[int],
                         limit: int = DEFAULT_CONTEXT_LIMIT) -> set[int]:
    """BFS over the instruction-level graph around ``targets``.

    Successors of an instruction are the next instruction in its block and the
    first instructions of blocks it references; predecessors are the inverse
    of both. Levels expand in both directions at once and are truncated to
    ``limit`` collected instructions (targets excluded), taking the
    ascending-address prefix of the level that overflows.
    """
    for t in targets:
        if not graph.has_instruction(t):
            raise ValueError(f"target {t:#x} is not an instruction in the graph")
    fwd, rev = _instruction_adjacency(graph)
    related: set[int] = set()
    seen = set(targets)
    frontier = sorted(targets)
    while frontier and len(related) < limit:
        level: set[int] = set()
        for addr in frontier:
            level.update(fwd.get(addr, ()))
            level.update(rev.get(addr, ()))
        level -= seen
        picked = sorted(level)[: limit - len(related)]
        related.update(picked)
        seen.update(level)
        frontier = picked
    return related


def extract_context_blocks(graph: DisasmGraph,
                           instructions: set[int]) -> list[Block]:
    """Maximal runs of visited instructions per block, as virtual sub-blocks.

    The graph itself is never mutated; the returned blocks exist only for
    rendering.
    """
    out: list[Block] = []
    for block in graph.sorted_blocks():
        run = []
        for insn in block.instructions:
            if insn.address in instructions:
                run.append(insn)
            elif run:
                out.append(Block(run))
                run = []
        if run:
            out.append(Block(run))
    out.sort(key=lambda b: (b.start, b.end))
    return out


def _instruction_adjacency(graph: DisasmGraph):
    fwd: dict[int, set[int]] = {}
    rev: dict[int, set[int]] = {}

    def link(a: int, b: int) -> None:
        fwd.setdefault(a, set()).add(b)
        rev.setdefault(b, set()).add(a)

    for block in graph.blocks.values():
        for cur, nxt in zip(block.instructions, block.instructions[1:]):
            link(cur.address, nxt.address)
    for edge in graph.edges():
        link(edge.src_insn, edge.dst)
    return fwd, rev
