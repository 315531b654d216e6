"""Checking and fixing orchestration: prefilter, single checks, region
tracking, reverse infilling, and forward infilling."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .classify import Classifier, ClassifyQueue, ClassifyRequest, request_for
from .config import Config
from .context import extract_context_blocks, related_instructions
from .graph import Block, DisasmGraph, group_overlapping_intervals, Interval
from .initial import CodeRegion, initial_disassemble
from .isa import BLOCK_TERMINATORS, Instruction, Kind, decode_at, reverse_decode, reverse_tree_bfs
from .render import Snippet, render_blocks, render_gap_byte

CHECK_PREFILTER = "check-prefilter"
CHECK_SINGLE = "check-single"
REVERSE_PREFILTER = "reverse-prefilter"
REVERSE_SINGLE = "reverse-single"
FORWARD_PREFILTER = "forward-prefilter"
FORWARD_SINGLE = "forward-single"

STAGE_TAGS = (CHECK_PREFILTER, CHECK_SINGLE, REVERSE_PREFILTER,
              REVERSE_SINGLE, FORWARD_PREFILTER, FORWARD_SINGLE)


class Verdict(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    PENDING = "pending"


@dataclass
class VerdictRecord:
    verdict: Verdict
    probability: float
    length: int


class VerdictStore:
    """Per-address verdicts with the probabilities that decided them.

    Verdicts move pending -> valid/invalid once; contradictory rewrites raise.
    Records survive block deletion so the region map remembers removed
    instructions.
    """

    def __init__(self):
        self._records: dict[int, VerdictRecord] = {}

    def set(self, address: int, verdict: Verdict, probability: float,
            length: int) -> None:
        existing = self._records.get(address)
        if existing is not None and existing.verdict != verdict:
            raise ValueError(
                f"verdict for {address:#x} already {existing.verdict.value}, "
                f"refusing silent rewrite to {verdict.value}")
        self._records[address] = VerdictRecord(verdict, probability, length)

    def verdict_of(self, address: int) -> Verdict:
        record = self._records.get(address)
        return Verdict.PENDING if record is None else record.verdict

    def get(self, address: int) -> VerdictRecord | None:
        return self._records.get(address)

    def is_valid(self, address: int) -> bool:
        r = self._records.get(address)
        return r is not None and r.verdict == Verdict.VALID

    def is_invalid(self, address: int) -> bool:
        r = self._records.get(address)
        return r is not None and r.verdict == Verdict.INVALID

    def is_decided(self, address: int) -> bool:
        return address in self._records

    def records(self) -> dict[int, VerdictRecord]:
        return dict(self._records)

    def annotations(self, addresses: Iterable[int]) -> dict[int, str]:
        out = {}
        for addr in addresses:
            record = self._records.get(addr)
            if record is not None:
                out[addr] = record.verdict.value
        return out


VALID_RANGE = "valid"
INVALID_RANGE = "invalid"
UNIDENTIFIED_RANGE = "unidentified"


@dataclass(frozen=True)
class RegionRange:
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class RegionMap:
    base: int
    end: int
    ranges: tuple[RegionRange, ...]

    def invalid_between_valid(self) -> list[RegionRange]:
        out = []
        for idx, rng in enumerate(self.ranges):
            if rng.label != INVALID_RANGE:
                continue
            if (0 < idx < len(self.ranges) - 1
                    and self.ranges[idx - 1].label == VALID_RANGE
                    and self.ranges[idx + 1].label == VALID_RANGE):
                out.append(rng)
        return out

    def label_at(self, addr: int) -> str:
        for rng in self.ranges:
            if rng.start <= addr < rng.end:
                return rng.label
        raise ValueError(f"{addr:#x} outside region")


def rebuild_regions(graph: DisasmGraph, verdicts: VerdictStore,
                    region: CodeRegion) -> RegionMap:
    """Label every region byte valid / invalid / unidentified.

    Valid instruction bytes win over everything; bytes touched only by
    invalid instructions are invalid; pending instructions leave their bytes
    unidentified. Bytes covered by no instruction become invalid when flanked
    by invalid bytes on both sides, otherwise unidentified.
    """
    UNCOVERED, INV, UNID, VAL = 0, 1, 2, 3
    labels = bytearray(len(region.data))
    for addr, record in verdicts.records().items():
        if record.verdict != Verdict.INVALID:
            continue
        for off in range(max(addr, region.base) - region.base,
                         min(addr + record.length, region.end) - region.base):
            if labels[off] < INV:
                labels[off] = INV
    for insn in graph.instructions():
        if not verdicts.is_decided(insn.address):
            for off in range(insn.address - region.base,
                             min(insn.end, region.end) - region.base):
                if labels[off] < UNID:
                    labels[off] = UNID
    for addr, record in verdicts.records().items():
        if record.verdict != Verdict.VALID:
            continue
        for off in range(max(addr, region.base) - region.base,
                         min(addr + record.length, region.end) - region.base):
            labels[off] = VAL
    # uncovered runs inherit invalid only when fully flanked by invalid bytes
    i = 0
    n = len(labels)
    while i < n:
        if labels[i] != UNCOVERED:
            i += 1
            continue
        j = i
        while j < n and labels[j] == UNCOVERED:
            j += 1
        left_inv = i > 0 and labels[i - 1] == INV
        right_inv = j < n and labels[j] == INV
        fill = INV if (left_inv and right_inv) else UNID
        for k in range(i, j):
            labels[k] = fill
        i = j
    names = {INV: INVALID_RANGE, UNID: UNIDENTIFIED_RANGE, VAL: VALID_RANGE}
    ranges = []
    i = 0
    while i < n:
        j = i
        while j < n and labels[j] == labels[i]:
            j += 1
        ranges.append(RegionRange(region.base + i, region.base + j,
                                  names[labels[i]]))
        i = j
    return RegionMap(region.base, region.end, tuple(ranges))


@dataclass
class FinalListing:
    instructions: list[Instruction]
    data_bytes: list[tuple[int, int]]
    overlapping_valid: list[tuple[int, int]]
    text: str

    def to_json(self) -> dict:
        doc = {
            "instructions": [
                {"address": i.address, "length": i.length, "text": i.text}
                for i in self.instructions
            ],
            "data_bytes": [
                {"address": a, "value": v} for a, v in self.data_bytes
            ],
        }
        if self.overlapping_valid:
            doc["overlapping_valid_pairs"] = [
                list(pair) for pair in self.overlapping_valid]
        return doc


class Pipeline:
    """Drives checking and fixing over one code region."""

    def __init__(self, region: CodeRegion, classifier: Classifier,
                 config: Config | None = None,
                 recorder: Callable | None = None,
                 graph: DisasmGraph | None = None):
        self.region = region
        self.classifier = classifier
        self.config = config or Config()
        if graph is not None:
            self.graph = graph
        elif region.data:
            self.graph = initial_disassemble(region)
        else:
            self.graph = DisasmGraph()
        self.verdicts = VerdictStore()
        memo: dict = {}
        self.queues = {
            tag: ClassifyQueue(classifier, tag,
                               batch_size=self.config.batch_size,
                               memo=memo, recorder=recorder)
            for tag in STAGE_TAGS
        }
        self.fix_report: list[dict] = []

    # -- snippet construction -------------------------------------------------

    def _refs_for(self, blocks: list[Block]) -> set[int]:
        refs: set[int] = set()
        for block in blocks:
            for insn in block.instructions:
                if insn.branch_target is not None:
                    refs.add(insn.branch_target)
                if insn.kind == Kind.SEQUENTIAL:
                    refs.update(i for i in insn.immediates
                                if self.region.contains(i))
        return refs

    def _render_targets(self, targets: list[int], tag: str,
                        extra_blocks: list[Block] | None = None,
                        context_seeds: list[int] | None = None) -> ClassifyRequest:
        seeds = set(context_seeds if context_seeds is not None else targets)
        related = related_instructions(self.graph, seeds, self.config.bfs_limit) | seeds
        if context_seeds is not None:
            related -= set(targets)
        blocks = extract_context_blocks(
            self.graph, related | (set() if context_seeds is not None else set(targets)))
        if extra_blocks:
            blocks = sorted(blocks + extra_blocks, key=lambda b: (b.start, b.end))
        shown = {i.address for b in blocks for i in b.instructions}
        annotations = self.verdicts.annotations(shown - set(targets))
        snippet = render_blocks(blocks, refs=self._refs_for(blocks),
                                annotations=annotations, queried=set(targets))
        return request_for(snippet, tag)

    # -- checking -------------------------------------------------------------

    def _pending_instructions(self) -> list[Instruction]:
        return [i for i in self.graph.instructions()
                if not self.verdicts.is_decided(i.address)]

    def _adjacent_windows(self, insns: list[Instruction],
                          cap: int) -> list[list[Instruction]]:
        windows: list[list[Instruction]] = []
        run: list[Instruction] = []
        for insn in insns:
            if run and (run[-1].end != insn.address or len(run) >= cap):
                windows.append(run)
                run = []
            run.append(insn)
        if run:
            windows.append(run)
        return windows

    def prefilter_pass(self) -> None:
        cfg = self.config
        queue = self.queues[CHECK_PREFILTER]
        for window in self._adjacent_windows(self._pending_instructions(),
                                             cfg.prefilter_window):
            by_addr = {i.address: i for i in window}
            request = self._render_targets([i.address for i in window],
                                           CHECK_PREFILTER)

            def commit(probs, request=request, by_addr=by_addr):
                for addr, p in zip(request.queried, probs):
                    insn = by_addr[addr]
                    if p > cfg.hi_threshold:
                        self.verdicts.set(addr, Verdict.VALID, p, insn.length)
                    elif p < cfg.lo_threshold:
                        self.verdicts.set(addr, Verdict.INVALID, p, insn.length)

            queue.enqueue(request, commit)
        queue.flush()
        self._delete_all_invalid_blocks()
        self.graph.minimize_overlap()

    def _delete_all_invalid_blocks(self) -> None:
        for start in [s for s, b in self.graph.blocks.items()
                      if all(self.verdicts.is_invalid(i.address)
                             for i in b.instructions)]:
            self.graph.delete_block(start)

    def single_check_pass(self) -> None:
        cfg = self.config
        queue = self.queues[CHECK_SINGLE]
        for insn in self._pending_instructions():
            request = self._render_targets([insn.address], CHECK_SINGLE)

            def commit(probs, insn=insn):
                verdict = (Verdict.VALID if probs[0] >= cfg.single_threshold
                           else Verdict.INVALID)
                self.verdicts.set(insn.address, verdict, probs[0], insn.length)

            queue.enqueue(request, commit)
        queue.flush()
        self._delete_all_invalid_blocks()
        self.graph.minimize_overlap()

    # -- fixing ---------------------------------------------------------------

    def _valid_spans(self) -> list[tuple[int, int]]:
        spans = [(a, a + r.length) for a, r in self.verdicts.records().items()
                 if r.verdict == Verdict.VALID]
        spans.sort()
        return spans

    def _overlaps_valid(self, insn: Instruction,
                        spans: list[tuple[int, int]]) -> bool:
        return any(insn.address < e and s < insn.end for s, e in spans)

    def _known_invalid(self) -> set[int]:
        return {a for a, r in self.verdicts.records().items()
                if r.verdict == Verdict.INVALID}

    def _accept(self, insn: Instruction, probability: float) -> None:
        self.verdicts.set(insn.address, Verdict.VALID, probability, insn.length)
        if not self.graph.has_instruction(insn.address):
            self.graph.insert_block(Block([insn]))
            self._link_flow(insn)

    def _link_flow(self, insn: Instruction) -> None:
        from .graph import EdgeKind

        if insn.branch_target is not None and self.graph.has_instruction(insn.branch_target):
            self.graph.reference(insn.address, insn.branch_target,
                                 EdgeKind.CONTROL_FLOW)
        if self.region.contains(insn.end) and self.graph.has_instruction(insn.end):
            kind = (EdgeKind.FALLTHROUGH_AFTER_BRANCH
                    if insn.kind in BLOCK_TERMINATORS else EdgeKind.CONTROL_FLOW)
            self.graph.reference(insn.address, insn.end, kind)

    def _fix_context_seeds(self, lo: int, hi: int) -> list[int]:
        seeds = []
        right = self.graph.instruction_at(hi)
        if right is not None:
            seeds.append(hi)
        # last valid instruction ending at the region start
        for addr, record in self.verdicts.records().items():
            if record.verdict == Verdict.VALID and addr + record.length == lo:
                seeds.append(addr)
        return sorted(set(seeds))

    def _render_candidates(self, cands: list[Instruction], tag: str,
                           lo: int, hi: int) -> ClassifyRequest:
        extra = [Block([c]) for c in sorted(cands, key=lambda c: c.address)]
        return self._render_targets([c.address for c in cands], tag,
                                    extra_blocks=extra,
                                    context_seeds=self._fix_context_seeds(lo, hi))

    def _fix_region_task(self, lo: int, hi: int):
        cfg = self.config
        data, base = self.region.data, self.region.base
        accepted: list[Instruction] = []

        def usable(cands, spans):
            return [c for c in cands
                    if c.address >= lo and c.kind != Kind.BAD
                    and not self._overlaps_valid(c, spans)]

        # phase 1: batched reverse infilling on the reverse-disassembly tree
        cur = hi
        while cur > lo:
            spans = self._valid_spans()
            cands = usable(reverse_tree_bfs(data, base, cur,
                                            self._known_invalid(),
                                            cfg.prefilter_window), spans)
            if not cands:
                break
            probs = yield (REVERSE_PREFILTER,
                           self._render_candidates(cands, REVERSE_PREFILTER, lo, hi))
            prob_of = dict(zip(probs.request.queried, probs.values))
            retained = {}
            for c in cands:
                p = prob_of[c.address]
                if p > cfg.hi_threshold:
                    retained[c.address] = (c, p)
                elif p < cfg.lo_threshold:
                    self.verdicts.set(c.address, Verdict.INVALID, p, c.length)
            chain = _best_chain(cur, retained)
            if not chain:
                break
            for c, p in chain:
                self._accept(c, p)
                accepted.append(c)
            cur = chain[-1][0].address

        # phase 2: single mode, one reverse step at a time
        while cur > lo:
            spans = self._valid_spans()
            cands = usable(reverse_decode(data, base, cur,
                                          self._known_invalid()), spans)
            if not cands:
                break
            probs = yield (REVERSE_SINGLE,
                           self._render_candidates(cands, REVERSE_SINGLE, lo, hi))
            prob_of = dict(zip(probs.request.queried, probs.values))
            best = max(cands, key=lambda c: (prob_of[c.address], c.length,
                                             -c.address))
            if prob_of[best.address] <= cfg.single_threshold:
                break
            self._accept(best, prob_of[best.address])
            accepted.append(best)
            for c in cands:
                if c.address != best.address:
                    # anything else ending here now overlaps an accepted one
                    self.verdicts.set(c.address, Verdict.INVALID,
                                      prob_of[c.address], c.length)
            cur = best.address

        # phase 3: forward infilling scans left-to-right for short blocks
        cursor = lo
        while cursor < hi:
            spans = self._valid_spans()
            inside = next((e for s, e in spans if s <= cursor < e), None)
            if inside is not None:
                cursor = inside
                continue
            if cursor in self._known_invalid():
                cursor += 1
                continue
            block_insns = self._forward_block(cursor, hi, spans)
            if not block_insns:
                cursor += 1
                continue
            pending = list(block_insns)
            for window in self._adjacent_windows(pending, cfg.prefilter_window):
                req = self._render_candidates(window, FORWARD_PREFILTER, lo, hi)
                probs = yield (FORWARD_PREFILTER, req)
                prob_of = dict(zip(probs.request.queried, probs.values))
                for c in window:
                    p = prob_of[c.address]
                    if p > cfg.hi_threshold:
                        self._accept(c, p)
                        accepted.append(c)
                    elif p < cfg.lo_threshold:
                        self.verdicts.set(c.address, Verdict.INVALID, p, c.length)
            for c in block_insns:
                if self.verdicts.is_decided(c.address):
                    continue
                probs = yield (FORWARD_SINGLE,
                               self._render_candidates([c], FORWARD_SINGLE, lo, hi))
                p = probs.values[0]
                if p >= cfg.single_threshold:
                    self._accept(c, p)
                    accepted.append(c)
                else:
                    self.verdicts.set(c.address, Verdict.INVALID, p, c.length)
            valid_members = [c for c in block_insns
                             if self.verdicts.is_valid(c.address)]
            if valid_members:
                cursor = valid_members[-1].end
            else:
                cursor += 1

        self.fix_report.append({
            "region": [lo, hi],
            "accepted": [i.address for i in sorted(accepted,
                                                   key=lambda x: x.address)],
        })

    def _forward_block(self, cursor: int, hi: int,
                       spans: list[tuple[int, int]]) -> list[Instruction]:
        insns: list[Instruction] = []
        addr = cursor
        known_invalid = self._known_invalid()
        while addr < hi and addr not in known_invalid:
            insn = decode_at(self.region.data, self.region.base,
                             addr - self.region.base)
            if (insn.kind == Kind.BAD or insn.end > hi
                    or self._overlaps_valid(insn, spans)):
                break
            insns.append(insn)
            if insn.kind in BLOCK_TERMINATORS:
                break
            addr = insn.end
        return insns

    def _drive_fix_tasks(self, tasks) -> None:
        resume: deque = deque((gen, None) for gen in tasks)

        def schedule(gen, request, values):
            resume.append((gen, _StageResult(request, values)))

        fix_queues = [self.queues[t] for t in (REVERSE_PREFILTER, REVERSE_SINGLE,
                                               FORWARD_PREFILTER, FORWARD_SINGLE)]
        while resume or any(q.pending for q in fix_queues):
            while resume:
                gen, value = resume.popleft()
                try:
                    tag, request = gen.send(value)
                except StopIteration:
                    continue
                self.queues[tag].enqueue(
                    request,
                    lambda values, g=gen, r=request: schedule(g, r, values))
            for q in fix_queues:
                if q.pending:
                    q.flush()

    # -- the full run -----------------------------------------------------------

    def run(self) -> FinalListing:
        self.graph.minimize_overlap()
        self.prefilter_pass()
        self.single_check_pass()
        regions = rebuild_regions(self.graph, self.verdicts, self.region)
        fix_ranges = regions.invalid_between_valid()
        if fix_ranges:
            for rng in fix_ranges:
                self._remove_invalid_in(rng.start, rng.end)
            self._drive_fix_tasks(
                [self._fix_region_task(r.start, r.end) for r in fix_ranges])
            self.graph.minimize_overlap()
        return self.final_listing()

    def _remove_invalid_in(self, lo: int, hi: int) -> None:
        doomed = set()
        for insn in self.graph.instructions():
            if (self.verdicts.is_invalid(insn.address)
                    and insn.address < hi and insn.end > lo):
                doomed.add(insn.address)
        if doomed:
            self.graph.remove_instructions(doomed)

    # -- final output -----------------------------------------------------------

    def final_listing(self) -> FinalListing:
        valid = sorted((a, r) for a, r in self.verdicts.records().items()
                       if r.verdict == Verdict.VALID)
        insns = []
        for addr, record in valid:
            insn = self.graph.instruction_at(addr)
            if insn is None:
                insn = decode_at(self.region.data, self.region.base,
                                 addr - self.region.base)
            insns.append(insn)
        covered = bytearray(len(self.region.data))
        for insn in insns:
            for off in range(insn.address - self.region.base,
                             min(insn.end, self.region.end) - self.region.base):
                covered[off] = 1
        data_bytes = [(self.region.base + off, self.region.data[off])
                      for off, c in enumerate(covered) if not c]
        overlaps = []
        ivs = [Interval(i.address, i.end) for i in insns]
        for group in group_overlapping_intervals(ivs):
            if len(group) > 1:
                addrs = sorted(iv.a for iv in group)
                overlaps.extend((addrs[i], addrs[i + 1])
                                for i in range(len(addrs) - 1))
        text = self._final_text(insns, data_bytes)
        return FinalListing(insns, data_bytes, overlaps, text)

    def _final_text(self, insns: list[Instruction],
                    data_bytes: list[tuple[int, int]]) -> str:
        units: list[str] = []
        refs = self._refs_for([Block([i]) for i in insns])
        run: list[Instruction] = []

        def flush_run():
            if not run:
                return
            blocks = [Block([i]) for i in run]
            units.append(render_blocks(blocks, refs=refs).text)
            run.clear()

        events: list[tuple[int, str, object]] = []
        for insn in insns:
            events.append((insn.address, "insn", insn))
        for addr, value in data_bytes:
            events.append((addr, "db", value))
        events.sort(key=lambda e: (e[0], e[1]))
        db_run: list[str] = []
        for addr, kind, payload in events:
            if kind == "insn":
                if db_run:
                    units.append("\n".join(db_run) + "\n")
                    db_run = []
                run.append(payload)
            else:
                flush_run()
                db_run.append(render_gap_byte(addr, payload))
        flush_run()
        if db_run:
            units.append("\n".join(db_run) + "\n")
        return "\n".join(units)


@dataclass(frozen=True)
class _StageResult:
    request: ClassifyRequest
    values: tuple[float, ...]


def _best_chain(root_end: int, retained: dict[int, tuple[Instruction, float]]):
    """Walk the retained reverse candidates into one non-overlapping chain."""
    chain = []
    cur = root_end
    while True:
        ending_here = [(c, p) for c, p in retained.values() if c.end == cur]
        if not ending_here:
            break
        best = max(ending_here, key=lambda cp: (cp[1], cp[0].length,
                                                -cp[0].address))
        chain.append(best)
        cur = best[0].address
    return chain


def disassemble(region: CodeRegion, classifier: Classifier,
                config: Config | None = None,
                recorder: Callable | None = None) -> FinalListing:
    return Pipeline(region, classifier, config, recorder).run()
