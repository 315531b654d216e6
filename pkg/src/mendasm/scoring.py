"""Scoring disassembly output against ground truth.

False negatives are valid instructions missing from the result; false
positives are invalid result instructions overlapping valid ones
(non-overlapping invalid decodes do not hurt valid instructions and are not
counted). "All" scores every instruction; "Junk" restricts the truth side to
the first valid instruction after each junk range, the instructions hurt
most by the obfuscation.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass

from .corpus import GroundTruth


class Scope(enum.Enum):
    ALL = "All"
    JUNK = "Junk"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class Score:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    zero_division: bool = False


def precision_of(counts: ConfusionCounts) -> tuple[float, bool]:
    total = counts.tp + counts.fp
    return (counts.tp / total, False) if total else (0.0, True)


def recall_of(counts: ConfusionCounts) -> tuple[float, bool]:
    total = counts.tp + counts.fn
    return (counts.tp / total, False) if total else (0.0, True)


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_counts(counts: ConfusionCounts) -> Score:
    p, zp = precision_of(counts)
    r, zr = recall_of(counts)
    return Score(p, r, f1_from_pr(p, r), counts, zp or zr)


def _overlaps_any(addr: int, end: int, span_starts: list[int],
                  span_ends: list[int]) -> bool:
    # spans are disjoint and sorted, so only two probes matter: the last span
    # starting at or before addr, and the first one starting after it
    idx = bisect.bisect_right(span_starts, addr)
    if idx > 0 and span_ends[idx - 1] > addr:
        return True
    return idx < len(span_starts) and span_starts[idx] < end


def score(predicted: set[tuple[int, int]], truth: GroundTruth,
          scope: Scope = Scope.ALL) -> Score:
    """Score predicted (address, length) pairs against the ground truth.

    A prediction at a truth address counts as a true positive regardless of
    its length (starting addresses are what is scored); a wrong-address
    prediction is a false positive only when its bytes overlap an in-scope
    truth instruction.
    """
    truth_starts = set(truth.instruction_starts)
    if scope == Scope.ALL:
        scoped = truth_starts
    else:
        scoped = set(truth.first_after_junk)
    pred_addrs = {a for a, _ in predicted}
    tp = len(pred_addrs & scoped)
    fn = len(scoped - pred_addrs)
    span_list = sorted((s, s + truth.lengths[s]) for s in scoped)
    span_starts = [s for s, _ in span_list]
    span_ends = [e for _, e in span_list]
    fp = 0
    for addr, length in sorted(predicted):
        if addr in truth_starts:
            continue
        if _overlaps_any(addr, addr + length, span_starts, span_ends):
            fp += 1
    return score_counts(ConfusionCounts(tp, fp, fn))


def score_report(predicted: set[tuple[int, int]],
                 truth: GroundTruth) -> dict[str, Score]:
    return {s.value: score(predicted, truth, s) for s in Scope}


def report_table(scores: dict[str, Score]) -> str:
    lines = [f"{'Scope':<6} {'Precision':>9} {'Recall':>7} {'F1':>6}"]
    for name, s in scores.items():
        flag = " *" if s.zero_division else ""
        lines.append(f"{name:<6} {s.precision:>9.3f} {s.recall:>7.3f} "
                     f"{s.f1:>6.3f}{flag}")
    if any(s.zero_division for s in scores.values()):
        lines.append("* zero-division reported as 0")
    return "\n".join(lines) + "\n"


def report_csv(scores: dict[str, Score]) -> str:
    lines = ["Scope,Precision,Recall,F1,TP,FP,FN"]
    for name, s in scores.items():
        c = s.counts
        lines.append(f"{name},{s.precision:.6f},{s.recall:.6f},{s.f1:.6f},"
                     f"{c.tp},{c.fp},{c.fn}")
    return "\n".join(lines) + "\n"
