import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from itertools import combinations
from typing import Sequence, Mapping, Optional, Dict, List, Union, Any

import numpy as np

from torch_lencon.data.corpus import histogram
from torch_lencon.data.length import byte_length
from torch_lencon.evaluation.rouge import _score_args, RougeScores, METRICS, Tokens
from torch_lencon.evaluation.significance import permutation_test
from torch_lencon.internals.exceptions import AlignmentError, InputValidationError

FREE = 'free'
DEFAULT_LIMITS = (30, 50, 75)
GroupLabel = Union[int, str]


@dataclass
class LengthGroupReport:
    """
    Length behaviour of the outputs that were asked for one desired length (or of free decoding, where only the
    dispersion is meaningful).
    """
    label: GroupLabel
    count: int
    mean_bytes: float
    std_bytes: float
    histogram: Dict[int, int]
    bin_width: int
    mean_abs_deviation: Optional[float] = None
    within_tolerance: Optional[float] = None
    tolerance: int = 5


def length_report(groups: Mapping[GroupLabel, Sequence[Union[int, Tokens]]],
                  bin_width: int = 5,
                  tolerance: int = 5) -> Dict[GroupLabel, LengthGroupReport]:
    """
    :param groups: Outputs (token lists or byte lengths) keyed by the desired length they were decoded for; the key
      `'free'` (or None) marks unconstrained outputs.
    :param bin_width: Histogram bin width in bytes.
    :param tolerance: Outputs within this many bytes of the desired length count as on target.
    :return: A :class:`LengthGroupReport` per group.
    """
    out = {}
    for label, outputs in groups.items():
        if not len(outputs):
            raise InputValidationError(f"Length group {label!r} is empty.")
        lengths = np.array([o if isinstance(o, (int, np.integer)) else byte_length(o) for o in outputs])
        label = FREE if label is None else label
        report = LengthGroupReport(
            label=label,
            count=len(lengths),
            mean_bytes=float(lengths.mean()),
            std_bytes=float(lengths.std()),
            histogram=histogram(lengths, bin_width),
            bin_width=bin_width,
            tolerance=tolerance
        )
        if label != FREE:
            deviation = np.abs(lengths - int(label))
            report.mean_abs_deviation = float(deviation.mean())
            report.within_tolerance = float(np.mean(deviation <= tolerance))
        out[label] = report
    return out


@dataclass
class EvalReport:
    """
    :ivar scores: system -> limit -> metric -> mean score.
    :ivar p_values: limit -> metric -> ``"A|B"`` -> p-value of the pairwise permutation test.
    :ivar length_groups: system -> group label -> :class:`LengthGroupReport`.
    :ivar per_document: system -> limit -> the per-document scores the means and tests were computed from.
    """
    limits: List[int]
    systems: List[str]
    scores: Dict[str, Dict[int, Dict[str, float]]] = field(default_factory=dict)
    p_values: Dict[int, Dict[str, Dict[str, float]]] = field(default_factory=dict)
    length_groups: Dict[str, Dict[GroupLabel, LengthGroupReport]] = field(default_factory=dict)
    per_document: Dict[str, Dict[int, List[RougeScores]]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'limits': list(self.limits),
            'systems': list(self.systems),
            'scores': {sys: {str(lim): v for lim, v in by_lim.items()} for sys, by_lim in self.scores.items()},
            'p_values': {str(lim): v for lim, v in self.p_values.items()},
            'length_groups': {
                sys: {str(label): _group_dict(g) for label, g in groups.items()}
                for sys, groups in self.length_groups.items()
            }
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)


def _group_dict(group: LengthGroupReport) -> Dict[str, Any]:
    out = asdict(group)
    out['histogram'] = [[start, count] for start, count in sorted(group.histogram.items())]
    return out


def pair_key(a: str, b: str) -> str:
    return f"{a}|{b}"


def _score_all(candidates: Sequence[Tokens],
               references: Sequence[Sequence[Tokens]],
               limit: Optional[int],
               workers: int) -> List[RougeScores]:
    args = [(cand, refs, limit) for cand, refs in zip(candidates, references)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_score_args, args, chunksize=max(1, len(args) // (workers * 4))))
    return [_score_args(a) for a in args]


def evaluate(systems: Mapping[str, Sequence[Tokens]],
             references: Sequence[Sequence[Tokens]],
             limits: Sequence[int] = DEFAULT_LIMITS,
             desired: Optional[Mapping[str, Sequence[Optional[int]]]] = None,
             iterations: int = 10_000,
             seed: int = 0,
             exact: Optional[bool] = None,
             bin_width: int = 5,
             workers: int = 1) -> EvalReport:
    """
    Score each system at each byte limit (candidates truncated, references untouched), test every pair of systems for
    each limit and metric, and report output lengths.

    :param systems: System name -> one candidate per document.
    :param references: One list of reference token lists per document.
    :param limits: Byte limits to truncate candidates to.
    :param desired: Optional system -> per-document desired length (None for free decoding), grouping the length
      report. Without it each system's outputs form a single `'free'` group.
    :param iterations: Permutation-test iterations (approximate mode).
    :param seed: Seeds the permutation tests.
    :param exact: See :func:`permutation_test`.
    :param bin_width: Length-histogram bin width.
    :param workers: Processes for per-document scoring.
    :return: An :class:`EvalReport`.
    """
    if not systems:
        raise InputValidationError("No systems to evaluate.")
    if not limits:
        raise InputValidationError("At least one limit is required.")
    num_docs = len(references)
    for name, outputs in systems.items():
        if len(outputs) != num_docs:
            raise AlignmentError(f"System '{name}' has {len(outputs)} outputs for {num_docs} reference sets.")
    for i, refs in enumerate(references):
        if not refs:
            raise InputValidationError(f"Document {i} has no references.")

    names = list(systems)
    report = EvalReport(limits=list(limits), systems=names)
    for name in names:
        report.scores[name] = {}
        report.per_document[name] = {}
        for limit in limits:
            docs = _score_all(systems[name], references, limit, workers)
            report.per_document[name][limit] = docs
            report.scores[name][limit] = {m: float(np.mean([getattr(d, m) for d in docs])) for m in METRICS}

    for limit in limits:
        report.p_values[limit] = {m: {} for m in METRICS}
        for a, b in combinations(names, 2):
            for m in METRICS:
                p = permutation_test(
                    [getattr(d, m) for d in report.per_document[a][limit]],
                    [getattr(d, m) for d in report.per_document[b][limit]],
                    iterations=iterations,
                    seed=seed,
                    exact=exact
                )
                report.p_values[limit][m][pair_key(a, b)] = p

    for name in names:
        labels = (desired or {}).get(name)
        if labels is None:
            labels = [None] * num_docs
        elif len(labels) != num_docs:
            raise AlignmentError(f"System '{name}' has {len(labels)} desired lengths for {num_docs} documents.")
        grouped: Dict[GroupLabel, List[Tokens]] = {}
        for label, output in zip(labels, systems[name]):
            grouped.setdefault(FREE if label is None else int(label), []).append(output)
        report.length_groups[name] = length_report(grouped, bin_width=bin_width)
    return report


def write_length_histograms(path: str, report: EvalReport):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['system', 'group', 'bin_start', 'count'])
        for name, groups in report.length_groups.items():
            for label, group in groups.items():
                for start, count in sorted(group.histogram.items()):
                    writer.writerow([name, label, start, count])
