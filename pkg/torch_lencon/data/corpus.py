import csv
from dataclasses import dataclass, field
from typing import Sequence, List, Tuple, Union, Optional, Dict, Iterable
from warnings import warn

import numpy as np

from torch_lencon.data.length import byte_length
from torch_lencon.internals.exceptions import CorpusFormatError, InputValidationError


@dataclass(frozen=True)
class SentenceSummaryPair:
    source: Tuple[str, ...]
    target: Tuple[str, ...]
    target_bytes: int

    def __post_init__(self):
        if not self.source or not self.target:
            raise InputValidationError("Both the source and the target must be non-empty.")
        if self.target_bytes != byte_length(self.target):
            raise InputValidationError(
                f"`target_bytes` is {self.target_bytes} but the target renders to {byte_length(self.target)} bytes."
            )

    @classmethod
    def of(cls, source: Sequence[str], target: Sequence[str]) -> 'SentenceSummaryPair':
        return cls(source=tuple(source), target=tuple(target), target_bytes=byte_length(target))

    @property
    def source_bytes(self) -> int:
        return byte_length(self.source)

    def to_line(self) -> str:
        return " ".join(self.source) + "\t" + " ".join(self.target)


def load_corpus(path: str) -> List[SentenceSummaryPair]:
    """
    Read a `source<TAB>target` file with space-separated tokens. Blank lines are skipped with a warning; every other
    problem raises a `CorpusFormatError` naming the line.
    """
    pairs = []
    with open(path, 'rb') as f:
        for line_no, raw in enumerate(f, 1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise CorpusFormatError("invalid UTF-8", path=path, line_no=line_no) from e
            line = line.rstrip('\r\n')
            if not line.strip():
                warn(f"{path}:{line_no}: skipping blank line")
                continue
            if line.count('\t') != 1:
                raise CorpusFormatError(
                    f"expected exactly one TAB between source and target, found {line.count(chr(9))}",
                    path=path,
                    line_no=line_no
                )
            src, tgt = line.split('\t')
            source, target = src.split(), tgt.split()
            if not source:
                raise CorpusFormatError("empty source side", path=path, line_no=line_no)
            if not target:
                raise CorpusFormatError("empty target side", path=path, line_no=line_no)
            pairs.append(SentenceSummaryPair.of(source, target))
    return pairs


def save_corpus(pairs: Iterable[SentenceSummaryPair], path: str):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for pair in pairs:
            f.write(pair.to_line() + '\n')


def split_corpus(pairs: Sequence[SentenceSummaryPair],
                 fractions: Sequence[float] = (.8, .1, .1),
                 seed: int = 0) -> List[List[SentenceSummaryPair]]:
    """
    Shuffle with `seed`, then cut into consecutive parts with the given fractions (the last part takes the rest).
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise ValueError(f"`fractions` must be non-negative and sum to 1, got {fractions}.")
    order = np.random.default_rng(seed).permutation(len(pairs))
    out, start = [], 0
    for i, frac in enumerate(fractions):
        end = len(pairs) if i == len(fractions) - 1 else start + int(round(frac * len(pairs)))
        out.append([pairs[j] for j in order[start:end]])
        start = end
    return out


# statistics ----------------------------------------------------------------------------------------------------------
LengthItem = Union[SentenceSummaryPair, int, Sequence[str]]


@dataclass
class LengthStats:
    count: int
    mean: float
    bin_width: int
    histogram: Dict[int, int] = field(default_factory=dict)
    ratio_mean: Optional[float] = None

    def rows(self) -> List[Tuple[int, int]]:
        return sorted(self.histogram.items())


def _item_length(item: LengthItem) -> int:
    if isinstance(item, SentenceSummaryPair):
        return item.target_bytes
    if isinstance(item, (int, np.integer)):
        return int(item)
    return byte_length(item)


def histogram(lengths: Sequence[int], bin_width: int = 5) -> Dict[int, int]:
    """
    Counts per fixed-width bin, keyed by bin start; covers every bin from the smallest to the largest occupied one.
    """
    if bin_width < 1:
        raise ValueError(f"`bin_width` must be positive, got {bin_width}.")
    bins = np.asarray(lengths, dtype='int64') // bin_width
    lo = int(bins.min())
    counts = np.bincount(bins - lo)
    return {int((lo + i) * bin_width): int(c) for i, c in enumerate(counts)}


def length_stats(items: Sequence[LengthItem], bin_width: int = 5) -> LengthStats:
    """
    Mean byte length and histogram of a corpus (target side) or of decoded outputs (token lists or lengths). For pairs,
    also the mean compression ratio (target bytes / source bytes).
    """
    if not len(items):
        raise InputValidationError("Cannot compute length statistics of an empty collection.")
    lengths = [_item_length(item) for item in items]
    ratio_mean = None
    if all(isinstance(item, SentenceSummaryPair) for item in items):
        ratio_mean = float(np.mean([item.target_bytes / item.source_bytes for item in items]))
    return LengthStats(
        count=len(lengths),
        mean=float(np.mean(lengths)),
        bin_width=bin_width,
        histogram=histogram(lengths, bin_width),
        ratio_mean=ratio_mean
    )


def write_length_stats(path: str, stats: LengthStats):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['bin_start', 'count'])
        writer.writerows(stats.rows())
        writer.writerow(['mean', repr(stats.mean)])
        if stats.ratio_mean is not None:
            writer.writerow(['ratio_mean', repr(stats.ratio_mean)])
