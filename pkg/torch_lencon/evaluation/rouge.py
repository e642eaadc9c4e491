"""
ROUGE recall with multiple references. Matching is case-sensitive on the given tokens; candidates are truncated to a
byte limit before scoring, references never are.
"""
from collections import Counter
from dataclasses import dataclass, asdict
from typing import Sequence, Optional, Dict, Tuple

from torch_lencon.data.length import truncate_bytes
from torch_lencon.internals.exceptions import InputValidationError

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_references(references: Sequence[Tokens]):
    if not references:
        raise InputValidationError("At least one reference is required.")
    if isinstance(references[0], str):
        raise InputValidationError("`references` must be a list of token lists, not a single token list.")


def rouge_n(candidate: Tokens, references: Sequence[Tokens], n: int) -> float:
    """
    N-gram recall with counts pooled over references: matched n-grams (clipped per reference) over the total number
    of reference n-grams.
    """
    if n < 1:
        raise ValueError(f"`n` must be >= 1, got {n}.")
    _check_references(references)
    cand = ngrams(candidate, n)
    matched, total = 0, 0
    for ref in references:
        ref_grams = ngrams(ref, n)
        matched += sum(min(count, cand[gram]) for gram, count in ref_grams.items())
        total += sum(ref_grams.values())
    return matched / total if total else 0.0


def lcs_length(a: Tokens, b: Tokens) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Tokens, references: Sequence[Tokens]) -> float:
    """
    Longest-common-subsequence recall, the maximum over references.
    """
    _check_references(references)
    return max(lcs_length(candidate, ref) / len(ref) if ref else 0.0 for ref in references)


@dataclass(frozen=True)
class RougeScores:
    rouge_1: float
    rouge_2: float
    rouge_l: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


METRICS = ('rouge_1', 'rouge_2', 'rouge_l')


def score_document(candidate: Tokens, references: Sequence[Tokens], limit: Optional[int] = None) -> RougeScores:
    if limit is not None:
        candidate = truncate_bytes(candidate, limit)
    return RougeScores(
        rouge_1=rouge_n(candidate, references, 1),
        rouge_2=rouge_n(candidate, references, 2),
        rouge_l=rouge_l(candidate, references)
    )


def _score_args(args: Tuple[Tokens, Sequence[Tokens], Optional[int]]) -> RougeScores:
    return score_document(*args)
