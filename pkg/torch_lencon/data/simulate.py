"""
A synthetic length-conditioned corpus: each summary is the longest prefix of its source that fits a sampled byte budget,
so both the length and the content of a correct output are known exactly.
"""
from dataclasses import dataclass
from string import ascii_lowercase
from typing import Tuple, List
from warnings import warn

import numpy as np

from torch_lencon.data.corpus import SentenceSummaryPair
from torch_lencon.data.length import truncate_bytes
from torch_lencon.data.vocab import RESERVED


@dataclass(frozen=True)
class ToyCorpusConfig:
    size: int
    vocab_size: int = 200
    source_len_range: Tuple[int, int] = (15, 30)
    budget_range: Tuple[int, int] = (10, 60)
    word_bytes_range: Tuple[int, int] = (2, 8)
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"`size` must be positive, got {self.size}.")
        if self.vocab_size <= len(RESERVED):
            raise ValueError(f"`vocab_size` must exceed {len(RESERVED)} (the reserved tags), got {self.vocab_size}.")
        for name in ('source_len_range', 'budget_range', 'word_bytes_range'):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0 or (name != 'budget_range' and lo < 1):
                raise ValueError(f"`{name}` must be a non-empty range of positive integers, got {(lo, hi)}.")
        lo, hi = self.word_bytes_range
        capacity = sum(len(ascii_lowercase) ** n for n in range(lo, hi + 1))
        if self.num_content_words > capacity:
            raise ValueError(f"Cannot make {self.num_content_words} distinct words with {lo}-{hi} letters.")

    @property
    def num_content_words(self) -> int:
        return self.vocab_size - len(RESERVED)


def toy_words(config: ToyCorpusConfig, rng: np.random.Generator) -> List[str]:
    """
    Distinct lowercase words whose byte lengths are spread uniformly over `config.word_bytes_range`.
    """
    lo, hi = config.word_bytes_range
    letters = np.array(list(ascii_lowercase))
    words, seen = [], set()
    while len(words) < config.num_content_words:
        n = int(rng.integers(lo, hi + 1))
        word = "".join(rng.choice(letters, size=n))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def gen_toy_corpus(config: ToyCorpusConfig) -> List[SentenceSummaryPair]:
    """
    Sample sources uniformly from the content words and a byte budget per pair; the target is the longest source
    prefix whose rendered length fits the budget. When even the first token does not fit, the target is that single
    token (these pairs are counted and reported with a warning). Deterministic given `config.seed`.
    """
    rng = np.random.default_rng(config.seed)
    words = toy_words(config, rng)
    src_lo, src_hi = config.source_len_range
    bud_lo, bud_hi = config.budget_range

    pairs, num_flagged = [], 0
    for _ in range(config.size):
        length = int(rng.integers(src_lo, src_hi + 1))
        source = [words[i] for i in rng.integers(0, len(words), size=length)]
        budget = int(rng.integers(bud_lo, bud_hi + 1))
        target = truncate_bytes(source, budget)
        if not target:
            target = source[:1]
            num_flagged += 1
        pairs.append(SentenceSummaryPair.of(source, target))

    if num_flagged:
        warn(f"{num_flagged:,} of {config.size:,} pairs had a budget below their first token's length; their target "
             f"is the single first token.")
    return pairs
