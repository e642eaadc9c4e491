from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence, Tuple, List, Iterator, Optional

import numpy as np
import torch
from torch import Tensor

from torch_lencon.data.corpus import SentenceSummaryPair
from torch_lencon.data.vocab import Vocabulary, EOS_ID
from torch_lencon.internals.exceptions import InputValidationError
from torch_lencon.internals.repr import NiceRepr
from torch_lencon.internals.utils import chunks
from torch_lencon.training.config import TrainConfig


@dataclass(frozen=True)
class EncodedPair:
    """
    A pair as token ids. `target` ends with EOS; `desired` is the reference summary's byte length.
    """
    source: Tuple[int, ...]
    target: Tuple[int, ...]
    desired: int


def encode_corpus(pairs: Sequence[SentenceSummaryPair],
                  src_vocab: Vocabulary,
                  tgt_vocab: Vocabulary) -> List[EncodedPair]:
    return [
        EncodedPair(
            source=tuple(src_vocab.encode(pair.source)),
            target=tuple(tgt_vocab.encode(pair.target, add_eos=True)),
            desired=pair.target_bytes
        )
        for pair in pairs
    ]


class Batch(NiceRepr):
    """
    Sources ``[B, N]``; targets ``[B, M]`` right-padded with EOS; per-row target lengths and desired lengths.
    """
    _repr_attrs = ('sources', 'targets')

    def __init__(self, sources: Tensor, targets: Tensor, target_lengths: Tensor, desired: Tensor):
        self.sources = sources
        self.targets = targets
        self.target_lengths = target_lengths
        self.desired = desired

    def __len__(self) -> int:
        return self.sources.shape[0]

    @property
    def num_target_tokens(self) -> int:
        return int(self.target_lengths.sum())


def collate(pairs: Sequence[EncodedPair]) -> Batch:
    if not pairs:
        raise InputValidationError("Cannot collate an empty batch.")
    lengths = {len(p.source) for p in pairs}
    if len(lengths) > 1:
        raise InputValidationError(f"A batch needs sources of one length, got lengths {sorted(lengths)}.")
    max_len = max(len(p.target) for p in pairs)
    targets = torch.full((len(pairs), max_len), EOS_ID, dtype=torch.int64)
    for i, p in enumerate(pairs):
        targets[i, :len(p.target)] = torch.tensor(p.target, dtype=torch.int64)
    return Batch(
        sources=torch.tensor([p.source for p in pairs], dtype=torch.int64),
        targets=targets,
        target_lengths=torch.tensor([len(p.target) for p in pairs], dtype=torch.int64),
        desired=torch.tensor([p.desired for p in pairs], dtype=torch.int64)
    )


def length_groups(pairs: Sequence[EncodedPair], batch_size: int) -> Tuple[List[List[EncodedPair]], List[List[EncodedPair]]]:
    """
    Bucket by exact source length and cut each bucket into groups of `batch_size`.

    :return: The full groups and the partial (leftover) groups, each ordered by source length.
    """
    buckets = defaultdict(list)
    for pair in pairs:
        buckets[len(pair.source)].append(pair)
    full, partial = [], []
    for length in sorted(buckets):
        for group in chunks(buckets[length], batch_size):
            (full if len(group) == batch_size else partial).append(list(group))
    return full, partial


def group_stream(corpus: Sequence[EncodedPair],
                 config: TrainConfig,
                 rng: np.random.Generator) -> Iterator[List[EncodedPair]]:
    """
    An endless stream of source-length-homogeneous groups. Each cycle samples `config.sample_pool` pairs (with
    replacement only if the corpus is smaller), shuffles the full groups, appends the partial ones, and yields up to
    `config.regroup_every` groups before sampling again.
    """
    if not len(corpus):
        raise InputValidationError("Cannot make batches from an empty corpus.")
    while True:
        idx = rng.choice(len(corpus), size=config.sample_pool, replace=len(corpus) < config.sample_pool)
        full, partial = length_groups([corpus[i] for i in idx], config.batch_size)
        groups = [full[i] for i in rng.permutation(len(full))] + partial
        for group in groups[:config.regroup_every]:
            yield group


def make_batches(corpus: Sequence[EncodedPair],
                 config: TrainConfig,
                 rng: Optional[np.random.Generator] = None) -> Iterator[Batch]:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    for group in group_stream(corpus, config, rng):
        yield collate(group)
