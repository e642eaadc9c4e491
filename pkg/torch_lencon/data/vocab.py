from collections import Counter
from typing import Iterable, Sequence, List, Tuple, Optional, Dict

from lazy_object_proxy.utils import cached_property

from torch_lencon.data.length import utf8_bytes
from torch_lencon.internals.exceptions import CorpusFormatError
from torch_lencon.internals.repr import NiceRepr

BOS, EOS, UNK = '<s>', '</s>', '<unk>'
BOS_ID, EOS_ID, UNK_ID = 0, 1, 2
RESERVED = (BOS, EOS, UNK)


class Vocabulary(NiceRepr):
    """
    A bijection between tokens and integer ids. Ids 0, 1, 2 are always the BOS, EOS and UNK tags; content tokens
    follow in the order given.
    """
    _repr_attrs = ('size',)

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: List[str] = list(RESERVED)
        self.token_to_id: Dict[str, int] = {tok: i for i, tok in enumerate(RESERVED)}
        for tok in tokens:
            if tok in self.token_to_id:
                raise ValueError(f"Duplicate token '{tok}' (or it collides with a reserved tag).")
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"Tokens must be non-empty and contain no whitespace, got {tok!r}.")
            self.token_to_id[tok] = len(self.id_to_token)
            self.id_to_token.append(tok)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def encode(self, tokens: Sequence[str], add_eos: bool = False) -> List[int]:
        ids = [self.token_to_id.get(tok, UNK_ID) for tok in tokens]
        if add_eos:
            ids.append(EOS_ID)
        return ids

    def decode(self, ids: Iterable[int]) -> List[str]:
        """
        Map ids to tokens, dropping BOS and stopping at EOS.
        """
        out = []
        for i in ids:
            i = int(i)
            if i == EOS_ID:
                break
            if i == BOS_ID:
                continue
            out.append(self.id_to_token[i])
        return out

    @cached_property
    def byte_costs(self) -> List[int]:
        """
        UTF-8 byte length of each token, indexed by id.
        """
        return [utf8_bytes(tok) for tok in self.id_to_token]

    def save(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            for tok in self.id_to_token:
                f.write(tok + '\n')

    @classmethod
    def load(cls, path: str) -> 'Vocabulary':
        with open(path, 'r', encoding='utf-8') as f:
            tokens = [line.rstrip('\n') for line in f]
        if tuple(tokens[:len(RESERVED)]) != RESERVED:
            raise CorpusFormatError(f"Expected the first lines to be {RESERVED}.", path=path)
        return cls(tokens[len(RESERVED):])


def _truncated_vocab(counts: Counter, max_size: Optional[int]) -> Vocabulary:
    for tok in RESERVED:
        counts.pop(tok, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if max_size is not None:
        if max_size < len(RESERVED):
            raise ValueError(f"Vocabulary size must be >= {len(RESERVED)} (the reserved tags), got {max_size}.")
        ranked = ranked[:max_size - len(RESERVED)]
    return Vocabulary(tok for tok, _ in ranked)


def build_vocab(pairs: Sequence['SentenceSummaryPair'],
                max_src: Optional[int] = None,
                max_tgt: Optional[int] = None) -> Tuple[Vocabulary, Vocabulary]:
    """
    Build separate source/target vocabularies, sorted by frequency (ties broken lexicographically) and truncated so
    that each, including the reserved tags, has at most `max_src` / `max_tgt` entries.
    """
    if not pairs:
        raise ValueError("Cannot build a vocabulary from an empty corpus.")
    src_counts, tgt_counts = Counter(), Counter()
    for pair in pairs:
        src_counts.update(pair.source)
        tgt_counts.update(pair.target)
    return _truncated_vocab(src_counts, max_src), _truncated_vocab(tgt_counts, max_tgt)
