from torch_lencon.data.length import utf8_bytes, byte_length, truncate_bytes
from torch_lencon.data.vocab import Vocabulary, build_vocab, BOS, EOS, UNK, BOS_ID, EOS_ID, UNK_ID
from torch_lencon.data.corpus import (
    SentenceSummaryPair,
    load_corpus,
    save_corpus,
    split_corpus,
    LengthStats,
    length_stats,
    write_length_stats
)
from torch_lencon.data.simulate import ToyCorpusConfig, gen_toy_corpus
