import unittest
import warnings

from torch_lencon.data.corpus import length_stats
from torch_lencon.data.length import byte_length
from torch_lencon.data.simulate import ToyCorpusConfig, gen_toy_corpus
from torch_lencon.data.vocab import RESERVED, build_vocab


class TestToyCorpus(unittest.TestCase):
    config = ToyCorpusConfig(size=300, vocab_size=60, seed=7)

    def setUp(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            self.pairs = gen_toy_corpus(self.config)

    def test_deterministic(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            self.assertListEqual(gen_toy_corpus(self.config), self.pairs)
            other = gen_toy_corpus(ToyCorpusConfig(size=300, vocab_size=60, seed=8))
        self.assertNotEqual(other, self.pairs)

    def test_prefix_maximality(self):
        lo, hi = self.config.budget_range
        for pair in self.pairs:
            n = len(pair.target)
            self.assertTupleEqual(pair.source[:n], pair.target)
            self.assertEqual(pair.target_bytes, byte_length(pair.target))
            # words are at most 8 bytes, so no pair is flagged with budgets >= 10:
            self.assertLessEqual(pair.target_bytes, hi)
            if n < len(pair.source):
                self.assertGreater(byte_length(pair.source[:n + 1]), lo)

    def test_ranges(self):
        src_lo, src_hi = self.config.source_len_range
        words = set()
        for pair in self.pairs:
            self.assertTrue(src_lo <= len(pair.source) <= src_hi)
            words.update(pair.source)
        self.assertTrue(words.isdisjoint(RESERVED))
        self.assertLessEqual(len(words), self.config.num_content_words)
        self.assertTrue(all(2 <= len(w) <= 8 for w in words))
        src_vocab, _ = build_vocab(self.pairs)
        self.assertLessEqual(len(src_vocab), self.config.vocab_size)

    def test_stats_within_budget_envelope(self):
        stats = length_stats(self.pairs)
        lo, hi = self.config.budget_range
        self.assertLessEqual(max(stats.histogram), hi)
        self.assertGreater(stats.mean, lo / 2)
        self.assertLess(stats.mean, hi)

    def test_identity_summary(self):
        config = ToyCorpusConfig(size=20, vocab_size=20, source_len_range=(2, 3), budget_range=(100, 100), seed=0)
        for pair in gen_toy_corpus(config):
            self.assertTupleEqual(pair.source, pair.target)

    def test_flagged_first_token(self):
        config = ToyCorpusConfig(size=10, vocab_size=20, budget_range=(0, 0), seed=0)
        with self.assertWarns(UserWarning):
            pairs = gen_toy_corpus(config)
        for pair in pairs:
            self.assertTupleEqual(pair.target, pair.source[:1])

    def test_invalid(self):
        with self.assertRaises(ValueError):
            ToyCorpusConfig(size=0)
        with self.assertRaises(ValueError):
            ToyCorpusConfig(size=1, vocab_size=3)
        with self.assertRaises(ValueError):
            ToyCorpusConfig(size=1, source_len_range=(5, 4))
