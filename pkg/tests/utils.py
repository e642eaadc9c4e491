import os
import tempfile
import unittest
from typing import Sequence, Optional

from torch_lencon.data.vocab import Vocabulary
from torch_lencon.model.config import ModelConfig, Variant
from torch_lencon.model.encoder_decoder import EncoderDecoder

SLOW = bool(os.environ.get('LENCON_SLOW'))

# content words with byte lengths 1..5 (ids 3..7):
TINY_WORDS = ('a', 'bb', 'ccc', 'dddd', 'eeeee')


def tiny_vocab(words: Sequence[str] = TINY_WORDS) -> Vocabulary:
    return Vocabulary(words)


def tiny_model(variant: str = 'plain',
               vocab: Optional[Vocabulary] = None,
               V_src: int = 8,
               E: int = 4,
               H: int = 4,
               D_len: int = 4,
               L_types: int = 40,
               init_scale: float = .5,
               seed: int = 0) -> EncoderDecoder:
    vocab = vocab or tiny_vocab()
    config = ModelConfig(
        V_src=V_src,
        V_tgt=len(vocab),
        variant=Variant.parse(variant),
        E=E,
        H=H,
        D_len=D_len,
        L_types=L_types,
        init_scale=init_scale,
        seed=seed
    )
    return EncoderDecoder.from_config(config, vocab)


class TempDirTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name: str, content: bytes) -> str:
        path = os.path.join(self.tmp, name)
        with open(path, 'wb') as f:
            f.write(content)
        return path
