from torch_lencon.decoding.constraint import DecodeConstraint, Method
from torch_lencon.decoding.hypothesis import BeamHypothesis
from torch_lencon.decoding.beam_search import (
    Action,
    DecodeResult,
    apply_fixlen,
    apply_fixrng,
    beam_search,
    decode,
    decode_learned,
    greedy_decode
)
from torch_lencon.decoding.parallel import DecodeTask, decode_corpus
