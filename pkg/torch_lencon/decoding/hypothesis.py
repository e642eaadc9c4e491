from dataclasses import dataclass
from typing import Tuple, Optional

from torch_lencon.data.vocab import BOS_ID, EOS_ID
from torch_lencon.model.states import DecoderState


@dataclass(frozen=True)
class BeamHypothesis:
    """
    A partial or finished output. `tokens` excludes BOS and, once finished, ends with EOS; `bytes` is the rendered
    length of the content tokens. A hypothesis finalized by EOS replacement records the word it dropped and that
    word's cost (separator included).
    """
    tokens: Tuple[int, ...]
    logprob: float
    bytes: int
    finished: bool = False
    state: Optional[DecoderState] = None
    replaced_token: Optional[int] = None
    replaced_cost: Optional[int] = None

    @property
    def last_token(self) -> int:
        return self.tokens[-1] if self.tokens else BOS_ID

    @property
    def content(self) -> Tuple[int, ...]:
        if self.tokens and self.tokens[-1] == EOS_ID:
            return self.tokens[:-1]
        return self.tokens

    @property
    def was_replaced(self) -> bool:
        return self.replaced_token is not None

    @property
    def sort_key(self) -> Tuple[float, Tuple[int, ...]]:
        # higher logprob first, then the lexicographically smaller token sequence:
        return -self.logprob, self.tokens

    def extend(self, token: int, logprob: float, cost: int, state: DecoderState) -> 'BeamHypothesis':
        return BeamHypothesis(
            tokens=self.tokens + (token,),
            logprob=self.logprob + logprob,
            bytes=self.bytes + cost,
            state=state
        )

    def finish(self, eos_logprob: float) -> 'BeamHypothesis':
        return BeamHypothesis(tokens=self.tokens + (EOS_ID,), logprob=self.logprob + eos_logprob, bytes=self.bytes,
                              finished=True)

    def finish_replacing(self, token: int, cost: int, eos_logprob: float) -> 'BeamHypothesis':
        return BeamHypothesis(
            tokens=self.tokens + (EOS_ID,),
            logprob=self.logprob + eos_logprob,
            bytes=self.bytes,
            finished=True,
            replaced_token=token,
            replaced_cost=cost
        )

    def __repr__(self) -> str:
        status = 'finished' if self.finished else 'live'
        return f"BeamHypothesis(tokens={self.tokens}, logprob={self.logprob:.4f}, bytes={self.bytes}, {status})"
