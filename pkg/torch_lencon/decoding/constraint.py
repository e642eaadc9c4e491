from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

UNCONSTRAINED_STEP_CAP = 120


class Method(str, Enum):
    FREE = 'free'
    FIXLEN = 'fixlen'
    FIXRNG = 'fixrng'

    @classmethod
    def parse(cls, value: Union[str, 'Method']) -> 'Method':
        if isinstance(value, Method):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown method '{value}', expected one of {[m.value for m in cls]}.") from None


DEFAULT_BEAM_SIZE = {Method.FREE: 10, Method.FIXLEN: 10, Method.FIXRNG: 30}


@dataclass(frozen=True)
class DecodeConstraint:
    """
    How beam search treats output length.

    - `free`: plain beam search.
    - `fixlen`: EOS is never chosen; a hypothesis whose next word would exceed `desired` bytes is finalized by
      replacing that word with EOS.
    - `fixrng`: EOS before `min_bytes` is discarded; a word taking the output past `max_bytes` is replaced by EOS.

    :param beam_size: Defaults to 10 (free, fixlen) or 30 (fixrng).
    :param max_steps: Overrides the step cap (four times `desired` / `max_bytes`, else 120).
    """
    method: Method = Method.FREE
    desired: Optional[int] = None
    min_bytes: int = 0
    max_bytes: Optional[int] = None
    beam_size: Optional[int] = None
    max_steps: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'method', Method.parse(self.method))
        if self.beam_size is None:
            object.__setattr__(self, 'beam_size', DEFAULT_BEAM_SIZE[self.method])
        if self.beam_size < 1:
            raise ValueError(f"`beam_size` must be >= 1, got {self.beam_size}.")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"`max_steps` must be >= 1, got {self.max_steps}.")

        if self.method is Method.FIXLEN:
            if self.desired is None or self.desired < 0:
                raise ValueError(f"`fixlen` requires `desired` >= 0, got {self.desired}.")
        elif self.desired is not None:
            raise ValueError(f"`desired` only applies to `fixlen`, not `{self.method.value}`.")

        if self.method is Method.FIXRNG:
            if self.min_bytes < 0:
                raise ValueError(f"`min_bytes` must be >= 0, got {self.min_bytes}.")
            if self.max_bytes is not None and self.max_bytes < self.min_bytes:
                raise ValueError(f"`min_bytes` ({self.min_bytes}) exceeds `max_bytes` ({self.max_bytes}).")
        elif self.min_bytes or self.max_bytes is not None:
            raise ValueError(f"`min_bytes`/`max_bytes` only apply to `fixrng`, not `{self.method.value}`.")

    @classmethod
    def free(cls, **kwargs) -> 'DecodeConstraint':
        return cls(method=Method.FREE, **kwargs)

    @classmethod
    def fixlen(cls, desired: int, **kwargs) -> 'DecodeConstraint':
        return cls(method=Method.FIXLEN, desired=desired, **kwargs)

    @classmethod
    def fixrng(cls, min_bytes: int = 0, max_bytes: Optional[int] = None, **kwargs) -> 'DecodeConstraint':
        return cls(method=Method.FIXRNG, min_bytes=min_bytes, max_bytes=max_bytes, **kwargs)

    @property
    def step_cap(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        if self.method is Method.FIXLEN:
            return max(4 * self.desired, 1)
        if self.method is Method.FIXRNG and self.max_bytes is not None:
            return max(4 * self.max_bytes, 1)
        return UNCONSTRAINED_STEP_CAP

    @property
    def length_hint(self) -> Optional[int]:
        """
        The length a length-conditioned model is asked for when decoding under this constraint.
        """
        if self.method is Method.FIXLEN:
            return self.desired
        if self.method is Method.FIXRNG:
            return self.max_bytes
        return None

    def describe(self) -> str:
        if self.method is Method.FIXLEN:
            desc = f"fixlen(desired={self.desired})"
        elif self.method is Method.FIXRNG:
            upper = '∞' if self.max_bytes is None else self.max_bytes
            desc = f"fixrng(min={self.min_bytes}, max={upper})"
        else:
            desc = "free"
        return f"{desc}, beam={self.beam_size}"
