from typing import Optional, Sequence, Union

import torch
from torch import Tensor

from lazy_object_proxy.utils import cached_property

from torch_lencon.internals.exceptions import ShapeError, InputValidationError
from torch_lencon.internals.repr import NiceRepr
from torch_lencon.numerics import elementwise, stack


class EncoderStates(NiceRepr):
    """
    Per-position hidden states and memory cells of both encoder directions, ``[N, H]`` for one source or
    ``[B, N, H]`` for a batch of equal-length sources.
    """
    _repr_attrs = ('fwd_h', 'bwd_h')

    def __init__(self, fwd_h: Tensor, fwd_c: Tensor, bwd_h: Tensor, bwd_c: Tensor):
        shape = fwd_h.shape
        for t in (fwd_c, bwd_h, bwd_c):
            if t.shape != shape:
                raise ShapeError('EncoderStates', shape, t.shape)
        if len(shape) not in (2, 3) or shape[-2] < 1:
            raise ShapeError('EncoderStates', shape)
        self.fwd_h = fwd_h
        self.fwd_c = fwd_c
        self.bwd_h = bwd_h
        self.bwd_c = bwd_c

    @property
    def num_positions(self) -> int:
        return self.fwd_h.shape[-2]

    @property
    def batch_size(self) -> Optional[int]:
        return self.fwd_h.shape[0] if self.fwd_h.dim() == 3 else None

    @cached_property
    def summed(self) -> Tensor:
        """
        The summarized states attention runs over: forward plus backward hidden state at each position.
        """
        return elementwise('add', self.fwd_h, self.bwd_h)

    @property
    def memory(self) -> Tensor:
        return self.summed

    @cached_property
    def memory_t(self) -> Tensor:
        return self.summed.transpose(-1, -2)


RemainingLike = Union[int, Tensor, None]


class DecoderState(NiceRepr):
    """
    The recurrent state carried between decoder steps. ``h``, ``c`` and ``fed`` (the previous attentional vector,
    zeros before the first step) are ``[H]`` or ``[B, H]``. ``remaining`` is the byte budget left (only tracked by
    the length-embedding variant) and ``position`` counts the tokens fed in so far, BOS included.
    """
    _repr_attrs = ('h', 'remaining', 'position')

    def __init__(self, h: Tensor, c: Tensor, fed: Tensor, remaining: RemainingLike = None, position: int = 0):
        if not (h.shape == c.shape == fed.shape):
            raise ShapeError('DecoderState', h.shape, c.shape, fed.shape)
        if remaining is not None:
            remaining = torch.as_tensor(remaining, dtype=torch.int64)
            if remaining.shape != h.shape[:-1]:
                raise ShapeError('DecoderState', h.shape[:-1], remaining.shape)
            if (remaining < 0).any():
                raise InputValidationError(f"Remaining length must be >= 0, got {remaining.tolist()}.")
        self.h = h
        self.c = c
        self.fed = fed
        self.remaining = remaining
        self.position = position

    @property
    def batch_size(self) -> Optional[int]:
        return self.h.shape[0] if self.h.dim() == 2 else None

    def row(self, i: int) -> 'DecoderState':
        if self.batch_size is None:
            raise RuntimeError("`row()` requires a batched state.")
        return DecoderState(
            h=self.h[i],
            c=self.c[i],
            fed=self.fed[i],
            remaining=None if self.remaining is None else self.remaining[i],
            position=self.position
        )

    @classmethod
    def stack(cls, states: Sequence['DecoderState']) -> 'DecoderState':
        """
        Stack unbatched states (all at the same position) into one batched state.
        """
        if not states:
            raise InputValidationError("Cannot stack an empty sequence of states.")
        positions = {s.position for s in states}
        if len(positions) > 1:
            raise InputValidationError(f"Cannot stack states at different positions: {sorted(positions)}.")
        remaining = None
        if states[0].remaining is not None:
            remaining = torch.stack([s.remaining for s in states])
        return cls(
            h=stack([s.h for s in states]),
            c=stack([s.c for s in states]),
            fed=stack([s.fed for s in states]),
            remaining=remaining,
            position=states[0].position
        )

    def tile(self, n: int) -> 'DecoderState':
        return type(self).stack([self] * n)
