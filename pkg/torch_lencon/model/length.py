from typing import Union

import torch
from torch import Tensor

from torch_lencon.data.length import utf8_bytes


def remaining_length_update(l_t: int, emitted: str, is_first_word: bool) -> int:
    """
    Charge an emitted word against the remaining byte budget: its UTF-8 bytes, plus one for the separating space
    unless it is the first word. Clamped at zero.
    """
    if l_t < 0:
        raise ValueError(f"`l_t` must be >= 0, got {l_t}.")
    cost = utf8_bytes(emitted) + (0 if is_first_word else 1)
    return max(0, l_t - cost)


def charge_fed_tokens(remaining: Tensor,
                      token_cost: Union[int, Tensor],
                      position: int) -> Tensor:
    """
    The tensor form of :func:`remaining_length_update`, applied when a token is fed to the decoder. `position` is the
    number of tokens fed before this one: the BOS (position 0) is free and the first word (position 1) carries no
    separator.
    """
    if position == 0:
        return remaining
    cost = torch.as_tensor(token_cost, dtype=torch.int64)
    if position > 1:
        cost = cost + 1
    return torch.clamp(remaining - cost, min=0)
