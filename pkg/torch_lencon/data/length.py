"""
Length accounting. The unit of length is the UTF-8 byte count of the space-joined token sequence.
"""
from typing import Sequence, List


def utf8_bytes(token: str) -> int:
    return len(token.encode('utf-8'))


def byte_length(tokens: Sequence[str]) -> int:
    """
    :return: The byte length of `tokens` rendered with single-space separators.
    """
    return sum(utf8_bytes(tok) for tok in tokens) + max(0, len(tokens) - 1)


def truncate_bytes(tokens: Sequence[str], limit: int) -> List[str]:
    """
    The longest prefix of `tokens` whose rendered byte length is <= `limit` (whole tokens only).
    """
    if limit < 0:
        raise ValueError(f"`limit` must be >= 0, got {limit}.")
    out, used = [], 0
    for tok in tokens:
        cost = utf8_bytes(tok) + (1 if out else 0)
        if used + cost > limit:
            break
        out.append(tok)
        used += cost
    return out
