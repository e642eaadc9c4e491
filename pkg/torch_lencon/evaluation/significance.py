from typing import Sequence, Optional

import numpy as np

from torch_lencon.internals.exceptions import AlignmentError, InputValidationError

EXACT_MAX_N = 12
_TOL = 1e-12


def _sign_patterns(n: int) -> np.ndarray:
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    return bits * 2 - 1


def permutation_test(scores_a: Sequence[float],
                     scores_b: Sequence[float],
                     iterations: int = 10_000,
                     seed: int = 0,
                     exact: Optional[bool] = None,
                     chunk_size: int = 10_000) -> float:
    """
    Two-sided paired permutation test on the difference of mean per-document scores.

    :param scores_a: Per-document scores of one system.
    :param scores_b: Per-document scores of the other, aligned with `scores_a`.
    :param iterations: Random swap patterns drawn in approximate mode.
    :param seed: Seeds the swap patterns.
    :param exact: Enumerate all ``2^n`` swap patterns (p = fraction at least as extreme). None chooses exact
      enumeration when ``n <= 12``; otherwise ``p = (1 + #extreme) / (1 + iterations)``.
    :return: The p-value, in (0, 1].
    """
    a = np.asarray(scores_a, dtype='float64')
    b = np.asarray(scores_b, dtype='float64')
    if a.shape != b.shape or a.ndim != 1:
        raise AlignmentError(f"Score lists must be aligned, got lengths {len(scores_a)} and {len(scores_b)}.")
    n = len(a)
    if n < 1:
        raise InputValidationError("Need at least one document.")
    if exact is None:
        exact = n <= EXACT_MAX_N
    if exact and n > 20:
        raise InputValidationError(f"Exact enumeration of 2^{n} patterns is infeasible; use `exact=False`.")

    diffs = a - b
    observed = abs(diffs.mean())
    if exact:
        stats = np.abs(_sign_patterns(n) @ diffs) / n
        return float(np.mean(stats >= observed - _TOL))

    if iterations < 1:
        raise ValueError(f"`iterations` must be positive, got {iterations}.")
    rng = np.random.default_rng(seed)
    count, remaining = 0, iterations
    while remaining:
        size = min(chunk_size, remaining)
        signs = rng.integers(0, 2, size=(size, n)) * 2 - 1
        count += int(np.sum(np.abs(signs @ diffs) / n >= observed - _TOL))
        remaining -= size
    return (1 + count) / (1 + iterations)
