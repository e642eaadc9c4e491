"""
Dense tensor primitives that the encoder-decoder is composed of.

Every tensor is a float64 ``torch.Tensor``; reverse-mode gradients come from torch's autograd graph. Each primitive
validates shapes before delegating to torch, and reports itself to any active :class:`ComputationTape` so the order of
recorded operations (and the order in which backward visits them) can be inspected.
"""
from typing import Union, Sequence, Optional, List, Tuple, Callable, Dict, Mapping, Iterable

import numpy as np
import torch
from torch import Tensor

from torch_lencon.internals.exceptions import ShapeError, NonFiniteError, InputValidationError
from torch_lencon.internals.repr import NiceRepr

DTYPE = torch.float64

# additive logit penalty standing in for a score of -inf:
MASK_PENALTY = -1e9

_active_tapes: List['ComputationTape'] = []


class ComputationTape(NiceRepr):
    """
    Records the primitives applied while the tape is active (used as a context manager). Calling :meth:`backward`
    runs backpropagation from a scalar and collects the indices of the recorded operations in the order their output
    gradients were computed.
    """
    _repr_attrs = ('num_records',)

    def __init__(self):
        self.records: List[Tuple[str, Tensor]] = []
        self.visited: List[int] = []

    def __enter__(self) -> 'ComputationTape':
        _active_tapes.append(self)
        return self

    def __exit__(self, *exc_info):
        _active_tapes.remove(self)

    @property
    def num_records(self) -> int:
        return len(self.records)

    @property
    def op_names(self) -> List[str]:
        return [op for op, _ in self.records]

    def record(self, op: str, output: Tensor) -> Tensor:
        idx = len(self.records)
        self.records.append((op, output))
        if output.requires_grad:
            output.register_hook(self._visit_hook(idx))
        return output

    def _visit_hook(self, idx: int) -> Callable:
        def hook(grad: Tensor):
            self.visited.append(idx)

        return hook

    def backward(self, loss: Tensor) -> List[int]:
        if loss.numel() != 1:
            raise ShapeError('backward', loss.shape, ())
        self.visited = []
        loss.backward()
        return list(self.visited)


def _record(op: str, output: Tensor) -> Tensor:
    for tape in _active_tapes:
        tape.record(op, output)
    return output


def tensor(values: Union[Sequence, np.ndarray, Tensor, float],
           dims: Optional[Sequence[int]] = None,
           requires_grad: bool = False) -> Tensor:
    """
    Create a float64 tensor, optionally reshaped to `dims` (row-major).
    """
    if isinstance(values, Tensor):
        out = values.detach().clone().to(DTYPE)
    else:
        out = torch.tensor(values, dtype=DTYPE)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if int(np.prod(dims)) != out.numel():
            raise ShapeError('tensor', out.shape, dims)
        out = out.reshape(dims)
    if requires_grad:
        out.requires_grad_(True)
    return out


def zeros(*dims: int) -> Tensor:
    return torch.zeros(dims, dtype=DTYPE)


def affine(W: Tensor, x: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """
    ``W x + b``. `x` may carry a leading batch dimension (``[B, n]``); `W` may too (``[B, m, n]``), in which case each
    batch element uses its own matrix.

    :param W: ``[m, n]`` or ``[B, m, n]``.
    :param x: ``[n]`` or ``[B, n]``.
    :param b: Optional ``[m]`` (broadcast over the batch) or ``[B, m]``.
    :return: ``[m]`` or ``[B, m]``.
    """
    if W.dim() not in (2, 3) or x.dim() not in (1, 2) or x.shape[-1] != W.shape[-1]:
        raise ShapeError('affine', W.shape, x.shape)
    if W.dim() == 3 and (x.dim() != 2 or x.shape[0] != W.shape[0]):
        raise ShapeError('affine', W.shape, x.shape)
    out = torch.matmul(W, x.unsqueeze(-1)).squeeze(-1)
    if b is not None:
        if b.shape[-1] != W.shape[-2] or b.dim() > out.dim() or (b.dim() == 2 and b.shape != out.shape):
            raise ShapeError('affine', W.shape, b.shape)
        out = out + b
    return _record('affine', out)


_UNARY = {'tanh': torch.tanh, 'sigmoid': torch.sigmoid}
_BINARY = {'mul': torch.mul, 'add': torch.add}


def elementwise(op: str, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """
    Pointwise `tanh`, `sigmoid` (unary) or `mul`, `add` (binary, equal shapes).
    """
    if op in _UNARY:
        if b is not None:
            raise TypeError(f"`{op}` takes a single tensor.")
        out = _UNARY[op](a)
    elif op in _BINARY:
        if b is None:
            raise TypeError(f"`{op}` takes two tensors.")
        if a.shape != b.shape:
            raise ShapeError(op, a.shape, b.shape)
        out = _BINARY[op](a, b)
    else:
        raise ValueError(f"Unknown elementwise op '{op}', expected one of {sorted({**_UNARY, **_BINARY})}.")
    return _record(op, out)


def _check_logits(op: str, logits: Tensor):
    if logits.dim() < 1 or logits.shape[-1] < 1:
        raise ShapeError(op, logits.shape)
    if not torch.isfinite(logits).all():
        raise NonFiniteError(f"`{op}` received non-finite logits.")


def softmax(logits: Tensor) -> Tensor:
    """
    Softmax over the last dimension, computed after subtracting the max.
    """
    _check_logits('softmax', logits)
    shifted = logits - logits.max(dim=-1, keepdim=True).values.detach()
    ex = torch.exp(shifted)
    return _record('softmax', ex / ex.sum(dim=-1, keepdim=True))


def log_softmax(logits: Tensor) -> Tensor:
    _check_logits('log_softmax', logits)
    shifted = logits - logits.max(dim=-1, keepdim=True).values.detach()
    return _record('log_softmax', shifted - torch.log(torch.exp(shifted).sum(dim=-1, keepdim=True)))


def mask_logits(logits: Tensor, forbidden: Iterable[int]) -> Tensor:
    """
    Add `MASK_PENALTY` to the forbidden coordinates of the last dimension.
    """
    penalty = torch.zeros(logits.shape[-1], dtype=logits.dtype)
    for idx in forbidden:
        if not 0 <= idx < logits.shape[-1]:
            raise InputValidationError(f"Cannot mask index {idx} of logits with size {logits.shape[-1]}.")
        penalty[idx] = MASK_PENALTY
    return _record('mask', logits + penalty)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """
    Concatenate along the last dimension; any leading (batch) dimensions must agree.
    """
    if a.dim() < 1 or b.dim() < 1 or a.shape[:-1] != b.shape[:-1]:
        raise ShapeError('concat', a.shape, b.shape)
    return _record('concat', torch.cat([a, b], dim=-1))


def stack(tensors: Sequence[Tensor], dim: int = 0) -> Tensor:
    if not tensors:
        raise InputValidationError("Cannot stack an empty sequence.")
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeError('stack', tensors[0].shape, t.shape)
    return _record('stack', torch.stack(list(tensors), dim=dim))


def embedding_lookup(E: Tensor, index: Union[int, Tensor]) -> Tensor:
    """
    Row lookup; `index` may be an int or an integer tensor of any shape (output gets a trailing embedding dim).
    """
    if E.dim() != 2:
        raise ShapeError('embedding_lookup', E.shape)
    num_rows = E.shape[0]
    if isinstance(index, Tensor):
        if index.dtype not in (torch.int64, torch.int32):
            raise InputValidationError(f"Expected integer indices, got {index.dtype}.")
        if index.numel() and (index.min() < 0 or index.max() >= num_rows):
            raise InputValidationError(f"Index out of range for embedding with {num_rows} rows: {index.tolist()}")
        index = index.long()
    else:
        index = int(index)
        if not 0 <= index < num_rows:
            raise InputValidationError(f"Index {index} out of range for embedding with {num_rows} rows.")
    return _record('embedding_lookup', E[index])


# gradient checking ----------------------------------------------------------------------------------------------------
ParamsLike = Union[torch.nn.Module, Mapping[str, Tensor], Sequence[Tensor]]


def _named_tensors(params: ParamsLike) -> Dict[str, Tensor]:
    if isinstance(params, torch.nn.Module):
        return dict(params.named_parameters())
    if isinstance(params, Mapping):
        return dict(params)
    return {str(i): p for i, p in enumerate(params)}


def _scalar_loss(loss: Tensor) -> float:
    if loss.numel() != 1:
        raise ShapeError('gradient_check', loss.shape, ())
    value = float(loss)
    if not np.isfinite(value):
        raise NonFiniteError(f"Loss is not finite ({value}).")
    return value


def gradient_check_blocks(loss_fn: Callable[[], Tensor],
                          params: ParamsLike,
                          eps: float = 1e-6,
                          seed: int = 0,
                          num_coords: int = 16) -> Dict[str, float]:
    """
    Compare analytic gradients against central finite differences on a random subsample of coordinates of each
    parameter tensor.

    :param loss_fn: A deterministic, scalar-valued closure over `params`.
    :param params: A module, a dict of named tensors, or a list of tensors (all with `requires_grad`).
    :param eps: The finite-difference step.
    :param seed: Seeds the choice of coordinates.
    :param num_coords: Coordinates checked per tensor (all of them if the tensor is smaller).
    :return: A dict of tensor-name : max relative error ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if not eps > 0:
        raise ValueError(f"`eps` must be positive, got {eps}.")
    named = _named_tensors(params)
    for p in named.values():
        p.grad = None

    loss = loss_fn()
    _scalar_loss(loss)
    loss.backward()
    analytic = {nm: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)) for nm, p in named.items()}

    rng = np.random.default_rng(seed)
    out = {}
    with torch.no_grad():
        for nm, p in named.items():
            flat = p.data.view(-1)
            chosen = rng.choice(flat.numel(), size=min(flat.numel(), num_coords), replace=False)
            worst = 0.0
            for i in sorted(chosen.tolist()):
                orig = flat[i].item()
                flat[i] = orig + eps
                f_plus = _scalar_loss(loss_fn())
                flat[i] = orig - eps
                f_minus = _scalar_loss(loss_fn())
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2 * eps)
                a = analytic[nm].view(-1)[i].item()
                worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
            out[nm] = worst
    return out


def gradient_check(loss_fn: Callable[[], Tensor],
                   params: ParamsLike,
                   eps: float = 1e-6,
                   seed: int = 0,
                   num_coords: int = 16) -> float:
    """
    The max relative error over all tensors; see :func:`gradient_check_blocks`.
    """
    errors = gradient_check_blocks(loss_fn, params, eps=eps, seed=seed, num_coords=num_coords)
    return max(errors.values()) if errors else 0.0
