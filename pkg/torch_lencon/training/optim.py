from typing import Iterable, Sequence, Optional, Dict, Any, List, Tuple

import torch
from torch import Tensor
from torch.nn import Parameter

from torch_lencon.internals.exceptions import ShapeError
from torch_lencon.internals.repr import NiceRepr
from torch_lencon.training.config import TrainConfig


class AdamState(NiceRepr):
    """
    Adam (with bias correction) over a fixed list of parameters, plus an update counter.
    """
    _repr_attrs = ('step_count',)

    def __init__(self, params: Iterable[Parameter], config: Optional[TrainConfig] = None):
        config = config or TrainConfig()
        self.params: List[Parameter] = list(params)
        self.optimizer = torch.optim.Adam(self.params, lr=config.lr, betas=config.betas, eps=config.eps)
        self.step_count = 0

    def moments(self) -> List[Tuple[Tensor, Tensor]]:
        """
        First and second moments per parameter (zeros before the first step).
        """
        out = []
        for p in self.params:
            state = self.optimizer.state.get(p, {})
            out.append((state.get('exp_avg', torch.zeros_like(p)), state.get('exp_avg_sq', torch.zeros_like(p))))
        return out

    def state_dict(self) -> Dict[str, Any]:
        return {'optimizer': self.optimizer.state_dict(), 'step_count': self.step_count}

    def load_state_dict(self, state_dict: Dict[str, Any]):
        self.optimizer.load_state_dict(state_dict['optimizer'])
        self.step_count = int(state_dict['step_count'])


def adam_step(params: Sequence[Parameter], grads: Optional[Sequence[Optional[Tensor]]], state: AdamState):
    """
    Apply one Adam update. `grads` (aligned with `params`) replaces the parameters' `.grad`; when None, the existing
    `.grad` is used. Missing gradients count as zero so every moment advances once per call.
    """
    if len(params) != len(state.params) or any(p is not q for p, q in zip(params, state.params)):
        raise ValueError("`params` must be the parameters `state` was created for.")
    if grads is not None:
        if len(grads) != len(params):
            raise ValueError(f"Got {len(grads)} gradients for {len(params)} parameters.")
        for p, g in zip(params, grads):
            if g is not None and g.shape != p.shape:
                raise ShapeError('adam_step', p.shape, g.shape)
            p.grad = None if g is None else g.detach().clone()
    for p in params:
        if p.grad is None:
            p.grad = torch.zeros_like(p)
    state.optimizer.step()
    state.step_count += 1
