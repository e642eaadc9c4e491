from typing import Tuple, Optional

import torch
from torch import Tensor
from torch.nn import Module, Parameter, ParameterDict

from torch_lencon.internals.exceptions import ShapeError
from torch_lencon.numerics import DTYPE, affine, elementwise

GATES = ('input', 'forget', 'cell', 'output')


class LSTMBlock(Module):
    """
    The weights of one single-layer LSTM: an input matrix, a recurrent matrix and a bias per gate.
    """

    def __init__(self,
                 input_size: int,
                 hidden_size: int,
                 init_scale: float = .1,
                 forget_bias: float = 1.0,
                 generator: Optional[torch.Generator] = None):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size

        self.input_weights = ParameterDict()
        self.recurrent_weights = ParameterDict()
        self.biases = ParameterDict()
        for gate in GATES:
            self.input_weights[gate] = Parameter(_uniform((hidden_size, input_size), init_scale, generator))
            self.recurrent_weights[gate] = Parameter(_uniform((hidden_size, hidden_size), init_scale, generator))
            bias = torch.full((hidden_size,), forget_bias if gate == 'forget' else 0., dtype=DTYPE)
            self.biases[gate] = Parameter(bias)

    def forward(self, h_prev: Tensor, c_prev: Tensor, input: Tensor) -> Tuple[Tensor, Tensor]:
        return lstm_step(self, h_prev=h_prev, c_prev=c_prev, input=input)

    def zero_state(self, *batch_dims: int) -> Tuple[Tensor, Tensor]:
        h = torch.zeros(batch_dims + (self.hidden_size,), dtype=DTYPE)
        return h, h.clone()


def _uniform(shape: Tuple[int, ...], scale: float, generator: Optional[torch.Generator]) -> Tensor:
    return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2 - 1) * scale


def lstm_step(block: LSTMBlock, h_prev: Tensor, c_prev: Tensor, input: Tensor) -> Tuple[Tensor, Tensor]:
    """
    One LSTM step: sigmoid input/forget/output gates, a tanh candidate, ``c = f*c_prev + i*g`` and ``h = o*tanh(c)``.
    Inputs may carry a leading batch dimension.
    """
    if input.shape[-1] != block.input_size:
        raise ShapeError('lstm_step', input.shape, (block.input_size,))
    if h_prev.shape != c_prev.shape or h_prev.shape[-1] != block.hidden_size:
        raise ShapeError('lstm_step', h_prev.shape, c_prev.shape)
    if h_prev.shape[:-1] != input.shape[:-1]:
        raise ShapeError('lstm_step', h_prev.shape, input.shape)

    pre = {
        gate: elementwise(
            'add',
            affine(block.input_weights[gate], input, block.biases[gate]),
            affine(block.recurrent_weights[gate], h_prev)
        )
        for gate in GATES
    }
    i = elementwise('sigmoid', pre['input'])
    f = elementwise('sigmoid', pre['forget'])
    o = elementwise('sigmoid', pre['output'])
    g = elementwise('tanh', pre['cell'])
    c = elementwise('add', elementwise('mul', f, c_prev), elementwise('mul', i, g))
    h = elementwise('mul', o, elementwise('tanh', c))
    return h, c
