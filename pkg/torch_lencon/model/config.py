from dataclasses import dataclass, fields
from enum import Enum
from typing import Dict, Union


class Variant(str, Enum):
    PLAIN = 'plain'
    LENEMB = 'lenemb'
    LENINIT = 'leninit'

    @classmethod
    def parse(cls, value: Union[str, 'Variant']) -> 'Variant':
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Unknown variant '{value}', expected one of {[v.value for v in cls]}.") from None

    @property
    def length_conditioned(self) -> bool:
        return self is not Variant.PLAIN


# keys written to (and required in) a checkpoint header:
HEADER_KEYS = ('variant', 'E', 'H', 'D_len', 'L_types', 'V_src', 'V_tgt')


@dataclass(frozen=True)
class ModelConfig:
    """
    :param V_src: Source vocabulary size (reserved tags included).
    :param V_tgt: Target vocabulary size.
    :param variant: `plain`, `lenemb` (remaining-length embedding fed to the decoder) or `leninit` (decoder memory cell
      initialized from the desired length).
    :param E: Word-embedding size.
    :param H: Hidden size of every LSTM.
    :param D_len: Length-embedding size (`lenemb` only).
    :param L_types: Number of length-embedding rows; larger remaining lengths share the last row.
    :param init_scale: Weights are initialized uniform(-init_scale, init_scale).
    :param forget_bias: Initial bias of every forget gate.
    :param seed: Seeds the initialization.
    """
    V_src: int
    V_tgt: int
    variant: Variant = Variant.PLAIN
    E: int = 100
    H: int = 200
    D_len: int = 100
    L_types: int = 300
    init_scale: float = .1
    forget_bias: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'variant', Variant.parse(self.variant))
        for name in ('V_src', 'V_tgt', 'E', 'H', 'D_len', 'L_types'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"`{name}` must be a positive integer, got {value!r}.")
        if self.init_scale < 0:
            raise ValueError(f"`init_scale` must be non-negative, got {self.init_scale}.")

    @property
    def decoder_input_size(self) -> int:
        size = self.E + self.H
        if self.variant is Variant.LENEMB:
            size += self.D_len
        return size

    def to_header(self) -> Dict[str, str]:
        out = {}
        for k in HEADER_KEYS:
            v = getattr(self, k)
            out[k] = v.value if isinstance(v, Variant) else str(v)
        return out

    @classmethod
    def from_header(cls, header: Dict[str, str]) -> 'ModelConfig':
        missing = [k for k in HEADER_KEYS if k not in header]
        if missing:
            raise KeyError(f"Header is missing {missing}.")
        kwargs = {'variant': Variant.parse(header['variant'])}
        for k in HEADER_KEYS[1:]:
            kwargs[k] = int(header[k])
        # optional keys, when present:
        types = {f.name: f.type for f in fields(cls)}
        for k in ('init_scale', 'forget_bias', 'seed'):
            if k in header:
                kwargs[k] = float(header[k]) if types[k] is float else int(header[k])
        return cls(**kwargs)
