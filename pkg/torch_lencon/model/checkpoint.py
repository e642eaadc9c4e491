"""
Checkpoint files: the magic line ``LENCON1``, one UTF-8 header line of space-separated ``key=value`` pairs, then one
record per tensor of the model's state dict::

    u32 name length | name (UTF-8) | u32 rank | u32 dim * rank | f64 value * prod(dims)

All integers and floats are little-endian; values are row-major.
"""
from typing import Dict, Optional, Union, Tuple, Mapping

import numpy as np
import torch

from torch_lencon.internals.exceptions import CheckpointFormatError, VariantMismatchError
from torch_lencon.internals.utils import parse_key_values
from torch_lencon.model.config import ModelConfig, Variant
from torch_lencon.model.encoder_decoder import EncoderDecoder

MAGIC = b'LENCON1\n'
_U32 = np.dtype('<u4')
_F64 = np.dtype('<f8')


def save_checkpoint(model: EncoderDecoder, path: str, extra_header: Optional[Mapping[str, object]] = None):
    header = model.config.to_header()
    for k, v in (extra_header or {}).items():
        if k in header:
            raise ValueError(f"`extra_header` cannot override '{k}'.")
        header[str(k)] = str(v)
    for k, v in header.items():
        if any(c.isspace() for c in k + v) or '=' in k:
            raise ValueError(f"Header entries cannot contain whitespace: {k}={v}")

    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write((" ".join(f"{k}={v}" for k, v in header.items()) + "\n").encode('utf-8'))
        for name, tensor in model.state_dict().items():
            name_bytes = name.encode('utf-8')
            values = tensor.detach().cpu().numpy().astype(_F64)
            f.write(np.array([len(name_bytes)], dtype=_U32).tobytes())
            f.write(name_bytes)
            f.write(np.array([values.ndim, *values.shape], dtype=_U32).tobytes())
            f.write(np.ascontiguousarray(values).tobytes())


def _read_header(buffer: bytes, path: str) -> Tuple[Dict[str, str], int]:
    if not buffer.startswith(MAGIC):
        raise CheckpointFormatError(f"{path}: not a checkpoint (bad magic {buffer[:len(MAGIC)]!r}).")
    end = buffer.find(b'\n', len(MAGIC))
    if end < 0:
        raise CheckpointFormatError(f"{path}: truncated header.")
    try:
        line = buffer[len(MAGIC):end].decode('utf-8')
        header = parse_key_values(line.split())
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointFormatError(f"{path}: malformed header ({e}).") from e
    return header, end + 1


def read_checkpoint_header(path: str) -> Dict[str, str]:
    with open(path, 'rb') as f:
        buffer = f.read(len(MAGIC) + 4096)
    header, _ = _read_header(buffer, path)
    return header


class _Reader:
    def __init__(self, buffer: bytes, pos: int, path: str):
        self.buffer = buffer
        self.pos = pos
        self.path = path

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.buffer)

    def take(self, dtype: np.dtype, count: int) -> np.ndarray:
        nbytes = dtype.itemsize * count
        if self.pos + nbytes > len(self.buffer):
            raise CheckpointFormatError(f"{self.path}: truncated file at byte {self.pos:,}.")
        out = np.frombuffer(self.buffer, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return out

    def take_bytes(self, count: int) -> bytes:
        if self.pos + count > len(self.buffer):
            raise CheckpointFormatError(f"{self.path}: truncated file at byte {self.pos:,}.")
        out = self.buffer[self.pos:self.pos + count]
        self.pos += count
        return out


def _read_records(reader: _Reader) -> Dict[str, np.ndarray]:
    records = {}
    while not reader.exhausted:
        name_len = int(reader.take(_U32, 1)[0])
        name = reader.take_bytes(name_len).decode('utf-8', errors='replace')
        rank = int(reader.take(_U32, 1)[0])
        dims = tuple(int(d) for d in reader.take(_U32, rank))
        values = reader.take(_F64, int(np.prod(dims, dtype='int64')))
        records[name] = values.reshape(dims)
    return records


def load_checkpoint(path: str, variant: Union[str, Variant, None] = None) -> EncoderDecoder:
    """
    Load a model saved by :func:`save_checkpoint`.

    :param path: The checkpoint file.
    :param variant: If given, the variant the caller expects; a checkpoint of another variant raises a
      `VariantMismatchError`.
    :return: An `EncoderDecoder` with the stored parameters.
    """
    with open(path, 'rb') as f:
        buffer = f.read()
    header, pos = _read_header(buffer, path)
    try:
        config = ModelConfig.from_header(header)
    except (KeyError, ValueError) as e:
        raise CheckpointFormatError(f"{path}: invalid header ({e}).") from e
    if variant is not None and Variant.parse(variant) is not config.variant:
        raise VariantMismatchError(
            f"{path} holds a `{config.variant.value}` model, expected `{Variant.parse(variant).value}`."
        )

    records = _read_records(_Reader(buffer, pos, path))
    if 'token_bytes' not in records:
        raise CheckpointFormatError(f"{path}: missing the `token_bytes` record.")
    model = EncoderDecoder(config, token_bytes=records['token_bytes'].astype('int64'))

    expected = model.state_dict()
    missing, unexpected = set(expected) - set(records), set(records) - set(expected)
    if missing or unexpected:
        raise CheckpointFormatError(f"{path}: missing records {sorted(missing)}, unexpected {sorted(unexpected)}.")
    state = {}
    for name, ref in expected.items():
        values = records[name]
        if values.shape != tuple(ref.shape):
            raise CheckpointFormatError(
                f"{path}: record `{name}` has dims {list(values.shape)} but the header implies {list(ref.shape)}."
            )
        state[name] = torch.from_numpy(values.copy()).to(ref.dtype)
    model.load_state_dict(state)
    return model
