from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Optional, List, Union

import torch
from tqdm import tqdm

from torch_lencon.decoding.beam_search import DecodeResult, decode, learned_constraint
from torch_lencon.decoding.constraint import DecodeConstraint
from torch_lencon.internals.exceptions import VariantMismatchError
from torch_lencon.internals.utils import identity
from torch_lencon.model.encoder_decoder import EncoderDecoder, TokenIds


@dataclass(frozen=True)
class DecodeTask:
    """
    What to run on every source: a decoding `constraint`, or (when `learned_length` is set) learned length control
    asked for `learned_length` bytes, with `hard` forcing the output into ``[0, learned_length]``.

    `desired_length` overrides the length a length-conditioned model is conditioned on under `constraint` (by
    default the constraint's own length, which free search does not have).
    """
    constraint: Optional[DecodeConstraint] = None
    learned_length: Optional[int] = None
    hard: bool = False
    beam_size: Optional[int] = None
    desired_length: Optional[int] = None

    def __post_init__(self):
        if (self.constraint is None) == (self.learned_length is None):
            raise ValueError("Pass exactly one of `constraint` and `learned_length`.")
        if self.desired_length is not None:
            if self.constraint is None:
                raise ValueError("`desired_length` applies to a `constraint`; learned control uses `learned_length`.")
            if self.desired_length < 0:
                raise ValueError(f"`desired_length` must be >= 0, got {self.desired_length}.")

    @property
    def desired(self) -> Optional[int]:
        """
        The desired length reported next to each output.
        """
        if self.learned_length is not None:
            return self.learned_length
        if self.desired_length is not None:
            return self.desired_length
        return self.constraint.length_hint

    def check_model(self, model: EncoderDecoder):
        variant = model.variant.value
        if self.learned_length is not None:
            if not model.variant.length_conditioned:
                raise VariantMismatchError(
                    f"Learned length control needs a `lenemb` or `leninit` model, got `{variant}`."
                )
        elif model.variant.length_conditioned and self.desired is None:
            raise VariantMismatchError(
                f"A `{variant}` model must be conditioned on a length, and `{self.constraint.describe()}` has none: "
                f"use `--method learned --length N` (or pass `--length N` to set the conditioning length)."
            )

    def __call__(self, model: EncoderDecoder, source: TokenIds) -> DecodeResult:
        if self.learned_length is not None:
            constraint = learned_constraint(self.learned_length, self.hard, beam_size=self.beam_size)
            return decode(model, source, constraint, desired_length=self.learned_length)
        return decode(model, source, self.constraint, desired_length=self.desired_length)


_worker_model: Optional[EncoderDecoder] = None
_worker_task: Optional[DecodeTask] = None


def _init_worker(model: EncoderDecoder, task: DecodeTask):
    global _worker_model, _worker_task
    torch.set_num_threads(1)
    _worker_model, _worker_task = model, task


def _decode_one(source: Sequence[int]) -> DecodeResult:
    return _worker_task(_worker_model, source)


def decode_corpus(model: EncoderDecoder,
                  sources: Sequence[TokenIds],
                  task: DecodeTask,
                  workers: int = 1,
                  progress: Union[tqdm, bool] = False) -> List[DecodeResult]:
    """
    Decode every source with `task`. With ``workers > 1`` sources are spread over a process pool; results are always
    in input order.
    """
    if workers < 1:
        raise ValueError(f"`workers` must be >= 1, got {workers}.")
    task.check_model(model)
    model.eval()

    progress = progress or identity
    if progress is True:
        progress = tqdm
    sources = [list(map(int, s)) for s in sources]

    if workers == 1 or len(sources) < 2:
        return [task(model, source) for source in progress(sources)]

    chunksize = max(1, len(sources) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(model, task)) as executor:
        results = executor.map(_decode_one, sources, chunksize=chunksize)
        return list(progress(results))
