import csv
import logging
import os
from typing import Sequence, Optional, List, Tuple, Union

import numpy as np
import torch
from torch import Tensor
from tqdm import tqdm

from torch_lencon.internals.exceptions import NonFiniteLossError, NonFiniteError, InputValidationError
from torch_lencon.internals.utils import identity
from torch_lencon.model.checkpoint import save_checkpoint, load_checkpoint, read_checkpoint_header
from torch_lencon.model.config import Variant
from torch_lencon.model.encoder_decoder import EncoderDecoder
from torch_lencon.training.batching import EncodedPair, Batch, group_stream, collate, length_groups
from torch_lencon.training.config import TrainConfig
from torch_lencon.training.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

LossCurve = List[Tuple[int, float]]


def nll_loss(model: EncoderDecoder, batch: Batch, update: Optional[int] = None) -> Tensor:
    """
    Mean negative log-likelihood of the batch. Length-conditioned variants are conditioned on each reference's byte
    length; the plain variant ignores it. Call ``.backward()`` on the result for gradients.
    """
    desired = batch.desired if model.variant.length_conditioned else None
    where = "" if update is None else f" at update {update:,}"
    try:
        logprobs = model.batch_logprob(batch.sources, batch.targets, batch.target_lengths, desired)
    except NonFiniteError as e:
        raise NonFiniteLossError(f"Non-finite logits{where}: {e}") from e
    loss = -logprobs.mean()
    if not torch.isfinite(loss):
        raise NonFiniteLossError(
            f"Non-finite loss{where}; per-example logprobs: {logprobs.detach().tolist()}"
        )
    return loss


def optim_path(checkpoint_path: str) -> str:
    return checkpoint_path + '.optim'


class Trainer:
    """
    Maximum-likelihood training: owns the model, the Adam state, the position in the (deterministic) batch stream
    and the loss curve, so that a run can be saved and resumed exactly.
    """

    def __init__(self, model: EncoderDecoder, corpus: Sequence[EncodedPair], config: TrainConfig):
        if not len(corpus):
            raise InputValidationError("Cannot train on an empty corpus.")
        self.model = model
        self.corpus = corpus
        self.config = config.scaled_for(len(corpus))
        self.adam = AdamState(model.parameters(), self.config)
        self.loss_curve: LossCurve = []
        self._groups = group_stream(corpus, self.config, np.random.default_rng(self.config.seed))

    @property
    def updates(self) -> int:
        return self.adam.step_count

    def step(self) -> float:
        batch = collate(next(self._groups))
        self.adam.optimizer.zero_grad()
        loss = nll_loss(self.model, batch, update=self.updates + 1)
        loss.backward()
        if self.config.clip_norm is not None:
            torch.nn.utils.clip_grad_norm_(self.adam.params, self.config.clip_norm)
        adam_step(self.adam.params, None, self.adam)
        value = loss.item()
        self.loss_curve.append((self.updates, value))
        return value

    def fit(self,
            max_updates: Optional[int] = None,
            checkpoint_path: Optional[str] = None,
            progress: Union[tqdm, bool] = False) -> LossCurve:
        """
        Train until `max_updates` (default: the config's) updates have been made in total.

        :param checkpoint_path: If given, save here every `config.checkpoint_every` updates and at the end.
        :param progress: Should a progress bar be displayed?
        :return: The loss curve as ``(update, loss)`` records.
        """
        max_updates = self.config.max_updates if max_updates is None else max_updates
        progress = progress or identity
        if progress is True:
            progress = tqdm

        self.model.train()
        for _ in progress(range(self.updates, max_updates)):
            loss = self.step()
            if self.updates % self.config.log_every == 0:
                logger.info(f"update {self.updates:,}: loss {loss:.4f}")
            if checkpoint_path and self.config.checkpoint_every and self.updates % self.config.checkpoint_every == 0:
                self.save(checkpoint_path)
        if checkpoint_path:
            self.save(checkpoint_path)
        self.model.eval()
        return self.loss_curve

    def save(self, path: str):
        save_checkpoint(self.model, path, extra_header={'updates': self.updates})
        torch.save({'adam': self.adam.state_dict(), 'loss_curve': self.loss_curve}, optim_path(path))
        logger.debug(f"Saved checkpoint at update {self.updates:,} to {path}")

    @classmethod
    def resume(cls,
               path: str,
               corpus: Sequence[EncodedPair],
               config: TrainConfig,
               variant: Union[str, Variant, None] = None) -> 'Trainer':
        """
        Restore a run saved by :meth:`save`: parameters, optimizer moments, the update counter and the loss curve.
        The batch stream is fast-forwarded past the batches already consumed, so resuming continues exactly where an
        uninterrupted run with the same corpus and config would be.
        """
        model = load_checkpoint(path, variant=variant)
        trainer = cls(model, corpus, config)
        sidecar = optim_path(path)
        if os.path.exists(sidecar):
            state = torch.load(sidecar)
            trainer.adam.load_state_dict(state['adam'])
            trainer.loss_curve = list(state['loss_curve'])
        else:
            header_updates = int(read_checkpoint_header(path).get('updates', 0))
            if header_updates:
                raise FileNotFoundError(f"{sidecar} is needed to resume from update {header_updates:,}.")
        for _ in range(trainer.updates):
            next(trainer._groups)
        logger.info(f"Resumed {path} at update {trainer.updates:,}")
        return trainer


def train(model: EncoderDecoder,
          corpus: Sequence[EncodedPair],
          config: TrainConfig,
          progress: Union[tqdm, bool] = False) -> Tuple[EncoderDecoder, LossCurve]:
    trainer = Trainer(model, corpus, config)
    curve = trainer.fit(progress=progress)
    return trainer.model, curve


def write_loss_curve(path: str, curve: LossCurve):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['update', 'loss'])
        for update, loss in curve:
            writer.writerow([update, repr(float(loss))])


def per_token_loss(model: EncoderDecoder, pairs: Sequence[EncodedPair], batch_size: int = 80) -> float:
    """
    Negative log-likelihood per target token (EOS included), in nats.
    """
    if not pairs:
        raise InputValidationError("Cannot compute the loss of an empty collection.")
    full, partial = length_groups(pairs, batch_size)
    total, num_tokens = 0.0, 0
    with torch.no_grad():
        for group in full + partial:
            batch = collate(group)
            desired = batch.desired if model.variant.length_conditioned else None
            logprobs = model.batch_logprob(batch.sources, batch.targets, batch.target_lengths, desired)
            total -= float(logprobs.sum())
            num_tokens += batch.num_target_tokens
    return total / num_tokens
