from dataclasses import dataclass, replace
from typing import Optional, Tuple


@dataclass(frozen=True)
class TrainConfig:
    """
    :param batch_size: Pairs per update; every batch shares one source length.
    :param lr: Adam step size.
    :param betas: Adam decay rates for the first and second moments.
    :param eps: Adam denominator constant.
    :param sample_pool: Pairs sampled per regrouping cycle.
    :param regroup_every: Updates (groups) per cycle before a fresh pool is sampled.
    :param max_updates: Length of a run.
    :param clip_norm: Global gradient-norm clip (None to disable).
    :param log_every: Log the loss every this many updates.
    :param checkpoint_every: Save a checkpoint every this many updates (None for only at the end).
    :param seed: Seeds batch sampling.
    """
    batch_size: int = 80
    lr: float = .001
    betas: Tuple[float, float] = (.9, .999)
    eps: float = 1e-8
    sample_pool: int = 800_000
    regroup_every: int = 10_000
    max_updates: int = 10_000
    clip_norm: Optional[float] = 5.0
    log_every: int = 100
    checkpoint_every: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ('batch_size', 'sample_pool', 'regroup_every', 'log_every'):
            if getattr(self, name) < 1:
                raise ValueError(f"`{name}` must be positive, got {getattr(self, name)}.")
        if self.max_updates < 0:
            raise ValueError(f"`max_updates` must be >= 0, got {self.max_updates}.")
        if not self.lr > 0 or not self.eps > 0:
            raise ValueError(f"`lr` and `eps` must be positive, got {self.lr} and {self.eps}.")
        if not all(0 < b < 1 for b in self.betas):
            raise ValueError(f"`betas` must lie in (0, 1), got {self.betas}.")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ValueError(f"`clip_norm` must be positive, got {self.clip_norm}.")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError(f"`checkpoint_every` must be positive, got {self.checkpoint_every}.")

    def scaled_for(self, corpus_size: int) -> 'TrainConfig':
        """
        Shrink `sample_pool` to the corpus size when the corpus is smaller, and `regroup_every` in proportion.
        """
        if corpus_size < 1:
            raise ValueError("Cannot train on an empty corpus.")
        if corpus_size >= self.sample_pool:
            return self
        ratio = corpus_size / self.sample_pool
        return replace(self, sample_pool=corpus_size, regroup_every=max(1, round(self.regroup_every * ratio)))
