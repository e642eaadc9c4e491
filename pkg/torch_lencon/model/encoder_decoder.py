"""
The attentional encoder-decoder: a bidirectional LSTM encoder, and an LSTM decoder with global dot-product attention
over the summed encoder states and input feeding of the previous attentional vector. Two variants condition on a
desired output length in bytes: `lenemb` feeds an embedding of the remaining budget into the decoder LSTM at every
step, `leninit` initializes the decoder memory cell from a learned vector scaled by the desired length.
"""
from typing import Sequence, Union, Optional, Tuple, List

import torch
from torch import Tensor
from torch.nn import Module, Parameter

from torch_lencon.data.vocab import BOS_ID, EOS_ID, Vocabulary
from torch_lencon.internals.exceptions import InputValidationError, ShapeError
from torch_lencon.model.config import ModelConfig, Variant
from torch_lencon.model.length import charge_fed_tokens
from torch_lencon.model.lstm import LSTMBlock, _uniform
from torch_lencon.model.states import EncoderStates, DecoderState
from torch_lencon.numerics import (
    DTYPE, affine, elementwise, softmax, log_softmax, concat, stack, embedding_lookup, zeros
)

TokenIds = Union[Sequence[int], Tensor]
LengthLike = Union[int, Sequence[int], Tensor, None]


class EncoderDecoder(Module):
    """
    :param config: A :class:`ModelConfig`.
    :param token_bytes: The UTF-8 byte cost of each target-vocabulary entry (length `config.V_tgt`). Used to charge
      fed tokens against the remaining length; kept as a buffer so it travels with the checkpoint.
    """

    def __init__(self, config: ModelConfig, token_bytes: Sequence[int]):
        super().__init__()
        self.config = config
        token_bytes = torch.as_tensor(token_bytes, dtype=torch.int64)
        if token_bytes.shape != (config.V_tgt,):
            raise ShapeError('token_bytes', token_bytes.shape, (config.V_tgt,))
        self.register_buffer('token_bytes', token_bytes)

        gen = torch.Generator().manual_seed(config.seed)
        scale = config.init_scale
        E, H = config.E, config.H

        self.src_embed = Parameter(_uniform((config.V_src, E), scale, gen))
        self.tgt_embed = Parameter(_uniform((config.V_tgt, E), scale, gen))
        lstm_kwargs = {'init_scale': scale, 'forget_bias': config.forget_bias, 'generator': gen}
        self.fwd_lstm = LSTMBlock(E, H, **lstm_kwargs)
        self.bwd_lstm = LSTMBlock(E, H, **lstm_kwargs)
        self.dec_lstm = LSTMBlock(config.decoder_input_size, H, **lstm_kwargs)
        self.W_hs = Parameter(_uniform((H, 2 * H), scale, gen))
        self.b_hs = Parameter(torch.zeros(H, dtype=DTYPE))
        self.W_so = Parameter(_uniform((config.V_tgt, H), scale, gen))
        self.b_so = Parameter(torch.zeros(config.V_tgt, dtype=DTYPE))

        if self.variant is Variant.LENEMB:
            self.W_le = Parameter(_uniform((config.L_types, config.D_len), scale, gen))
        if self.variant is Variant.LENINIT:
            self.b_c = Parameter(torch.zeros(H, dtype=DTYPE))

    @classmethod
    def from_config(cls, config: ModelConfig, tgt_vocab: Vocabulary) -> 'EncoderDecoder':
        if len(tgt_vocab) != config.V_tgt:
            raise InputValidationError(f"Target vocabulary has {len(tgt_vocab)} entries but `V_tgt={config.V_tgt}`.")
        return cls(config, token_bytes=tgt_vocab.byte_costs)

    @property
    def variant(self) -> Variant:
        return self.config.variant

    # encoder ----------------------------------------------------------------------------------------------------------
    def encode(self, source: TokenIds) -> EncoderStates:
        """
        Run both encoder directions from zero states.

        :param source: Token ids, ``[N]``, or ``[B, N]`` for a batch of equal-length sources.
        :return: :class:`EncoderStates`.
        """
        source = _as_ids(source)
        if source.dim() not in (1, 2) or source.shape[-1] < 1:
            raise InputValidationError(f"Expected a non-empty source of shape [N] or [B, N], got {tuple(source.shape)}.")
        embedded = embedding_lookup(self.src_embed, source)
        batch_dims = tuple(source.shape[:-1])
        num_positions = source.shape[-1]

        fwd_h, fwd_c = self._run_lstm(self.fwd_lstm, embedded, range(num_positions), batch_dims)
        bwd_h, bwd_c = self._run_lstm(self.bwd_lstm, embedded, reversed(range(num_positions)), batch_dims)
        return EncoderStates(fwd_h=fwd_h, fwd_c=fwd_c, bwd_h=bwd_h, bwd_c=bwd_c)

    @staticmethod
    def _run_lstm(block: LSTMBlock, embedded: Tensor, order, batch_dims) -> Tuple[Tensor, Tensor]:
        h, c = block.zero_state(*batch_dims)
        hs, cs = {}, {}
        for t in order:
            h, c = block(h, c, embedded[..., t, :])
            hs[t], cs[t] = h, c
        positions = sorted(hs)
        return stack([hs[t] for t in positions], dim=-2), stack([cs[t] for t in positions], dim=-2)

    # decoder ----------------------------------------------------------------------------------------------------------
    def init_decoder_state(self, enc: EncoderStates, desired_length: LengthLike = None) -> DecoderState:
        """
        The decoder starts from the backward encoder's state at the first source position. `leninit` replaces the
        memory cell with ``b_c * desired_length``; `lenemb` starts its remaining-length counter at `desired_length`.
        The plain variant ignores `desired_length`.
        """
        h = enc.bwd_h[..., 0, :]
        c = enc.bwd_c[..., 0, :]
        remaining = None
        if self.variant.length_conditioned:
            desired = self._check_desired(desired_length, batch_dims=h.shape[:-1])
            if self.variant is Variant.LENINIT:
                c = self.b_c * desired.to(DTYPE).unsqueeze(-1)
            else:
                remaining = desired
        return DecoderState(h=h, c=c, fed=torch.zeros_like(h), remaining=remaining, position=0)

    def _check_desired(self, desired_length: LengthLike, batch_dims: torch.Size) -> Tensor:
        if desired_length is None:
            raise InputValidationError(f"The `{self.variant.value}` variant requires a `desired_length`.")
        desired = torch.as_tensor(desired_length, dtype=torch.int64)
        if desired.dim() == 0 and len(batch_dims):
            desired = desired.expand(batch_dims)
        if desired.shape != batch_dims:
            raise ShapeError('init_decoder_state', desired.shape, batch_dims)
        if (desired < 0).any():
            raise InputValidationError(f"`desired_length` must be >= 0, got {desired.tolist()}.")
        return desired

    def attend(self, h_t: Tensor, enc: EncoderStates) -> Tuple[Tensor, Tensor]:
        """
        Global dot-product attention.

        :return: The context vector ``d_t`` (``[..., H]``) and the attention weights ``a_t`` (``[..., N]``).
        """
        a_t = softmax(affine(enc.memory, h_t))
        d_t = affine(enc.memory_t, a_t)
        return d_t, a_t

    def length_embedding(self, remaining: Union[int, Tensor]) -> Tensor:
        if self.variant is not Variant.LENEMB:
            raise RuntimeError(f"The `{self.variant.value}` variant has no length embedding.")
        remaining = torch.as_tensor(remaining, dtype=torch.int64)
        if (remaining < 0).any():
            raise InputValidationError(f"Remaining length must be >= 0, got {remaining.tolist()}.")
        return embedding_lookup(self.W_le, torch.clamp(remaining, max=self.config.L_types - 1))

    def step_logits(self,
                    state: DecoderState,
                    prev_token: Union[int, Tensor],
                    enc: EncoderStates) -> Tuple[Tensor, DecoderState, Tensor]:
        """
        Feed `prev_token` and compute the output logits.

        :return: The logits over the target vocabulary, the next state, and the attentional vector.
        """
        prev_token = _as_ids(prev_token)
        if prev_token.shape != state.h.shape[:-1]:
            raise ShapeError('decoder_step', prev_token.shape, state.h.shape[:-1])

        lstm_input = concat(embedding_lookup(self.tgt_embed, prev_token), state.fed)
        remaining = state.remaining
        if self.variant is Variant.LENEMB:
            remaining = charge_fed_tokens(remaining, self.token_bytes[prev_token], state.position)
            lstm_input = concat(lstm_input, self.length_embedding(remaining))

        h, c = self.dec_lstm(state.h, state.c, lstm_input)
        d_t, _ = self.attend(h, enc)
        s_tilde = elementwise('tanh', affine(self.W_hs, concat(h, d_t), self.b_hs))
        logits = affine(self.W_so, s_tilde, self.b_so)
        next_state = DecoderState(h=h, c=c, fed=s_tilde, remaining=remaining, position=state.position + 1)
        return logits, next_state, s_tilde

    def decoder_step(self,
                     state: DecoderState,
                     prev_token: Union[int, Tensor],
                     enc: EncoderStates) -> Tuple[Tensor, DecoderState, Tensor]:
        """
        :return: The output distribution over the target vocabulary, the next state, and the attentional vector.
        """
        logits, next_state, s_tilde = self.step_logits(state, prev_token, enc)
        return softmax(logits), next_state, s_tilde

    # likelihood -------------------------------------------------------------------------------------------------------
    def batch_logprob(self,
                      sources: Tensor,
                      targets: Tensor,
                      target_lengths: Union[Sequence[int], Tensor],
                      desired_length: LengthLike = None) -> Tensor:
        """
        Teacher-forced log-probabilities of a batch.

        :param sources: ``[B, N]`` token ids (equal source lengths).
        :param targets: ``[B, M]`` token ids; row `b` holds a sequence ending with EOS in its first
          ``target_lengths[b]`` entries, anything after is padding.
        :param target_lengths: Number of real target tokens (EOS included) per row.
        :param desired_length: Per-row desired byte lengths, for the length-conditioned variants.
        :return: ``[B]`` summed log-probabilities.
        """
        sources, targets = _as_ids(sources), _as_ids(targets)
        target_lengths = torch.as_tensor(target_lengths, dtype=torch.int64)
        if sources.dim() != 2 or targets.dim() != 2 or sources.shape[0] != targets.shape[0]:
            raise ShapeError('batch_logprob', sources.shape, targets.shape)
        if target_lengths.shape != targets.shape[:1]:
            raise ShapeError('batch_logprob', target_lengths.shape, targets.shape[:1])
        if (target_lengths < 1).any() or (target_lengths > targets.shape[1]).any():
            raise InputValidationError(f"Invalid `target_lengths`: {target_lengths.tolist()}.")

        enc = self.encode(sources)
        state = self.init_decoder_state(enc, desired_length)
        prev = torch.full(targets.shape[:1], BOS_ID, dtype=torch.int64)
        total = zeros(targets.shape[0])
        for t in range(targets.shape[1]):
            logits, state, _ = self.step_logits(state, prev, enc)
            lp = log_softmax(logits).gather(-1, targets[:, t:t + 1]).squeeze(-1)
            total = total + torch.where(t < target_lengths, lp, torch.zeros_like(lp))
            prev = targets[:, t]
        return total

    def sequence_logprob(self, source: TokenIds, target: TokenIds, desired_length: Optional[int] = None) -> Tensor:
        """
        ``sum_t log p(y_t | y_<t, x)`` for one pair; `target` must end with EOS.
        """
        target = _as_ids(target)
        if target.dim() != 1 or not target.numel():
            raise InputValidationError("`target` must be a non-empty sequence of token ids.")
        if int(target[-1]) != EOS_ID:
            raise InputValidationError("`target` must end with EOS.")
        if desired_length is not None:
            desired_length = [desired_length]
        out = self.batch_logprob(
            _as_ids(source).unsqueeze(0),
            target.unsqueeze(0),
            target_lengths=[target.numel()],
            desired_length=desired_length
        )
        return out[0]

    def forward(self, *args, **kwargs) -> Tensor:
        return self.batch_logprob(*args, **kwargs)


def _as_ids(ids: Union[int, TokenIds]) -> Tensor:
    if isinstance(ids, Tensor):
        if ids.is_floating_point():
            raise InputValidationError(f"Expected integer token ids, got {ids.dtype}.")
        return ids.long()
    return torch.as_tensor(ids, dtype=torch.int64)


def step_trace(model: EncoderDecoder,
               source: TokenIds,
               target: TokenIds,
               desired_length: Optional[int] = None) -> List[Tensor]:
    """
    The per-step output distributions under teacher forcing, one :meth:`EncoderDecoder.decoder_step` at a time.
    """
    enc = model.encode(source)
    state = model.init_decoder_state(enc, desired_length)
    prev, out = BOS_ID, []
    for tok in _as_ids(target).tolist():
        dist, state, _ = model.decoder_step(state, prev, enc)
        out.append(dist)
        prev = tok
    return out
