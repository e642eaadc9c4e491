"""
Beam search over raw summed log-probabilities (no length normalization). Every step expands each live hypothesis,
pools the candidates with the hypotheses that already finished and keeps the best `beam_size` by
``(-logprob, tokens)``. The length constraints act on each candidate through :func:`apply_fixlen` and
:func:`apply_fixrng`.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, List, Iterator, Tuple
from warnings import warn

import numpy as np
import torch

from torch_lencon.data.vocab import BOS_ID, EOS_ID
from torch_lencon.decoding.constraint import DecodeConstraint, Method
from torch_lencon.decoding.hypothesis import BeamHypothesis
from torch_lencon.internals.exceptions import EmptyBeamError, StepCapError, VariantMismatchError
from torch_lencon.internals.utils import bifurcate
from torch_lencon.model.encoder_decoder import EncoderDecoder, TokenIds
from torch_lencon.model.states import DecoderState, EncoderStates
from torch_lencon.numerics import log_softmax, mask_logits


class Action(Enum):
    EXTEND = 'extend'
    DISCARD = 'discard'
    FINALIZE = 'finalize'
    REPLACE = 'replace'


def apply_fixlen(hyp: BeamHypothesis, next_cost: int, desired: int) -> Action:
    """
    :param hyp: A live hypothesis.
    :param next_cost: Bytes the next word adds, separator included.
    :param desired: The byte budget.
    :return: `EXTEND`, or `REPLACE` when the word would take the output past `desired` (the word is dropped and the
      hypothesis is finished with the EOS score instead).
    """
    return Action.REPLACE if hyp.bytes + next_cost > desired else Action.EXTEND


def apply_fixrng(hyp: BeamHypothesis,
                 emitted_eos: bool,
                 min_bytes: int,
                 max_bytes: Optional[int],
                 next_cost: int = 0) -> Action:
    """
    :param hyp: A live hypothesis (its `bytes` is what the output would be if finished now).
    :param emitted_eos: Whether the candidate token is EOS.
    :param min_bytes: Lower bound; finishing below it discards the hypothesis.
    :param max_bytes: Upper bound (None for no bound); a word taking the output past it is replaced with EOS.
    :param next_cost: Bytes the candidate word adds, separator included (ignored for EOS).
    :return: `DISCARD`, `FINALIZE` (EOS within range), `REPLACE` or `EXTEND`.
    """
    if emitted_eos:
        return Action.DISCARD if hyp.bytes < min_bytes else Action.FINALIZE
    if max_bytes is not None and hyp.bytes + next_cost > max_bytes:
        # replacing the word finishes at the current length, which must itself be in range:
        return Action.DISCARD if hyp.bytes < min_bytes else Action.REPLACE
    return Action.EXTEND


@dataclass
class DecodeResult:
    """
    The finished hypotheses of one beam search, best first.

    :ivar cap_reached: The step cap was hit while hypotheses were still live (those were dropped).
    :ivar empty_summary: The best output has no content words (fixlen with a first word longer than the budget).
    """
    hypotheses: List[BeamHypothesis]
    constraint: DecodeConstraint
    cap_reached: bool = False
    empty_summary: bool = False
    num_steps: int = 0

    @property
    def best(self) -> BeamHypothesis:
        return self.hypotheses[0]


class _Expander:
    def __init__(self, model: EncoderDecoder, constraint: DecodeConstraint):
        self.model = model
        self.constraint = constraint
        self.token_bytes = model.token_bytes.tolist()

    def cost(self, hyp: BeamHypothesis, token: int) -> int:
        return self.token_bytes[token] + (1 if hyp.tokens else 0)

    def candidates(self,
                   hyp: BeamHypothesis,
                   logprobs: np.ndarray,
                   raw_logprobs: np.ndarray,
                   state: DecoderState) -> Iterator[BeamHypothesis]:
        """
        Viable successors of `hyp`, best first. `logprobs` are the scores candidates are ranked on; `raw_logprobs`
        (unmasked) supply the EOS score used when a word is replaced.
        """
        constraint = self.constraint
        eos_lp = float(raw_logprobs[EOS_ID])
        replaced = False
        for token in np.argsort(-logprobs, kind='stable').tolist():
            if token == BOS_ID:
                continue
            is_eos = token == EOS_ID
            if constraint.method is Method.FIXLEN:
                if is_eos:
                    continue
                cost = self.cost(hyp, token)
                action = apply_fixlen(hyp, cost, constraint.desired)
            elif constraint.method is Method.FIXRNG:
                cost = 0 if is_eos else self.cost(hyp, token)
                action = apply_fixrng(hyp, is_eos, constraint.min_bytes, constraint.max_bytes, cost)
            else:
                cost = 0 if is_eos else self.cost(hyp, token)
                action = Action.FINALIZE if is_eos else Action.EXTEND

            if action is Action.EXTEND:
                yield hyp.extend(token, float(logprobs[token]), cost, state)
            elif action is Action.FINALIZE:
                if not replaced:
                    replaced = True
                    yield hyp.finish(eos_lp)
            elif action is Action.REPLACE:
                # all replacements (and a natural EOS) yield the same sequence and score; keep one:
                if not replaced:
                    replaced = True
                    yield hyp.finish_replacing(token, cost, eos_lp)

    def step(self, live: List[BeamHypothesis], enc: EncoderStates) -> Tuple[List[np.ndarray], List[np.ndarray],
                                                                           DecoderState]:
        batched = DecoderState.stack([h.state for h in live])
        prev = torch.tensor([h.last_token for h in live], dtype=torch.int64)
        logits, next_states, _ = self.model.step_logits(batched, prev, enc)
        raw = log_softmax(logits)
        if self.constraint.method is Method.FIXLEN:
            ranked = log_softmax(mask_logits(logits, [EOS_ID]))
        else:
            ranked = raw
        return list(ranked.numpy()), list(raw.numpy()), next_states


def decode(model: EncoderDecoder,
           source: TokenIds,
           constraint: DecodeConstraint,
           desired_length: Optional[int] = None) -> DecodeResult:
    """
    Run beam search and return the ranked finished hypotheses with diagnostics.

    :param model: An `EncoderDecoder`.
    :param source: Source token ids.
    :param constraint: A :class:`DecodeConstraint`.
    :param desired_length: The length a length-conditioned model is conditioned on; defaults to the constraint's
      `desired` (fixlen) or `max_bytes` (fixrng).
    :return: A :class:`DecodeResult`.
    """
    if desired_length is None:
        desired_length = constraint.length_hint
    beam_size = constraint.beam_size

    with torch.no_grad():
        enc = model.encode(source)
        state = model.init_decoder_state(enc, desired_length if model.variant.length_conditioned else None)
        expander = _Expander(model, constraint)

        beam = [BeamHypothesis(tokens=(), logprob=0.0, bytes=0, state=state)]
        num_steps = 0
        while any(not h.finished for h in beam) and num_steps < constraint.step_cap:
            finished, live = bifurcate(beam, lambda h: h.finished)
            ranked, raw, next_states = expander.step(live, enc)

            pool = list(finished)
            for i, hyp in enumerate(live):
                row_state = next_states.row(i)
                for j, cand in enumerate(expander.candidates(hyp, ranked[i], raw[i], row_state)):
                    if j >= beam_size:
                        break
                    pool.append(cand)
            num_steps += 1

            if not pool:
                raise EmptyBeamError(
                    f"Every hypothesis was discarded at step {num_steps} under {constraint.describe()}."
                )
            pool.sort(key=lambda h: h.sort_key)
            beam = pool[:beam_size]

    finished = [h for h in beam if h.finished]
    cap_reached = len(finished) < len(beam)
    if cap_reached:
        if not finished:
            raise StepCapError(
                f"No hypothesis finished within {constraint.step_cap} steps under {constraint.describe()}."
            )
        warn(f"Hit the step cap ({constraint.step_cap}) under {constraint.describe()}; returning the "
             f"{len(finished)} finished hypotheses.")

    empty_summary = not finished[0].content
    if empty_summary and constraint.method is Method.FIXLEN:
        warn(f"The best output under {constraint.describe()} is empty (the first word exceeds the budget).")
    return DecodeResult(
        hypotheses=finished,
        constraint=constraint,
        cap_reached=cap_reached,
        empty_summary=empty_summary,
        num_steps=num_steps
    )


def beam_search(model: EncoderDecoder,
                source: TokenIds,
                constraint: DecodeConstraint,
                desired_length: Optional[int] = None) -> List[BeamHypothesis]:
    """
    :return: The finished hypotheses ranked by log-probability. See :func:`decode`.
    """
    return decode(model, source, constraint, desired_length=desired_length).hypotheses


def learned_constraint(desired: int,
                       hard: bool,
                       beam_size: Optional[int] = None,
                       max_steps: Optional[int] = None) -> DecodeConstraint:
    """
    Soft decoding of a length-conditioned model is free search; hard decoding is fixrng over ``[0, desired]``.
    """
    beam_size = beam_size or DecodeConstraint.free().beam_size
    if hard:
        return DecodeConstraint.fixrng(0, desired, beam_size=beam_size, max_steps=max_steps)
    return DecodeConstraint.free(beam_size=beam_size, max_steps=max_steps)


def decode_learned(model: EncoderDecoder,
                   source: TokenIds,
                   desired: int,
                   hard: bool = False,
                   beam_size: Optional[int] = None,
                   max_steps: Optional[int] = None) -> BeamHypothesis:
    """
    Decode with a length-conditioned model asked for `desired` bytes.

    :param hard: If True, outputs are additionally forced into ``[0, desired]`` bytes.
    :return: The best hypothesis.
    """
    if not model.variant.length_conditioned:
        raise VariantMismatchError(f"`decode_learned` needs a length-conditioned model, got `{model.variant.value}`.")
    constraint = learned_constraint(desired, hard, beam_size=beam_size, max_steps=max_steps)
    return decode(model, source, constraint, desired_length=desired).best


def greedy_decode(model: EncoderDecoder,
                  source: TokenIds,
                  desired_length: Optional[int] = None,
                  max_steps: int = 120) -> BeamHypothesis:
    """
    Argmax decoding (BOS excluded, ties to the smaller id) until EOS or `max_steps`.
    """
    token_bytes = model.token_bytes.tolist()
    with torch.no_grad():
        enc = model.encode(source)
        state = model.init_decoder_state(enc, desired_length if model.variant.length_conditioned else None)
        hyp = BeamHypothesis(tokens=(), logprob=0.0, bytes=0, state=state)
        for _ in range(max_steps):
            logits, state, _ = model.step_logits(hyp.state, hyp.last_token, enc)
            logprobs = log_softmax(logits).numpy()
            order = [t for t in np.argsort(-logprobs, kind='stable').tolist() if t != BOS_ID]
            token = order[0]
            if token == EOS_ID:
                return hyp.finish(float(logprobs[EOS_ID]))
            cost = token_bytes[token] + (1 if hyp.tokens else 0)
            hyp = hyp.extend(token, float(logprobs[token]), cost, state)
    warn(f"Greedy decoding did not emit EOS within {max_steps} steps.")
    return hyp
