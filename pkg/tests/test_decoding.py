import unittest
import warnings
from typing import Optional, Tuple

import numpy as np
import torch
from parameterized import parameterized

from torch_lencon.data.vocab import BOS_ID, EOS_ID, Vocabulary
from torch_lencon.decoding.beam_search import (
    Action, apply_fixlen, apply_fixrng, beam_search, decode, decode_learned, greedy_decode, learned_constraint
)
from torch_lencon.decoding.constraint import DecodeConstraint, Method
from torch_lencon.decoding.hypothesis import BeamHypothesis
from torch_lencon.decoding.parallel import DecodeTask, decode_corpus
from torch_lencon.internals.exceptions import EmptyBeamError, StepCapError, VariantMismatchError
from torch_lencon.numerics import log_softmax, mask_logits

from tests.utils import tiny_model

# BOS, EOS, UNK and three words: five tokens can follow any prefix
ORACLE_VOCAB = Vocabulary(('a', 'bb', 'ccc'))
ORACLE_STEPS = 4
# sources decoded per length-guarantee check
GUARANTEE_SOURCES = 500


def _hyp(nbytes: int, tokens: Tuple[int, ...] = (3,)) -> BeamHypothesis:
    return BeamHypothesis(tokens=tokens, logprob=-1.0, bytes=nbytes)


def brute_force(model,
                source,
                method: Method,
                desired: Optional[int] = None,
                min_bytes: int = 0,
                max_bytes: Optional[int] = None,
                desired_length: Optional[int] = None) -> Tuple[Tuple[int, ...], float]:
    """
    Enumerate every output reachable within `ORACLE_STEPS` steps and return the best ``(tokens, logprob)``.
    """
    token_bytes = model.token_bytes.tolist()
    upper = float('inf') if max_bytes is None else max_bytes
    outputs = []

    with torch.no_grad():
        enc = model.encode(source)
        state = model.init_decoder_state(enc, desired_length)

        def visit(tokens, logprob, nbytes, state):
            logits, next_state, _ = model.step_logits(state, tokens[-1] if tokens else BOS_ID, enc)
            raw = log_softmax(logits).numpy()
            ranked = log_softmax(mask_logits(logits, [EOS_ID])).numpy() if method is Method.FIXLEN else raw
            costs = {t: token_bytes[t] + (1 if tokens else 0) for t in range(len(raw)) if t not in (BOS_ID, EOS_ID)}

            if method is Method.FREE:
                can_finish = True
            elif method is Method.FIXRNG:
                can_finish = min_bytes <= nbytes
            else:
                can_finish = any(nbytes + c > desired for c in costs.values())
            if can_finish:
                outputs.append((tokens + (EOS_ID,), logprob + float(raw[EOS_ID])))

            if len(tokens) + 1 < ORACLE_STEPS:
                for t, c in costs.items():
                    limit = desired if method is Method.FIXLEN else upper
                    if nbytes + c <= limit:
                        visit(tokens + (t,), logprob + float(ranked[t]), nbytes + c, next_state)

        visit((), 0.0, 0, state)
    return min(outputs, key=lambda out: (-out[1], out[0]))


class TestBruteForceOracle(unittest.TestCase):
    sources = [[3, 4, 5], [7, 3], [5, 5, 6, 4]]

    def _check(self, model, constraint: DecodeConstraint, desired_length=None, **oracle_kwargs):
        for source in self.sources:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                best = decode(model, source, constraint, desired_length=desired_length).best
            tokens, logprob = brute_force(model, source, constraint.method, desired_length=desired_length,
                                          **oracle_kwargs)
            self.assertTupleEqual(best.tokens, tokens)
            self.assertAlmostEqual(best.logprob, logprob, places=9)

    @parameterized.expand([(0,), (1,), (2,)])
    def test_free(self, seed: int):
        model = tiny_model(vocab=ORACLE_VOCAB, seed=seed, init_scale=1.)
        self._check(model, DecodeConstraint.free(beam_size=625, max_steps=ORACLE_STEPS))

    @parameterized.expand([(0, 3), (1, 5), (2, 8)])
    def test_fixlen(self, seed: int, desired: int):
        model = tiny_model(vocab=ORACLE_VOCAB, seed=seed, init_scale=1.)
        self._check(model, DecodeConstraint.fixlen(desired, beam_size=625, max_steps=ORACLE_STEPS), desired=desired)

    @parameterized.expand([(0, 2, 6), (1, 4, 9), (2, 0, 3)])
    def test_fixrng(self, seed: int, min_bytes: int, max_bytes: int):
        model = tiny_model(vocab=ORACLE_VOCAB, seed=seed, init_scale=1.)
        constraint = DecodeConstraint.fixrng(min_bytes, max_bytes, beam_size=625, max_steps=ORACLE_STEPS)
        self._check(model, constraint, min_bytes=min_bytes, max_bytes=max_bytes)

    def test_lenemb_fixlen(self):
        model = tiny_model('lenemb', vocab=ORACLE_VOCAB, seed=3, init_scale=1.)
        self._check(model, DecodeConstraint.fixlen(6, beam_size=625, max_steps=ORACLE_STEPS), desired=6,
                    desired_length=6)


class TestConstraintHooks(unittest.TestCase):
    def test_fixlen(self):
        # 27 bytes so far, budget 30: " word" (5 bytes) no longer fits, " ab" does, " abc" fits exactly
        self.assertIs(apply_fixlen(_hyp(27), next_cost=5, desired=30), Action.REPLACE)
        self.assertIs(apply_fixlen(_hyp(27), next_cost=3, desired=30), Action.EXTEND)
        self.assertIs(apply_fixlen(_hyp(27), next_cost=4, desired=30), Action.EXTEND)
        self.assertIs(apply_fixlen(_hyp(0, ()), next_cost=4, desired=3), Action.REPLACE)

    def test_fixrng(self):
        self.assertIs(apply_fixrng(_hyp(3), True, min_bytes=5, max_bytes=10), Action.DISCARD)
        self.assertIs(apply_fixrng(_hyp(5), True, min_bytes=5, max_bytes=10), Action.FINALIZE)
        self.assertIs(apply_fixrng(_hyp(8), False, min_bytes=5, max_bytes=10, next_cost=4), Action.REPLACE)
        self.assertIs(apply_fixrng(_hyp(3), False, min_bytes=5, max_bytes=6, next_cost=4), Action.DISCARD)
        self.assertIs(apply_fixrng(_hyp(3), False, min_bytes=5, max_bytes=10, next_cost=4), Action.EXTEND)
        self.assertIs(apply_fixrng(_hyp(300), False, min_bytes=0, max_bytes=None, next_cost=4), Action.EXTEND)

    def test_every_action_reachable(self):
        seen = {
            apply_fixrng(_hyp(h), eos, min_bytes=5, max_bytes=10, next_cost=c)
            for h, eos, c in [(3, True, 0), (5, True, 0), (8, False, 4), (3, False, 1)]
        }
        self.assertSetEqual(seen, set(Action))


class TestConstraint(unittest.TestCase):
    def test_defaults(self):
        self.assertEqual(DecodeConstraint.free().beam_size, 10)
        self.assertEqual(DecodeConstraint.fixlen(30).beam_size, 10)
        self.assertEqual(DecodeConstraint.fixrng(0, 75).beam_size, 30)

    def test_step_cap(self):
        self.assertEqual(DecodeConstraint.free().step_cap, 120)
        self.assertEqual(DecodeConstraint.fixlen(30).step_cap, 120)
        self.assertEqual(DecodeConstraint.fixlen(0).step_cap, 1)
        self.assertEqual(DecodeConstraint.fixrng(0, 10).step_cap, 40)
        self.assertEqual(DecodeConstraint.fixrng(5).step_cap, 120)
        self.assertEqual(DecodeConstraint.fixlen(30, max_steps=7).step_cap, 7)

    @parameterized.expand([
        ('fixlen', {}),
        ('fixlen', {'desired': -1}),
        ('fixrng', {'min_bytes': 10, 'max_bytes': 5}),
        ('free', {'desired': 3}),
        ('free', {'beam_size': 0}),
        ('other', {}),
    ])
    def test_invalid(self, method: str, kwargs: dict):
        with self.assertRaises(ValueError):
            DecodeConstraint(method=method, **kwargs)

    def test_learned(self):
        self.assertEqual(learned_constraint(30, hard=False), DecodeConstraint.free())
        hard = learned_constraint(30, hard=True)
        self.assertIs(hard.method, Method.FIXRNG)
        self.assertEqual((hard.min_bytes, hard.max_bytes, hard.beam_size), (0, 30, 10))


class TestBeamSearch(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def _random_source(self):
        return self.rng.integers(3, 8, size=int(self.rng.integers(2, 7))).tolist()

    def test_fixlen_guarantees(self):
        model = tiny_model(seed=5)
        for _ in range(GUARANTEE_SOURCES):
            desired = int(self.rng.integers(1, 20))
            for hyp in beam_search(model, self._random_source(), DecodeConstraint.fixlen(desired, beam_size=4)):
                self.assertTrue(hyp.finished)
                self.assertEqual(hyp.tokens[-1], EOS_ID)
                self.assertNotIn(EOS_ID, hyp.content)
                self.assertTrue(hyp.was_replaced)
                self.assertLessEqual(hyp.bytes, desired)
                self.assertGreater(hyp.bytes + hyp.replaced_cost, desired)

    def test_fixrng_guarantees(self):
        model = tiny_model(seed=6)
        decoded = 0
        for _ in range(2 * GUARANTEE_SOURCES):
            lo = int(self.rng.integers(0, 8))
            hi = lo + int(self.rng.integers(0, 10))
            try:
                hyps = beam_search(model, self._random_source(), DecodeConstraint.fixrng(lo, hi, beam_size=6))
            except (EmptyBeamError, StepCapError):
                continue
            for hyp in hyps:
                self.assertEqual(hyp.tokens[-1], EOS_ID)
                self.assertTrue(lo <= hyp.bytes <= hi)
            decoded += 1
            if decoded == GUARANTEE_SOURCES:
                break
        self.assertEqual(decoded, GUARANTEE_SOURCES)

    def test_ranked_and_bytes(self):
        model = tiny_model(seed=2)
        hyps = beam_search(model, [3, 4, 5], DecodeConstraint.free(beam_size=5))
        self.assertListEqual(hyps, sorted(hyps, key=lambda h: h.sort_key))
        costs = model.token_bytes.tolist()
        for hyp in hyps:
            expected = sum(costs[t] for t in hyp.content) + max(len(hyp.content) - 1, 0)
            self.assertEqual(hyp.bytes, expected)
            with torch.no_grad():
                self.assertAlmostEqual(hyp.logprob, model.sequence_logprob([3, 4, 5], hyp.tokens).item(), places=9)

    @parameterized.expand([('plain',), ('lenemb',), ('leninit',)])
    def test_beam_one_is_greedy(self, variant: str):
        model = tiny_model(variant, seed=8)
        for _ in range(5):
            source = self._random_source()
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                greedy = greedy_decode(model, source, desired_length=12, max_steps=8)
            try:
                best = beam_search(model, source, DecodeConstraint.free(beam_size=1, max_steps=8), desired_length=12)[0]
            except StepCapError:
                # neither emits EOS within the cap:
                self.assertFalse(greedy.finished)
                self.assertEqual(len(greedy.tokens), 8)
                continue
            self.assertTupleEqual(best.tokens, greedy.tokens)
            self.assertAlmostEqual(best.logprob, greedy.logprob, places=9)

    def test_empty_beam(self):
        model = tiny_model(vocab=Vocabulary(('bb', 'ccc')))
        with self.assertRaises(EmptyBeamError):
            decode(model, [3, 4], DecodeConstraint.fixrng(1, 1))

    def test_step_cap(self):
        model = tiny_model()
        with torch.no_grad():
            model.b_so[EOS_ID] = -1e3
        with self.assertRaises(StepCapError):
            decode(model, [3, 4], DecodeConstraint.free(max_steps=1))

    def test_step_cap_with_finished(self):
        model = tiny_model()
        with self.assertWarns(UserWarning):
            result = decode(model, [3, 4], DecodeConstraint.free(beam_size=100, max_steps=2))
        self.assertTrue(result.cap_reached)
        self.assertEqual(result.num_steps, 2)
        self.assertTrue(all(h.finished for h in result.hypotheses))

    def test_fixlen_empty_summary(self):
        model = tiny_model()
        with self.assertWarns(UserWarning):
            result = decode(model, [3, 4], DecodeConstraint.fixlen(0))
        self.assertTrue(result.empty_summary)
        self.assertTupleEqual(result.best.tokens, (EOS_ID,))
        self.assertEqual(result.best.bytes, 0)

    def test_learned(self):
        with self.assertRaises(VariantMismatchError):
            decode_learned(tiny_model(), [3, 4], desired=10)
        model = tiny_model('lenemb', seed=4)
        for desired in (3, 7, 12):
            best = decode_learned(model, [3, 4, 5], desired=desired, hard=True)
            self.assertLessEqual(best.bytes, desired)
            self.assertEqual(best.tokens[-1], EOS_ID)
        self.assertTrue(decode_learned(tiny_model('leninit'), [3, 4], desired=9).finished)


class TestDecodeCorpus(unittest.TestCase):
    sources = [[3, 4, 5], [6, 7], [5], [4, 4, 3, 7], [7, 6, 5, 4, 3]]

    def test_task(self):
        with self.assertRaises(ValueError):
            DecodeTask()
        with self.assertRaises(ValueError):
            DecodeTask(constraint=DecodeConstraint.free(), learned_length=10)
        with self.assertRaises(VariantMismatchError):
            decode_corpus(tiny_model(), self.sources, DecodeTask(learned_length=10))
        self.assertEqual(DecodeTask(learned_length=10).desired, 10)
        self.assertEqual(DecodeTask(constraint=DecodeConstraint.fixlen(8)).desired, 8)
        self.assertIsNone(DecodeTask(constraint=DecodeConstraint.free()).desired)
        self.assertEqual(DecodeTask(constraint=DecodeConstraint.free(), desired_length=12).desired, 12)
        with self.assertRaises(ValueError):
            DecodeTask(learned_length=10, desired_length=12)
        with self.assertRaises(ValueError):
            DecodeTask(constraint=DecodeConstraint.free(), desired_length=-1)

    @parameterized.expand([('lenemb',), ('leninit',)])
    def test_free_search_needs_conditioning_length(self, variant: str):
        model = tiny_model(variant, seed=3)
        free = DecodeConstraint.free(beam_size=3, max_steps=30)
        with self.assertRaisesRegex(VariantMismatchError, '--method learned'):
            decode_corpus(model, self.sources, DecodeTask(constraint=free))

        results = decode_corpus(model, self.sources, DecodeTask(constraint=free, desired_length=9))
        for source, result in zip(self.sources, results):
            expected = decode(model, source, free, desired_length=9).best
            self.assertTupleEqual(result.best.tokens, expected.tokens)
        # plain models need no length:
        self.assertEqual(len(decode_corpus(tiny_model(), self.sources, DecodeTask(constraint=free))), 5)

    def test_workers_keep_order(self):
        model = tiny_model(seed=9)
        task = DecodeTask(constraint=DecodeConstraint.fixlen(6, beam_size=3))
        serial = decode_corpus(model, self.sources, task)
        parallel = decode_corpus(model, self.sources, task, workers=2)
        self.assertEqual(len(serial), len(self.sources))
        for a, b in zip(serial, parallel):
            self.assertTupleEqual(a.best.tokens, b.best.tokens)
            self.assertAlmostEqual(a.best.logprob, b.best.logprob, places=12)
        for source, result in zip(self.sources, serial):
            self.assertTupleEqual(result.best.tokens, decode(model, source, task.constraint).best.tokens)


if __name__ == '__main__':
    unittest.main()
