import json
import os
from contextlib import redirect_stderr, redirect_stdout
from io import StringIO

from torch_lencon.cli import main

from tests.utils import TempDirTestCase

TINY_CORPUS = ['--size', '40', '--vocab-size', '20', '--source-len', '3,6', '--budget', '4,15']
TINY_MODEL = ['--updates', '3', '--batch-size', '4', '--embed', '4', '--hidden', '6', '--len-dim', '3',
              '--len-types', '20', '--log-every', '1']


def run(*argv: str) -> int:
    with redirect_stdout(StringIO()), redirect_stderr(StringIO()):
        return main(list(argv))


def read_lines(path: str):
    with open(path, encoding='utf-8') as f:
        return f.read().splitlines()


class TestCli(TempDirTestCase):
    def path(self, *parts: str) -> str:
        return os.path.join(self.tmp, *parts)

    def test_gen_corpus(self):
        for name in ('a', 'b'):
            self.assertEqual(run('gen-corpus', *TINY_CORPUS, '--seed', '5', '--out', self.path(name)), 0)
        for split in ('train', 'valid', 'test'):
            self.assertListEqual(read_lines(self.path('a', f'{split}.tsv')), read_lines(self.path('b', f'{split}.tsv')))
        self.assertEqual(sum(len(read_lines(self.path('a', f'{s}.tsv'))) for s in ('train', 'valid', 'test')), 40)
        self.assertEqual(read_lines(self.path('a', 'stats.csv'))[0], 'bin_start,count')
        with open(self.path('a', 'manifest.json')) as f:
            manifest = json.load(f)
        self.assertEqual(manifest['command'], 'gen-corpus')
        self.assertEqual(manifest['args']['seed'], 5)

    def test_exit_codes(self):
        self.assertEqual(run('gen-corpus', '--size', '0', '--out', self.path('x')), 1)
        self.assertEqual(run('gen-corpus', '--out', self.path('x')), 2)
        self.assertEqual(run('train', '--corpus', 'c.tsv', '--out', self.path('m'), '--variant', 'other'), 2)
        self.assertEqual(run('train', '--corpus', self.path('missing.tsv'), '--out', self.path('m')), 1)

    def test_config_file(self):
        config = self.write('gen.cfg', f"# tiny corpus\nsize=12\nout={self.path('cfg')}\nsource-len=3,5\n".encode())
        self.assertEqual(run('gen-corpus', '--config', config), 0)
        self.assertEqual(sum(len(read_lines(self.path('cfg', f'{s}.tsv'))) for s in ('train', 'valid', 'test')), 12)
        for line in read_lines(self.path('cfg', 'train.tsv')):
            self.assertTrue(3 <= len(line.split('\t')[0].split()) <= 5)

        # the command line wins:
        self.assertEqual(run('gen-corpus', '--config', config, '--size', '20'), 0)
        self.assertEqual(sum(len(read_lines(self.path('cfg', f'{s}.tsv'))) for s in ('train', 'valid', 'test')), 20)

        bad = self.write('bad.cfg', b"size=12\nnot_a_flag=3\n")
        self.assertEqual(run('gen-corpus', '--config', bad, '--out', self.path('bad')), 1)

    def test_pipeline(self):
        corpus_dir, model_dir, out_dir = self.path('corpus'), self.path('model'), self.path('out')
        self.assertEqual(run('gen-corpus', *TINY_CORPUS, '--out', corpus_dir), 0)
        train, test = os.path.join(corpus_dir, 'train.tsv'), os.path.join(corpus_dir, 'test.tsv')

        self.assertEqual(run('train', '--corpus', train, '--out', model_dir, '--variant', 'lenemb', *TINY_MODEL), 0)
        ckpt = os.path.join(model_dir, 'model.ckpt')
        for name in ('model.ckpt', 'model.ckpt.optim', 'vocab.src', 'vocab.tgt', 'loss.csv', 'manifest.json'):
            self.assertTrue(os.path.exists(os.path.join(model_dir, name)), msg=name)
        self.assertEqual(len(read_lines(os.path.join(model_dir, 'loss.csv'))), 4)

        # resume to 5 updates in a fresh directory:
        resumed_dir = self.path('resumed')
        self.assertEqual(
            run('train', '--corpus', train, '--out', resumed_dir, '--resume', ckpt, *TINY_MODEL[:1], '5',
                *TINY_MODEL[2:]),
            0
        )
        self.assertEqual(len(read_lines(os.path.join(resumed_dir, 'loss.csv'))), 6)

        fixlen = os.path.join(out_dir, 'fixlen.txt')
        self.assertEqual(run('decode', '--checkpoint', ckpt, '--input', test, '--output', fixlen,
                             '--method', 'fixlen', '--length', '10', '--beam', '3', '--nbest', fixlen + '.nbest'), 0)
        lines = read_lines(fixlen)
        self.assertEqual(len(lines), len(read_lines(test)))
        for line in lines:
            desired, nbytes, logprob, summary = line.split('\t')
            self.assertEqual(desired, '10')
            self.assertLessEqual(int(nbytes), 10)
            self.assertEqual(len(summary.encode('utf-8')), int(nbytes))
            self.assertLessEqual(float(logprob), 0.)

        learned = os.path.join(out_dir, 'learned.txt')
        self.assertEqual(run('decode', '--checkpoint', ckpt, '--input', test, '--output', learned,
                             '--method', 'learned', '--length', '8', '--hard', '--beam', '2', '--workers', '2'), 0)
        for line in read_lines(learned):
            self.assertLessEqual(int(line.split('\t')[1]), 8)

        eval_dir = self.path('eval')
        self.assertEqual(run('evaluate', '--system', f'fixlen={fixlen}', '--system', f'learned={learned}',
                             '--references', test, '--limits', '10,75', '--iterations', '100', '--out', eval_dir), 0)
        with open(os.path.join(eval_dir, 'report.json')) as f:
            report = json.load(f)
        self.assertListEqual(report['systems'], ['fixlen', 'learned'])
        self.assertIn('fixlen|learned', report['p_values']['10']['rouge_1'])
        self.assertIn('8', report['length_groups']['learned'])
        self.assertTrue(os.path.exists(os.path.join(eval_dir, 'length_histograms.csv')))

        # learned length control needs a length-conditioned model:
        plain_dir = self.path('plain')
        self.assertEqual(run('train', '--corpus', train, '--out', plain_dir, *TINY_MODEL), 0)
        self.assertEqual(run('decode', '--checkpoint', os.path.join(plain_dir, 'model.ckpt'), '--input', test,
                             '--output', self.path('x.txt'), '--method', 'learned', '--length', '8'), 1)

    def _read_bytes(self, *parts: str) -> bytes:
        with open(self.path(*parts), 'rb') as f:
            return f.read()

    def test_train_and_decode_deterministic(self):
        corpus_dir = self.path('corpus')
        self.assertEqual(run('gen-corpus', *TINY_CORPUS, '--out', corpus_dir), 0)
        train, test = os.path.join(corpus_dir, 'train.tsv'), os.path.join(corpus_dir, 'test.tsv')
        for name in ('m1', 'm2'):
            self.assertEqual(run('train', '--corpus', train, '--out', self.path(name), '--variant', 'leninit',
                                 '--seed', '3', *TINY_MODEL), 0)
        for name in ('model.ckpt', 'loss.csv', 'vocab.src', 'vocab.tgt'):
            self.assertEqual(self._read_bytes('m1', name), self._read_bytes('m2', name), msg=name)

        for name in ('d1.txt', 'd2.txt'):
            self.assertEqual(run('decode', '--checkpoint', self.path('m1', 'model.ckpt'), '--input', test,
                                 '--output', self.path(name), '--method', 'fixlen', '--length', '12',
                                 '--beam', '3'), 0)
        self.assertEqual(self._read_bytes('d1.txt'), self._read_bytes('d2.txt'))

        # a different seed gives a different model:
        self.assertEqual(run('train', '--corpus', train, '--out', self.path('m3'), '--variant', 'leninit',
                             '--seed', '4', *TINY_MODEL), 0)
        self.assertNotEqual(self._read_bytes('m1', 'model.ckpt'), self._read_bytes('m3', 'model.ckpt'))

    def test_free_decoding_of_length_conditioned_model(self):
        corpus_dir, model_dir = self.path('corpus'), self.path('model')
        self.assertEqual(run('gen-corpus', *TINY_CORPUS, '--out', corpus_dir), 0)
        test = os.path.join(corpus_dir, 'test.tsv')
        self.assertEqual(run('train', '--corpus', os.path.join(corpus_dir, 'train.tsv'), '--out', model_dir,
                             '--variant', 'lenemb', *TINY_MODEL), 0)
        decode = ['decode', '--checkpoint', os.path.join(model_dir, 'model.ckpt'), '--input', test,
                  '--method', 'free', '--beam', '10', '--max-steps', '60']

        with self.assertLogs('torch_lencon', level='ERROR') as logs:
            self.assertEqual(run(*decode, '--output', self.path('none.txt')), 1)
        self.assertIn('VariantMismatchError', logs.output[0])
        self.assertIn('--method learned', logs.output[0])

        with_length = self.path('conditioned.txt')
        self.assertEqual(run(*decode, '--output', with_length, '--length', '9'), 0)
        lines = read_lines(with_length)
        self.assertEqual(len(lines), len(read_lines(test)))
        self.assertTrue(all(line.split('\t')[0] == '9' for line in lines))
