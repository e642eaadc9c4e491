"""
Command-line entry point: ``lencon {gen-corpus,train,decode,evaluate}``. Run ``lencon <command> --help`` for flags.

Any flag can also come from ``--config FILE`` (``key=value`` lines, keys spelled like the flag's destination, e.g.
``batch_size=40``); flags given on the command line win. Each command writes ``manifest.json`` (the resolved
configuration) next to its outputs.
"""
import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence, List, Dict, Tuple

from torch_lencon import __version__
from torch_lencon.data.corpus import load_corpus, save_corpus, split_corpus, length_stats, write_length_stats
from torch_lencon.data.simulate import ToyCorpusConfig, gen_toy_corpus
from torch_lencon.data.vocab import Vocabulary, build_vocab
from torch_lencon.decoding.beam_search import DecodeResult
from torch_lencon.decoding.constraint import DecodeConstraint, Method
from torch_lencon.decoding.parallel import DecodeTask, decode_corpus
from torch_lencon.evaluation.report import evaluate, write_length_histograms, DEFAULT_LIMITS
from torch_lencon.internals.exceptions import (
    InputValidationError, DecodingError, NonFiniteLossError, CorpusFormatError
)
from torch_lencon.internals.utils import parse_key_values
from torch_lencon.model.checkpoint import load_checkpoint
from torch_lencon.model.config import ModelConfig, Variant
from torch_lencon.model.encoder_decoder import EncoderDecoder
from torch_lencon.training.batching import encode_corpus
from torch_lencon.training.config import TrainConfig
from torch_lencon.training.trainer import Trainer, write_loss_curve

logger = logging.getLogger('torch_lencon')

CONTRACT_ERRORS = (InputValidationError, DecodingError, NonFiniteLossError, OSError, ValueError)

SRC_VOCAB, TGT_VOCAB = 'vocab.src', 'vocab.tgt'
CHECKPOINT, LOSS_CURVE, MANIFEST = 'model.ckpt', 'loss.csv', 'manifest.json'


def _int_pair(value: str) -> Tuple[int, int]:
    try:
        lo, hi = (int(v) for v in value.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected `MIN,MAX`, got '{value}'") from None
    return lo, hi


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'") from None


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{value}'") from None


def _named_path(value: str) -> Tuple[str, str]:
    if '=' not in value:
        raise argparse.ArgumentTypeError(f"expected `NAME=PATH`, got '{value}'")
    name, path = value.split('=', 1)
    return name, path


# gen-corpus -----------------------------------------------------------------------------------------------------------
def cmd_gen_corpus(args: argparse.Namespace) -> Dict[str, str]:
    config = ToyCorpusConfig(
        size=args.size,
        vocab_size=args.vocab_size,
        source_len_range=args.source_len,
        budget_range=args.budget,
        word_bytes_range=args.word_bytes,
        seed=args.seed
    )
    os.makedirs(args.out, exist_ok=True)
    pairs = gen_toy_corpus(config)
    outputs = {}
    for name, part in zip(('train', 'valid', 'test'), split_corpus(pairs, args.splits, seed=args.seed)):
        outputs[name] = os.path.join(args.out, f'{name}.tsv')
        save_corpus(part, outputs[name])
    outputs['stats'] = os.path.join(args.out, 'stats.csv')
    write_length_stats(outputs['stats'], length_stats(pairs, bin_width=args.bin_width))
    return outputs


# train ----------------------------------------------------------------------------------------------------------------
def _vocab_paths(directory: str) -> Tuple[str, str]:
    return os.path.join(directory, SRC_VOCAB), os.path.join(directory, TGT_VOCAB)


def cmd_train(args: argparse.Namespace) -> Dict[str, str]:
    pairs = load_corpus(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    src_path, tgt_path = _vocab_paths(args.out)
    ckpt_path = os.path.join(args.out, CHECKPOINT)

    train_config = TrainConfig(
        batch_size=args.batch_size,
        lr=args.lr,
        sample_pool=args.sample_pool,
        regroup_every=args.regroup_every,
        max_updates=args.updates,
        clip_norm=args.clip_norm or None,
        log_every=args.log_every,
        checkpoint_every=args.checkpoint_every,
        seed=args.seed
    )

    if args.resume:
        src_vocab, tgt_vocab = (Vocabulary.load(p) for p in _vocab_paths(os.path.dirname(args.resume) or '.'))
        encoded = encode_corpus(pairs, src_vocab, tgt_vocab)
        trainer = Trainer.resume(args.resume, encoded, train_config, variant=args.variant)
        model_config = trainer.model.config
        if (model_config.V_src, model_config.V_tgt) != (len(src_vocab), len(tgt_vocab)):
            raise InputValidationError(
                f"Checkpoint expects vocabularies of {model_config.V_src}/{model_config.V_tgt} entries, found "
                f"{len(src_vocab)}/{len(tgt_vocab)} next to it."
            )
    else:
        src_vocab, tgt_vocab = build_vocab(pairs, max_src=args.max_src_vocab, max_tgt=args.max_tgt_vocab)
        model_config = ModelConfig(
            V_src=len(src_vocab),
            V_tgt=len(tgt_vocab),
            variant=args.variant or Variant.PLAIN,
            E=args.embed,
            H=args.hidden,
            D_len=args.len_dim,
            L_types=args.len_types,
            init_scale=args.init_scale,
            seed=args.seed
        )
        model = EncoderDecoder.from_config(model_config, tgt_vocab)
        trainer = Trainer(model, encode_corpus(pairs, src_vocab, tgt_vocab), train_config)

    src_vocab.save(src_path)
    tgt_vocab.save(tgt_path)
    logger.info(f"Training a `{model_config.variant.value}` model on {len(pairs):,} pairs "
                f"(updates {trainer.updates:,} -> {train_config.max_updates:,})")
    curve = trainer.fit(checkpoint_path=ckpt_path, progress=args.progress)
    loss_path = os.path.join(args.out, LOSS_CURVE)
    write_loss_curve(loss_path, curve)
    print(ckpt_path)
    return {'checkpoint': ckpt_path, 'optimizer': ckpt_path + '.optim', 'loss_curve': loss_path,
            'src_vocab': src_path, 'tgt_vocab': tgt_path}


# decode ---------------------------------------------------------------------------------------------------------------
def read_sources(path: str) -> List[List[str]]:
    """
    The source column of a corpus file (or whole lines, if they have no TAB).
    """
    sources = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            tokens = line.rstrip('\r\n').split('\t', 1)[0].split()
            if not tokens:
                raise CorpusFormatError("empty source", path=path, line_no=line_no)
            sources.append(tokens)
    return sources


def decode_task(args: argparse.Namespace) -> DecodeTask:
    method = args.method
    if method == 'learned':
        if args.length is None:
            raise InputValidationError("`--method learned` requires `--length`.")
        return DecodeTask(learned_length=args.length, hard=args.hard, beam_size=args.beam)
    kwargs = {'beam_size': args.beam, 'max_steps': args.max_steps}
    if method == Method.FIXLEN.value:
        if args.length is None:
            raise InputValidationError("`--method fixlen` requires `--length`.")
        return DecodeTask(constraint=DecodeConstraint.fixlen(args.length, **kwargs))
    # for free and fixrng, `--length` is what a length-conditioned model is conditioned on
    if method == Method.FIXRNG.value:
        return DecodeTask(constraint=DecodeConstraint.fixrng(args.min or 0, args.max, **kwargs),
                          desired_length=args.length)
    return DecodeTask(constraint=DecodeConstraint.free(**kwargs), desired_length=args.length)


def format_output(result: DecodeResult, desired: Optional[int], tgt_vocab: Vocabulary) -> str:
    best = result.best
    summary = " ".join(tgt_vocab.decode(best.content))
    desired = '-' if desired is None else str(desired)
    return f"{desired}\t{best.bytes}\t{best.logprob:.6f}\t{summary}"


def cmd_decode(args: argparse.Namespace) -> Dict[str, str]:
    vocab_dir = args.vocab_dir or os.path.dirname(args.checkpoint) or '.'
    src_vocab, tgt_vocab = (Vocabulary.load(p) for p in _vocab_paths(vocab_dir))
    model = load_checkpoint(args.checkpoint)
    task = decode_task(args)
    sources = [src_vocab.encode(tokens) for tokens in read_sources(args.input)]
    logger.info(f"Decoding {len(sources):,} sources with a `{model.variant.value}` model ({args.method})")
    results = decode_corpus(model, sources, task, workers=args.workers, progress=args.progress)

    out_dir = os.path.dirname(args.output)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(args.output, 'w', encoding='utf-8', newline='\n') as f:
        for result in results:
            f.write(format_output(result, task.desired, tgt_vocab) + '\n')
    outputs = {'output': args.output}
    if args.nbest:
        with open(args.nbest, 'w', encoding='utf-8', newline='\n') as f:
            for i, result in enumerate(results):
                for rank, hyp in enumerate(result.hypotheses):
                    summary = " ".join(tgt_vocab.decode(hyp.content))
                    f.write(f"{i}\t{rank}\t{hyp.logprob:.6f}\t{hyp.bytes}\t{summary}\n")
        outputs['nbest'] = args.nbest
    return outputs


# evaluate -------------------------------------------------------------------------------------------------------------
def read_system_outputs(path: str) -> Tuple[List[List[str]], List[Optional[int]]]:
    """
    Read a `decode` output file: ``desired<TAB>bytes<TAB>logprob<TAB>summary`` per line.
    """
    outputs, desired = [], []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            fields = line.rstrip('\r\n').split('\t')
            if len(fields) != 4:
                raise CorpusFormatError(f"expected 4 TAB-separated fields, got {len(fields)}", path=path,
                                        line_no=line_no)
            desired.append(None if fields[0] == '-' else int(fields[0]))
            outputs.append(fields[3].split())
    return outputs, desired


def read_references(path: str, reference_format: str) -> List[List[List[str]]]:
    if reference_format == 'corpus':
        return [[list(pair.target)] for pair in load_corpus(path)]
    references = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            refs = [field.split() for field in line.rstrip('\r\n').split('\t') if field.strip()]
            if not refs:
                raise CorpusFormatError("no references", path=path, line_no=line_no)
            references.append(refs)
    return references


def cmd_evaluate(args: argparse.Namespace) -> Dict[str, str]:
    if not args.system:
        raise InputValidationError("Pass at least one `--system NAME=PATH`.")
    references = read_references(args.references, args.reference_format)
    systems, desired = {}, {}
    for name, path in args.system:
        if name in systems:
            raise InputValidationError(f"System name '{name}' given twice.")
        systems[name], desired[name] = read_system_outputs(path)
    report = evaluate(
        systems,
        references,
        limits=args.limits,
        desired=desired,
        iterations=args.iterations,
        seed=args.seed,
        bin_width=args.bin_width,
        workers=args.workers
    )
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, 'report.json')
    with open(report_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(report.to_json() + '\n')
    hist_path = os.path.join(args.out, 'length_histograms.csv')
    write_length_histograms(hist_path, report)
    return {'report': report_path, 'length_histograms': hist_path}


# parser ---------------------------------------------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='lencon', description="Length-controllable encoder-decoder experiments.")
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="A file of `key=value` defaults.")
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-corpus', parents=[common], help="Write a synthetic prefix-truncation corpus.")
    gen.add_argument('--size', type=int, required=True)
    gen.add_argument('--out', required=True)
    gen.add_argument('--vocab-size', type=int, default=200)
    gen.add_argument('--source-len', type=_int_pair, default=(15, 30), metavar='MIN,MAX')
    gen.add_argument('--budget', type=_int_pair, default=(10, 60), metavar='MIN,MAX')
    gen.add_argument('--word-bytes', type=_int_pair, default=(2, 8), metavar='MIN,MAX')
    gen.add_argument('--splits', type=_float_list, default=[.8, .1, .1], metavar='TRAIN,VALID,TEST')
    gen.add_argument('--bin-width', type=int, default=5)
    gen.set_defaults(func=cmd_gen_corpus)

    tr = sub.add_parser('train', parents=[common], help="Train a model.")
    tr.add_argument('--corpus', required=True)
    tr.add_argument('--out', required=True)
    tr.add_argument('--variant', choices=[v.value for v in Variant], default=None,
                    help="Default: plain (or the resumed checkpoint's variant).")
    tr.add_argument('--updates', type=int, default=10_000)
    tr.add_argument('--resume', default=None, metavar='CHECKPOINT')
    tr.add_argument('--batch-size', type=int, default=80)
    tr.add_argument('--lr', type=float, default=.001)
    tr.add_argument('--sample-pool', type=int, default=800_000)
    tr.add_argument('--regroup-every', type=int, default=10_000)
    tr.add_argument('--clip-norm', type=float, default=5.0, help="0 disables clipping.")
    tr.add_argument('--log-every', type=int, default=100)
    tr.add_argument('--checkpoint-every', type=int, default=None)
    tr.add_argument('--embed', type=int, default=100)
    tr.add_argument('--hidden', type=int, default=200)
    tr.add_argument('--len-dim', type=int, default=100)
    tr.add_argument('--len-types', type=int, default=300)
    tr.add_argument('--init-scale', type=float, default=.1)
    tr.add_argument('--max-src-vocab', type=int, default=None)
    tr.add_argument('--max-tgt-vocab', type=int, default=None)
    tr.add_argument('--progress', action='store_true')
    tr.set_defaults(func=cmd_train)

    dec = sub.add_parser('decode', parents=[common], help="Decode the source column of a corpus file.")
    dec.add_argument('--checkpoint', required=True)
    dec.add_argument('--input', required=True)
    dec.add_argument('--output', required=True)
    dec.add_argument('--vocab-dir', default=None, help="Default: the checkpoint's directory.")
    dec.add_argument('--method', choices=[m.value for m in Method] + ['learned'], default='free')
    dec.add_argument('--length', type=int, default=None,
                     help="The budget for fixlen and learned; the conditioning length otherwise.")
    dec.add_argument('--min', type=int, default=None)
    dec.add_argument('--max', type=int, default=None)
    dec.add_argument('--hard', action='store_true')
    dec.add_argument('--beam', type=int, default=None)
    dec.add_argument('--max-steps', type=int, default=None)
    dec.add_argument('--nbest', default=None, metavar='PATH')
    dec.add_argument('--workers', type=int, default=1)
    dec.add_argument('--progress', action='store_true')
    dec.set_defaults(func=cmd_decode)

    ev = sub.add_parser('evaluate', parents=[common], help="Score decode outputs with ROUGE and length reports.")
    ev.add_argument('--system', type=_named_path, action='append', default=[], metavar='NAME=PATH')
    ev.add_argument('--references', required=True)
    ev.add_argument('--reference-format', choices=['corpus', 'multi'], default='corpus')
    ev.add_argument('--limits', type=_int_list, default=list(DEFAULT_LIMITS))
    ev.add_argument('--iterations', type=int, default=10_000)
    ev.add_argument('--bin-width', type=int, default=5)
    ev.add_argument('--workers', type=int, default=1)
    ev.add_argument('--out', required=True)
    ev.set_defaults(func=cmd_evaluate)
    return parser


_TRUE, _FALSE = {'1', 'true', 'yes', 'on'}, {'0', 'false', 'no', 'off'}


def _apply_config_file(subparser: argparse.ArgumentParser, path: str):
    with open(path, 'r', encoding='utf-8') as f:
        values = parse_key_values(f)
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.replace('-', '_')
        action = actions.get(dest)
        if action is None or dest in ('config', 'help', 'func'):
            raise InputValidationError(f"{path}: unknown setting '{key}'.")
        if isinstance(action, argparse._AppendAction):
            defaults[dest] = [action.type(v.strip()) if action.type else v.strip() for v in value.split(';')]
        elif action.nargs == 0:
            if value.lower() not in _TRUE | _FALSE:
                raise InputValidationError(f"{path}: '{key}' expects true/false, got '{value}'.")
            defaults[dest] = value.lower() in _TRUE
        else:
            # string defaults are converted by the action's `type`:
            defaults[dest] = value
        action.required = False
    subparser.set_defaults(**defaults)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # find `--config` before the full parse, so that it can satisfy required flags:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('command', nargs='?')
    pre.add_argument('--config')
    early, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if early.config and early.command in subparsers:
        _apply_config_file(subparsers[early.command], early.config)
    return parser.parse_args(argv)


def write_manifest(args: argparse.Namespace, outputs: Dict[str, str], path: str):
    resolved = {k: v for k, v in vars(args).items() if k != 'func'}
    manifest = {'version': __version__, 'command': args.command, 'args': resolved, 'outputs': outputs}
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True, default=str) + '\n')


def _manifest_dir(args: argparse.Namespace) -> str:
    if args.command == 'decode':
        return os.path.dirname(args.output) or '.'
    return args.out


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except CONTRACT_ERRORS as e:
        logging.basicConfig(level=logging.INFO, format='%(levelname)s %(name)s: %(message)s')
        logger.error(str(e))
        return 1

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )
    logging.captureWarnings(True)
    try:
        outputs = args.func(args)
        manifest_path = os.path.join(_manifest_dir(args), MANIFEST)
        write_manifest(args, outputs, manifest_path)
    except CONTRACT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    for name, path in sorted(outputs.items()):
        logger.info(f"wrote {name}: {path}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
