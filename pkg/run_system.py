#!/usr/bin/env python3
"""
SecretSieve Runner
Command-line interface for scanning app IR corpora for checked-in secrets
"""

import argparse
import json
import os
import sys
from typing import Any, Dict, List, Optional

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from main import SecretSieveSystem
from src.core.errors import CorpusUnreadableError, SecretSieveError, describe_error
from src.core.logging_setup import setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CORPUS_UNREADABLE = 2

UNMASK_ACK_FLAG = '--i-understand-output-contains-secrets'


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse reports usage errors with exit status 1 instead of 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog='run_system.py',
        description='SecretSieve: multi-strategy detection of checked-in secrets in app IR',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a seeded corpus with its manifest and datasets
  python run_system.py gen-corpus config/example_corpus_spec.json --out out --seed 7

  # Scan it with the Three-Layer Filter and signature-flow detectors
  python run_system.py scan out/corpus --detectors three_layer,sig_flow --format table

  # Score a scan against the manifest
  python run_system.py eval out/corpus out/manifest.jsonl

  # Train a string-group classifier
  python run_system.py train out/datasets/string_groups.jsonl --out models/groups.json
        """
    )
    parser.add_argument('--config', help='Scan configuration file (default: config/secretsieve_config.json)')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default='INFO',
                        help='Logging level')
    parser.add_argument('--log-format', choices=['text', 'json'], default='text', help='Log record format')
    parser.add_argument('--log-file', help='Also write logs to this file')

    commands = parser.add_subparsers(dest='command', metavar='command', parser_class=CliParser)
    commands.required = True

    scan = commands.add_parser('scan', help='Scan a corpus and emit a report')
    scan.add_argument('corpus', help='Corpus directory (one subdirectory of .jir files per app)')
    _add_detector_flags(scan)
    scan.add_argument('--format', choices=['json', 'csv', 'table'], dest='output_format',
                      help='Report format (default from config: json)')
    masking = scan.add_mutually_exclusive_group()
    masking.add_argument('--mask', dest='mask', action='store_true', default=None,
                         help='Mask secret values (default)')
    masking.add_argument('--unmask', dest='mask', action='store_false',
                         help=f'Print full secret values; requires {UNMASK_ACK_FLAG}')
    scan.add_argument(UNMASK_ACK_FLAG, dest='unmask_ack', action='store_true', help=argparse.SUPPRESS)
    scan.add_argument('--jobs', type=int, help='Worker threads over apps')
    scan.add_argument('--out', help='Write the report here instead of stdout')
    scan.add_argument('--dump-strings', metavar='FILE', help='Also write every string occurrence as CSV')

    train = commands.add_parser('train', help='Train a learned detector from a labelled dataset')
    train.add_argument('dataset', help='Labelled JSON-lines dataset (as written by gen-corpus)')
    train.add_argument('--target', choices=['string_group', 'intrinsic', 'context'], default='string_group')
    train.add_argument('--model-kind', choices=['logistic_regression', 'naive_bayes', 'linear_svc'],
                       default='linear_svc')
    train.add_argument('--scheme', choices=['char_histogram', 'tfidf', 'count_frequency', 'char_ngram'],
                       default=None, help='Feature scheme (default: char_ngram for intrinsic, count_frequency otherwise)')
    train.add_argument('--variant', choices=['case_sensitive', 'case_insensitive', 'english_word_extraction'],
                       default='case_sensitive')
    train.add_argument('--seed', type=int, default=42, help='Train/test split seed')
    train.add_argument('--tune', action='store_true', help='Pick hyperparameters by training accuracy')
    train.add_argument('--out', required=True, help='Model output path (JSON)')

    evaluate = commands.add_parser('eval', help='Scan a corpus and score it against a manifest')
    evaluate.add_argument('corpus')
    evaluate.add_argument('manifest')
    _add_detector_flags(evaluate)
    evaluate.add_argument('--jobs', type=int)
    evaluate.add_argument('--review-seed', type=int, default=0, help='Seed for the manual-review sample')
    evaluate.add_argument('--out', help='Write the score report here instead of stdout')

    generate = commands.add_parser('gen-corpus', help='Generate a synthetic corpus with a ground-truth manifest')
    generate.add_argument('spec', help='Corpus spec JSON')
    generate.add_argument('--out', required=True, help='Output directory')
    generate.add_argument('--seed', type=int, default=0)
    generate.add_argument('--apps', type=int, dest='n_apps', help='Override the spec app count')
    generate.add_argument('--noise-profile', help='Override the spec noise profile')
    generate.add_argument('--jobs', type=int, default=1)
    generate.add_argument('--no-datasets', action='store_true', help='Skip writing labelled datasets')

    study = commands.add_parser('study', help='Cosine-similarity separability study over string groups')
    study.add_argument('secret', help='Secret groups (JSON lines), or a labelled dataset when given alone')
    study.add_argument('nosecret', nargs='?', help='No-secret groups (JSON lines)')
    study.add_argument('--variant', choices=['case_sensitive', 'case_insensitive', 'english_word_extraction'],
                       default='case_sensitive')
    study.add_argument('--max-pairs', type=int, help='Sample at most this many pairs per comparison')
    study.add_argument('--seed', type=int, default=0)
    study.add_argument('--out', help='Write the study report here instead of stdout')

    commands.add_parser('status', help='Show the effective configuration')
    return parser


def _add_detector_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--rules', dest='rules_path', help='Detection rule catalog')
    parser.add_argument('--sigs', dest='signatures_path', help='Cloud API signature catalog')
    parser.add_argument('--dict', dest='dictionary_path', help='English word list')
    parser.add_argument('--detectors', help='Comma-separated: three_layer,sig_flow,intrinsic,context,string_group')
    parser.add_argument('--intrinsic-model', help='Trained intrinsic-string model')
    parser.add_argument('--context-model', help='Trained context-window model')
    parser.add_argument('--group-model', help='Trained string-group model')


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """CLI flags as config keys; unset flags stay None"""
    overrides: Dict[str, Any] = {key: getattr(args, key, None) for key in (
        'rules_path', 'signatures_path', 'dictionary_path', 'output_format', 'mask', 'jobs')}
    detectors = getattr(args, 'detectors', None)
    overrides['detectors'] = [d for d in detectors.split(',') if d.strip()] if detectors else None
    overrides['models'] = {
        'intrinsic': getattr(args, 'intrinsic_model', None),
        'context': getattr(args, 'context_model', None),
        'string_group': getattr(args, 'group_model', None),
    }
    return overrides


def write_output(data: bytes, out: Optional[str]):
    if out:
        out_dir = os.path.dirname(out)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        with open(out, 'wb') as f:
            f.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def to_json(data: Any) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True) + '\n').encode('utf-8')


def run(args: argparse.Namespace, system: SecretSieveSystem, logger) -> int:
    if args.command == 'scan':
        if not system.config.mask and not args.unmask_ack:
            raise UsageError(f"unmasked output (--unmask or mask: false) also needs {UNMASK_ACK_FLAG}")
        report = system.scan(args.corpus, args.dump_strings)
        write_output(system.render(report), args.out)
        logger.info(f"Scan finished: {len(report.findings)} findings in {len(report.apps)} apps")

    elif args.command == 'train':
        scheme = args.scheme or ('char_ngram' if args.target == 'intrinsic' else 'count_frequency')
        result = system.train(args.dataset, args.out, args.target, args.model_kind, scheme,
                              args.variant, args.seed, args.tune)
        write_output(to_json(result), None)

    elif args.command == 'eval':
        result = system.evaluate(args.corpus, args.manifest, args.review_seed)
        write_output(to_json(result), args.out)

    elif args.command == 'gen-corpus':
        outputs = system.generate_corpus(args.spec, args.out, args.seed, args.n_apps, args.noise_profile,
                                         args.jobs, with_datasets=not args.no_datasets)
        write_output(to_json(outputs), None)

    elif args.command == 'study':
        report = system.study(args.secret, args.nosecret, args.variant, args.max_pairs, args.seed)
        write_output(to_json(report.to_dict()), args.out)

    elif args.command == 'status':
        write_output(to_json(system.get_system_status()), None)

    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = setup_logging(args.log_level, args.log_format, args.log_file)

    try:
        system = SecretSieveSystem(args.config, config_overrides(args))
        return run(args, system, logger)
    except CorpusUnreadableError as e:
        logger.error(describe_error(e))
        return EXIT_CORPUS_UNREADABLE
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(str(e))
        return EXIT_USAGE
    except (SecretSieveError, OSError, ValueError, KeyError) as e:
        logger.error(describe_error(e))
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
