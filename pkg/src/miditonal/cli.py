"""Command-line front end.

Exit codes: 0 success, 1 unreadable or unusable input / unwritable output,
2 invalid flags or missing model directory. Data goes to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .classifier import (
    DEFAULT_KEYWORDS,
    MODEL_DIR_ENV,
    assign_roles,
    evaluate,
    extract_tracks,
    format_report,
    keyword_table_from_config,
    load_corpus,
    load_models,
    save_models,
    stratified_split,
    train_role_models,
)
from .errors import MiditonalError
from .forest import ForestParams
from .midi_io import build_note_list, read_midi, write_midi
from .report import analyse_midi, strain_svg, tension_csv
from .spiral import SpiralParams
from .tonal import analyse_key

log = logging.getLogger("miditonal")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _params(args) -> SpiralParams:
    return SpiralParams.from_config(args.config) if args.config else SpiralParams()


def _keywords(args):
    return keyword_table_from_config(args.config) if args.config else DEFAULT_KEYWORDS


def _model_dir(args) -> Path:
    model_dir = args.model_dir or os.environ.get(MODEL_DIR_ENV)
    if not model_dir:
        raise UsageError(f"no model directory: pass --model-dir or set {MODEL_DIR_ENV}")
    path = Path(model_dir)
    if not path.is_dir():
        raise UsageError(f"model directory {path} does not exist")
    return path


def _write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands


def cmd_tension(args) -> int:
    midi = read_midi(args.file)
    report = analyse_midi(midi, str(args.file), args.window, _params(args), args.rekey, args.direction)
    if args.out_json:
        _write_text(args.out_json, report.to_json())
    if args.out_csv:
        _write_text(args.out_csv, tension_csv(report.tension, report.timesig))
    if args.out_svg:
        _write_text(args.out_svg, strain_svg(report.tension, args.svg_width, args.svg_height))
    if not (args.out_json or args.out_csv or args.out_svg):
        sys.stdout.write(report.to_json())
    for bar, beat in report.key_changes:
        print(f"key change flagged at bar {bar} (beat {beat:g})", file=sys.stderr)
    return EXIT_OK


def cmd_key(args) -> int:
    midi = read_midi(args.file)
    notes, _ = build_note_list(midi)
    _, _, estimate = analyse_key(notes, _params(args))
    if args.json:
        d = estimate.as_dict()
        print(json.dumps({k: d[k] for k in ("tonic_name", "mode", "confidence")}))
    else:
        print(f"{estimate.key} (confidence {estimate.confidence:.4f})")
    return EXIT_OK


def _classify(path, models):
    midi = read_midi(path)
    return midi, assign_roles(midi, models)


def cmd_classify(args) -> int:
    models = load_models(_model_dir(args))
    _, assignment = _classify(args.file, models)
    if args.json:
        print(json.dumps(assignment.as_dict(), indent=2))
        return EXIT_OK
    for role, idx in assignment.assigned:
        p = assignment.probabilities[idx][role]
        print(f"{role:<8} track {idx} (p={p:.3f})")
    if assignment.is_empty:
        print("no melody, bass or harmony track identified")
    if assignment.discarded:
        print(f"discarded tracks: {', '.join(map(str, assignment.discarded))}")
    return EXIT_OK


def cmd_extract(args) -> int:
    models = load_models(_model_dir(args))
    midi, assignment = _classify(args.file, models)
    out = extract_tracks(midi, assignment)
    if assignment.is_empty:
        print("warning: no tracks identified; writing the tempo track only", file=sys.stderr)
    write_midi(out, args.out)
    for role, idx in assignment.assigned:
        print(f"{role:<8} track {idx}")
    return EXIT_OK


def cmd_train(args) -> int:
    data, failures = load_corpus(args.corpus, args.labels, _keywords(args))
    for file_id, err in failures:
        print(f"skipped {file_id}: {err}", file=sys.stderr)
    train, test = stratified_split(data, args.test_fraction, args.seed)
    params = ForestParams(args.trees, args.depth, args.min_leaf, args.seed)
    models = train_role_models(train, params, args.jobs)
    save_models(models, args.out)
    report = evaluate(models, test) if test else None
    if report is not None:
        table = format_report(report)
        print(table)
        _write_text(Path(args.out) / "evaluation.txt", table + "\n")
        _write_text(Path(args.out) / "evaluation.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"trained on {len(train)} tracks, tested on {len(test)}; models in {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- batch


def _batch_one(task):
    """Run one file through a subcommand; returns (name, payload, error)."""
    path, subcommand, options = task
    try:
        midi = read_midi(path)
        if subcommand == "tension":
            params = SpiralParams.from_mapping(options["params"])
            payload = analyse_midi(midi, str(path), options["window"], params, options["rekey"]).as_dict()
        elif subcommand == "key":
            notes, _ = build_note_list(midi)
            payload = analyse_key(notes, SpiralParams.from_mapping(options["params"]))[2].as_dict()
        else:
            payload = assign_roles(midi, load_models(options["model_dir"])).as_dict()
        return str(path), payload, None
    except Exception as exc:  # a failing file is recorded, never fatal
        return str(path), None, f"{type(exc).__name__}: {exc}"


def cmd_batch(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    options = {"params": _params(args).as_dict(), "window": args.window, "rekey": args.rekey}
    if args.subcommand == "classify":
        options["model_dir"] = str(_model_dir(args))
    files = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in (".mid", ".midi"))
    tasks = [(p, args.subcommand, options) for p in files]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_batch_one, tasks))
    else:
        results = [_batch_one(t) for t in tasks]

    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    reports, failures = [], []
    for path, payload, error in results:
        name = Path(path).name
        if error is not None:
            failures.append({"file": name, "error": error})
            print(f"failed {name}: {error}", file=sys.stderr)
            continue
        reports.append(name)
        if out_dir:
            _write_text(out_dir / f"{Path(name).stem}.{args.subcommand}.json", json.dumps(payload, indent=2) + "\n")
    summary = {
        "schema_version": 1,
        "subcommand": args.subcommand,
        "processed": len(results),
        "succeeded": reports,
        "failures": failures,
    }
    text = json.dumps(summary, indent=2) + "\n"
    if out_dir:
        _write_text(out_dir / "summary.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import write_corpus

    label_path = write_corpus(args.out, args.songs, args.seed)
    print(label_path)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="miditonal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with [spiral] parameters and [keywords] lists")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tension", help="tonal tension curves and key-change flags")
    p.add_argument("file")
    p.add_argument("--window", type=positive_float, default=2.0, help="window length in beats (default 2 = half note)")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.add_argument("--out-svg")
    p.add_argument("--svg-width", type=positive_int, default=800)
    p.add_argument("--svg-height", type=positive_int, default=300)
    p.add_argument("--rekey", action="store_true", help="recompute strain against per-segment keys")
    p.add_argument("--direction", choices=("backward", "forward"), default="backward")
    p.set_defaults(func=cmd_tension)

    p = sub.add_parser("key", help="estimate the global key")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_key)

    p = sub.add_parser("classify", help="identify melody, bass and harmony tracks")
    p.add_argument("file")
    p.add_argument("--model-dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("extract", help="write a MIDI file with only the identified tracks")
    p.add_argument("file")
    p.add_argument("--model-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the three role forests")
    p.add_argument("--labels", help="CSV of file_id,track_index,role (track names are used otherwise)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model directory to write")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trees", type=positive_int, default=100)
    p.add_argument("--depth", type=positive_int, default=12)
    p.add_argument("--min-leaf", type=positive_int, default=2)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--jobs", type=positive_int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("batch", help="run a subcommand over every MIDI file in a directory")
    p.add_argument("dir")
    p.add_argument("subcommand", choices=("tension", "key", "classify"))
    p.add_argument("--out-dir")
    p.add_argument("--jobs", type=positive_int, default=1)
    p.add_argument("--model-dir")
    p.add_argument("--window", type=positive_float, default=2.0)
    p.add_argument("--rekey", action="store_true")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("synth", help="write a synthetic labelled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--songs", type=positive_int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MiditonalError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
