"""Command-line entry points.

    dcnopt export-space [--out FILE]          write the default genome space
    dcnopt init --space F --store F ...       write a run header only
    dcnopt run --space F --store F ...        execute or resume a run
    dcnopt report --store F [--window N]      convergence curves as CSV
    dcnopt best --store F [-k N]              top-k trials as JSON
    dcnopt export-arch --space F --store F --trial N --out F

Exit codes: 0 success, 1 user error (bad flags, bad files, mismatched
headers), 2 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from .acquisition import AcquisitionConfig
from .dcn import (
    InvalidArchitecture,
    TrialConfigExporter,
    build_space,
    decode,
    export_config,
    is_genome_space,
)
from .evaluators import (
    ArchValidityGate,
    EvaluatorError,
    ExternalEvaluator,
    SurfaceSpec,
    SurrogateEvaluator,
)
from .optimizer import OptimizerConfig, resume, run_header, run_optimizer
from .report import compute_curves, curves_to_csv
from .space import SpaceError, load_space, space_to_json
from .store import StoreError, TrialStore, load

__all__ = ["cli", "main", "build_arg_parser"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dcnopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("export-space", help="write the default genome space definition")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    def run_flags(p, with_run_only: bool):
        p.add_argument("--space", type=Path, required=True, help="space definition JSON")
        p.add_argument("--store", type=Path, required=True, help="trial store file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--t-init", type=int, default=32, help="random seeding trials")
        p.add_argument("--gamma", type=float, default=0.5, help="good/bad split quantile")
        p.add_argument("--p", type=float, default=0.9, help="density-ratio branch probability")
        p.add_argument("--candidates", type=int, default=64, help="candidates per proposal")
        if with_run_only:
            p.add_argument("--n-total", type=int, required=True, help="total trial budget")
            p.add_argument(
                "--evaluator",
                default="surrogate",
                help='"surrogate" or command:"..." for the external protocol',
            )
            p.add_argument("--timeout", type=float, default=86_400.0,
                           help="external evaluation timeout in seconds")
            p.add_argument("--recover", action="store_true",
                           help="drop a truncated trailing record when resuming")

    run_flags(sub.add_parser("init", help="write a run header without running"), False)
    run_flags(sub.add_parser("run", help="execute or resume an optimization run"), True)

    p = sub.add_parser("report", help="emit convergence curves as CSV")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--window", type=int, default=10, help="trailing window size")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    p = sub.add_parser("best", help="print the lowest-error trials as JSON")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("-k", type=int, default=1, help="how many trials")

    p = sub.add_parser("export-arch", help="decode one trial into a trainer config")
    p.add_argument("--space", type=Path, required=True)
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--trial", type=int, required=True, help="trial id to decode")
    p.add_argument("--out", type=Path, required=True, help="config file to write")

    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        n_total=getattr(args, "n_total", args.t_init),
        t_init=args.t_init,
        acquisition=AcquisitionConfig(
            gamma=args.gamma, p_hybrid=args.p, n_candidates=args.candidates
        ),
        master_seed=args.seed,
    )


def _make_evaluator(args, space):
    spec = args.evaluator
    genome = is_genome_space(space)
    if spec == "surrogate":
        evaluator = SurrogateEvaluator(SurfaceSpec.default_for_space(space))
        # undecodable genomes count as invalid-arch trials, not surface points
        return ArchValidityGate(evaluator, space) if genome else evaluator
    if spec.startswith("command:"):
        cmd = spec[len("command:"):]
        if not cmd.strip():
            raise _UsageError("empty external command")
        exporter = None
        if genome:
            exporter = TrialConfigExporter(space, args.store.parent / (args.store.name + ".configs"))
        return ExternalEvaluator(
            cmd, timeout=args.timeout, run_dir=args.store.parent, exporter=exporter
        )
    raise _UsageError(f'unknown evaluator {spec!r} (use "surrogate" or command:"...")')


def _write_or_print(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _cmd_export_space(args) -> int:
    text = json.dumps(space_to_json(build_space()), indent=2) + "\n"
    _write_or_print(text, args.out)
    return 0


def _cmd_init(args) -> int:
    space = load_space(args.space)
    store = TrialStore(args.store)
    store.initialize(run_header(space, _optimizer_config(args)))
    print(f"initialized {args.store}", file=sys.stderr)
    return 0


def _cmd_run(args) -> int:
    space = load_space(args.space)
    cfg = _optimizer_config(args)
    evaluator = _make_evaluator(args, space)
    store = TrialStore(args.store)
    if store.exists():
        db = resume(space, evaluator, cfg, store, recover=args.recover)
    else:
        db = run_optimizer(space, evaluator, cfg, store)
    best = db.best(1)[0]
    print(f"completed {len(db.trials)} trials; best error {best.error * 100:.2f}% (trial {best.id})")
    return 0


def _cmd_report(args) -> int:
    db = load(args.store)
    _write_or_print(curves_to_csv(compute_curves(db, window=args.window)), args.out)
    return 0


def _cmd_best(args) -> int:
    db = load(args.store)
    docs = [
        {
            "id": t.id,
            "error": t.error,
            "status": t.status,
            "branch": t.branch,
            "assignment": t.assignment,
        }
        for t in db.best(max(1, args.k))
    ]
    print(json.dumps(docs, indent=2))
    return 0


def _cmd_export_arch(args) -> int:
    space = load_space(args.space)
    db = load(args.store)
    matches = [t for t in db.trials if t.id == args.trial]
    if not matches:
        raise _UsageError(f"no trial {args.trial} in {args.store}")
    arch = decode(space, matches[0].assignment)
    if isinstance(arch, InvalidArchitecture):
        raise _UsageError(f"trial {args.trial} is not a valid architecture: {arch.reason}")
    args.out.write_text(export_config(arch, training_meta={"trial_id": args.trial}),
                        encoding="utf-8")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "export-space": _cmd_export_space,
    "init": _cmd_init,
    "run": _cmd_run,
    "report": _cmd_report,
    "best": _cmd_best,
    "export-arch": _cmd_export_arch,
}


def cli(argv: list[str] | None = None) -> int:
    """Dispatch one command; returns the process exit code."""
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except (_UsageError, SpaceError, StoreError, EvaluatorError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(cli())
