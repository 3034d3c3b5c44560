"""Command-line front end.

Subcommands wire corpora, models, methods, and metrics into reproducible
runs:

    score     score a prediction file against a gold file
    train     EM-train a toy translator, persisting per-iteration checkpoints
    generate  produce a prediction file with one method (nbest | paraphrase | ensemble)
    sweep     run the full method/parameter grid and tabulate scores
    bpe       learn / apply / decode byte-pair encodings
    fixtures  print the path of the bundled fixture corpora

Every command that writes an output file also writes a ``<out>.manifest.tsv``
recording the command, resolved parameters, input checksums, tool version and
output checksums; identical inputs reproduce identical outputs and manifests.
Wall-clock duration is reported on stderr only, so manifests stay
byte-reproducible.

Exit codes: 0 success, 2 input/validation error, 3 empty-work error,
1 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .corpus import (
    DEFAULT_POLICY,
    EXACT_POLICY,
    NormalizationPolicy,
    normalize,
    parse_gold,
    parse_predictions,
    parse_prompts,
    write_predictions,
)
from .errors import StapleForgeError, ValidationError
from .metrics import score_corpus, summary_line, write_report
from .methods import (
    MethodParams,
    MethodWarning,
    multi_checkpoint_predict,
    nbest_predict,
    paraphrase_predict,
)
from .textproc import bpe_apply, bpe_decode, bpe_learn, load_bpe, save_bpe, tokenize
from .translator import (
    BeamParams,
    CheckpointSeries,
    load_checkpoint,
    load_series,
    save_series_manifest,
    train_toy,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3

POLICIES = {"default": DEFAULT_POLICY, "exact": EXACT_POLICY}

DEFAULT_SWEEP_N = (5, 10, 15, 20)
DEFAULT_SWEEP_N_PRIME = (1, 3, 5)
DEFAULT_SWEEP_M = (2, 4, 6, 8)


@dataclass(frozen=True)
class SweepSpec:
    n_values: tuple[int, ...] = DEFAULT_SWEEP_N
    n_prime_values: tuple[int, ...] = DEFAULT_SWEEP_N_PRIME
    m_values: tuple[int, ...] = DEFAULT_SWEEP_M
    fixed_n: int = 10

    def __post_init__(self) -> None:
        for v in (*self.n_values, *self.n_prime_values, *self.m_values, self.fixed_n):
            if v < 1:
                raise ValidationError(f"sweep values must be >= 1, got {v}")


@dataclass
class RunManifest:
    command: str
    parameters: dict[str, str]
    input_checksums: dict[str, str]
    output_checksums: dict[str, str]
    tool_version: str = __version__
    duration_seconds: float = 0.0

    def render(self) -> str:
        # duration is deliberately not persisted: manifests must be
        # byte-identical across reruns with identical inputs
        lines = [f"command\t{self.command}\n", f"tool_version\t{self.tool_version}\n"]
        for key in sorted(self.parameters):
            lines.append(f"param:{key}\t{self.parameters[key]}\n")
        for key in sorted(self.input_checksums):
            lines.append(f"input:{key}\t{self.input_checksums[key]}\n")
        for key in sorted(self.output_checksums):
            lines.append(f"output:{key}\t{self.output_checksums[key]}\n")
        return "".join(lines)


def sha256_path(path: Path) -> str:
    """Checksum a file, or a directory as the digest of its sorted file digests."""
    digest = hashlib.sha256()
    if path.is_dir():
        for sub in sorted(p for p in path.rglob("*") if p.is_file()):
            digest.update(str(sub.relative_to(path)).encode("utf-8"))
            digest.update(b"\x00")
            digest.update(hashlib.sha256(sub.read_bytes()).hexdigest().encode("ascii"))
            digest.update(b"\x00")
    else:
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    return p.read_text(encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _write_manifest(manifest: RunManifest, out_path: str) -> None:
    _write_text(out_path + ".manifest.tsv", manifest.render())
    log.info("%s finished in %.3f s", manifest.command, manifest.duration_seconds)


def _write_warnings(warnings: list[MethodWarning], out_path: str) -> None:
    lines = ["prompt_id\tstage\tmessage\n"]
    lines.extend(f"{w.prompt_id}\t{w.stage}\t{w.message}\n" for w in warnings)
    _write_text(out_path + ".warnings.tsv", "".join(lines))


def fixtures_dir() -> Path:
    return Path(__file__).resolve().parent / "fixtures"


# ---------------------------------------------------------------- commands


def cmd_score(args: argparse.Namespace) -> int:
    policy = POLICIES[args.policy]
    golds = parse_gold(_read_text(args.gold), policy)
    preds = parse_predictions(_read_text(args.pred), policy)
    score = score_corpus(golds, preds, policy)
    buf = io.StringIO()
    write_report(score, buf)
    if args.out:
        _write_text(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    print(summary_line(score))
    return EXIT_OK


def _parse_parallel(
    text: str, swap: bool, policy: NormalizationPolicy
) -> list[tuple[list[str], list[str]]]:
    pairs: list[tuple[list[str], list[str]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise ValidationError("expected 'source<TAB>target'", lineno)
        src, tgt = cols[0], cols[1]
        if swap:
            src, tgt = tgt, src
        pairs.append((tokenize(normalize(src, policy)), tokenize(normalize(tgt, policy))))
    return pairs


def cmd_train(args: argparse.Namespace) -> int:
    policy = POLICIES[args.policy]
    pairs = _parse_parallel(_read_text(args.parallel), args.direction == "bwd", policy)
    series = train_toy(
        pairs, args.iterations, args.out, direction=args.direction, alpha=args.alpha
    )
    save_series_manifest(series, args.out)
    log.info("trained %d checkpoints into %s", len(series), args.out)
    return EXIT_OK


def _load_single(ckpt_arg: str | None, series_arg: str | None, what: str):
    """A model argument is either one checkpoint dir or a series (its last is used)."""
    if ckpt_arg:
        return load_checkpoint(ckpt_arg)
    if series_arg:
        return load_series(series_arg).checkpoints[-1]
    raise ValidationError(f"{what}: pass --ckpt/--series (or the --bwd-* variant)")


def _method_params(args: argparse.Namespace) -> MethodParams:
    beam = BeamParams(
        beam_width=args.beam,
        n_best=min(args.n, args.beam),
        top_k_lexicon=args.top_k,
    )
    return MethodParams(n=args.n, n_prime=args.n_prime, m=args.m, beam=beam)


def cmd_generate(args: argparse.Namespace) -> int:
    started = time.monotonic()
    policy = POLICIES[args.policy]
    prompts = parse_prompts(_read_text(args.prompts))
    params = _method_params(args)
    warnings: list[MethodWarning] = []
    inputs: dict[str, str] = {"prompts": sha256_path(Path(args.prompts))}

    if args.method == "nbest":
        ckpt = _load_single(args.ckpt, args.series, "nbest")
        inputs["model"] = sha256_path(Path(args.ckpt or args.series))
        sets = nbest_predict(ckpt, prompts, params, policy, warnings)
    elif args.method == "paraphrase":
        fwd = _load_single(args.ckpt, args.series, "paraphrase forward model")
        bwd = _load_single(args.bwd_ckpt, args.bwd_series, "paraphrase backward model")
        inputs["model"] = sha256_path(Path(args.ckpt or args.series))
        inputs["bwd_model"] = sha256_path(Path(args.bwd_ckpt or args.bwd_series))
        sets = paraphrase_predict(fwd, bwd, prompts, params, policy, warnings)
    else:  # ensemble
        if not args.series:
            raise ValidationError("ensemble: pass --series")
        series = load_series(args.series)
        inputs["model"] = sha256_path(Path(args.series))
        sets = multi_checkpoint_predict(series, prompts, params, policy, warnings)

    with open(args.out, "w", encoding="utf-8", newline="\n") as sink:
        write_predictions(sets, sink)
    _write_warnings(warnings, args.out)
    manifest = RunManifest(
        command="generate",
        parameters={
            "method": args.method,
            "n": str(args.n),
            "beam": str(args.beam),
            "n_prime": str(args.n_prime),
            "m": str(args.m),
            "policy": args.policy,
        },
        input_checksums=inputs,
        output_checksums={"predictions": sha256_path(Path(args.out))},
        duration_seconds=time.monotonic() - started,
    )
    _write_manifest(manifest, args.out)
    return EXIT_OK


def _percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


def _sweep_cells(
    spec: SweepSpec,
    fwd_series: CheckpointSeries,
    bwd_series: CheckpointSeries | None,
    prompts,
    golds,
    policy: NormalizationPolicy,
    beam_width: int,
    top_k: int,
) -> tuple[list[str], int]:
    """One table row per (method, parameter) cell; failures become NA rows."""
    last = fwd_series.checkpoints[-1]
    rows: list[str] = []
    successes = 0

    def run_cell(method: str, param: str, fn: Callable[[], list]) -> None:
        nonlocal successes
        try:
            sets = fn()
            score = score_corpus(golds, sets, policy)
            rows.append(
                f"{method}\t{param}\t{_percent(score.mean_precision)}"
                f"\t{_percent(score.mean_weighted_recall)}\t{_percent(score.macro_f1)}\n"
            )
            successes += 1
        except Exception as exc:
            log.warning("sweep cell %s %s failed: %s", method, param, exc)
            rows.append(f"{method}\t{param}\tNA\tNA\tNA\n")

    def params_for(n: int, n_prime: int = 3, m: int = 1) -> MethodParams:
        beam = BeamParams(beam_width=beam_width, n_best=min(n, beam_width), top_k_lexicon=top_k)
        return MethodParams(n=n, n_prime=n_prime, m=m, beam=beam)

    for n in spec.n_values:
        run_cell("nbest", f"n={n}", lambda n=n: nbest_predict(last, prompts, params_for(n), policy))
    for np_ in spec.n_prime_values:
        if bwd_series is None:
            log.warning("sweep cell paraphrase n'=%d skipped: no --bwd-series", np_)
            rows.append(f"paraphrase\tn'={np_}\tNA\tNA\tNA\n")
            continue
        bwd_last = bwd_series.checkpoints[-1]
        run_cell(
            "paraphrase",
            f"n'={np_}",
            lambda np_=np_: paraphrase_predict(
                last, bwd_last, prompts, params_for(spec.fixed_n, n_prime=np_), policy
            ),
        )
    for m in spec.m_values:
        run_cell(
            "ensemble",
            f"m={m}",
            lambda m=m: multi_checkpoint_predict(
                fwd_series, prompts, params_for(spec.fixed_n, m=m), policy
            ),
        )
    return rows, successes


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.monotonic()
    policy = POLICIES[args.policy]
    spec = SweepSpec(
        n_values=tuple(args.n_values),
        n_prime_values=tuple(args.n_prime_values),
        m_values=tuple(args.m_values),
        fixed_n=args.fixed_n,
    )
    golds = parse_gold(_read_text(args.gold), policy)
    prompts = parse_prompts(_read_text(args.prompts))
    fwd_series = load_series(args.series)
    bwd_series = load_series(args.bwd_series) if args.bwd_series else None

    header = "method\tparam\tprecision\tweighted_recall\tweighted_f1\n"
    n_cells = len(spec.n_values) + len(spec.n_prime_values) + len(spec.m_values)
    if n_cells == 0:
        _write_text(args.out, header)
        log.warning("empty sweep specification: nothing to run")
        return EXIT_EMPTY
    rows, successes = _sweep_cells(
        spec,
        fwd_series,
        bwd_series,
        prompts,
        golds,
        policy,
        beam_width=args.beam,
        top_k=args.top_k,
    )
    _write_text(args.out, header + "".join(rows))

    inputs = {
        "gold": sha256_path(Path(args.gold)),
        "prompts": sha256_path(Path(args.prompts)),
        "series": sha256_path(Path(args.series)),
    }
    if args.bwd_series:
        inputs["bwd_series"] = sha256_path(Path(args.bwd_series))
    manifest = RunManifest(
        command="sweep",
        parameters={
            "n_values": ",".join(map(str, spec.n_values)),
            "n_prime_values": ",".join(map(str, spec.n_prime_values)),
            "m_values": ",".join(map(str, spec.m_values)),
            "fixed_n": str(spec.fixed_n),
            "beam": str(args.beam),
            "policy": args.policy,
        },
        input_checksums=inputs,
        output_checksums={"table": sha256_path(Path(args.out))},
        duration_seconds=time.monotonic() - started,
    )
    _write_manifest(manifest, args.out)
    if successes == 0:
        log.error("every sweep cell failed")
        return EXIT_INPUT
    return EXIT_OK


def cmd_bpe(args: argparse.Namespace) -> int:
    if args.bpe_command == "learn":
        policy = POLICIES[args.policy]
        corpus = []
        for path in args.inputs:
            for line in _read_text(path).splitlines():
                corpus.append(tokenize(normalize(line, policy)))
        model = bpe_learn(corpus, args.merges)
        with open(args.out, "w", encoding="utf-8", newline="\n") as sink:
            save_bpe(model, sink)
        return EXIT_OK

    model = load_bpe(_read_text(args.model))
    source = _read_text(args.input) if args.input else sys.stdin.read()
    out_lines = []
    for line in source.splitlines():
        toks = line.split()
        result = bpe_apply(model, toks) if args.bpe_command == "apply" else bpe_decode(toks)
        out_lines.append(" ".join(result) + "\n")
    text = "".join(out_lines)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    print(fixtures_dir())
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _int_list(raw: str) -> list[int]:
    raw = raw.strip()
    if not raw:
        return []
    return [int(v) for v in raw.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stapleforge",
        description="Weighted macro-F1 translation-set toolkit: score, train, "
        "generate, sweep, bpe.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score predictions against a gold corpus")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--policy", choices=sorted(POLICIES), default="default")
    p.add_argument("--out", help="write the TSV report here instead of stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="EM-train the toy translator with checkpoints")
    p.add_argument("--parallel", required=True, help="TSV file: source<TAB>target per line")
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--out", required=True, help="series directory for ckpt-NNNN/")
    p.add_argument("--direction", choices=["fwd", "bwd"], default="fwd")
    p.add_argument("--policy", choices=sorted(POLICIES), default="default")
    p.add_argument("--alpha", type=float, default=0.1, help="LM smoothing constant")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="produce a prediction file with one method")
    p.add_argument("--method", choices=["nbest", "paraphrase", "ensemble"], required=True)
    p.add_argument("--ckpt", help="checkpoint directory (nbest/paraphrase forward model)")
    p.add_argument("--series", help="series directory (its last checkpoint, or the ensemble)")
    p.add_argument("--bwd-ckpt", dest="bwd_ckpt", help="backward checkpoint (paraphrase)")
    p.add_argument("--bwd-series", dest="bwd_series", help="backward series (paraphrase)")
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--n-prime", dest="n_prime", type=int, default=3)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--top-k", dest="top_k", type=int, default=8)
    p.add_argument("--policy", choices=sorted(POLICIES), default="default")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", help="run the method/parameter grid and tabulate scores")
    p.add_argument("--series", required=True)
    p.add_argument("--bwd-series", dest="bwd_series", help="backward series for paraphrase rows")
    p.add_argument("--gold", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", dest="n_values", type=_int_list, default=list(DEFAULT_SWEEP_N))
    p.add_argument(
        "--n-prime", dest="n_prime_values", type=_int_list, default=list(DEFAULT_SWEEP_N_PRIME)
    )
    p.add_argument("--m", dest="m_values", type=_int_list, default=list(DEFAULT_SWEEP_M))
    p.add_argument("--fixed-n", dest="fixed_n", type=int, default=10)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--top-k", dest="top_k", type=int, default=8)
    p.add_argument("--policy", choices=sorted(POLICIES), default="default")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bpe", help="learn or apply byte-pair encodings")
    bpe_sub = p.add_subparsers(dest="bpe_command", required=True)
    b = bpe_sub.add_parser("learn")
    b.add_argument("--input", dest="inputs", action="append", required=True)
    b.add_argument("--merges", type=int, default=500)
    b.add_argument("--out", required=True)
    b.add_argument("--policy", choices=sorted(POLICIES), default="default")
    b.set_defaults(func=cmd_bpe)
    for name in ("apply", "decode"):
        b = bpe_sub.add_parser(name)
        b.add_argument("--model", required=True)
        b.add_argument("--input")
        b.add_argument("--out")
        b.set_defaults(func=cmd_bpe)

    p = sub.add_parser("fixtures", help="print the bundled fixture directory")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO, format="stapleforge: %(message)s", stream=sys.stderr
        )
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate" and args.method == "paraphrase":
        if not (args.bwd_ckpt or args.bwd_series):
            parser.error("generate --method paraphrase requires --bwd-ckpt or --bwd-series")
    try:
        return args.func(args)
    except StapleForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
