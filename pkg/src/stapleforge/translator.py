"""A small trainable statistical translator with persisted checkpoints.

The model is a word-translation lexicon t(target|source) trained with EM
(uniform initialization over co-occurring pairs, then per-iteration fractional
counts and renormalization) plus an add-alpha bigram language model estimated
once from the target side. There is no NULL source word: decoding is monotone
word for word, emitting one target word per source word from the lexicon's
top-k candidates (unknown source words copy through at a fixed penalty), and
hypotheses are scored by average log-likelihood. Ties are broken
lexicographically by token sequence everywhere, so search and its exhaustive
oracle agree element for element whenever the beam saturates the space.

A checkpoint is persisted after every EM iteration. On-disk layout, one
directory per checkpoint:

    meta.tsv     key<TAB>value rows: iteration, direction, corpus_loglik,
                 created_at, alpha, checksum (sha256 over the two model files)
    lexicon.tsv  source<TAB>target<TAB>prob, sorted
    lm.tsv       w1<TAB>w2<TAB>logprob, sorted, including <s>/</s> boundary
                 rows, one "<other>" row per history (add-alpha mass for an
                 unseen in-vocabulary successor) and "<unk>" unigram-backoff
                 rows used when the history itself is out of vocabulary

``<s> </s> <other> <unk>`` are reserved tokens. Probabilities are stored with
12 significant digits; model values are canonicalized to that precision when
built, so a saved checkpoint loads back bit-exactly. A training run's
checkpoints live in ``ckpt-0001/ ... ckpt-NNNN/`` under one series directory.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import os
import time
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CheckpointError, SearchSpaceError, ValidationError
from .textproc import TokenSeq

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
FLOOR_LOGPROB = math.log(PROB_FLOOR)
UNKNOWN_COPY_LOGPROB = -10.0

BOS = "<s>"
EOS = "</s>"
UNSEEN = "<other>"
BACKOFF = "<unk>"
RESERVED_TOKENS = (BOS, EOS, UNSEEN, BACKOFF)

EXHAUSTIVE_LIMIT = 10**6

LexiconTable = dict[str, dict[str, float]]


def quantize(x: float, digits: int = 12) -> float:
    """Round to 12 significant digits, the persisted precision of model values."""
    if x == 0.0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True, eq=True)
class BigramLm:
    """Add-alpha bigram model over the target vocabulary plus sentence boundaries."""

    bigram_logprob: dict[tuple[str, str], float]
    unseen_logprob: dict[str, float]
    unigram_logprob: dict[str, float]
    alpha: float

    def logprob(self, w1: str, w2: str) -> float:
        lp = self.bigram_logprob.get((w1, w2))
        if lp is not None:
            return lp
        if w1 in self.unseen_logprob:
            if w2 in self.unigram_logprob:
                return self.unseen_logprob[w1]
            return FLOOR_LOGPROB
        if w2 in self.unigram_logprob:
            return self.unigram_logprob[w2]
        return FLOOR_LOGPROB


def build_bigram_lm(target_corpus: Iterable[TokenSeq], alpha: float = 0.1) -> BigramLm:
    unigram_counts: Counter[str] = Counter()
    bigram_counts: Counter[tuple[str, str]] = Counter()
    vocab: set[str] = set()
    for seq in target_corpus:
        if not seq:
            continue
        vocab.update(seq)
        unigram_counts.update(seq)
        unigram_counts[EOS] += 1
        prev = BOS
        for w in seq:
            bigram_counts[(prev, w)] += 1
            prev = w
        bigram_counts[(prev, EOS)] += 1
    if not vocab:
        raise ValidationError("cannot estimate a language model from an empty corpus")

    support = sorted(vocab | {EOS})
    v = len(support)
    histories = sorted(vocab | {BOS})
    context_totals: dict[str, int] = {h: 0 for h in histories}
    for (w1, _), c in bigram_counts.items():
        context_totals[w1] += c

    bigram_logprob: dict[tuple[str, str], float] = {}
    unseen_logprob: dict[str, float] = {}
    for w1 in histories:
        denom = context_totals[w1] + alpha * v
        unseen_logprob[w1] = quantize(math.log(alpha / denom))
    for (w1, w2), c in bigram_counts.items():
        denom = context_totals[w1] + alpha * v
        bigram_logprob[(w1, w2)] = quantize(math.log((c + alpha) / denom))

    n_events = sum(unigram_counts.values())
    denom_u = n_events + alpha * v
    unigram_logprob = {
        w: quantize(math.log((unigram_counts[w] + alpha) / denom_u)) for w in support
    }
    return BigramLm(
        bigram_logprob=bigram_logprob,
        unseen_logprob=unseen_logprob,
        unigram_logprob=unigram_logprob,
        alpha=alpha,
    )


@dataclass(frozen=True, eq=True)
class Checkpoint:
    iteration: int
    lexicon: LexiconTable
    lm: BigramLm
    corpus_loglik: float
    created_at: str
    direction: str = "fwd"

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValidationError(f"checkpoint iteration must be >= 1, got {self.iteration}")
        if not math.isfinite(self.corpus_loglik):
            raise ValidationError("corpus log-likelihood must be finite")


@dataclass(frozen=True)
class CheckpointSeries:
    checkpoints: tuple[Checkpoint, ...]
    direction: str = "fwd"

    def __post_init__(self) -> None:
        iters = [c.iteration for c in self.checkpoints]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise ValidationError(f"checkpoint iterations must be strictly increasing: {iters}")
        logliks = [c.corpus_loglik for c in self.checkpoints]
        for a, b in zip(logliks, logliks[1:]):
            if b < a - 1e-9:
                raise ValidationError(
                    f"corpus log-likelihood decreases along the series: {a} -> {b}"
                )

    def __len__(self) -> int:
        return len(self.checkpoints)


@dataclass(frozen=True)
class Hypothesis:
    """A decoded token sequence scored by average log-likelihood."""

    tokens: tuple[str, ...]
    total_logprob: float

    @property
    def avg_logprob(self) -> float:
        return self.total_logprob / max(1, len(self.tokens))


@dataclass(frozen=True)
class BeamParams:
    beam_width: int = 100
    n_best: int = 10
    max_len_ratio: float = 2.0
    top_k_lexicon: int = 8

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValidationError(f"beam_width must be >= 1, got {self.beam_width}")
        if not (1 <= self.n_best <= self.beam_width):
            raise ValidationError(
                f"n_best must satisfy 1 <= n_best <= beam_width, got "
                f"n_best={self.n_best}, beam_width={self.beam_width}"
            )
        if self.max_len_ratio <= 0:
            raise ValidationError(f"max_len_ratio must be > 0, got {self.max_len_ratio}")
        if self.top_k_lexicon < 1:
            raise ValidationError(f"top_k_lexicon must be >= 1, got {self.top_k_lexicon}")


def _created_at() -> str:
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", time.time()))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def corpus_loglikelihood(
    lexicon: LexiconTable, parallel: Sequence[tuple[TokenSeq, TokenSeq]]
) -> float:
    """Sum over pairs of sum_j log((1/l) * sum_i t(f_j | e_i)), no NULL word."""
    total = 0.0
    for src, tgt in parallel:
        if not src or not tgt:
            continue
        inv_len = 1.0 / len(src)
        for f in tgt:
            inner = 0.0
            for e in src:
                row = lexicon.get(e)
                if row is not None:
                    inner += row.get(f, 0.0)
            total += math.log(max(inner * inv_len, PROB_FLOOR))
    return total


def train_toy(
    parallel: Sequence[tuple[TokenSeq, TokenSeq]],
    iterations: int,
    checkpoint_dir: Path | str | None,
    direction: str = "fwd",
    alpha: float = 0.1,
) -> CheckpointSeries:
    """EM-train the lexicon, persisting a checkpoint after every iteration.

    checkpoint_dir=None trains in memory only. Training is deterministic: no
    randomness anywhere, and iteration order is the corpus order.
    """
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    pairs: list[tuple[TokenSeq, TokenSeq]] = []
    for src, tgt in parallel:
        if not src or not tgt:
            log.warning("skipping sentence pair with an empty side: %r -> %r", src, tgt)
            continue
        pairs.append((src, tgt))
    if not pairs:
        raise ValidationError("no usable sentence pairs in the parallel corpus")

    cooc: dict[str, set[str]] = {}
    for src, tgt in pairs:
        for e in set(src):
            cooc.setdefault(e, set()).update(tgt)
    lexicon: LexiconTable = {
        e: {f: quantize(1.0 / len(targets)) for f in sorted(targets)}
        for e, targets in cooc.items()
    }

    lm = build_bigram_lm([tgt for _, tgt in pairs], alpha=alpha)
    out_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    checkpoints: list[Checkpoint] = []
    for it in range(1, iterations + 1):
        counts: dict[str, dict[str, float]] = {}
        for src, tgt in pairs:
            for f in tgt:
                z = 0.0
                for e in src:
                    z += lexicon[e][f]
                for e in src:
                    share = lexicon[e][f] / z
                    row = counts.setdefault(e, {})
                    row[f] = row.get(f, 0.0) + share
        lexicon = {}
        for e, row in counts.items():
            norm = sum(row.values())
            lexicon[e] = {f: quantize(c / norm) for f, c in row.items()}
        loglik = corpus_loglikelihood(lexicon, pairs)
        ckpt = Checkpoint(
            iteration=it,
            lexicon=lexicon,
            lm=lm,
            corpus_loglik=loglik,
            created_at=_created_at(),
            direction=direction,
        )
        if out_dir is not None:
            save_checkpoint(ckpt, out_dir / f"ckpt-{it:04d}")
        checkpoints.append(ckpt)
        log.info("iteration %d: corpus log-likelihood %.6f", it, loglik)
    return CheckpointSeries(checkpoints=tuple(checkpoints), direction=direction)


def emission_candidates(
    lexicon: LexiconTable, source_word: str, top_k: int
) -> list[tuple[str, float]]:
    """The per-position emission model: top-k lexicon entries, or a penalized copy."""
    row = lexicon.get(source_word)
    if not row:
        return [(source_word, UNKNOWN_COPY_LOGPROB)]
    ranked = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return [(w, math.log(max(p, PROB_FLOOR))) for w, p in ranked]


def decode_nbest(
    ckpt: Checkpoint, source: Sequence[str], params: BeamParams
) -> list[Hypothesis]:
    """Monotone beam search returning the n-best hypotheses by average log-likelihood."""
    if not source:
        return [Hypothesis(tokens=(), total_logprob=0.0)]
    beam: list[tuple[float, tuple[str, ...]]] = [(0.0, ())]
    for src_word in source:
        cands = emission_candidates(ckpt.lexicon, src_word, params.top_k_lexicon)
        extended: list[tuple[float, tuple[str, ...]]] = []
        for total, toks in beam:
            prev = toks[-1] if toks else BOS
            for word, emit_lp in cands:
                extended.append((total + emit_lp + ckpt.lm.logprob(prev, word), toks + (word,)))
        extended.sort(key=lambda h: (-h[0], h[1]))
        beam = extended[: params.beam_width]
    hyps = [Hypothesis(tokens=toks, total_logprob=total) for total, toks in beam]
    hyps.sort(key=lambda h: (-h.avg_logprob, h.tokens))
    return hyps[: params.n_best]


def exhaustive_nbest(
    ckpt: Checkpoint, source: Sequence[str], n_best: int, top_k_lexicon: int = 8
) -> list[Hypothesis]:
    """Enumerate the full candidate space under the same emission model.

    This is the testing oracle for decode_nbest; it refuses spaces larger than
    10^6 sequences.
    """
    if n_best < 1:
        raise ValidationError(f"n_best must be >= 1, got {n_best}")
    if not source:
        return [Hypothesis(tokens=(), total_logprob=0.0)]
    per_position = [
        emission_candidates(ckpt.lexicon, w, top_k_lexicon) for w in source
    ]
    size = 1
    for cands in per_position:
        size *= len(cands)
        if size > EXHAUSTIVE_LIMIT:
            raise SearchSpaceError(
                f"candidate space holds at least {size} sequences "
                f"(limit {EXHAUSTIVE_LIMIT}); refusing to enumerate"
            )
    hyps: list[Hypothesis] = []
    for combo in itertools.product(*per_position):
        total = 0.0
        prev = BOS
        toks: list[str] = []
        for word, emit_lp in combo:
            total = total + emit_lp + ckpt.lm.logprob(prev, word)
            toks.append(word)
            prev = word
        hyps.append(Hypothesis(tokens=tuple(toks), total_logprob=total))
    hyps.sort(key=lambda h: (-h.avg_logprob, h.tokens))
    return hyps[:n_best]


def _checksum(lexicon_text: str, lm_text: str) -> str:
    digest = hashlib.sha256()
    digest.update(lexicon_text.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(lm_text.encode("utf-8"))
    return digest.hexdigest()


def _lexicon_text(lexicon: LexiconTable) -> str:
    rows = []
    for e in sorted(lexicon):
        for f in sorted(lexicon[e]):
            rows.append(f"{e}\t{f}\t{lexicon[e][f]!r}\n")
    return "".join(rows)


def _lm_text(lm: BigramLm) -> str:
    rows = [(w1, w2, lp) for (w1, w2), lp in lm.bigram_logprob.items()]
    rows.extend((w1, UNSEEN, lp) for w1, lp in lm.unseen_logprob.items())
    rows.extend((BACKOFF, w, lp) for w, lp in lm.unigram_logprob.items())
    rows.sort(key=lambda r: (r[0], r[1]))
    return "".join(f"{w1}\t{w2}\t{lp!r}\n" for w1, w2, lp in rows)


def save_checkpoint(ckpt: Checkpoint, directory: Path | str) -> None:
    """Persist a checkpoint; two saves of the same checkpoint are byte-identical."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lexicon_text = _lexicon_text(ckpt.lexicon)
    lm_text = _lm_text(ckpt.lm)
    meta_rows = [
        ("iteration", str(ckpt.iteration)),
        ("direction", ckpt.direction),
        ("corpus_loglik", repr(ckpt.corpus_loglik)),
        ("created_at", ckpt.created_at),
        ("alpha", repr(ckpt.lm.alpha)),
        ("checksum", _checksum(lexicon_text, lm_text)),
    ]
    (directory / "lexicon.tsv").write_text(lexicon_text, encoding="utf-8", newline="\n")
    (directory / "lm.tsv").write_text(lm_text, encoding="utf-8", newline="\n")
    (directory / "meta.tsv").write_text(
        "".join(f"{k}\t{v}\n" for k, v in meta_rows), encoding="utf-8", newline="\n"
    )


def _read_file(directory: Path, name: str) -> str:
    path = directory / name
    if not path.is_file():
        raise CheckpointError(f"missing checkpoint file: {path}")
    return path.read_text(encoding="utf-8")


def load_checkpoint(directory: Path | str) -> Checkpoint:
    directory = Path(directory)
    meta_text = _read_file(directory, "meta.tsv")
    lexicon_text = _read_file(directory, "lexicon.tsv")
    lm_text = _read_file(directory, "lm.tsv")

    meta: dict[str, str] = {}
    for line in meta_text.splitlines():
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise CheckpointError(f"corrupt meta.tsv row in {directory}: {line!r}")
        meta[cols[0]] = cols[1]
    for key in ("iteration", "direction", "corpus_loglik", "created_at", "alpha", "checksum"):
        if key not in meta:
            raise CheckpointError(f"meta.tsv in {directory} is missing key {key!r}")
    if meta["checksum"] != _checksum(lexicon_text, lm_text):
        raise CheckpointError(f"checksum mismatch for checkpoint {directory}")

    lexicon: LexiconTable = {}
    for lineno, line in enumerate(lexicon_text.splitlines(), start=1):
        cols = line.split("\t")
        if len(cols) != 3:
            raise CheckpointError(f"corrupt lexicon.tsv row {lineno} in {directory}: {line!r}")
        lexicon.setdefault(cols[0], {})[cols[1]] = float(cols[2])
    for e, row in lexicon.items():
        total = sum(row.values())
        if abs(total - 1.0) > 1e-9:
            raise CheckpointError(
                f"lexicon row for {e!r} sums to {total!r}, expected 1 (in {directory})"
            )

    bigram: dict[tuple[str, str], float] = {}
    unseen: dict[str, float] = {}
    unigram: dict[str, float] = {}
    for lineno, line in enumerate(lm_text.splitlines(), start=1):
        cols = line.split("\t")
        if len(cols) != 3:
            raise CheckpointError(f"corrupt lm.tsv row {lineno} in {directory}: {line!r}")
        w1, w2, lp = cols[0], cols[1], float(cols[2])
        if w2 == UNSEEN:
            unseen[w1] = lp
        elif w1 == BACKOFF:
            unigram[w2] = lp
        else:
            bigram[(w1, w2)] = lp
    lm = BigramLm(
        bigram_logprob=bigram,
        unseen_logprob=unseen,
        unigram_logprob=unigram,
        alpha=float(meta["alpha"]),
    )
    return Checkpoint(
        iteration=int(meta["iteration"]),
        lexicon=lexicon,
        lm=lm,
        corpus_loglik=float(meta["corpus_loglik"]),
        created_at=meta["created_at"],
        direction=meta["direction"],
    )


def load_series(directory: Path | str) -> CheckpointSeries:
    """Load every ckpt-* subdirectory; validates ordering and EM monotonicity."""
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"checkpoint series directory not found: {directory}")
    subdirs = sorted(p for p in directory.iterdir() if p.is_dir() and p.name.startswith("ckpt-"))
    if not subdirs:
        raise CheckpointError(f"no ckpt-* checkpoints under {directory}")
    checkpoints = tuple(load_checkpoint(p) for p in subdirs)
    directions = {c.direction for c in checkpoints}
    if len(directions) != 1:
        raise CheckpointError(f"mixed directions in series {directory}: {sorted(directions)}")
    return CheckpointSeries(checkpoints=checkpoints, direction=checkpoints[0].direction)


def save_series_manifest(series: CheckpointSeries, directory: Path | str) -> None:
    directory = Path(directory)
    lines = [f"direction\t{series.direction}\n"]
    for ckpt in series.checkpoints:
        lines.append(f"ckpt-{ckpt.iteration:04d}\t{ckpt.corpus_loglik!r}\n")
    (directory / "series.tsv").write_text("".join(lines), encoding="utf-8", newline="\n")
