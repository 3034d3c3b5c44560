"""Translation-set generation: n-best lists, round-trip paraphrasing, and
multi-checkpoint ensembles.

All three methods turn prompts into PredictionSets and share the same source
path: normalize the prompt under the active policy, tokenize, decode,
detokenize, de-duplicate. A failure on one prompt degrades that prompt to an
empty candidate list and a warning record; it never aborts the batch. Every
method is deterministic: identical inputs produce byte-identical prediction
files.

Per-prompt decoding may run on a small thread pool capped by the
STAPLE_FORGE_THREADS environment variable (default: serial); results are
always assembled in prompt input order.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence, TypeVar

from .corpus import DEFAULT_POLICY, NormalizationPolicy, PredictionSet, Prompt, normalize
from .errors import ValidationError
from .textproc import detokenize, tokenize
from .translator import BeamParams, Checkpoint, CheckpointSeries, decode_nbest

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "STAPLE_FORGE_THREADS"


@dataclass(frozen=True)
class MethodParams:
    n: int = 10
    n_prime: int = 3
    m: int = 6
    beam: BeamParams = field(default_factory=BeamParams)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.n_prime < 1:
            raise ValidationError(f"n_prime must be >= 1, got {self.n_prime}")
        if self.m < 1:
            raise ValidationError(f"m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class MethodWarning:
    prompt_id: str
    stage: str
    message: str


def dedup(candidates: Iterable[str], policy: NormalizationPolicy = DEFAULT_POLICY) -> list[str]:
    """Stable first-occurrence de-duplication under the normalization policy."""
    seen: set[str] = set()
    out: list[str] = []
    for cand in candidates:
        key = normalize(cand, policy)
        if key in seen:
            continue
        seen.add(key)
        out.append(cand)
    return out


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return 1


def _map_prompts(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    cap = _thread_cap()
    if cap == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))


def _source_tokens(text: str, policy: NormalizationPolicy) -> list[str]:
    # normalization runs before tokenization so decode-time tokens match the
    # trained lexicon (the training pipeline does the same)
    return tokenize(normalize(text, policy))


def _decode_sentences(
    ckpt: Checkpoint, text: str, n: int, params: MethodParams, policy: NormalizationPolicy
) -> list[str]:
    beam = replace(params.beam, n_best=n)
    hyps = decode_nbest(ckpt, _source_tokens(text, policy), beam)
    return [detokenize(h.tokens) for h in hyps if h.tokens]


def _check_beam(params: MethodParams) -> None:
    if params.n > params.beam.beam_width:
        raise ValidationError(
            f"n={params.n} exceeds beam_width={params.beam.beam_width}"
        )


def nbest_predict(
    ckpt: Checkpoint,
    prompts: Sequence[Prompt],
    params: MethodParams,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    warnings: list[MethodWarning] | None = None,
) -> list[PredictionSet]:
    """Top-n decoded translations per prompt, de-duplicated in score order."""
    _check_beam(params)

    def one(prompt: Prompt) -> tuple[PredictionSet, list[MethodWarning]]:
        try:
            cands = dedup(_decode_sentences(ckpt, prompt.text, params.n, params, policy), policy)
            warns = [] if cands else [MethodWarning(prompt.id, "nbest", "no candidates")]
            return PredictionSet(prompt.id, tuple(cands)), warns
        except Exception as exc:  # degrade, never abort the batch
            log.warning("prompt %s: n-best decoding failed: %s", prompt.id, exc)
            warn = MethodWarning(prompt.id, "nbest", str(exc))
            return PredictionSet(prompt.id, ()), [warn]

    results = _map_prompts(one, prompts)
    if warnings is not None:
        for _, warns in results:
            warnings.extend(warns)
    return [pset for pset, _ in results]


def paraphrase_predict(
    fwd: Checkpoint,
    bwd: Checkpoint,
    prompts: Sequence[Prompt],
    params: MethodParams,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    warnings: list[MethodWarning] | None = None,
) -> list[PredictionSet]:
    """Extend each n-best list via round-trip paraphrases.

    Per prompt: (1) forward n-best; (2) back-translate each hypothesis to its
    n'-best source sentences, pool, de-duplicate, and drop the original
    prompt; (3) forward-translate each surviving paraphrase 1-best. The output
    is the union of steps 1 and 3, step-1 order first, so it is a superset of
    the plain n-best output.
    """
    _check_beam(params)
    if params.n_prime > params.beam.beam_width:
        raise ValidationError(
            f"n_prime={params.n_prime} exceeds beam_width={params.beam.beam_width}"
        )
    if fwd.direction == bwd.direction:
        raise ValidationError(
            f"paraphrasing needs opposite-direction checkpoints, got "
            f"{fwd.direction!r} and {bwd.direction!r}"
        )

    def one(prompt: Prompt) -> tuple[PredictionSet, list[MethodWarning]]:
        try:
            step1 = dedup(_decode_sentences(fwd, prompt.text, params.n, params, policy), policy)
            pool: list[str] = []
            for sent in step1:
                pool.extend(_decode_sentences(bwd, sent, params.n_prime, params, policy))
            prompt_key = normalize(prompt.text, policy)
            paraphrases = [
                p for p in dedup(pool, policy) if normalize(p, policy) != prompt_key
            ]
            step3: list[str] = []
            for para in paraphrases:
                best = _decode_sentences(fwd, para, 1, params, policy)
                step3.extend(best[:1])
            cands = dedup(step1 + step3, policy)
            warns = [] if cands else [MethodWarning(prompt.id, "paraphrase", "no candidates")]
            return PredictionSet(prompt.id, tuple(cands)), warns
        except Exception as exc:
            log.warning("prompt %s: paraphrasing failed: %s", prompt.id, exc)
            warn = MethodWarning(prompt.id, "paraphrase", str(exc))
            return PredictionSet(prompt.id, ()), [warn]

    results = _map_prompts(one, prompts)
    if warnings is not None:
        for _, warns in results:
            warnings.extend(warns)
    return [pset for pset, _ in results]


def multi_checkpoint_predict(
    series: CheckpointSeries,
    prompts: Sequence[Prompt],
    params: MethodParams,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    warnings: list[MethodWarning] | None = None,
) -> list[PredictionSet]:
    """Union of n-best outputs from the m most recent checkpoints, latest first."""
    if params.m > len(series):
        raise ValidationError(
            f"m={params.m} exceeds the series length {len(series)}"
        )
    latest_first = list(reversed(series.checkpoints[-params.m :]))
    per_checkpoint = [
        nbest_predict(ckpt, prompts, params, policy, warnings) for ckpt in latest_first
    ]
    merged: list[PredictionSet] = []
    for i, prompt in enumerate(prompts):
        pooled: list[str] = []
        for sets in per_checkpoint:
            pooled.extend(sets[i].candidates)
        merged.append(PredictionSet(prompt.id, tuple(dedup(pooled, policy))))
    return merged
