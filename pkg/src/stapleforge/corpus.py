"""Prompt/translation corpora: normalization, block-format parsing, and writing.

Gold file format (UTF-8, LF line endings):

    q1|is my explanation clear?
    minha explicação está clara?|0.26739
    minha explicação é clara?|0.16168

    q2|this is my fault.
    isto é minha culpa.|0.17991

One block per prompt: a header line ``id|prompt text`` followed by one
``translation|weight`` line per accepted translation (weight is a decimal in
(0, 1], ``.`` separator, at most 6 fractional digits), blocks separated by a
blank line. Weights are response fractions; a block's weights may sum to less
than 1 (published sets are often truncated) and are never renormalized.

Prediction files use the same block layout with bare translation lines (no
weights). A prompts file is just the header lines, one ``id|text`` per line.

Matching elsewhere in the toolkit compares sentences only after applying a
:class:`NormalizationPolicy`; the all-false policy is exact string match.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, TextIO

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class NormalizationPolicy:
    """Pure configuration for sentence canonicalization before matching."""

    lowercase: bool = True
    strip_punctuation: bool = True
    collapse_whitespace: bool = True
    unicode_nfc: bool = True


DEFAULT_POLICY = NormalizationPolicy()
EXACT_POLICY = NormalizationPolicy(
    lowercase=False, strip_punctuation=False, collapse_whitespace=False, unicode_nfc=False
)


@lru_cache(maxsize=None)
def is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(text: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Canonicalize a sentence under the given policy.

    Deterministic and idempotent for every Unicode input; an empty result is
    legal and signals an all-punctuation input.
    """
    if policy.unicode_nfc:
        text = unicodedata.normalize("NFC", text)
    if policy.lowercase:
        text = text.lower()
    if policy.strip_punctuation:
        text = "".join(ch for ch in text if not is_punct(ch))
    if policy.collapse_whitespace:
        text = " ".join(text.split())
    if policy.unicode_nfc:
        # removing characters can juxtapose a base letter with a combining
        # mark; re-composing keeps normalize(normalize(x)) == normalize(x)
        text = unicodedata.normalize("NFC", text)
    return text


@dataclass(frozen=True)
class Prompt:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("prompt id must be non-empty")
        if "|" in self.id or "\n" in self.id:
            raise ValidationError(f"prompt id may not contain '|' or newline: {self.id!r}")
        if not self.text.strip():
            raise ValidationError(f"prompt {self.id}: text is empty")


@dataclass(frozen=True)
class WeightedTranslation:
    text: str
    weight: float

    def __post_init__(self) -> None:
        if not (0.0 < self.weight <= 1.0):
            raise ValidationError(f"weight {self.weight} outside (0, 1] for {self.text!r}")


@dataclass(frozen=True)
class GoldSet:
    """A prompt plus its weighted accepted translations, sorted by weight."""

    prompt: Prompt
    translations: tuple[WeightedTranslation, ...]

    @property
    def total_weight(self) -> float:
        total = 0.0
        for t in self.translations:
            total += t.weight
        return total


@dataclass(frozen=True)
class PredictionSet:
    """De-duplicated candidate translations for one prompt, best first."""

    prompt_id: str
    candidates: tuple[str, ...]


def _blocks(stream: str) -> Iterable[list[tuple[int, str]]]:
    """Yield blocks as lists of (1-based line number, line).

    Only strictly empty lines separate blocks; a whitespace-only line stays
    inside its block (prediction parsing skips it with a warning).
    """
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(stream.splitlines(), start=1):
        line = raw.lstrip("﻿") if lineno == 1 else raw
        if line == "":
            if block:
                yield block
                block = []
            continue
        block.append((lineno, line))
    if block:
        yield block


def _parse_header(lineno: int, line: str) -> Prompt:
    if "|" not in line:
        raise ParseError(f"malformed header (expected 'id|prompt'): {line!r}", lineno)
    pid, text = line.split("|", 1)
    try:
        return Prompt(id=pid.strip(), text=text.strip())
    except ValidationError as exc:
        raise ValidationError(str(exc), lineno) from None


def parse_gold(stream: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> list[GoldSet]:
    """Parse a gold corpus. Translations come back sorted by weight, non-increasing."""
    golds: list[GoldSet] = []
    for block in _blocks(stream):
        header_lineno, header = block[0]
        prompt = _parse_header(header_lineno, header)
        if len(block) == 1:
            raise ValidationError(f"empty block for prompt {prompt.id!r}", header_lineno)
        translations: list[WeightedTranslation] = []
        seen: dict[str, str] = {}
        total = 0.0
        for lineno, line in block[1:]:
            if "|" not in line:
                raise ParseError(f"expected 'translation|weight': {line!r}", lineno)
            text, weight_str = line.rsplit("|", 1)
            text = text.strip()
            try:
                weight = float(weight_str)
            except ValueError:
                raise ParseError(f"bad weight literal {weight_str!r}", lineno) from None
            key = normalize(text, policy)
            if not key:
                raise ValidationError(f"translation is empty after normalization: {text!r}", lineno)
            if key in seen:
                raise ValidationError(
                    f"duplicate translation {text!r} (same as {seen[key]!r} after normalization)",
                    lineno,
                )
            seen[key] = text
            try:
                translations.append(WeightedTranslation(text=text, weight=weight))
            except ValidationError as exc:
                raise ValidationError(str(exc), lineno) from None
            total += weight
        if total > 1.0 + WEIGHT_SUM_TOLERANCE:
            raise ValidationError(
                f"weights for prompt {prompt.id!r} sum to {total}, above 1", header_lineno
            )
        translations.sort(key=lambda t: -t.weight)
        golds.append(GoldSet(prompt=prompt, translations=tuple(translations)))
    return golds


def parse_predictions(
    stream: str, policy: NormalizationPolicy = DEFAULT_POLICY
) -> list[PredictionSet]:
    """Parse a prediction corpus.

    Candidates are de-duplicated under ``policy`` (first occurrence wins, the
    original surface form is kept). Every dropped line is reported through the
    module logger: nothing is discarded silently.
    """
    sets: list[PredictionSet] = []
    seen_ids: set[str] = set()
    for block in _blocks(stream):
        header_lineno, header = block[0]
        if "|" not in header:
            raise ParseError(f"malformed header (expected 'id|prompt'): {header!r}", header_lineno)
        pid = header.split("|", 1)[0].strip()
        if not pid:
            raise ValidationError("prompt id must be non-empty", header_lineno)
        if pid in seen_ids:
            raise ValidationError(f"duplicate prompt id {pid!r}", header_lineno)
        seen_ids.add(pid)
        candidates: list[str] = []
        keys: set[str] = set()
        for lineno, line in block[1:]:
            text = line.strip()
            if not text:
                log.warning("line %d: skipped empty candidate line", lineno)
                continue
            key = normalize(text, policy)
            if key in keys:
                log.warning("line %d: dropped duplicate candidate %r", lineno, text)
                continue
            keys.add(key)
            candidates.append(text)
        sets.append(PredictionSet(prompt_id=pid, candidates=tuple(candidates)))
    return sets


def write_predictions(sets: Iterable[PredictionSet], sink: TextIO) -> None:
    """Write prediction sets in block format; parse_predictions inverts this."""
    first = True
    for pset in sets:
        if not first:
            sink.write("\n")
        first = False
        sink.write(f"{pset.prompt_id}|\n")
        for cand in pset.candidates:
            if not cand.strip():
                raise ValidationError(
                    f"prompt {pset.prompt_id!r}: empty candidates cannot be written"
                )
            sink.write(cand + "\n")


def parse_prompts(stream: str) -> list[Prompt]:
    """Parse a prompts file: one ``id|text`` line per prompt, blank lines ignored."""
    prompts: list[Prompt] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(stream.splitlines(), start=1):
        line = (raw.lstrip("﻿") if lineno == 1 else raw).strip()
        if not line:
            continue
        prompt = _parse_header(lineno, line)
        if prompt.id in seen:
            raise ValidationError(f"duplicate prompt id {prompt.id!r}", lineno)
        seen.add(prompt.id)
        prompts.append(prompt)
    return prompts
