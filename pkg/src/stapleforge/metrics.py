"""Weighted macro-F1 scoring for translation sets.

Per prompt: a candidate matches a gold translation when the two are equal
after normalization, so matching is exact set intersection. Precision is
unweighted, TP/(TP+FP); recall is weighted by the gold response-rate weights,
WTP/(WTP+WFN); their harmonic mean is the prompt's weighted F1; the corpus
score is the arithmetic mean of per-prompt F1 over the gold prompts.

Any score whose denominator is zero is defined as 0, which makes the metric
total (an empty prediction set scores 0). The weighted-recall denominator is
computed as the direct sum of all gold weights, identical to WTP+WFN in real
arithmetic; this keeps recall exactly monotone (as floats) when a prediction
set grows, a property the ensemble method relies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, TextIO

from .corpus import DEFAULT_POLICY, GoldSet, NormalizationPolicy, PredictionSet, normalize
from .errors import ValidationError

log = logging.getLogger(__name__)

REPORT_NOTE = "# precision = TP/(TP+FP), unweighted; recall weighted by gold response rates"
REPORT_HEADER = "prompt_id\tprecision\tweighted_recall\tweighted_f1"

# Published reference points for this metric on the full-scale EN->PT
# shared-task test data, in percent. Toy models trained by this package are
# not comparable to these; they are recorded for context only.
FULL_SCALE_REFERENCE_MACRO_F1 = {
    "six_checkpoint_ensemble": 37.57,
    "aws_baseline": 21.29,
    "fairseq_baseline": 13.57,
}


@dataclass(frozen=True)
class MatchResult:
    """Exact-match bookkeeping for one prompt.

    tp pairs each matched candidate with the gold surface form it hit; fp and
    fn keep input order. wtp/wfn are the matched/missed gold weight sums.
    """

    tp: tuple[tuple[str, str], ...]
    fp: tuple[str, ...]
    fn: tuple[str, ...]
    wtp: float
    wfn: float


@dataclass(frozen=True)
class PromptScore:
    prompt_id: str
    precision: float
    weighted_recall: float
    weighted_f1: float
    match: MatchResult


@dataclass(frozen=True)
class CorpusScore:
    macro_f1: float
    mean_precision: float
    mean_weighted_recall: float
    per_prompt: tuple[PromptScore, ...]

    @property
    def num_prompts(self) -> int:
        return len(self.per_prompt)


def match_sets(
    gold: GoldSet, pred: PredictionSet, policy: NormalizationPolicy = DEFAULT_POLICY
) -> MatchResult:
    """Intersect predictions with gold translations under the policy."""
    gold_by_key = {normalize(t.text, policy): t for t in gold.translations}
    matched_keys: set[str] = set()
    tp: list[tuple[str, str]] = []
    fp: list[str] = []
    for cand in pred.candidates:
        key = normalize(cand, policy)
        hit = gold_by_key.get(key)
        if hit is not None and key not in matched_keys:
            matched_keys.add(key)
            tp.append((cand, hit.text))
        else:
            fp.append(cand)
    fn: list[str] = []
    wtp = 0.0
    wfn = 0.0
    # sum in gold order so wtp is float-monotone under prediction growth
    for t in gold.translations:
        if normalize(t.text, policy) in matched_keys:
            wtp += t.weight
        else:
            fn.append(t.text)
            wfn += t.weight
    return MatchResult(tp=tuple(tp), fp=tuple(fp), fn=tuple(fn), wtp=wtp, wfn=wfn)


def score_prompt(
    gold: GoldSet, pred: PredictionSet, policy: NormalizationPolicy = DEFAULT_POLICY
) -> PromptScore:
    match = match_sets(gold, pred, policy)
    n_pred = len(match.tp) + len(match.fp)
    precision = len(match.tp) / n_pred if n_pred else 0.0
    total = gold.total_weight
    weighted_recall = match.wtp / total if total > 0.0 else 0.0
    if precision > 0.0 and weighted_recall > 0.0:
        weighted_f1 = 2.0 * precision * weighted_recall / (precision + weighted_recall)
    else:
        weighted_f1 = 0.0
    return PromptScore(
        prompt_id=gold.prompt.id,
        precision=precision,
        weighted_recall=weighted_recall,
        weighted_f1=weighted_f1,
        match=match,
    )


def score_corpus(
    golds: Sequence[GoldSet],
    preds: Sequence[PredictionSet],
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> CorpusScore:
    """Score a corpus; gold prompts define the corpus, extra prediction ids are ignored."""
    seen: set[str] = set()
    for gold in golds:
        if gold.prompt.id in seen:
            raise ValidationError(f"duplicate gold prompt id {gold.prompt.id!r}")
        seen.add(gold.prompt.id)
    by_id = {p.prompt_id: p for p in preds}
    for pid in by_id:
        if pid not in seen:
            log.warning("prediction set for unknown prompt id %r ignored", pid)
    scores: list[PromptScore] = []
    for gold in golds:
        pred = by_id.get(gold.prompt.id, PredictionSet(prompt_id=gold.prompt.id, candidates=()))
        scores.append(score_prompt(gold, pred, policy))
    n = len(scores)
    sum_f1 = 0.0
    sum_p = 0.0
    sum_wr = 0.0
    for s in scores:
        sum_f1 += s.weighted_f1
        sum_p += s.precision
        sum_wr += s.weighted_recall
    return CorpusScore(
        macro_f1=sum_f1 / n if n else 0.0,
        mean_precision=sum_p / n if n else 0.0,
        mean_weighted_recall=sum_wr / n if n else 0.0,
        per_prompt=tuple(scores),
    )


def write_report(score: CorpusScore, sink: TextIO) -> None:
    """Write the per-prompt TSV report with a final MACRO row (6-decimal fractions)."""
    sink.write(REPORT_NOTE + "\n")
    sink.write(REPORT_HEADER + "\n")
    for s in score.per_prompt:
        sink.write(
            f"{s.prompt_id}\t{s.precision:.6f}\t{s.weighted_recall:.6f}\t{s.weighted_f1:.6f}\n"
        )
    sink.write(
        f"MACRO\t{score.mean_precision:.6f}\t{score.mean_weighted_recall:.6f}"
        f"\t{score.macro_f1:.6f}\n"
    )


def summary_line(score: CorpusScore) -> str:
    return f"macro_f1={score.macro_f1:.6f}"
