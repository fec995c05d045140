"""Span extraction and micro-F1 scoring, including the masked and
side-partial variants used for validation on partially annotated data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus, repair_bio
from .taxonomy import SIDE_A, SIDE_B, Taxonomy


@dataclass(frozen=True)
class Span:
    """An exact entity span: sentence index, inclusive token range, label."""

    sent: int
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0


def extract_spans(tags: Sequence[str], sent_index: int = 0) -> list[Span]:
    """Decode maximal B + same-label I runs into spans.

    Input is assumed BIO-repaired; a stray I- run is treated as its own span
    (the same thing repair would produce).
    """
    spans = []
    start = None
    label = None
    for i, tag in enumerate(tags):
        if tag.startswith("B-") or (tag.startswith("I-") and tag[2:] != label):
            if start is not None:
                spans.append(Span(sent_index, start, i - 1, label))
            start, label = i, tag[2:]
        elif tag == "O":
            if start is not None:
                spans.append(Span(sent_index, start, i - 1, label))
            start, label = None, None
    if start is not None:
        spans.append(Span(sent_index, start, len(tags) - 1, label))
    return spans


def corpus_spans(tag_seqs: Iterable[Sequence[str]]) -> set[Span]:
    out: set[Span] = set()
    for i, tags in enumerate(tag_seqs):
        out.update(extract_spans(tags, sent_index=i))
    return out


def micro_f1(pred_spans: Iterable[Span], gold_spans: Iterable[Span]) -> PRF:
    """Micro-averaged exact-match precision/recall/F1.

    When both span sets are empty the match is vacuously perfect and all
    three scores are 1.0 by convention.
    """
    pred, gold = set(pred_spans), set(gold_spans)
    tp = len(pred & gold)
    fp = len(pred - gold)
    fn = len(gold - pred)
    if not pred and not gold:
        return PRF(1.0, 1.0, 1.0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn)


def micro_f1_tags(pred_tag_seqs: Sequence[Sequence[str]],
                  gold_tag_seqs: Sequence[Sequence[str]]) -> PRF:
    return micro_f1(corpus_spans(pred_tag_seqs), corpus_spans(gold_tag_seqs))


def masked_micro_f1(pred_tag_seqs: Sequence[Sequence[str]],
                    gold_tag_seqs: Sequence[Sequence[str]],
                    masked_types: Iterable[str]) -> PRF:
    """Micro-F1 after rewriting predictions of the masked types to O.

    The gold side is expected to already be partial; masked predictions are
    simply ignored rather than counted as false positives.
    """
    masked = set(masked_types)
    cleaned = []
    for tags in pred_tag_seqs:
        row = [("O" if tag != "O" and tag.partition("-")[2] in masked else tag)
               for tag in tags]
        cleaned.append(repair_bio(row))
    return micro_f1_tags(cleaned, gold_tag_seqs)


def project_final_tags_to_side(tags: Sequence[str], side: str,
                               taxonomy: Taxonomy) -> list[str]:
    """Rewrite combined-space tags to one side's view.

    A label keeps its component on the requested side and drops to O when
    that component is outside; equivalent to masking the other side's labels
    in the disjoint case.
    """
    space = taxonomy.space
    out = []
    for tag in tags:
        prefix, label = space.label_of_tag(tag)
        comp = label.component(side) if label is not None else None
        out.append("O" if comp is None else f"{prefix}-{comp}")
    return repair_bio(out)


def partial_validation_score(model, val_a: Corpus, val_b: Corpus,
                             taxonomy: Taxonomy) -> float:
    """Mean of the two side-partial micro-F1 scores.

    Model predictions over the combined space are projected onto each side
    before scoring, so labels only the other side could award are ignored.
    """
    scores = []
    for side, corpus in ((SIDE_A, val_a), (SIDE_B, val_b)):
        preds = model.predict_corpus(corpus)
        projected = [project_final_tags_to_side(tags, side, taxonomy) for tags in preds]
        gold = [sent.observed_tags() for sent in corpus.sentences]
        scores.append(micro_f1_tags(projected, gold).f1)
    return sum(scores) / len(scores)
