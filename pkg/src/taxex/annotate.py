"""Re-labeling a partial corpus with the opposite model's predictions.

Observed entities are kept; tokens whose observation leaves the label open
take the opposite model's choice, either its hard prediction (disjoint mode)
or its argmax restricted to the allowed labels (general mode).  The output
corpus is annotated over the combined label space.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .corpus import Corpus, Sentence, repair_sentence
from .errors import LabelSpaceMismatchError, TaxexError
from .oracle import alignment_for_observation
from .taxonomy import FinalLabel, SIDE_A, SIDE_B, Taxonomy


def _final_tag_for_side_tag(tag: str, side: str, taxonomy: Taxonomy) -> str:
    """Map a single-side tag to a combined-space tag.

    The type maps to the allowed label whose other-side component is outside
    when one exists (the unique choice in the disjoint case), otherwise to
    the first allowed label in canonical order.
    """
    if tag == "O":
        return "O"
    prefix, _, etype = tag.partition("-")
    allowed = taxonomy.allowed(etype, side)
    other = SIDE_B if side == SIDE_A else SIDE_A
    label = None
    for lab in allowed.labels:
        if lab.component(other) is None:
            label = lab
            break
    if label is None:
        label = allowed.labels[0]
    return f"{prefix}-{label.name}"


def map_observed_to_final(corpus: Corpus, side: str, taxonomy: Taxonomy) -> Corpus:
    """Take observed side tags at face value and recast them in the combined
    space (the naive-join view of a partial corpus)."""
    sentences = []
    for sent in corpus.sentences:
        toks = [replace(tok, observed=_final_tag_for_side_tag(tok.observed, side, taxonomy))
                for tok in sent.tokens]
        sentences.append(Sentence(repair_sentence(toks), side=sent.side))
    return Corpus(sentences, side=corpus.side, role=corpus.role,
                  label_space=taxonomy.space.tags)


def cross_annotate(corpus: Corpus, aux_model, taxonomy: Taxonomy,
                   mode: str = "disjoint") -> Corpus:
    """Re-annotate one partial corpus using the opposite-side model.

    Disjoint mode substitutes the model's BIO-repaired hard predictions on
    every observed-O token and keeps observed entities.  General mode gives
    every token the allowed label its observation determines when unique and
    otherwise the argmax of the model's logits over the aligned allowed
    tags.  Substituted spans are re-repaired, so a span abutting an observed
    entity is truncated at the boundary.
    """
    if mode not in ("disjoint", "general"):
        raise TaxexError(f"unknown cross-annotation mode {mode!r}")
    side = corpus.side
    if side not in (SIDE_A, SIDE_B):
        raise TaxexError("cross_annotate needs a side-homogeneous corpus")
    sentences = []
    if mode == "disjoint":
        aux_preds = aux_model.predict_corpus(corpus)
        other = SIDE_B if side == SIDE_A else SIDE_A
        for sent, preds in zip(corpus.sentences, aux_preds):
            toks = []
            for tok, pred in zip(sent.tokens, preds):
                if tok.observed == "O":
                    tag = _final_tag_for_side_tag(pred, other, taxonomy)
                else:
                    tag = _final_tag_for_side_tag(tok.observed, side, taxonomy)
                toks.append(replace(tok, observed=tag))
            sentences.append(Sentence(repair_sentence(toks), side=sent.side))
    else:
        aux_space = aux_model.tag_space
        for sent in corpus.sentences:
            logits = aux_model.logits_for(sent)
            toks = []
            for i, tok in enumerate(sent.tokens):
                finals, auxes = alignment_for_observation(tok.observed, side,
                                                          taxonomy, aux_space)
                if len(finals) == 1:
                    tag_id = finals[0]
                else:
                    tag_id = finals[int(np.argmax(logits[i][auxes]))]
                toks.append(replace(tok, observed=taxonomy.space.tags[tag_id]))
            sentences.append(Sentence(repair_sentence(toks), side=sent.side))
    return Corpus(sentences, side=corpus.side, role=corpus.role,
                  label_space=taxonomy.space.tags)


def join_corpora(a: Corpus, b: Corpus) -> Corpus:
    """Concatenate two corpora labeled over the same space, all of A then all
    of B; training shuffles later under its own seed."""
    if a.label_space is None or a.label_space != b.label_space:
        raise LabelSpaceMismatchError("corpora are not labeled over the same space")
    return Corpus(list(a.sentences) + list(b.sentences), side="Full",
                  role=a.role, label_space=a.label_space)
