"""Corpus model, CoNLL-style I/O, partial-dataset construction and a
synthetic fully annotated corpus generator.

A full corpus carries complete annotations.  Setup builders scrub it into two
side corpora whose observed tags only cover that side's types, while the
both-side gold pair is retained in memory (never serialized) for evaluation
and the fully supervised ceiling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DisjointSubsetsError,
    EmptyCorpusError,
    NoSubtypesError,
    ParseError,
    TaxexError,
    TaxexWarning,
)
from .taxonomy import (
    RelationKind,
    SIDE_A,
    SIDE_B,
    Taxonomy,
    project_gold_to_final,
)

SIDE_FULL = "Full"


@dataclass
class Token:
    """One token with its observed tag at the corpus's label granularity.

    ``gold`` is the optional both-side truth as a (side-A tag, side-B tag)
    pair of BIO strings; ``fine`` is the optional second annotation level of
    a two-level corpus.
    """

    text: str
    observed: str = "O"
    gold: tuple[str, str] | None = None
    fine: str | None = None


@dataclass
class Sentence:
    tokens: list[Token]
    side: str = SIDE_FULL

    def __post_init__(self):
        if not self.tokens:
            raise TaxexError("sentences must be non-empty")

    def __len__(self):
        return len(self.tokens)

    def observed_tags(self) -> list[str]:
        return [t.observed for t in self.tokens]

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass
class Corpus:
    """An immutable-by-convention list of sentences plus split metadata."""

    sentences: list[Sentence]
    side: str = SIDE_FULL
    role: str = "train"
    label_space: tuple[str, ...] | None = None  # tag inventory when annotated over one

    def __len__(self):
        return len(self.sentences)

    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def observed_types(self) -> tuple[str, ...]:
        seen = set()
        for sent in self.sentences:
            for tok in sent.tokens:
                if tok.observed != "O":
                    seen.add(tok.observed.partition("-")[2])
        return tuple(sorted(seen))


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a fully annotated corpus into the two partial sides."""

    type_split: Mapping[str, str]  # type name -> "A" | "B"
    sentence_split_seed: int = 0
    ratio: float = 0.5             # fraction of sentences assigned to side A

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise TaxexError("ratio must lie strictly between 0 and 1")
        for t, side in self.type_split.items():
            if side not in (SIDE_A, SIDE_B):
                raise TaxexError(f"type {t!r} assigned to unknown side {side!r}")

    def side_types(self, side: str) -> tuple[str, ...]:
        return tuple(sorted(t for t, s in self.type_split.items() if s == side))


def repair_bio(tags: Sequence[str]) -> list[str]:
    """Fix orphan I- tags: an I-X not continuing a B/I-X becomes B-X."""
    out = []
    prev_label = None
    for tag in tags:
        if tag.startswith("I-"):
            label = tag[2:]
            if prev_label != label:
                tag = "B-" + label
            prev_label = label
        elif tag.startswith("B-"):
            prev_label = tag[2:]
        else:
            prev_label = None
        out.append(tag)
    return out


def read_conll(path, role: str = "train") -> Corpus:
    """Read a two-column (token, tag) file with blank-line sentence breaks.

    BIO sequences are repaired on ingestion.  Tags of the form ``B-C.F``
    are read as two-level annotations: the part before the dot is the
    coarse type, the full dotted name is kept as the fine tag.
    """
    sentences: list[Sentence] = []
    tokens: list[Token] = []
    tags: list[str] = []

    def flush():
        nonlocal tokens, tags
        if tokens:
            for tok, tag in zip(tokens, repair_bio(tags)):
                _assign_tag(tok, tag)
            sentences.append(Sentence(tokens))
        tokens, tags = [], []

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                flush()
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'token tag', got {line!r}", line=lineno)
            tokens.append(Token(parts[0]))
            tags.append(parts[1])
    flush()
    if not sentences:
        raise EmptyCorpusError(f"no sentences found in {path}")
    return Corpus(sentences, role=role)


def _assign_tag(token: Token, tag: str) -> None:
    if tag != "O" and "." in tag:
        prefix, _, name = tag.partition("-")
        coarse = name.split(".", 1)[0]
        token.observed = f"{prefix}-{coarse}"
        token.fine = tag
    else:
        token.observed = tag


def write_conll(corpus: Corpus, path) -> None:
    """Write observed tags in the two-column format read_conll accepts."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus.sentences:
            for tok in sent.tokens:
                tag = tok.fine if tok.fine is not None else tok.observed
                fh.write(f"{tok.text} {tag}\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Setup plans: token-level gold-pair rules shared by train/val/test carving
# ---------------------------------------------------------------------------

PairFn = Callable[[Token], tuple[str, str]]


@dataclass(frozen=True)
class SetupPlan:
    """A taxonomy plus the rule mapping full annotations to both-side gold."""

    taxonomy: Taxonomy
    pair_fn: PairFn = field(compare=False)


def _retag(tag: str, new_type: str | None) -> str:
    """Keep the B/I prefix of ``tag`` but swap the type; None means O."""
    if tag == "O" or new_type is None:
        return "O"
    return f"{tag.partition('-')[0]}-{new_type}"


def plan_disjoint(type_split: Mapping[str, str]) -> SetupPlan:
    e_a = tuple(sorted(t for t, s in type_split.items() if s == SIDE_A))
    e_b = tuple(sorted(t for t, s in type_split.items() if s == SIDE_B))
    taxonomy = Taxonomy.disjoint(e_a, e_b)

    def pair_fn(tok: Token) -> tuple[str, str]:
        if tok.observed == "O":
            return "O", "O"
        etype = tok.observed.partition("-")[2]
        side = type_split.get(etype)
        if side is None:
            raise TaxexError(f"type {etype!r} missing from the type split")
        if side == SIDE_A:
            return tok.observed, "O"
        return "O", tok.observed

    return SetupPlan(taxonomy, pair_fn)


def plan_subtype(coarse_split: Mapping[str, str], parent: str,
                 subtypes: Sequence[str]) -> SetupPlan:
    """Coarse types split across sides; a subset of one side-A coarse type's
    fine types joins side B under the Subtype relation."""
    if not subtypes:
        raise NoSubtypesError(f"no fine types selected under {parent!r}")
    if coarse_split.get(parent) != SIDE_A:
        raise TaxexError(f"designated supertype {parent!r} must be assigned to side A")
    chosen = tuple(sorted(subtypes))
    e_a = tuple(sorted(t for t, s in coarse_split.items() if s == SIDE_A))
    e_b = tuple(sorted(t for t, s in coarse_split.items() if s == SIDE_B)) + chosen
    relations = [(parent, RelationKind.SUPERTYPE, s) for s in chosen]
    taxonomy = Taxonomy.build(e_a, tuple(sorted(e_b)), relations)
    chosen_set = set(chosen)

    def pair_fn(tok: Token) -> tuple[str, str]:
        if tok.observed == "O":
            return "O", "O"
        coarse = tok.observed.partition("-")[2]
        fine = tok.fine.partition("-")[2].split(".", 1)[-1] if tok.fine else None
        if coarse_split.get(coarse) == SIDE_A:
            b = fine if (coarse == parent and fine in chosen_set) else None
            return tok.observed, _retag(tok.observed, b)
        return "O", tok.observed

    return SetupPlan(taxonomy, pair_fn)


def plan_overlapping(coarse_split: Mapping[str, str], coarse_type: str,
                     s_a: Sequence[str], s_b: Sequence[str]) -> SetupPlan:
    """One coarse type's fine types split into two intersecting subsets; the
    subsets become new side-specific types under the Overlapping relation."""
    set_a, set_b = set(s_a), set(s_b)
    if not set_a & set_b:
        raise DisjointSubsetsError("overlapping setup requires intersecting subsets")
    name_a, name_b = f"{coarse_type}_A", f"{coarse_type}_B"
    others = {t: s for t, s in coarse_split.items() if t != coarse_type}
    e_a = tuple(sorted([t for t, s in others.items() if s == SIDE_A] + [name_a]))
    e_b = tuple(sorted([t for t, s in others.items() if s == SIDE_B] + [name_b]))
    taxonomy = Taxonomy.build(e_a, e_b, [(name_a, RelationKind.OVERLAPPING, name_b)])

    def pair_fn(tok: Token) -> tuple[str, str]:
        if tok.observed == "O":
            return "O", "O"
        coarse = tok.observed.partition("-")[2]
        if coarse == coarse_type:
            fine = tok.fine.partition("-")[2].split(".", 1)[-1] if tok.fine else None
            a = name_a if fine in set_a else None
            b = name_b if fine in set_b else None
            return _retag(tok.observed, a), _retag(tok.observed, b)
        if others.get(coarse) == SIDE_A:
            return tok.observed, "O"
        if others.get(coarse) == SIDE_B:
            return "O", tok.observed
        raise TaxexError(f"type {coarse!r} missing from the coarse split")

    return SetupPlan(taxonomy, pair_fn)


def with_gold_pairs(corpus: Corpus, plan: SetupPlan) -> Corpus:
    """Attach both-side gold pairs to every token, leaving observed tags as-is."""
    sentences = []
    for sent in corpus.sentences:
        toks = [replace(tok, gold=plan.pair_fn(tok)) for tok in sent.tokens]
        sentences.append(Sentence(toks, side=sent.side))
    return Corpus(sentences, side=corpus.side, role=corpus.role)


def side_view(corpus: Corpus, side: str) -> Corpus:
    """Scrubbed view of a gold-pair corpus: observed tags cover one side only."""
    idx = 0 if side == SIDE_A else 1
    sentences = []
    for sent in corpus.sentences:
        toks = [replace(tok, observed=tok.gold[idx], fine=None) for tok in sent.tokens]
        sentences.append(Sentence(toks, side=side))
    return Corpus(sentences, side=side, role=corpus.role)


def final_view(corpus: Corpus, taxonomy: Taxonomy) -> Corpus:
    """View of a gold-pair corpus annotated over the combined label space."""
    space = taxonomy.space
    sentences = []
    for sent in corpus.sentences:
        toks = []
        for tok in sent.tokens:
            a_tag, b_tag = tok.gold
            a = a_tag.partition("-")[2] if a_tag != "O" else None
            b = b_tag.partition("-")[2] if b_tag != "O" else None
            label = project_gold_to_final(a, b, space)
            prefix = (a_tag if a_tag != "O" else b_tag).partition("-")[0]
            observed = "O" if label is None else f"{prefix}-{label.name}"
            toks.append(replace(tok, observed=observed, fine=None))
        sentences.append(Sentence(repair_sentence(toks), side=sent.side))
    return Corpus(sentences, side=corpus.side, role=corpus.role,
                  label_space=space.tags)


def repair_sentence(tokens: list[Token]) -> list[Token]:
    tags = repair_bio([t.observed for t in tokens])
    return [replace(tok, observed=tag) for tok, tag in zip(tokens, tags)]


def partition_sentences(corpus: Corpus, seed: int, ratio: float) -> tuple[list[Sentence], list[Sentence]]:
    """Seed-driven shuffle split; the first ``ratio`` share goes to side A."""
    order = np.random.default_rng(seed).permutation(len(corpus.sentences))
    n_a = int(round(len(order) * ratio))
    first = [corpus.sentences[i] for i in order[:n_a]]
    second = [corpus.sentences[i] for i in order[n_a:]]
    return first, second


def _split_with_plan(full: Corpus, plan: SetupPlan, seed: int,
                     ratio: float) -> tuple[Corpus, Corpus]:
    paired = with_gold_pairs(full, plan)
    part_a, part_b = partition_sentences(paired, seed, ratio)
    d_a = side_view(Corpus(part_a, role=full.role), SIDE_A)
    d_b = side_view(Corpus(part_b, role=full.role), SIDE_B)
    return d_a, d_b


def split_and_scrub(full: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Carve a fully annotated corpus into the two partial training sides.

    Sentences are partitioned by a seeded shuffle at the given ratio; in each
    side every tag whose type belongs to the other side is rewritten to O.
    Gold pairs are retained on the tokens for in-memory evaluation only.
    """
    plan = plan_disjoint(spec.type_split)
    return _split_with_plan(full, plan, spec.sentence_split_seed, spec.ratio)


def build_subtype_setup(full: Corpus, coarse_split: Mapping[str, str], parent: str,
                        subtype_selection: Sequence[str], seed: int,
                        ratio: float = 0.5) -> tuple[Corpus, Corpus, Taxonomy]:
    """Build the subtype/supertype scenario from a two-level corpus."""
    plan = plan_subtype(coarse_split, parent, subtype_selection)
    d_a, d_b = _split_with_plan(full, plan, seed, ratio)
    return d_a, d_b, plan.taxonomy


def build_overlapping_setup(full: Corpus, coarse_type: str, s_a: Sequence[str],
                            s_b: Sequence[str], seed: int, ratio: float = 0.5,
                            coarse_split: Mapping[str, str] | None = None
                            ) -> tuple[Corpus, Corpus, Taxonomy]:
    """Build the overlapping scenario from a two-level corpus.

    Coarse types other than the designated one are split across sides; when
    no explicit split is given they alternate in sorted order.
    """
    if coarse_split is None:
        others = sorted({t for t in _coarse_types(full) if t != coarse_type})
        coarse_split = {t: (SIDE_A if i % 2 == 0 else SIDE_B) for i, t in enumerate(others)}
        coarse_split[coarse_type] = SIDE_A
    plan = plan_overlapping(coarse_split, coarse_type, s_a, s_b)
    d_a, d_b = _split_with_plan(full, plan, seed, ratio)
    return d_a, d_b, plan.taxonomy


def _coarse_types(corpus: Corpus) -> set[str]:
    return {tok.observed.partition("-")[2]
            for sent in corpus.sentences for tok in sent.tokens if tok.observed != "O"}


def subsample_per_type(d_b: Corpus, k: int, seed: int,
                       types: Sequence[str] | None = None) -> Corpus:
    """Few-shot subsampling: a minimal greedy sentence subset keeping at least
    min(k, available) mention-bearing sentences per type.

    Sentences are visited in seed-shuffled order and kept while any type they
    mention is still short of k; with k at or above the corpus size the
    corpus is returned unchanged.  A type with fewer than k available
    sentences triggers a warning and keeps everything it has.
    """
    if k < 1:
        raise TaxexError("k must be at least 1")
    if types is None:
        types = d_b.observed_types()
    wanted = set(types)
    order = np.random.default_rng(seed).permutation(len(d_b.sentences))
    counts = {t: 0 for t in sorted(wanted)}
    kept_idx = []
    for i in order:
        sent = d_b.sentences[i]
        present = {tok.observed.partition("-")[2] for tok in sent.tokens
                   if tok.observed.startswith("B-")} & wanted
        if any(counts[t] < k for t in present):
            kept_idx.append(i)
            for t in present:
                counts[t] += 1
    short = [t for t, c in sorted(counts.items()) if c < k]
    if short:
        warnings.warn(f"types under-supplied at k={k}: {', '.join(short)}", TaxexWarning)
    if k >= len(d_b.sentences):
        return Corpus(list(d_b.sentences), side=d_b.side, role=d_b.role,
                      label_space=d_b.label_space)
    kept_idx.sort()
    return Corpus([d_b.sentences[i] for i in kept_idx], side=d_b.side, role=d_b.role,
                  label_space=d_b.label_space)


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for the synthetic fully annotated corpus.

    Every entity type owns a mention sub-vocabulary and a trigger
    sub-vocabulary; ``ambiguity`` is the chance a mention token is drawn from
    a pool shared by all types (so the type is only recoverable from
    context), and ``trigger_prob`` the chance the token before a mention is a
    type-specific cue.  With ``subtypes_per_coarse`` > 0 the corpus is
    two-level: ``n_types`` coarse types, each with that many fine types.
    """

    n_types: int = 8
    sentences: int = 2000
    density: float = 0.2
    seed: int = 0
    subtypes_per_coarse: int = 0
    mention_vocab: int = 30
    trigger_vocab: int = 6
    context_vocab: int = 200
    shared_vocab: int = 40
    ambiguity: float = 0.3
    trigger_prob: float = 0.7
    min_len: int = 8
    max_len: int = 16

    def __post_init__(self):
        if self.n_types < 2:
            raise TaxexError("need at least 2 entity types")
        if not 0.0 < self.density < 1.0:
            raise TaxexError("density must lie strictly between 0 and 1")

    def coarse_types(self) -> tuple[str, ...]:
        if self.subtypes_per_coarse:
            return tuple(f"C{i}" for i in range(1, self.n_types + 1))
        return tuple(f"T{i}" for i in range(1, self.n_types + 1))

    def fine_types(self, coarse: str) -> tuple[str, ...]:
        return tuple(f"{coarse}f{j}" for j in range(1, self.subtypes_per_coarse + 1))


def generate_synthetic_corpus(spec: SyntheticSpec, role: str = "train") -> Corpus:
    """Generate a fully annotated corpus, deterministic under the spec seed."""
    rng = np.random.default_rng(spec.seed)
    coarse = spec.coarse_types()
    units: list[tuple[str, str | None]] = []  # (coarse, fine or None)
    for c in coarse:
        if spec.subtypes_per_coarse:
            units.extend((c, f) for f in spec.fine_types(c))
        else:
            units.append((c, None))

    def vocab(stem: str, size: int) -> list[str]:
        return [f"{stem}w{j}" for j in range(size)]

    mention_words = {u: vocab(f"m_{(u[1] or u[0])}_", spec.mention_vocab) for u in units}
    trigger_words = {u: vocab(f"g_{(u[1] or u[0])}_", spec.trigger_vocab) for u in units}
    context_words = vocab("c_", spec.context_vocab)
    shared_words = vocab("s_", spec.shared_vocab)

    mean_len = 1.5  # mention length drawn uniformly from {1, 2}
    p_start = spec.density / (mean_len * (1.0 - spec.density) + spec.density)

    sentences = []
    for _ in range(spec.sentences):
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        toks: list[Token] = []
        while len(toks) < n:
            if rng.random() < p_start:
                c, f = units[rng.integers(len(units))]
                length = min(int(rng.integers(1, 3)), n - len(toks))
                if toks and toks[-1].observed == "O" and rng.random() < spec.trigger_prob:
                    toks[-1].text = trigger_words[(c, f)][rng.integers(spec.trigger_vocab)]
                for j in range(length):
                    if rng.random() < spec.ambiguity:
                        text = shared_words[rng.integers(spec.shared_vocab)]
                    else:
                        text = mention_words[(c, f)][rng.integers(spec.mention_vocab)]
                    prefix = "B" if j == 0 else "I"
                    fine = f"{prefix}-{c}.{f}" if f else None
                    toks.append(Token(text, observed=f"{prefix}-{c}", fine=fine))
            else:
                toks.append(Token(context_words[rng.integers(spec.context_vocab)]))
        sentences.append(Sentence(toks))
    return Corpus(sentences, role=role)
