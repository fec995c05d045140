"""Entity-type algebra for combining two label sets.

Two type sets (side A, the original taxonomy, and side B, the added one) are
related by a pairwise relation matrix whose entries are Disjoint, Subtype,
Supertype or Overlapping.  From the matrix we build the combined output label
set the final model is trained over, and for any single-side observation the
set of output labels it is consistent with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    AsymmetryError,
    EmptyAllowedSetError,
    InconsistentGoldError,
    MissingPairError,
    ParseError,
    TaxexError,
    UnknownLabelError,
    UnsupportedTopologyError,
)

SIDE_A = "A"
SIDE_B = "B"


class RelationKind(Enum):
    DISJOINT = "disjoint"
    SUBTYPE = "subtype"
    SUPERTYPE = "supertype"
    OVERLAPPING = "overlapping"


# Dual of R(x, y) when read as R(y, x).
_DUAL = {
    RelationKind.DISJOINT: RelationKind.DISJOINT,
    RelationKind.SUBTYPE: RelationKind.SUPERTYPE,
    RelationKind.SUPERTYPE: RelationKind.SUBTYPE,
    RelationKind.OVERLAPPING: RelationKind.OVERLAPPING,
}


@dataclass(frozen=True)
class EntityType:
    """A named entity type together with the side it originates from."""

    name: str
    side: str

    def __post_init__(self):
        if not self.name:
            raise TaxexError("entity type name must be non-empty")
        if self.side not in (SIDE_A, SIDE_B):
            raise TaxexError(f"side must be 'A' or 'B', got {self.side!r}")


class RelationMatrix:
    """Pairwise relations between the two type sets.

    Entries are stored for both orders of each cross pair; within-side pairs
    are always Disjoint.  ``from_entries`` is the usual constructor: it fills
    unlisted cross pairs with Disjoint and derives the dual direction of each
    listed entry.  A matrix built directly from a raw entry mapping may be
    inconsistent; run :func:`validate_relations` before using it.
    """

    def __init__(self, e_a: Sequence[str], e_b: Sequence[str],
                 entries: Mapping[tuple[str, str], RelationKind]):
        self.e_a = tuple(e_a)
        self.e_b = tuple(e_b)
        self.entries = dict(entries)
        names = list(self.e_a) + list(self.e_b)
        if len(set(names)) != len(names):
            raise TaxexError("type names must be unique across both sides")

    @classmethod
    def from_entries(cls, e_a: Sequence[str], e_b: Sequence[str],
                     relations: Iterable[tuple[str, RelationKind, str]] = ()) -> "RelationMatrix":
        """Build a full matrix from side-A-first relation triples.

        Each triple ``(a, kind, b)`` states R(a, b) = kind with a drawn from
        side A and b from side B.  Duals are derived and unlisted cross pairs
        default to Disjoint.
        """
        e_a, e_b = tuple(e_a), tuple(e_b)
        entries: dict[tuple[str, str], RelationKind] = {}
        for a in e_a:
            for b in e_b:
                entries[(a, b)] = RelationKind.DISJOINT
                entries[(b, a)] = RelationKind.DISJOINT
        for a, kind, b in relations:
            if a not in e_a:
                raise UnknownLabelError(f"{a!r} is not a side-A type")
            if b not in e_b:
                raise UnknownLabelError(f"{b!r} is not a side-B type")
            entries[(a, b)] = kind
            entries[(b, a)] = _DUAL[kind]
        return cls(e_a, e_b, entries)

    def get(self, x: str, y: str) -> RelationKind:
        """Relation between two types; within-side pairs are Disjoint."""
        if (x in self.e_a and y in self.e_a) or (x in self.e_b and y in self.e_b):
            return RelationKind.DISJOINT
        try:
            return self.entries[(x, y)]
        except KeyError:
            raise MissingPairError(f"no relation defined for ({x}, {y})") from None

    def partners(self, t: str, kind: RelationKind) -> tuple[str, ...]:
        """Cross-side types y with R(t, y) == kind, in canonical order."""
        other = self.e_b if t in self.e_a else self.e_a
        return tuple(y for y in sorted(other) if self.get(t, y) == kind)


def validate_relations(e_a: Sequence[str], e_b: Sequence[str],
                       relations: RelationMatrix) -> RelationMatrix:
    """Check a relation matrix and return it unchanged if consistent.

    Raises MissingPairError for undefined cross pairs, AsymmetryError when a
    pair and its dual disagree, and UnsupportedTopologyError for structures
    beyond the supported pairwise shapes (a type that is a subtype of more
    than one type, mixes relation kinds, or chains overlaps).
    """
    for a in e_a:
        for b in e_b:
            if (a, b) not in relations.entries:
                raise MissingPairError(f"no relation defined for ({a}, {b})")
            if (b, a) not in relations.entries:
                raise MissingPairError(f"no relation defined for ({b}, {a})")
            fwd = relations.entries[(a, b)]
            bwd = relations.entries[(b, a)]
            if _DUAL[fwd] != bwd:
                raise AsymmetryError(
                    f"R({a},{b})={fwd.value} conflicts with R({b},{a})={bwd.value}")
    for t in list(e_a) + list(e_b):
        supers = relations.partners(t, RelationKind.SUBTYPE)      # t is a subtype of these
        subs = relations.partners(t, RelationKind.SUPERTYPE)      # t is a supertype of these
        overlaps = relations.partners(t, RelationKind.OVERLAPPING)
        roles = sum(1 for group in (supers, subs, overlaps) if group)
        if roles > 1:
            raise UnsupportedTopologyError(
                f"{t} mixes relation kinds; only one of subtype/supertype/overlap per type")
        if len(supers) > 1:
            raise UnsupportedTopologyError(f"{t} is a subtype of more than one type")
        if len(overlaps) > 1:
            raise UnsupportedTopologyError(
                f"{t} overlaps more than one type; overlap chains are not supported")
    return relations


@dataclass(frozen=True)
class FinalLabel:
    """One combined output label: a side-A component, a side-B component, or both.

    ``None`` stands for the outside component.  The bare outside label O is
    not a FinalLabel; the label space carries it separately.
    """

    a: str | None
    b: str | None

    def __post_init__(self):
        if self.a is None and self.b is None:
            raise TaxexError("a final label needs at least one non-outside component")

    @property
    def name(self) -> str:
        if self.a is not None and self.b is not None:
            return f"A:{self.a}|B:{self.b}"
        if self.a is not None:
            return f"A:{self.a}"
        return f"B:{self.b}"

    def component(self, side: str) -> str | None:
        return self.a if side == SIDE_A else self.b

    def sort_key(self) -> tuple[str, str]:
        return (self.a or "", self.b or "")

    @classmethod
    def parse(cls, name: str) -> "FinalLabel":
        a = b = None
        for part in name.split("|"):
            if part.startswith("A:"):
                a = part[2:]
            elif part.startswith("B:"):
                b = part[2:]
            else:
                raise UnknownLabelError(f"cannot parse final label {name!r}")
        return cls(a, b)


class TagSpace:
    """An ordered BIO tag inventory over a fixed list of label names.

    Tag 0 is O; each label contributes a B- and an I- tag in label order.
    """

    def __init__(self, label_names: Sequence[str]):
        self.labels = tuple(label_names)
        tags = ["O"]
        for name in self.labels:
            tags.append(f"B-{name}")
            tags.append(f"I-{name}")
        self.tags = tuple(tags)
        self.index = {t: i for i, t in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def __eq__(self, other) -> bool:
        return isinstance(other, TagSpace) and self.tags == other.tags

    def tag_id(self, tag: str) -> int:
        try:
            return self.index[tag]
        except KeyError:
            raise UnknownLabelError(f"tag {tag!r} not in this tag space") from None

    def split(self, tag: str) -> tuple[str | None, str | None]:
        """Return (prefix, label name); (None, None) for O."""
        if tag == "O":
            return None, None
        prefix, _, name = tag.partition("-")
        if prefix not in ("B", "I") or not name:
            raise UnknownLabelError(f"malformed BIO tag {tag!r}")
        return prefix, name


class FinalLabelSpace:
    """The canonical ordered set of combined output labels plus O.

    Immutable after construction.  Ordering is lexicographic on the
    (side-A component, side-B component) pair so every run and every
    serialization agrees on tag indices.
    """

    def __init__(self, labels: Iterable[FinalLabel]):
        self.labels = tuple(sorted(set(labels), key=FinalLabel.sort_key))
        self.by_name = {lab.name: lab for lab in self.labels}
        self.tag_space = TagSpace([lab.name for lab in self.labels])

    def __len__(self) -> int:
        # O counts as a member of the space.
        return len(self.labels) + 1

    def __contains__(self, label: FinalLabel) -> bool:
        return label in self.by_name.values()

    def __eq__(self, other) -> bool:
        return isinstance(other, FinalLabelSpace) and self.labels == other.labels

    @property
    def tags(self) -> tuple[str, ...]:
        return self.tag_space.tags

    def with_component(self, side: str, value: str | None) -> tuple[FinalLabel, ...]:
        return tuple(lab for lab in self.labels if lab.component(side) == value)

    def bio_tag(self, prefix: str, label: FinalLabel) -> str:
        return f"{prefix}-{label.name}"

    def label_of_tag(self, tag: str) -> tuple[str | None, FinalLabel | None]:
        prefix, name = self.tag_space.split(tag)
        if name is None:
            return None, None
        if name not in self.by_name:
            raise UnknownLabelError(f"{name!r} not in this label space")
        return prefix, self.by_name[name]


def redefine_output_space(e_a: Sequence[str], e_b: Sequence[str],
                          relations: RelationMatrix) -> FinalLabelSpace:
    """Construct the combined output label space from a validated matrix.

    A supertype p with subtypes s1..sk contributes (p, s1)..(p, sk) and
    (p, O); an overlapping pair (a, b) contributes (a, O), (O, b) and
    (a, b); a type related to nothing contributes its single-sided label.
    A subtype never appears without its supertype component.
    """
    validate_relations(e_a, e_b, relations)
    labels: set[FinalLabel] = set()
    for a in e_a:
        subs = relations.partners(a, RelationKind.SUPERTYPE)
        supers = relations.partners(a, RelationKind.SUBTYPE)
        overlaps = relations.partners(a, RelationKind.OVERLAPPING)
        for b in subs + supers + overlaps:
            labels.add(FinalLabel(a, b))
        if not supers:
            labels.add(FinalLabel(a, None))
    for b in e_b:
        supers = relations.partners(b, RelationKind.SUBTYPE)
        if not supers:
            labels.add(FinalLabel(None, b))
    return FinalLabelSpace(labels)


@dataclass(frozen=True)
class AllowedSet:
    """Output labels consistent with one single-side observation.

    ``includes_o`` records whether the bare outside label is consistent too
    (it is exactly when the observation itself was O).
    """

    labels: tuple[FinalLabel, ...]
    includes_o: bool

    def __post_init__(self):
        if not self.labels and not self.includes_o:
            raise EmptyAllowedSetError("no output label is consistent with the observation")

    def __len__(self) -> int:
        return len(self.labels) + (1 if self.includes_o else 0)

    def is_singleton(self) -> bool:
        return len(self) == 1

    def sole_label(self) -> FinalLabel | None:
        """The unique member when the set is a singleton; None means O."""
        if not self.is_singleton():
            raise TaxexError("allowed set is not a singleton")
        return self.labels[0] if self.labels else None

    def members(self) -> tuple[FinalLabel | None, ...]:
        out: tuple[FinalLabel | None, ...] = self.labels
        return ((None,) + out) if self.includes_o else out


def _strip_bio(observed: str) -> str | None:
    """Reduce a BIO tag or bare type name to the type name; None for O."""
    if observed == "O":
        return None
    if observed.startswith(("B-", "I-")):
        return observed[2:]
    return observed


def allowed_final_labels(observed: str, side: str, space: FinalLabelSpace,
                         relations: RelationMatrix) -> AllowedSet:
    """All output labels consistent with observing ``observed`` on ``side``.

    ``observed`` may be a bare type name, a B-/I- tag over the side's types,
    or O.  An observed entity e pins the side component to e; an observed O
    pins it to the outside component and additionally allows the bare O
    label.
    """
    side_types = relations.e_a if side == SIDE_A else relations.e_b
    etype = _strip_bio(observed)
    if etype is None:
        return AllowedSet(space.with_component(side, None), includes_o=True)
    if etype not in side_types:
        raise UnknownLabelError(f"{etype!r} is not a side-{side} type")
    return AllowedSet(space.with_component(side, etype), includes_o=False)


def project_gold_to_final(gold_a: str | None, gold_b: str | None,
                          space: FinalLabelSpace) -> FinalLabel | None:
    """Map a both-side gold type pair to its output label (None for O)."""
    if gold_a is None and gold_b is None:
        return None
    label = FinalLabel(gold_a, gold_b)
    if label.name not in space.by_name:
        raise InconsistentGoldError(
            f"gold pair ({gold_a}, {gold_b}) has no corresponding output label")
    return space.by_name[label.name]


@dataclass(frozen=True)
class Taxonomy:
    """Bundled view of one expansion problem: both type sets, the validated
    relation matrix and the combined output space."""

    e_a: tuple[str, ...]
    e_b: tuple[str, ...]
    relations: RelationMatrix
    space: FinalLabelSpace = field(compare=False)

    @classmethod
    def build(cls, e_a: Sequence[str], e_b: Sequence[str],
              relations: Iterable[tuple[str, RelationKind, str]] = ()) -> "Taxonomy":
        matrix = RelationMatrix.from_entries(e_a, e_b, relations)
        space = redefine_output_space(matrix.e_a, matrix.e_b, matrix)
        return cls(matrix.e_a, matrix.e_b, matrix, space)

    @classmethod
    def disjoint(cls, e_a: Sequence[str], e_b: Sequence[str]) -> "Taxonomy":
        return cls.build(e_a, e_b)

    @classmethod
    def from_file(cls, path, e_a: Sequence[str], e_b: Sequence[str]) -> "Taxonomy":
        return cls.build(e_a, e_b, parse_relation_file(path))

    @property
    def entity_types(self) -> tuple[EntityType, ...]:
        return tuple(EntityType(t, SIDE_A) for t in self.e_a) + \
            tuple(EntityType(t, SIDE_B) for t in self.e_b)

    def side_types(self, side: str) -> tuple[str, ...]:
        return self.e_a if side == SIDE_A else self.e_b

    def side_tag_space(self, side: str) -> TagSpace:
        return TagSpace(sorted(self.side_types(side)))

    def allowed(self, observed: str, side: str) -> AllowedSet:
        return allowed_final_labels(observed, side, self.space, self.relations)

    def is_disjoint(self) -> bool:
        return all(kind == RelationKind.DISJOINT for kind in self.relations.entries.values())


_RELATION_WORDS = {kind.value: kind for kind in RelationKind}


def parse_relation_file(path) -> list[tuple[str, RelationKind, str]]:
    """Read relation triples from a plain-text file.

    One relation per line in the form ``A:<type> <relation> B:<type>`` with
    the relation spelled disjoint/subtype/supertype/overlapping.  Blank lines
    and ``#`` comments are skipped; unlisted cross pairs default to Disjoint
    when the taxonomy is built.
    """
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError("expected 'A:<type> <relation> B:<type>'", line=lineno)
            left, word, right = parts
            if not left.startswith("A:") or not right.startswith("B:"):
                raise ParseError("left side must be 'A:<type>' and right side 'B:<type>'",
                                 line=lineno)
            if word not in _RELATION_WORDS:
                raise ParseError(f"unknown relation {word!r}", line=lineno)
            triples.append((left[2:], _RELATION_WORDS[word], right[2:]))
    return triples
