"""True-label distribution construction and the training loss functions.

The reference distribution for a token is built from its observed tag plus
the opposite-side model's output: an observation that pins the label down
gives a one-hot vector, anything else gives a softmax over the opposite
model's logits restricted to the labels the observation allows.

Losses are pure functions of per-token model outputs; each returns its
summed value together with the gradient with respect to the model's logits
so the tagger can backpropagate any of them interchangeably.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import TaxexWarning, UnnormalizableError
from .taxonomy import SIDE_A, SIDE_B, TagSpace, Taxonomy

EPS = 1e-12  # floor inside logs and dot products

OBSERVED = "observed"
MODEL_FILLED = "model-filled"


class LossKind(Enum):
    NAIVE_CE = "naive-ce"
    PLM = "plm"
    PLM_KL = "plm-kl"
    CL_DISTILL = "cl-distill"
    AML = "aml"


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Reference distribution construction
# ---------------------------------------------------------------------------

def alignment_for_observation(observed: str, side: str, taxonomy: Taxonomy,
                              aux_space: TagSpace) -> tuple[np.ndarray, np.ndarray]:
    """Aligned candidate tags for one observation.

    Returns (final tag ids, aux tag ids): the combined-space tags the
    observation allows, each paired with the opposite-side model's tag that
    scores it.  An observed entity keeps its B/I prefix; an observed O admits
    O itself plus both prefixes of every label whose own-side component is
    outside.
    """
    space = taxonomy.space
    other = SIDE_B if side == SIDE_A else SIDE_A
    allowed = taxonomy.allowed(observed, side)
    finals: list[int] = []
    auxes: list[int] = []
    if observed == "O":
        finals.append(0)
        auxes.append(aux_space.tag_id("O"))
        for lab in allowed.labels:
            comp = lab.component(other)
            for prefix in ("B", "I"):
                finals.append(space.tag_space.tag_id(f"{prefix}-{lab.name}"))
                auxes.append(aux_space.tag_id(f"{prefix}-{comp}"))
    else:
        prefix = observed.partition("-")[0]
        for lab in allowed.labels:
            comp = lab.component(other)
            finals.append(space.tag_space.tag_id(f"{prefix}-{lab.name}"))
            aux_tag = "O" if comp is None else f"{prefix}-{comp}"
            auxes.append(aux_space.tag_id(aux_tag))
    return np.asarray(finals), np.asarray(auxes)


def build_oracle(observed: str, side: str, aux_logits: np.ndarray,
                 aux_space: TagSpace, taxonomy: Taxonomy) -> tuple[np.ndarray, str]:
    """Reference distribution over the combined tag space for one token.

    An observation that determines the label yields a one-hot vector with
    provenance "observed"; otherwise the opposite model's logits at the
    aligned candidate tags are softmaxed in place, all other tags get zero
    mass, and the provenance is "model-filled".
    """
    space = taxonomy.space
    out = np.zeros(len(space.tag_space))
    finals, auxes = alignment_for_observation(observed, side, taxonomy, aux_space)
    if len(finals) == 1:
        out[finals[0]] = 1.0
        return out, OBSERVED
    logits = np.asarray(aux_logits, dtype=float)[auxes]
    if not np.isfinite(logits.max()):
        raise UnnormalizableError("all candidate logits are -inf")
    out[finals] = softmax(logits)
    return out, MODEL_FILLED


def oracle_distributions(observed_tags: Sequence[str], side: str,
                         aux_logits: np.ndarray, aux_space: TagSpace,
                         taxonomy: Taxonomy) -> np.ndarray:
    """Stacked reference distributions for every token of one sentence."""
    rows = [build_oracle(tag, side, aux_logits[i], aux_space, taxonomy)[0]
            for i, tag in enumerate(observed_tags)]
    return np.stack(rows)


def restrict_distribution(dist: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the distribution outside the mask and renormalize.

    Falls back to uniform-over-mask with a warning when no mass survives.
    """
    kept = np.where(mask, dist, 0.0)
    total = kept.sum()
    if total < EPS:
        warnings.warn("no reference mass on the allowed tags; using uniform",
                      TaxexWarning)
        return mask.astype(float) / mask.sum()
    return kept / total


# ---------------------------------------------------------------------------
# Loss functions (each returns summed loss and d loss / d logits)
# ---------------------------------------------------------------------------

def naive_ce_loss(f_dists: np.ndarray, tag_ids: np.ndarray) -> tuple[float, np.ndarray]:
    """Token-level cross entropy treating the given tags as ground truth."""
    n = len(tag_ids)
    rows = np.arange(n)
    picked = f_dists[rows, tag_ids]
    loss = float(-np.log(np.maximum(picked, EPS)).sum())
    grad = f_dists.copy()
    grad[rows, tag_ids] -= 1.0
    return loss, grad


def plm_loss(f_dists: np.ndarray, oracle_dists: np.ndarray,
             observed_tags: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Negative log of the agreement probability, summed over tokens.

    Each token contributes -log <f, g>.  For tokens whose observation
    determines the label, g is one-hot and the term reduces exactly to the
    cross entropy against that label, so the determined/filled split of the
    loss definition is a single expression here; ``observed_tags`` is
    accepted for interface completeness but does not change the value.

    Dot products below the underflow floor are clamped with a warning.
    """
    del observed_tags
    dots = np.einsum("ij,ij->i", f_dists, oracle_dists)
    if np.any(dots < EPS):
        warnings.warn("agreement probability clamped at underflow floor", TaxexWarning)
    clamped = np.maximum(dots, EPS)
    loss = float(-np.log(clamped).sum())
    grad = f_dists - f_dists * oracle_dists / clamped[:, None]
    return loss, grad


def plm_kl_loss(f_dists: np.ndarray, oracle_dists: np.ndarray,
                observed_tags: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Distillation form: cross entropy of the model under the reference.

    Each token contributes <g, -log f>.  This is the KL divergence from the
    reference plus the reference entropy; the entropy is constant in the
    model so gradients match the KL term exactly, the value reduces to
    -log f[t] for one-hot references, and by Jensen's inequality it upper
    bounds the agreement form of :func:`plm_loss` token by token.
    """
    del observed_tags
    logs = np.log(np.maximum(f_dists, EPS))
    loss = float(-(oracle_dists * logs).sum())
    grad = f_dists - oracle_dists
    return loss, grad


def cl_distill_loss(f_dists: np.ndarray, ce_tag_ids: np.ndarray,
                    teacher_dists: np.ndarray,
                    allowed_masks: np.ndarray | None = None,
                    variant: str = "cl") -> tuple[float, np.ndarray]:
    """Student-teacher loss: cross entropy on observed-entity tokens, KL from
    the teacher on the rest.

    ``ce_tag_ids`` holds the target tag id for observed-entity tokens and -1
    for distilled ones.  The "cl++" variant restricts the teacher's mass to
    each token's allowed tags (renormalized) before the KL; a singleton
    allowed set then reduces to cross entropy against that tag.
    """
    if variant not in ("cl", "cl++"):
        raise ValueError(f"unknown variant {variant!r}")
    loss = 0.0
    grad = np.zeros_like(f_dists)
    ce_rows = np.where(ce_tag_ids >= 0)[0]
    if len(ce_rows):
        ce_loss, ce_grad = naive_ce_loss(f_dists[ce_rows], ce_tag_ids[ce_rows])
        loss += ce_loss
        grad[ce_rows] = ce_grad
    for i in np.where(ce_tag_ids < 0)[0]:
        teacher = teacher_dists[i]
        if variant == "cl++":
            if allowed_masks is None:
                raise ValueError("cl++ needs allowed masks")
            teacher = restrict_distribution(teacher, allowed_masks[i])
        support = teacher > 0
        logs = np.log(np.maximum(f_dists[i, support], EPS))
        t = teacher[support]
        loss += float((t * (np.log(t) - logs)).sum())
        grad[i] = f_dists[i] - teacher
    return loss, grad


def aml_loss(logits: np.ndarray, allowed_masks: np.ndarray,
             targets: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Per-tag sigmoid binary cross entropy over each token's allowed tags.

    Tags outside the allowed set contribute nothing.  When no explicit
    targets are given, a tag is positive only if the observation fully
    determines it (its token's allowed set is a singleton); every other
    allowed tag gets a zero target.
    """
    mask = allowed_masks.astype(bool)
    if targets is None:
        singleton = mask.sum(axis=1) == 1
        targets = np.where(singleton[:, None], mask, False).astype(float)
    z = logits
    # stable per-entry BCE: max(z,0) - z*t + log(1 + exp(-|z|))
    per = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    loss = float(per[mask].sum())
    grad = (_sigmoid(z) - targets) * mask
    return loss, grad


# ---------------------------------------------------------------------------
# Per-sentence target containers and dispatch
# ---------------------------------------------------------------------------

@dataclass
class LossTargets:
    """Per-token supervision for one training unit, shaped for its loss kind."""

    kind: LossKind
    ce_ids: np.ndarray | None = None        # (N,) int, -1 where unused
    dists: np.ndarray | None = None         # (N, T) reference or teacher
    allowed_mask: np.ndarray | None = None  # (N, T) bool
    targets: np.ndarray | None = None       # (N, T) float, AML only
    variant: str | None = None              # cl distillation flavour


def concat_targets(parts: Sequence[LossTargets]) -> LossTargets:
    first = parts[0]
    if any(p.kind != first.kind or p.variant != first.variant for p in parts):
        raise ValueError("cannot concatenate targets of different kinds")

    def cat(attr):
        vals = [getattr(p, attr) for p in parts]
        return None if vals[0] is None else np.concatenate(vals)

    return LossTargets(first.kind, ce_ids=cat("ce_ids"), dists=cat("dists"),
                       allowed_mask=cat("allowed_mask"), targets=cat("targets"),
                       variant=first.variant)


def loss_and_logit_grad(logits: np.ndarray, t: LossTargets) -> tuple[float, np.ndarray]:
    """Evaluate a loss kind on raw logits; probability-based losses softmax first."""
    if t.kind is LossKind.AML:
        return aml_loss(logits, t.allowed_mask, t.targets)
    f = softmax(logits)
    if t.kind is LossKind.NAIVE_CE:
        return naive_ce_loss(f, t.ce_ids)
    if t.kind is LossKind.PLM:
        return plm_loss(f, t.dists, t.ce_ids)
    if t.kind is LossKind.PLM_KL:
        return plm_kl_loss(f, t.dists, t.ce_ids)
    if t.kind is LossKind.CL_DISTILL:
        return cl_distill_loss(f, t.ce_ids, t.dists, t.allowed_mask, t.variant)
    raise ValueError(f"unknown loss kind {t.kind}")
