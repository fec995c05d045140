"""Taxonomy expansion for NER from partially annotated datasets.

The package splits into: :mod:`taxex.taxonomy` (the entity-type relation
algebra and combined output space), :mod:`taxex.corpus` (data model, CoNLL
I/O, partial-dataset construction, synthetic generation), :mod:`taxex.tagger`
(a small numpy token classifier with hand-written gradients),
:mod:`taxex.oracle` (reference-distribution construction and every training
loss), :mod:`taxex.annotate` (cross-annotation), :mod:`taxex.evaluation`
(span micro-F1 and its masked variants) and :mod:`taxex.harness`
(the splits x seeds experiment runner behind the ``taxex`` CLI).
"""

from .annotate import cross_annotate, join_corpora, map_observed_to_final
from .corpus import (
    Corpus,
    Sentence,
    SplitSpec,
    SyntheticSpec,
    Token,
    build_overlapping_setup,
    build_subtype_setup,
    generate_synthetic_corpus,
    read_conll,
    repair_bio,
    split_and_scrub,
    subsample_per_type,
    write_conll,
)
from .errors import TaxexError, TaxexWarning
from .evaluation import (
    Span,
    extract_spans,
    masked_micro_f1,
    micro_f1,
    micro_f1_tags,
    partial_validation_score,
)
from .harness import (
    ExperimentConfig,
    Report,
    Runner,
    run_experiment,
    run_model_b_comparison,
    sweep,
)
from .oracle import (
    LossKind,
    aml_loss,
    build_oracle,
    cl_distill_loss,
    naive_ce_loss,
    plm_kl_loss,
    plm_loss,
)
from .tagger import Tagger, TaggerConfig, Vocabulary, load_checkpoint, save_checkpoint, train
from .taxonomy import (
    AllowedSet,
    EntityType,
    FinalLabel,
    FinalLabelSpace,
    RelationKind,
    RelationMatrix,
    Taxonomy,
    allowed_final_labels,
    project_gold_to_final,
    redefine_output_space,
    validate_relations,
)

__version__ = "0.1.0"
