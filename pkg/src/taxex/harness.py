"""Experiment runner: builds setups, trains the side and final models for
each method over the splits x seeds protocol, and reports span micro-F1.

Per (split, seed) run the pipeline is: carve and scrub the two partial
training sides, train the side models where the method needs them, construct
loss targets or re-annotations, train the final model and score it on the
held-out fully annotated test set.  Side and final models are cached inside
a Runner so methods sharing the same intermediate models do not retrain
them; results are byte-stable for a fixed config.
"""

from __future__ import annotations

import dataclasses
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import annotate
from .corpus import (
    Corpus,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic_corpus,
    final_view,
    partition_sentences,
    plan_disjoint,
    plan_overlapping,
    plan_subtype,
    read_conll,
    side_view,
    subsample_per_type,
    with_gold_pairs,
)
from .errors import TaxexError
from .evaluation import PRF, micro_f1_tags, project_final_tags_to_side
from .oracle import LossKind, LossTargets, oracle_distributions, softmax
from .tagger import (
    Tagger,
    TaggerConfig,
    TrainExample,
    ValidationPlan,
    Vocabulary,
    train,
)
from .taxonomy import FinalLabel, SIDE_A, SIDE_B, Taxonomy

METHODS = ("naive-join", "cl", "cl++", "aml", "x-ann", "plm", "plm-kl",
           "upper-bound", "model-b-only")
SETUPS = ("disjoint", "subtype", "overlapping")

CSV_COLUMNS = ("setup", "method", "type_ratio", "few_shot_k", "validation",
               "eval", "split_seed", "train_seed", "precision", "recall", "f1")


@dataclass(frozen=True)
class ExperimentConfig:
    setup: str = "disjoint"
    method: str = "plm"
    type_ratio: str = "4:4"
    few_shot_k: int | None = None
    validation: str = "full"            # full | partial
    splits: int = 5
    seeds: int = 5
    split_seed_base: int = 100
    train_seed_base: int = 0
    sentence_ratio: float = 0.5         # share of train sentences on side A
    lr_grid: tuple[float, ...] = ()     # empty: use the tagger's learning rate
    aml_targets: str = "determined"     # determined | known
    corpus: str = "synthetic"           # synthetic | conll
    conll_train: str | None = None
    conll_val: str | None = None
    conll_test: str | None = None
    val_sentences: int = 300
    test_sentences: int = 300
    parent: str | None = None           # designated coarse type (non-disjoint setups)
    n_subtypes: int | None = None
    training_logs: bool = False
    tagger: TaggerConfig = field(default_factory=TaggerConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def __post_init__(self):
        if self.method not in METHODS:
            raise TaxexError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.setup not in SETUPS:
            raise TaxexError(f"unknown setup {self.setup!r}; expected one of {SETUPS}")
        if self.validation not in ("full", "partial"):
            raise TaxexError("validation must be 'full' or 'partial'")
        if self.method == "cl" and self.setup != "disjoint":
            raise TaxexError("plain cl is only defined for the disjoint setup; use cl++")
        if self.setup != "disjoint" and self.corpus == "synthetic" \
                and self.synthetic.subtypes_per_coarse < 1:
            raise TaxexError(f"{self.setup} setup needs a two-level corpus "
                             "(synthetic.subtypes_per_coarse >= 1)")

    def ratio_counts(self) -> tuple[int, int]:
        try:
            n_a, n_b = (int(x) for x in self.type_ratio.split(":"))
        except ValueError:
            raise TaxexError(f"cannot parse type ratio {self.type_ratio!r}") from None
        if n_a < 1 or n_b < 1:
            raise TaxexError("both sides of the type ratio must be >= 1")
        return n_a, n_b


# ---------------------------------------------------------------------------
# Config file parsing (key=value lines; dotted keys reach nested configs)
# ---------------------------------------------------------------------------

def parse_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise TaxexError(f"expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _coerce(value: str, sample):
    if sample is None or isinstance(sample, str):
        return None if value.lower() in ("", "none") else value
    if isinstance(sample, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(sample, int):
        return None if value.lower() in ("", "none") else int(value)
    if isinstance(sample, float):
        return float(value)
    if isinstance(sample, tuple):
        return tuple(float(x) for x in value.split(",") if x.strip())
    raise TaxexError(f"cannot coerce config value {value!r}")


_OPTIONAL_INTS = {"few_shot_k", "n_subtypes"}


def config_from_mapping(mapping: dict[str, str],
                        base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string key=value pairs.

    Top-level keys name ExperimentConfig fields; ``tagger.<field>`` and
    ``synthetic.<field>`` reach the nested configs.
    """
    cfg = base or ExperimentConfig()
    top: dict = {}
    tagger: dict = {}
    synthetic: dict = {}
    for key, value in mapping.items():
        scope, _, name = key.partition(".")
        if scope == "tagger" and name:
            sample = getattr(cfg.tagger, name, None)
            if sample is None and name not in TaggerConfig.__dataclass_fields__:
                raise TaxexError(f"unknown tagger option {name!r}")
            tagger[name] = _coerce(value, sample)
        elif scope == "synthetic" and name:
            if name not in SyntheticSpec.__dataclass_fields__:
                raise TaxexError(f"unknown synthetic option {name!r}")
            synthetic[name] = _coerce(value, getattr(cfg.synthetic, name))
        else:
            if key not in ExperimentConfig.__dataclass_fields__:
                raise TaxexError(f"unknown config option {key!r}")
            sample = 0 if key in _OPTIONAL_INTS else getattr(cfg, key)
            top[key] = _coerce(value, sample)
    if tagger:
        top["tagger"] = replace(cfg.tagger, **tagger)
    if synthetic:
        top["synthetic"] = replace(cfg.synthetic, **synthetic)
    return replace(cfg, **top)


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    mapping = parse_config_file(path)
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class Report:
    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def extend(self, other: "Report") -> None:
        self.rows.extend(other.rows)

    def sorted_rows(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: tuple(str(r.get(c, "")) for c in CSV_COLUMNS))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.sorted_rows():
            cells = []
            for col in CSV_COLUMNS:
                val = row.get(col)
                if val is None:
                    cells.append("")
                elif isinstance(val, float):
                    cells.append(f"{val:.6f}")
                else:
                    cells.append(str(val))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def summary(self) -> str:
        groups: dict[tuple, list[float]] = {}
        for row in self.sorted_rows():
            key = tuple(str(row.get(c, "")) for c in
                        ("setup", "method", "type_ratio", "few_shot_k", "validation", "eval"))
            groups.setdefault(key, []).append(row["f1"])
        lines = [f"{'setup':<12} {'method':<14} {'ratio':<7} {'k':<6} {'val':<8} "
                 f"{'eval':<8} {'runs':>4} {'mean_f1':>8} {'std':>7}"]
        for key, scores in sorted(groups.items()):
            arr = np.asarray(scores)
            lines.append(f"{key[0]:<12} {key[1]:<14} {key[2]:<7} {key[3] or '-':<6} "
                         f"{key[4]:<8} {key[5]:<8} {len(arr):>4} "
                         f"{arr.mean():>8.4f} {arr.std():>7.4f}")
        return "\n".join(lines) + "\n"

    def mean_f1(self, method: str | None = None, **filters) -> float:
        vals = [r["f1"] for r in self.rows
                if (method is None or r["method"] == method)
                and all(str(r.get(k)) == str(v) for k, v in filters.items())]
        if not vals:
            raise TaxexError("no matching report rows")
        return float(np.mean(vals))

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "report.csv"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        summary_path = out / "summary.txt"
        summary_path.write_text(self.summary(), encoding="utf-8")
        return csv_path, summary_path


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

class Runner:
    """Shared data, taxonomy and model caches for one experimental setup.

    All methods run against the same carved corpora, so a Runner can be
    shared by several run_experiment calls that differ only in method,
    few-shot k or validation mode; side and final models are then trained
    once per (split, seed) and reused.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._side_cache: dict = {}
        self._final_cache: dict = {}
        self._split_cache: dict = {}
        self._build_data()

    # -- data -----------------------------------------------------------------

    def _load_full(self) -> tuple[Corpus, Corpus, Corpus]:
        cfg = self.config
        if cfg.corpus == "synthetic":
            total = cfg.synthetic.sentences + cfg.val_sentences + cfg.test_sentences
            full = generate_synthetic_corpus(replace(cfg.synthetic, sentences=total))
            s = full.sentences
            n_tr = cfg.synthetic.sentences
            train = Corpus(s[:n_tr], role="train")
            val = Corpus(s[n_tr:n_tr + cfg.val_sentences], role="validation")
            test = Corpus(s[n_tr + cfg.val_sentences:], role="test")
            return train, val, test
        if cfg.corpus == "conll":
            if not (cfg.conll_train and cfg.conll_val and cfg.conll_test):
                raise TaxexError("conll corpus needs conll_train, conll_val and conll_test")
            return (read_conll(cfg.conll_train, role="train"),
                    read_conll(cfg.conll_val, role="validation"),
                    read_conll(cfg.conll_test, role="test"))
        raise TaxexError(f"unknown corpus source {cfg.corpus!r}")

    def _build_plan(self, train: Corpus):
        cfg = self.config
        n_a, n_b = cfg.ratio_counts()
        coarse = sorted({tok.observed.partition("-")[2]
                         for sent in train.sentences for tok in sent.tokens
                         if tok.observed != "O"})
        if len(coarse) != n_a + n_b:
            raise TaxexError(f"type ratio {cfg.type_ratio} does not match the corpus's "
                             f"{len(coarse)} types")
        split = {t: (SIDE_A if i < n_a else SIDE_B) for i, t in enumerate(coarse)}
        if cfg.setup == "disjoint":
            return plan_disjoint(split)
        fine_of: dict[str, set[str]] = {}
        for sent in train.sentences:
            for tok in sent.tokens:
                if tok.fine:
                    name = tok.fine.partition("-")[2]
                    c, _, f = name.partition(".")
                    fine_of.setdefault(c, set()).add(f)
        parent = cfg.parent or next(t for t in coarse if split[t] == SIDE_A)
        parent_fines = sorted(fine_of.get(parent, ()))
        if not parent_fines:
            raise TaxexError(f"coarse type {parent!r} has no fine types in the corpus")
        if cfg.setup == "subtype":
            n_sub = cfg.n_subtypes or max(1, (len(parent_fines) + 1) // 2)
            rng = np.random.default_rng([cfg.synthetic.seed, 7])
            chosen = sorted(rng.choice(parent_fines, size=min(n_sub, len(parent_fines)),
                                       replace=False).tolist())
            return plan_subtype(split, parent, chosen)
        # split the fine types into two intersecting subsets covering all of them
        n = len(parent_fines)
        overlap = max(1, n // 3)
        a_only = (n - overlap) // 2
        s_a = parent_fines[:a_only + overlap]
        s_b = parent_fines[a_only:]
        split_wo_parent = {t: s for t, s in split.items() if t != parent}
        return plan_overlapping({**split_wo_parent, parent: SIDE_A}, parent, s_a, s_b)

    def _build_data(self) -> None:
        train, val, test = self._load_full()
        plan = self._build_plan(train)
        self.taxonomy: Taxonomy = plan.taxonomy
        self._paired_train = with_gold_pairs(train, plan)
        paired_val = with_gold_pairs(val, plan)
        paired_test = with_gold_pairs(test, plan)
        self.final_train = final_view(self._paired_train, self.taxonomy)
        self.final_val = final_view(paired_val, self.taxonomy)
        self.final_test = final_view(paired_test, self.taxonomy)
        self.val_a = side_view(paired_val, SIDE_A)
        self.val_b = side_view(paired_val, SIDE_B)
        self.test_b = side_view(paired_test, SIDE_B)

    def split_sides(self, split_idx: int) -> tuple[Corpus, Corpus]:
        if split_idx not in self._split_cache:
            seed = self.config.split_seed_base + split_idx
            part_a, part_b = partition_sentences(self._paired_train, seed,
                                                 self.config.sentence_ratio)
            d_a = side_view(Corpus(part_a), SIDE_A)
            d_b = side_view(Corpus(part_b), SIDE_B)
            self._split_cache[split_idx] = (d_a, d_b)
        return self._split_cache[split_idx]

    def d_b_for(self, split_idx: int, few_shot_k: int | None) -> Corpus:
        d_b = self.split_sides(split_idx)[1]
        if few_shot_k is not None:
            seed = self.config.split_seed_base + split_idx
            d_b = subsample_per_type(d_b, few_shot_k, seed,
                                     types=self.taxonomy.e_b)
        return d_b

    # -- training helpers ------------------------------------------------------

    def _train_seed(self, seed_idx: int) -> int:
        return self.config.train_seed_base + seed_idx

    def _fit(self, corpus: Corpus, tag_space, targets_fn, validation: ValidationPlan,
             seed: int, decode: str = "argmax") -> Tagger:
        """Train over the learning-rate grid and keep the best by validation."""
        cfg = self.config
        vocab = Vocabulary.from_corpus(corpus)
        grid = cfg.lr_grid or (cfg.tagger.learning_rate,)
        best_model, best_score = None, -np.inf
        encoded = None
        for lr in grid:
            tcfg = replace(cfg.tagger, learning_rate=lr, seed=seed)
            model = Tagger(vocab, tag_space, tcfg, decode=decode)
            if encoded is None:
                encoded = [model.encode(s.texts()) for s in corpus.sentences]
            examples = [TrainExample(ids, tgt)
                        for ids, tgt in zip(encoded, targets_fn(model))]
            log = train(model, examples, validation, tcfg)
            model.train_log = log
            score = validation.score(model)
            if score > best_score:
                best_model, best_score = model, score
        return best_model

    def write_training_logs(self, out_dir) -> None:
        """Dump the training log of every cached model as CSV."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for cache, stem in ((self._side_cache, "side"), (self._final_cache, "final")):
            for key, model in sorted(cache.items(), key=str):
                if getattr(model, "train_log", None) is None:
                    continue
                name = "_".join(str(k) for k in key if k is not None)
                model.train_log.write_csv(out / f"{stem}_{name}.csv")

    def _ce_targets(self, corpus: Corpus, tag_space) -> list[LossTargets]:
        out = []
        for sent in corpus.sentences:
            ids = np.array([tag_space.tag_id(t) for t in sent.observed_tags()])
            out.append(LossTargets(LossKind.NAIVE_CE, ce_ids=ids))
        return out

    def side_model(self, side: str, split_idx: int, seed_idx: int,
                   few_shot_k: int | None = None) -> Tagger:
        key = (side, split_idx, seed_idx, few_shot_k if side == SIDE_B else None)
        if key not in self._side_cache:
            if side == SIDE_A:
                corpus = self.split_sides(split_idx)[0]
                val = self.val_a
            else:
                corpus = self.d_b_for(split_idx, few_shot_k)
                val = self.val_b
            space = self.taxonomy.side_tag_space(side)
            validation = ValidationPlan(mode="full", full=val)
            targets = self._ce_targets(corpus, space)
            model = self._fit(corpus, space, lambda m: targets, validation,
                              self._train_seed(seed_idx))
            self._side_cache[key] = model
        return self._side_cache[key]

    def _final_validation(self, validation_mode: str) -> ValidationPlan:
        if validation_mode == "partial":
            return ValidationPlan(mode="partial", val_a=self.val_a, val_b=self.val_b,
                                  taxonomy=self.taxonomy)
        return ValidationPlan(mode="full", full=self.final_val)

    # -- per-method target construction ---------------------------------------

    def _alignment_cache(self, side: str, aux_space):
        from .oracle import alignment_for_observation
        cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

        def get(observed: str):
            if observed not in cache:
                cache[observed] = alignment_for_observation(observed, side,
                                                            self.taxonomy, aux_space)
            return cache[observed]

        return get

    def _oracle_targets(self, corpus: Corpus, side: str, aux: Tagger,
                        kind: LossKind) -> list[LossTargets]:
        out = []
        for sent in corpus.sentences:
            logits = aux.logits_for(sent)
            dists = oracle_distributions(sent.observed_tags(), side, logits,
                                         aux.tag_space, self.taxonomy)
            out.append(LossTargets(kind, dists=dists))
        return out

    def _cl_targets(self, d_b: Corpus, model_a: Tagger, variant: str) -> list[LossTargets]:
        tax = self.taxonomy
        n_tags = len(tax.space.tag_space)
        align = self._alignment_cache(SIDE_B, model_a.tag_space)
        out = []
        for sent in d_b.sentences:
            probs_a = softmax(model_a.logits_for(sent))
            n = len(sent)
            ce_ids = np.full(n, -1, dtype=np.int64)
            teacher = np.zeros((n, n_tags))
            mask = np.zeros((n, n_tags), dtype=bool)
            for i, tag in enumerate(sent.observed_tags()):
                finals, auxes = align(tag)
                mask[i, finals] = True
                if tag != "O" and len(finals) == 1:
                    ce_ids[i] = finals[0]
                else:
                    teacher[i, finals] = probs_a[i, auxes]
                    if variant == "cl":
                        # unrestricted teacher: place the full side distribution
                        teacher[i] = 0.0
                        for j, aux_tag in enumerate(model_a.tag_space.tags):
                            teacher[i, self._final_id_for_side_tag(aux_tag, SIDE_A)] \
                                += probs_a[i, j]
            out.append(LossTargets(LossKind.CL_DISTILL, ce_ids=ce_ids, dists=teacher,
                                   allowed_mask=mask, variant=variant))
        return out

    def _final_id_for_side_tag(self, tag: str, side: str) -> int:
        name = annotate._final_tag_for_side_tag(tag, side, self.taxonomy)
        return self.taxonomy.space.tag_space.tag_id(name)

    def _aml_targets(self, corpus: Corpus, side: str) -> list[LossTargets]:
        """Sigmoid-loss supervision per the configured target rule.

        "determined": loss over exactly the allowed tags, positive only when
        the allowed set is a singleton.  "known": loss over the tags whose
        truth the observation determines, i.e. positive on a singleton
        allowed tag and negative on everything outside the allowed set; the
        genuinely uncertain candidates get no loss.
        """
        tax = self.taxonomy
        known = self.config.aml_targets == "known"
        n_tags = len(tax.space.tag_space)
        align = self._alignment_cache(side, tax.side_tag_space(
            SIDE_B if side == SIDE_A else SIDE_A))
        out = []
        for sent in corpus.sentences:
            n = len(sent)
            mask = np.zeros((n, n_tags), dtype=bool)
            targets = np.zeros((n, n_tags)) if known else None
            for i, tag in enumerate(sent.observed_tags()):
                finals, _ = align(tag)
                if known:
                    mask[i] = True
                    mask[i, finals] = len(finals) == 1
                    if len(finals) == 1:
                        targets[i, finals[0]] = 1.0
                else:
                    mask[i, finals] = True
            out.append(LossTargets(LossKind.AML, allowed_mask=mask, targets=targets))
        return out

    # -- methods ----------------------------------------------------------------

    def final_model(self, method: str, split_idx: int, seed_idx: int,
                    few_shot_k: int | None, validation_mode: str) -> Tagger:
        key = (method, split_idx if method != "upper-bound" else -1, seed_idx,
               few_shot_k, validation_mode)
        if key in self._final_cache:
            return self._final_cache[key]
        tax = self.taxonomy
        space = tax.space.tag_space
        seed = self._train_seed(seed_idx)
        validation = self._final_validation(validation_mode)
        mode = "disjoint" if tax.is_disjoint() else "general"
        d_a = self.split_sides(split_idx)[0]
        d_b = self.d_b_for(split_idx, few_shot_k)

        if method == "upper-bound":
            corpus = self.final_train
            targets = self._ce_targets(corpus, space)
            model = self._fit(corpus, space, lambda m: targets, validation, seed)
        elif method == "naive-join":
            joined = annotate.join_corpora(
                annotate.map_observed_to_final(d_a, SIDE_A, tax),
                annotate.map_observed_to_final(d_b, SIDE_B, tax))
            targets = self._ce_targets(joined, space)
            model = self._fit(joined, space, lambda m: targets, validation, seed)
        elif method == "x-ann":
            model_a = self.side_model(SIDE_A, split_idx, seed_idx)
            model_b = self.side_model(SIDE_B, split_idx, seed_idx, few_shot_k)
            joined = annotate.join_corpora(
                annotate.cross_annotate(d_a, model_b, tax, mode),
                annotate.cross_annotate(d_b, model_a, tax, mode))
            targets = self._ce_targets(joined, space)
            model = self._fit(joined, space, lambda m: targets, validation, seed)
        elif method in ("plm", "plm-kl"):
            kind = LossKind.PLM if method == "plm" else LossKind.PLM_KL
            model_a = self.side_model(SIDE_A, split_idx, seed_idx)
            model_b = self.side_model(SIDE_B, split_idx, seed_idx, few_shot_k)
            targets = (self._oracle_targets(d_a, SIDE_A, model_b, kind)
                       + self._oracle_targets(d_b, SIDE_B, model_a, kind))
            joined = Corpus(list(d_a.sentences) + list(d_b.sentences),
                            side="Full", label_space=tax.space.tags)
            model = self._fit(joined, space, lambda m: targets, validation, seed)
        elif method in ("cl", "cl++"):
            model_a = self.side_model(SIDE_A, split_idx, seed_idx)
            targets = self._cl_targets(d_b, model_a, method)
            model = self._fit(d_b, space, lambda m: targets, validation, seed)
        elif method == "aml":
            joined = Corpus(list(d_a.sentences) + list(d_b.sentences), side="Full",
                            label_space=tax.space.tags)
            targets = (self._aml_targets(d_a, SIDE_A) + self._aml_targets(d_b, SIDE_B))
            model = self._fit(joined, space, lambda m: targets, validation, seed,
                              decode="threshold")
        else:
            raise TaxexError(f"{method!r} does not train a final model")
        self._final_cache[key] = model
        return model

    def evaluate_final(self, model: Tagger) -> PRF:
        preds = model.predict_corpus(self.final_test)
        gold = [s.observed_tags() for s in self.final_test.sentences]
        return micro_f1_tags(preds, gold)

    def run_one(self, method: str, split_idx: int, seed_idx: int,
                config: ExperimentConfig | None = None) -> PRF:
        cfg = config or self.config
        if method == "model-b-only":
            model_b = self.side_model(SIDE_B, split_idx, seed_idx, cfg.few_shot_k)
            preds = model_b.predict_corpus(self.final_test)
            mapped = [[annotate._final_tag_for_side_tag(t, SIDE_B, self.taxonomy)
                       for t in tags] for tags in preds]
            gold = [s.observed_tags() for s in self.final_test.sentences]
            return micro_f1_tags(mapped, gold)
        model = self.final_model(method, split_idx, seed_idx, cfg.few_shot_k,
                                 cfg.validation)
        return self.evaluate_final(model)


def _row(config: ExperimentConfig, method: str, split_idx: int, seed_idx: int,
         prf: PRF, eval_scope: str = "final") -> dict:
    return {
        "setup": config.setup,
        "method": method,
        "type_ratio": config.type_ratio,
        "few_shot_k": config.few_shot_k,
        "validation": config.validation,
        "eval": eval_scope,
        "split_seed": config.split_seed_base + split_idx,
        "train_seed": config.train_seed_base + seed_idx,
        "precision": prf.precision,
        "recall": prf.recall,
        "f1": prf.f1,
    }


def _with_context(exc: TaxexError, method: str, split_idx: int, seed_idx: int):
    msg = f"[method={method} split={split_idx} seed={seed_idx}] {exc}"
    return TaxexError(msg)


def run_experiment(config: ExperimentConfig, runner: Runner | None = None) -> Report:
    """Run one method over the full splits x seeds protocol.

    A shared Runner may be passed when several calls use the same corpus and
    setup (only method, few-shot k or validation mode differing); its model
    caches then avoid retraining shared side models.
    """
    runner = runner or Runner(config)
    report = Report()
    for split_idx in range(config.splits):
        for seed_idx in range(config.seeds):
            try:
                prf = runner.run_one(config.method, split_idx, seed_idx, config=config)
            except TaxexError as exc:
                raise _with_context(exc, config.method, split_idx, seed_idx) from exc
            report.add(**_row(config, config.method, split_idx, seed_idx, prf))
    return report


def run_model_b_comparison(config: ExperimentConfig,
                           runner: Runner | None = None,
                           methods: tuple[str, ...] = ("x-ann", "plm")) -> Report:
    """Score the side-B model against final models on side-B entities only.

    The test set keeps only side-B annotations; final-model predictions are
    projected onto side B (labels awarded by side A alone are ignored)
    before scoring, so the comparison is per-ratio like-for-like.
    """
    if config.setup != "disjoint":
        raise TaxexError("the side-B comparison protocol is defined for the disjoint setup")
    runner = runner or Runner(config)
    report = Report()
    gold_b = [s.observed_tags() for s in runner.test_b.sentences]
    for split_idx in range(config.splits):
        for seed_idx in range(config.seeds):
            try:
                model_b = runner.side_model(SIDE_B, split_idx, seed_idx, config.few_shot_k)
                preds = model_b.predict_corpus(runner.test_b)
                prf = micro_f1_tags(preds, gold_b)
                report.add(**_row(config, "model-b-only", split_idx, seed_idx, prf,
                                  eval_scope="b-only"))
                for method in methods:
                    model = runner.final_model(method, split_idx, seed_idx,
                                               config.few_shot_k, config.validation)
                    final_preds = model.predict_corpus(runner.test_b)
                    projected = [project_final_tags_to_side(tags, SIDE_B, runner.taxonomy)
                                 for tags in final_preds]
                    prf = micro_f1_tags(projected, gold_b)
                    report.add(**_row(config, method, split_idx, seed_idx, prf,
                                      eval_scope="b-only"))
            except TaxexError as exc:
                raise _with_context(exc, "model-b-comparison", split_idx, seed_idx) from exc
    return report


def sweep(config: ExperimentConfig, axis: str, values) -> Report:
    """One run_experiment per axis value, merged into a single report."""
    if axis not in ("few_shot_k", "type_ratio"):
        raise TaxexError(f"unknown sweep axis {axis!r}")
    report = Report()
    shared = None
    if axis == "few_shot_k":
        shared = Runner(config)  # subsampling happens per run; base data is shared
    for value in values:
        cfg = replace(config, **{axis: value})
        report.extend(run_experiment(cfg, runner=shared))
    return report
