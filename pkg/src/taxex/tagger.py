"""A small trainable per-token classifier over a BIO tag space.

Each token is classified from the embeddings of a fixed window of
surrounding tokens through one hidden tanh layer.  Forward, backward and the
Adam-style update are written out in numpy so every training loss in
:mod:`taxex.oracle` can be gradient-checked against finite differences.
All math runs in float64 and every source of randomness is seeded, so a
given (config, corpus, seed) triple reproduces parameters bit for bit.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, Sentence, repair_bio
from .errors import DivergenceError, TaxexError
from .evaluation import micro_f1_tags, partial_validation_score
from .oracle import LossTargets, concat_targets, loss_and_logit_grad, softmax
from .taxonomy import TagSpace, Taxonomy

CHECKPOINT_VERSION = "taxex-ckpt-1"


DEFAULT_LR_GRID = (1e-3, 3e-3, 1e-2)


@dataclass(frozen=True)
class TaggerConfig:
    embedding_dim: int = 32
    context_window: int = 2     # tokens of left/right context
    hidden_dim: int = 64
    learning_rate: float = 1e-2
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    early_stop_patience: int = 5

    def __post_init__(self):
        if min(self.embedding_dim, self.hidden_dim, self.epochs, self.batch_size) < 1:
            raise TaxexError("dimensions, epochs and batch size must be >= 1")
        if self.context_window < 0:
            raise TaxexError("context window must be >= 0")
        if self.learning_rate <= 0:
            raise TaxexError("learning rate must be positive")


class Vocabulary:
    """Token-to-id mapping with reserved unknown and padding ids."""

    UNK = 0
    PAD = 1

    def __init__(self, tokens: Sequence[str]):
        self.index = {"<unk>": self.UNK, "<pad>": self.PAD}
        for tok in sorted(set(tokens)):
            self.index.setdefault(tok, len(self.index))
        self.tokens = tuple(t for t, _ in sorted(self.index.items(), key=lambda kv: kv[1]))

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "Vocabulary":
        return cls([tok.text for sent in corpus.sentences for tok in sent.tokens])

    def __len__(self):
        return len(self.index)

    def ids(self, texts: Sequence[str]) -> np.ndarray:
        return np.array([self.index.get(t, self.UNK) for t in texts], dtype=np.int64)


@dataclass
class TrainExample:
    """One sentence pre-encoded for training: window ids plus its targets."""

    ids: np.ndarray          # (n, 2*window+1) int64
    targets: LossTargets

    def __len__(self):
        return len(self.ids)


class Tagger:
    """Window-based feedforward token classifier.

    Parameters: an embedding table, one hidden affine layer with tanh and an
    affine output layer over the tag space.  All parameters are initialized
    uniformly in [-0.1, 0.1] from the config seed.
    """

    def __init__(self, vocab: Vocabulary, tag_space: TagSpace, config: TaggerConfig,
                 decode: str = "argmax"):
        self.vocab = vocab
        self.tag_space = tag_space
        self.config = config
        # "argmax" suits softmax-trained models; "threshold" is the
        # multi-label rule (O unless some entity logit clears 0, then argmax
        # over entity tags) for sigmoid-trained models, whose O logit is
        # never trained positively.
        if decode not in ("argmax", "threshold"):
            raise TaxexError(f"unknown decode rule {decode!r}")
        self.decode = decode
        rng = np.random.default_rng(config.seed)
        w = config.context_window
        d, h, t = config.embedding_dim, config.hidden_dim, len(tag_space)
        self.width = 2 * w + 1

        def init(*shape):
            return rng.uniform(-0.1, 0.1, size=shape)

        self.params = {
            "emb": init(len(vocab), d),
            "w1": init(self.width * d, h),
            "b1": init(h),
            "w2": init(h, t),
            "b2": init(t),
        }

    # -- encoding -----------------------------------------------------------

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Window id matrix for one sentence; out-of-range positions pad."""
        w = self.config.context_window
        ids = self.vocab.ids(texts)
        padded = np.full(len(ids) + 2 * w, Vocabulary.PAD, dtype=np.int64)
        padded[w:w + len(ids)] = ids
        return np.stack([padded[i:i + self.width] for i in range(len(ids))])

    # -- forward / backward ---------------------------------------------------

    def _forward_ids(self, idmat: np.ndarray):
        p = self.params
        x = p["emb"][idmat].reshape(len(idmat), -1)
        act = np.tanh(x @ p["w1"] + p["b1"])
        logits = act @ p["w2"] + p["b2"]
        return {"ids": idmat, "x": x, "act": act}, logits

    def _backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        act, x, idmat = cache["act"], cache["x"], cache["ids"]
        grads = {
            "w2": act.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }
        dact = dlogits @ p["w2"].T
        dpre = dact * (1.0 - act * act)
        grads["w1"] = x.T @ dpre
        grads["b1"] = dpre.sum(axis=0)
        dx = (dpre @ p["w1"].T).reshape(-1, p["emb"].shape[1])
        flat_ids = idmat.ravel()
        demb = np.zeros_like(p["emb"])
        for j in range(demb.shape[1]):  # bincount beats ufunc.at for this scatter
            demb[:, j] = np.bincount(flat_ids, weights=dx[:, j], minlength=len(demb))
        grads["emb"] = demb
        return grads

    # -- public inference -----------------------------------------------------

    def logits_for(self, sentence: Sentence) -> np.ndarray:
        _, logits = self._forward_ids(self.encode(sentence.texts()))
        return logits

    def forward(self, sentence: Sentence) -> np.ndarray:
        """One normalized distribution per token, deterministic given params."""
        return softmax(self.logits_for(sentence))

    def _decode_ids(self, logits: np.ndarray) -> np.ndarray:
        if self.decode == "threshold":
            entity = logits[:, 1:]
            best = np.argmax(entity, axis=1) + 1
            return np.where(entity.max(axis=1) > 0.0, best, 0)
        return np.argmax(logits, axis=1)

    def predict_tags(self, sentence: Sentence) -> list[str]:
        """Per-token decode (lowest index wins ties) followed by BIO repair."""
        ids = self._decode_ids(self.logits_for(sentence))
        return repair_bio([self.tag_space.tags[i] for i in ids])

    def predict_corpus(self, corpus: Corpus) -> list[list[str]]:
        """Batched prediction over a whole corpus."""
        lengths = [len(s) for s in corpus.sentences]
        idmat = np.concatenate([self.encode(s.texts()) for s in corpus.sentences])
        _, logits = self._forward_ids(idmat)
        best = self._decode_ids(logits)
        out, pos = [], 0
        for n in lengths:
            out.append(repair_bio([self.tag_space.tags[i] for i in best[pos:pos + n]]))
            pos += n
        return out

    def logits_corpus(self, corpus: Corpus) -> list[np.ndarray]:
        return [self.logits_for(sent) for sent in corpus.sentences]

    # -- loss plumbing ----------------------------------------------------------

    def batch_loss(self, examples: Sequence[TrainExample]):
        """Summed loss, token count and parameter gradients for a batch."""
        idmat = np.concatenate([ex.ids for ex in examples])
        targets = concat_targets([ex.targets for ex in examples])
        cache, logits = self._forward_ids(idmat)
        loss, dlogits = loss_and_logit_grad(logits, targets)
        grads = self._backward(cache, dlogits)
        return loss, len(idmat), grads

    def loss_value(self, examples: Sequence[TrainExample]) -> float:
        idmat = np.concatenate([ex.ids for ex in examples])
        targets = concat_targets([ex.targets for ex in examples])
        _, logits = self._forward_ids(idmat)
        loss, _ = loss_and_logit_grad(logits, targets)
        return loss

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])

    def set_flat_params(self, vec: np.ndarray) -> None:
        pos = 0
        for k in sorted(self.params):
            size = self.params[k].size
            self.params[k] = vec[pos:pos + size].reshape(self.params[k].shape).copy()
            pos += size

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class ValidationPlan:
    """Early-stopping scorer: full final-space validation or the mean of the
    two side-partial scores."""

    mode: str = "full"  # "full" | "partial"
    full: Corpus | None = None
    val_a: Corpus | None = None
    val_b: Corpus | None = None
    taxonomy: Taxonomy | None = None

    def score(self, model: Tagger) -> float:
        if self.mode == "full":
            preds = model.predict_corpus(self.full)
            gold = [s.observed_tags() for s in self.full.sentences]
            return micro_f1_tags(preds, gold).f1
        return partial_validation_score(model, self.val_a, self.val_b, self.taxonomy)


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)

    def add(self, epoch: int, split: str, loss: float, f1: float | None):
        self.rows.append({"epoch": epoch, "split": split, "loss": loss, "micro_f1": f1})

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,split,loss,micro_f1\n")
            for r in self.rows:
                f1 = "" if r["micro_f1"] is None else f"{r['micro_f1']:.6f}"
                fh.write(f"{r['epoch']},{r['split']},{r['loss']:.6f},{f1}\n")


def make_examples(model: Tagger, corpus: Corpus,
                  targets: Sequence[LossTargets]) -> list[TrainExample]:
    return [TrainExample(model.encode(sent.texts()), tgt)
            for sent, tgt in zip(corpus.sentences, targets)]


def train(model: Tagger, examples: Sequence[TrainExample],
          validation: ValidationPlan | None = None,
          config: TaggerConfig | None = None) -> TrainLog:
    """Minibatch gradient descent with Adam-style updates and early stopping.

    Validation runs after every epoch; the best-scoring parameters are kept
    and restored at the end.  Training stops once the number of epochs since
    the best score reaches the patience (with patience 0 that is immediately
    after the first validation round).  Raises DivergenceError when the loss
    stops being finite.
    """
    cfg = config or model.config
    rng = np.random.default_rng([cfg.seed, 1])
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(vv) for k, vv in model.params.items()}
    step = 0
    log = TrainLog()
    best_score, best_epoch, best_params = -np.inf, 0, model.copy_params()

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(examples))
        total_loss, total_tokens = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [examples[i] for i in order[lo:lo + cfg.batch_size]]
            loss, n_tok, grads = model.batch_loss(batch)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            step += 1
            scale = 1.0 / n_tok
            for k, g in grads.items():
                g = g * scale
                m[k] = beta1 * m[k] + (1 - beta1) * g
                v[k] = beta2 * v[k] + (1 - beta2) * g * g
                mhat = m[k] / (1 - beta1 ** step)
                vhat = v[k] / (1 - beta2 ** step)
                model.params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
            total_loss += loss
            total_tokens += n_tok
        if not all(np.isfinite(p).all() for p in model.params.values()):
            raise DivergenceError(f"non-finite parameters at epoch {epoch}")
        log.add(epoch, "train", total_loss / max(total_tokens, 1), None)
        if validation is not None:
            score = validation.score(model)
            log.add(epoch, "val", total_loss / max(total_tokens, 1), score)
            if score > best_score:
                best_score, best_epoch, best_params = score, epoch, model.copy_params()
            if epoch - best_epoch >= cfg.early_stop_patience:
                break
    if validation is not None:
        model.params = best_params
    return log


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: Tagger, path) -> None:
    """Binary tensor dump with embedded config, vocabulary and tag order."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "tags": list(model.tag_space.labels),
        "vocab": list(model.vocab.tokens),
        "decode": model.decode,
    }
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **model.params)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> Tagger:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise TaxexError(f"unsupported checkpoint version {meta.get('version')!r}")
        config = TaggerConfig(**meta["config"])
        vocab = Vocabulary.__new__(Vocabulary)
        vocab.tokens = tuple(meta["vocab"])
        vocab.index = {t: i for i, t in enumerate(vocab.tokens)}
        model = Tagger(vocab, TagSpace(meta["tags"]), config,
                       decode=meta.get("decode", "argmax"))
        for k in model.params:
            model.params[k] = data[k]
    return model
