"""Trainable extractive summarizer over any unit granularity.

Documents are encoded as one token stream with a [CLS] inserted before
and a [SEP] after every sentence.  Token vectors (hashed n-gram bag
embeddings plus sinusoidal positions) run through a bidirectional GRU;
each unit is pooled by the arithmetic mean of its own token vectors
(boundary tokens excluded), except sentence-granularity units which use
their [CLS] vector directly.  A unit-level transformer block
contextualizes the pooled vectors and a sigmoid head scores each unit;
training minimizes mean binary cross-entropy against oracle labels.

Inference ranks units by probability and applies the same
keep-the-crossing-unit character budget rule as the oracle labeler.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .nn.checkpoint import Checkpoint
from .rouge import rouge_n
from .spans import Unit, UnitKind
from .tokenization import SubwordHasher


@dataclass(frozen=True)
class SummarizerConfig:
    embed_dim: int = 32
    hidden: int = 32
    d_ff: int = 96
    max_window: int = 1024
    n_min: int = 2
    n_max: int = 4
    bucket_count: int = 2 ** 12
    hash_seed: int = 0
    epochs: int = 6
    lr: float = 1e-3
    pe_scale: float = 0.1  # keeps sinusoids from drowning the embeddings
    unit_pe_scale: float = 0.02  # unit order is a weak, deliberately faint signal
    seed: int = 0

    def hasher(self) -> SubwordHasher:
        return SubwordHasher(self.n_min, self.n_max, self.bucket_count, self.hash_seed)


@dataclass(frozen=True)
class DocumentExample:
    """One case prepared for the summarizer at a fixed granularity."""

    case_id: str
    kind: UnitKind
    sentences: tuple[tuple[str, ...], ...]
    units: tuple[Unit, ...]
    unit_texts: tuple[str, ...]
    unit_char_lengths: tuple[int, ...]
    labels: tuple[int, ...] | None = None
    reference_sentences: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"{self.case_id}: document has no sentences")
        if not self.units:
            raise ValueError(f"{self.case_id}: document has no units")
        if self.labels is not None and len(self.labels) != len(self.units):
            raise ValueError(f"{self.case_id}: labels do not match units")


class Summarizer:
    KIND = "summarizer"

    def __init__(self, config: SummarizerConfig, unit_kind: UnitKind):
        self.config = config
        self.unit_kind = unit_kind
        self.hasher = config.hasher()
        d = 2 * config.hidden
        store = nn.ParameterStore(config.seed)
        store.add("emb", (config.bucket_count, config.embed_dim), init="embedding")
        store.add("cls_vec", (config.embed_dim,), init="embedding")
        store.add("sep_vec", (config.embed_dim,), init="embedding")
        nn.add_bigru_params(store, "enc", config.embed_dim, config.hidden)
        nn.add_transformer_params(store, "unit_tf", d, config.d_ff)
        store.add("head_w", (d,))
        store.add("head_b", (1,), init="zeros")
        self.store = store

    # -- document layout -----------------------------------------------

    def _layout(self, doc: DocumentExample):
        """Token stream with [CLS]/[SEP] boundaries under the window cap.

        Truncation drops trailing sentences once the window is full (a
        lone over-long first sentence is token-truncated).  Units that do
        not fit the kept tokens are excluded from scoring.
        """
        window = self.config.max_window
        kept: list[tuple[str, ...]] = []
        total = 0
        for si, sent in enumerate(doc.sentences):
            need = len(sent) + 2
            if total + need > window:
                if si == 0:
                    kept.append(sent[: max(1, window - 2)])
                    total += len(kept[0]) + 2
                break
            kept.append(sent)
            total += need

        stream: list[tuple[str, int]] = []  # (surface, role) role: 0 cls, 1 sep, 2 token
        cls_pos: list[int] = []
        offsets: list[int] = []
        for sent in kept:
            cls_pos.append(len(stream))
            stream.append(("", 0))
            offsets.append(len(stream))
            stream.extend((s, 2) for s in sent)
            stream.append(("", 1))

        unit_idx = []
        pools = []
        for ui, unit in enumerate(doc.units):
            si = unit.sentence_index
            if si >= len(kept) or unit.token_end > len(kept[si]):
                continue
            unit_idx.append(ui)
            if self.unit_kind is UnitKind.SENTENCE:
                pools.append((cls_pos[si], cls_pos[si] + 1))
            else:
                a = offsets[si] + unit.token_start
                pools.append((a, a + (unit.token_end - unit.token_start)))
        return stream, pools, unit_idx

    # -- forward / backward --------------------------------------------

    def _forward(self, doc: DocumentExample):
        p = self.store.params
        stream, pools, unit_idx = self._layout(doc)
        if not unit_idx:
            raise ValueError(f"{doc.case_id}: no units fit the token window")

        roles = np.array([role for _, role in stream])
        real_idx = np.flatnonzero(roles == 2)
        bucket_lists = [self.hasher.buckets(stream[t][0]) for t in real_idx]
        x = np.empty((len(stream), self.config.embed_dim))
        x[roles == 0] = p["cls_vec"]
        x[roles == 1] = p["sep_vec"]
        x[real_idx] = nn.embed_bag_forward(bucket_lists, p["emb"])
        x = x + self.config.pe_scale * nn.sinusoidal_encoding(
            len(stream), self.config.embed_dim
        )

        enc, enc_cache = nn.bigru_forward(x, self.store, "enc")
        pooled = np.empty((len(pools), enc.shape[1]))
        for u, (a, b) in enumerate(pools):
            pooled[u] = enc[a:b].mean(axis=0)
        s_in = pooled + self.config.unit_pe_scale * nn.sinusoidal_encoding(
            len(pools), enc.shape[1]
        )
        s_out, tf_cache = nn.transformer_forward(s_in, self.store, "unit_tf")
        logits = s_out @ p["head_w"] + p["head_b"][0]
        cache = (roles, real_idx, bucket_lists, enc_cache, enc.shape, pools, s_out, tf_cache)
        return logits, unit_idx, cache

    def _backward(self, dlogits, cache):
        store = self.store
        p = store.params
        roles, real_idx, bucket_lists, enc_cache, enc_shape, pools, s_out, tf_cache = cache
        store.accumulate("head_w", s_out.T @ dlogits)
        store.accumulate("head_b", np.array([dlogits.sum()]))
        ds_out = np.outer(dlogits, p["head_w"])
        ds_in = nn.transformer_backward(ds_out, tf_cache, store)
        denc = np.zeros(enc_shape)
        for u, (a, b) in enumerate(pools):
            denc[a:b] += ds_in[u] / (b - a)
        dx = nn.bigru_backward(denc, enc_cache, store)
        store.grads["cls_vec"] += dx[roles == 0].sum(axis=0)
        store.grads["sep_vec"] += dx[roles == 1].sum(axis=0)
        nn.embed_bag_backward(dx[real_idx], bucket_lists, store.grads["emb"])

    def loss_and_grads(self, batch: list[DocumentExample]) -> float:
        total = 0.0
        scale = 1.0 / len(batch)
        for doc in batch:
            if doc.labels is None:
                raise ValueError(f"{doc.case_id}: no labels for training")
            if doc.kind is not self.unit_kind:
                raise ValueError(
                    f"{doc.case_id}: document kind {doc.kind} does not match "
                    f"model kind {self.unit_kind}"
                )
            logits, unit_idx, cache = self._forward(doc)
            labels = np.asarray([doc.labels[i] for i in unit_idx], dtype=np.float64)
            loss, dlogits = nn.sigmoid_bce(logits, labels)
            total += loss
            self._backward(dlogits * scale, cache)
        return total * scale

    def predict_probs(self, doc: DocumentExample):
        """Per-unit probabilities; units outside the window are omitted."""
        logits, unit_idx, _ = self._forward(doc)
        return nn.sigmoid(logits), unit_idx

    # -- persistence ---------------------------------------------------

    def to_checkpoint(self, optimizer: nn.Adam | None = None) -> Checkpoint:
        tensors = dict(self.store.params)
        if optimizer is not None:
            tensors.update(optimizer.state_tensors())
        hyper = asdict(self.config)
        hyper["unit_kind"] = self.unit_kind.value
        return Checkpoint(
            kind=self.KIND,
            hyper=hyper,
            tensors=tensors,
            seed=self.config.seed,
            step=self.store.step,
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "Summarizer":
        if ckpt.kind != cls.KIND:
            raise nn.CheckpointError(
                f"checkpoint kind {ckpt.kind!r}, expected {cls.KIND!r}"
            )
        hyper = dict(ckpt.hyper)
        unit_kind = UnitKind(hyper.pop("unit_kind"))
        model = cls(SummarizerConfig(**hyper), unit_kind)
        for name, param in model.store.params.items():
            if name not in ckpt.tensors:
                raise nn.CheckpointError(f"checkpoint missing tensor {name!r}")
            if ckpt.tensors[name].shape != param.shape:
                raise nn.CheckpointError(
                    f"tensor {name!r} shape {ckpt.tensors[name].shape}, "
                    f"expected {param.shape}"
                )
            param[...] = ckpt.tensors[name]
        model.store.step = ckpt.step
        return model


@dataclass(frozen=True)
class SummaryResult:
    case_id: str
    selected: tuple[tuple[int, int], ...]  # (sentence_index, unit_index)
    summary_text: str
    summary_tokens: tuple[str, ...]


def budget_select(order: list[int], char_lengths, budget_chars: float, mode: str = "keep") -> list[int]:
    """Select a prefix of `order` under the character budget.

    keep: the unit that first makes the running total exceed the budget is
    still selected, then selection stops.  drop: that unit is skipped and
    selection stops.
    """
    if mode not in ("keep", "drop"):
        raise ValueError(f"unknown budget mode {mode!r}")
    selected: list[int] = []
    cum = 0
    for i in order:
        if mode == "drop" and cum + char_lengths[i] > budget_chars:
            break
        selected.append(i)
        cum += char_lengths[i]
        if cum > budget_chars:
            break
    return selected


def summarize(
    doc: DocumentExample,
    model: Summarizer | Checkpoint,
    budget_chars: float = 1200,
    mode: str = "keep",
    threshold: float | None = None,
) -> SummaryResult:
    """Rank units by probability and select under the character budget.

    Ties rank in document order.  With `threshold` set, selection is by
    probability cutoff instead of the budget.
    """
    if isinstance(model, Checkpoint):
        model = Summarizer.from_checkpoint(model)
    probs, unit_idx = model.predict_probs(doc)
    if threshold is not None:
        selected = [i for i, p in zip(unit_idx, probs) if p >= threshold]
    else:
        order = sorted(
            range(len(unit_idx)),
            key=lambda k: (
                -probs[k],
                doc.units[unit_idx[k]].sentence_index,
                doc.units[unit_idx[k]].unit_index,
            ),
        )
        chosen = budget_select(
            order, [doc.unit_char_lengths[unit_idx[k]] for k in range(len(unit_idx))],
            budget_chars, mode,
        )
        selected = [unit_idx[k] for k in chosen]
    selected.sort(
        key=lambda i: (doc.units[i].sentence_index, doc.units[i].unit_index)
    )
    texts = [doc.unit_texts[i].strip() for i in selected]
    tokens: list[str] = []
    for i in selected:
        unit = doc.units[i]
        tokens.extend(
            doc.sentences[unit.sentence_index][unit.token_start:unit.token_end]
        )
    return SummaryResult(
        case_id=doc.case_id,
        selected=tuple(
            (doc.units[i].sentence_index, doc.units[i].unit_index) for i in selected
        ),
        summary_text=" ".join(texts),
        summary_tokens=tuple(tokens),
    )


@dataclass
class SummarizerHistory:
    epoch_losses: list[float] = field(default_factory=list)
    dev_rouge1: list[float] = field(default_factory=list)
    best_epoch: int = -1


def dev_rouge1_f1(model: Summarizer, docs: list[DocumentExample], budget: float) -> float:
    scores = []
    for doc in docs:
        if doc.reference_sentences is None:
            raise ValueError(f"{doc.case_id}: dev document lacks reference")
        result = summarize(doc, model, budget_chars=budget)
        ref_tokens = [t for sent in doc.reference_sentences for t in sent]
        scores.append(rouge_n(list(result.summary_tokens), ref_tokens, 1).f1)
    return float(np.mean(scores)) if scores else 0.0


def summarizer_train(
    train_docs: list[DocumentExample],
    dev_docs: list[DocumentExample],
    kind: UnitKind,
    config: SummarizerConfig = SummarizerConfig(),
    budget_chars: float = 1200,
) -> tuple[Summarizer, SummarizerHistory]:
    """Seeded BCE training; returns the best-dev-ROUGE model state."""
    if not train_docs:
        raise ValueError("empty training corpus")
    for doc in train_docs + dev_docs:
        if doc.kind is not kind:
            raise ValueError(f"{doc.case_id}: kind {doc.kind} != {kind}")
    model = Summarizer(config, kind)
    optimizer = nn.Adam(model.store, nn.AdamConfig(lr=config.lr))
    history = SummarizerHistory()
    best_score = -1.0
    best_params = None
    best_step = model.store.step
    for epoch in range(config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        order = rng.permutation(len(train_docs))
        epoch_loss = 0.0
        for i in order:
            epoch_loss += nn.train_step(model, [train_docs[i]], optimizer)
        history.epoch_losses.append(epoch_loss / len(order))
        if dev_docs:
            score = dev_rouge1_f1(model, dev_docs, budget_chars)
            history.dev_rouge1.append(score)
            if score > best_score:
                best_score = score
                best_params = {k: v.copy() for k, v in model.store.params.items()}
                best_step = model.store.step
                history.best_epoch = epoch
        else:
            # without a dev set, the final epoch is the returned model
            history.dev_rouge1.append(0.0)
            history.best_epoch = epoch
    if best_params is not None:
        for k, v in best_params.items():
            model.store.params[k][...] = v
        model.store.step = best_step
    return model, history
