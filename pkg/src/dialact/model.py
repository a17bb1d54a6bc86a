"""The full network: encoder, selection attention, and label chain.

Owns the parameter registry, the loss graph for a batch of conversations,
decoding, and checkpoint round-trips. Conversations of mixed lengths are
grouped internally; each equal-length group runs as one batched graph.

A checkpoint is the binary tensor container written by
:mod:`dialact.autograd` plus a ``<path>.meta.json`` sidecar carrying the
vocabulary and configuration needed to rebuild the model around the
tensors.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from . import autograd as ag
from . import crf, encoder
from .corpus import PAD_ID, TranscriptError, Vocab

META_VERSION = 1


class DialogueActModel:
    """Hierarchical encoder + selection attention + label chain."""

    def __init__(self, vocab, cfg, rng=None, word_embeddings=None):
        if cfg.d != 2 * cfg.d_u:
            raise ValueError(f"utterance dim d={cfg.d} must equal 2*d_u={2 * cfg.d_u}")
        self.vocab = vocab
        self.cfg = cfg
        self.n_acts = len(vocab.act_index)
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.registry = ag.ParamRegistry()
        self._init_params(rng, word_embeddings)

    # -- parameters ---------------------------------------------------------

    def _init_params(self, rng, word_embeddings):
        reg, cfg = self.registry, self.cfg
        scale = 0.08

        def uniform(shape):
            return rng.uniform(-scale, scale, shape)

        if word_embeddings is not None:
            word = np.array(word_embeddings, dtype=np.float64)
            if word.shape != (len(self.vocab.word_index), cfg.word_dim):
                raise ValueError(
                    f"word embedding shape {word.shape} does not match vocab/config "
                    f"({len(self.vocab.word_index)}, {cfg.word_dim})"
                )
        else:
            word = rng.uniform(-0.05, 0.05, (len(self.vocab.word_index), cfg.word_dim))
        word[PAD_ID] = 0.0
        reg.add("emb.word", word, frozen_rows=[PAD_ID])

        char = rng.uniform(-0.05, 0.05, (len(self.vocab.char_index), cfg.d_c))
        char[PAD_ID] = 0.0
        reg.add("emb.char", char, frozen_rows=[PAD_ID])
        for name, index, dim in (
            ("emb.pos", self.vocab.pos_index, cfg.d_p),
            ("emb.ner", self.vocab.ner_index, cfg.d_n),
        ):
            table = rng.uniform(-0.05, 0.05, (len(index), dim))
            table[PAD_ID] = 0.0
            reg.add(name, table, frozen_rows=[PAD_ID])

        counts = encoder.split_filter_counts(cfg.char_out)
        for width, count in zip(encoder.CHAR_WIDTHS, counts):
            reg.add(f"cnn.w{width}", uniform((width * cfg.d_c, count)))
            reg.add(f"cnn.b{width}", np.zeros(count))

        token_dim = cfg.word_dim + cfg.char_out + cfg.d_p + cfg.d_n
        encoder.init_gru(reg, "utt_fwd", token_dim, cfg.d_u, rng, scale)
        encoder.init_gru(reg, "utt_bwd", token_dim, cfg.d_u, rng, scale)
        encoder.init_gru(reg, "ctx_fwd", cfg.d, cfg.d_u, rng, scale)
        encoder.init_gru(reg, "ctx_bwd", cfg.d, cfg.d_u, rng, scale)
        reg.add("ctx.w_fwd", uniform((cfg.d_u, cfg.d)))
        reg.add("ctx.w_bwd", uniform((cfg.d_u, cfg.d)))
        reg.add("ctx.b", np.zeros(cfg.d))

        reg.add("sel.w", uniform((cfg.d, cfg.attn_dim)))
        reg.add("sel.b", np.zeros(cfg.attn_dim))
        reg.add("sel.v", uniform((cfg.attn_dim, 1)))
        reg.add("sel.trans", np.zeros((2, 2)))

        reg.add("crf.act_emb", uniform((self.n_acts, cfg.d)))
        reg.add("crf.emit_wu", uniform((cfg.d, cfg.emit_dim)))
        reg.add("crf.emit_wc", uniform((cfg.d, cfg.emit_dim)))
        reg.add("crf.emit_b", np.zeros(cfg.emit_dim))
        reg.add("crf.emit_wout", uniform((cfg.emit_dim, self.n_acts)))
        reg.add("crf.trans", np.zeros((self.n_acts, self.n_acts)))
        if cfg.boundary_potentials:
            reg.add("crf.start", np.zeros(self.n_acts))
            reg.add("crf.stop", np.zeros(self.n_acts))

    def encoder_params(self):
        reg = self.registry
        return {
            "emb_word": reg["emb.word"],
            "emb_char": reg["emb.char"],
            "emb_pos": reg["emb.pos"],
            "emb_ner": reg["emb.ner"],
            "cnn_filters": {
                width: (reg[f"cnn.w{width}"], reg[f"cnn.b{width}"])
                for width in encoder.CHAR_WIDTHS
            },
            "utt_fwd": encoder.gru_params(reg, "utt_fwd"),
            "utt_bwd": encoder.gru_params(reg, "utt_bwd"),
            "ctx_fwd": encoder.gru_params(reg, "ctx_fwd"),
            "ctx_bwd": encoder.gru_params(reg, "ctx_bwd"),
            "ctx_combine": {
                "w_fwd": reg["ctx.w_fwd"],
                "w_bwd": reg["ctx.w_bwd"],
                "bias": reg["ctx.b"],
            },
        }

    def selection_params(self):
        reg = self.registry
        return {
            "sel_w": reg["sel.w"],
            "sel_b": reg["sel.b"],
            "sel_v": reg["sel.v"],
            "sel_trans": reg["sel.trans"],
        }

    def crf_params(self):
        reg = self.registry
        return {
            "act_emb": reg["crf.act_emb"],
            "emit_wu": reg["crf.emit_wu"],
            "emit_wc": reg["crf.emit_wc"],
            "emit_b": reg["crf.emit_b"],
            "emit_wout": reg["crf.emit_wout"],
            "trans": reg["crf.trans"],
        }

    def boundary(self):
        reg = self.registry
        if "crf.start" in reg:
            return reg["crf.start"], reg["crf.stop"]
        return None, None

    # -- forward ------------------------------------------------------------

    def forward_group(self, batch, train=False, rng=None):
        """Run one equal-length batch through to chain potentials.

        Returns (unary (B, n, Y) tensor, transition tensor, selection,
        encoded) where selection holds the gamma/context tensors.
        """
        enc = encoder.encode_batch(batch, self.encoder_params(), self.cfg, train=train, rng=rng)
        rate = self.cfg.dropout if train else 0.0
        finals = ag.dropout(enc.final, rate, rng, train)
        selection = crf.selection_attention(finals, self.selection_params())
        unary, trans = crf.compute_potentials(finals, selection.context, self.crf_params())
        return unary, trans, selection, enc

    def loss(self, conversations, train=True, rng=None):
        """Negative log-likelihood of the gold act sequences plus L2.

        All conversations must be fully labeled. Mixed lengths are fine;
        each length group contributes one batched chain NLL term.
        """
        if not conversations:
            raise ValueError("loss needs at least one conversation")
        for conv in conversations:
            if not conv.fully_labeled():
                raise TranscriptError(f"conversation {conv.id!r} has unlabeled utterances")
        if train and rng is None:
            raise ValueError("training-mode loss needs an rng for dropout")
        start, stop = self.boundary()
        nll_terms = []
        for group in group_by_length(conversations):
            batch = encoder.prepare_batch(group, self.vocab)
            unary, trans, _, _ = self.forward_group(batch, train=train, rng=rng)
            logz = crf.chain_log_partition(unary, trans, start=start, stop=stop)
            gold = crf.chain_gold_score(unary, trans, batch.gold, start=start, stop=stop)
            nll_terms.append(ag.reduce_sum(ag.sub(logz, gold)))
        nll = nll_terms[0]
        for term in nll_terms[1:]:
            nll = ag.add(nll, term)
        if self.cfg.l2 > 0.0:
            penalty = None
            for name in self.registry.names():
                p = self.registry[name]
                term = ag.reduce_sum(ag.mul(p, p))
                penalty = term if penalty is None else ag.add(penalty, term)
            nll = ag.add(nll, ag.mul(penalty, self.cfg.l2))
        return nll

    # -- inference ----------------------------------------------------------

    def potential_tables(self, conversations):
        """Frozen per-conversation PotentialTables (no tape, no dropout)."""
        lengths = {len(c) for c in conversations}
        if len(lengths) != 1:
            raise ValueError("potential_tables needs equal-length conversations")
        batch = encoder.prepare_batch(conversations, self.vocab)
        unary, trans, selection, enc = self.forward_group(batch, train=False)
        start, stop = self.boundary()
        tables = crf.freeze_potentials(unary, trans, start=start, stop=stop)
        return tables, selection, enc

    def decode(self, conversations):
        """Viterbi act names per conversation, in input order."""
        order = {id(c): i for i, c in enumerate(conversations)}
        results = [None] * len(conversations)
        for group in group_by_length(conversations):
            tables, _, _ = self.potential_tables(group)
            for conv, pot in zip(group, tables):
                path, _ = crf.viterbi_decode(pot)
                results[order[id(conv)]] = [self.vocab.act_names[y] for y in path]
        return results

    def conversation_detail(self, conv):
        """Everything the attention export needs, as numpy arrays."""
        tables, selection, enc = self.potential_tables([conv])
        pot = tables[0]
        marginals = crf.forward_backward(pot)
        path, score = crf.viterbi_decode(pot)
        return {
            "potentials": pot,
            "marginals": marginals,
            "viterbi_path": path,
            "viterbi_score": score,
            "selection_gamma": selection.gamma.data[0].copy(),
            "memory_attention": enc.attention.data[0].copy(),
        }

    def accuracy(self, conversations):
        """Utterance-level decode accuracy against gold acts."""
        correct = total = 0
        for conv, pred in zip(conversations, self.decode(conversations)):
            for utt, p in zip(conv.utterances, pred):
                correct += int(utt.act == p)
                total += 1
        return correct / total if total else 0.0

    # -- persistence --------------------------------------------------------

    def save(self, path, state=None):
        """Write tensors (binary) plus the vocab/config sidecar."""
        ag.save_checkpoint(path, state if state is not None else self.registry.state_dict())
        meta = {
            "version": META_VERSION,
            "config": asdict(self.cfg),
            "vocab": self.vocab.to_json_obj(),
        }
        with open(meta_path(path), "w", encoding="utf-8") as f:
            json.dump(meta, f)

    @classmethod
    def load(cls, path):
        from .train import TrainConfig  # lazy: train builds on this module

        with open(meta_path(path), encoding="utf-8") as f:
            meta = json.load(f)
        if meta.get("version") != META_VERSION:
            raise ValueError(f"unsupported checkpoint meta version {meta.get('version')!r}")
        vocab = Vocab.from_json_obj(meta["vocab"])
        cfg = TrainConfig(**meta["config"])
        model = cls(vocab, cfg)
        state = ag.load_checkpoint(path)
        missing = set(model.registry.names()) ^ set(state)
        if missing:
            raise ValueError(f"checkpoint/vocab mismatch: unmatched tensors {sorted(missing)}")
        model.registry.load_state_dict(state)
        for name in model.registry.names():
            model.registry.ema[name] = model.registry[name].data.copy()
        return model


def meta_path(checkpoint_path):
    return f"{checkpoint_path}.meta.json"


def group_by_length(conversations):
    """Stable grouping by utterance count, in order of first appearance."""
    groups = {}
    for conv in conversations:
        groups.setdefault(len(conv), []).append(conv)
    return list(groups.values())
