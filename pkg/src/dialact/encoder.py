"""Hierarchical utterance encoding with memory attention.

Pipeline per conversation batch (equal utterance counts, token sequences
padded to the batch maximum):

1. token features: word row + char-CNN over characters + POS/NER rows,
   concatenated;
2. word-level BiGRU whose two final states form the utterance vector u_j;
3. conversation-level BiGRU over u_1..u_n combined through a tanh layer
   into contextual keys h_j;
4. memory attention p[j, i] = softmax_i(u_j . h_i), weighted sum over the
   utterance memory, residual hop u1_j = o_j + u_j (default one hop).

Padding rows of every embedding table stay identically zero: the rows are
initialized to zero and their gradients are masked by the registry.
Padded token positions are kept out of the recurrences with freeze masks,
and the backward direction simply consumes the padded sequence from the
right, so the state only starts moving at the last real token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .corpus import PAD_ID

GRU_GATES = ("r", "z", "h")
CHAR_WIDTHS = (2, 3, 4)


def split_filter_counts(total, widths=CHAR_WIDTHS):
    """Distribute filter outputs across widths, earlier widths get remainders."""
    base, rem = divmod(total, len(widths))
    return tuple(base + (1 if i < rem else 0) for i in range(len(widths)))


# ---------------------------------------------------------------------------
# batch preparation
# ---------------------------------------------------------------------------


@dataclass
class BatchArrays:
    """Integer id arrays for one bucket of equal-length conversations."""

    conv_ids: list
    word: np.ndarray  # (B, n, T)
    char: np.ndarray  # (B, n, T, L)
    pos: np.ndarray  # (B, n, T)
    ner: np.ndarray  # (B, n, T)
    tok_mask: np.ndarray  # (B, n, T) float, 1 on real tokens
    gold: np.ndarray | None  # (B, n) act ids, None when any act missing

    @property
    def size(self):
        return self.word.shape[0]

    @property
    def n_utts(self):
        return self.word.shape[1]


def prepare_batch(conversations, vocab, min_char_len=4):
    """Map conversations with equal utterance counts onto padded id arrays."""
    lengths = {len(c) for c in conversations}
    if len(lengths) != 1:
        raise ValueError(f"batch mixes conversation lengths {sorted(lengths)}")
    n = lengths.pop()
    b = len(conversations)
    t_max = max(len(u.tokens) for c in conversations for u in c.utterances)
    l_max = max(
        min_char_len,
        max(len(tok.chars) for c in conversations for u in c.utterances for tok in u.tokens),
    )
    word = np.full((b, n, t_max), PAD_ID, dtype=np.int64)
    char = np.full((b, n, t_max, l_max), PAD_ID, dtype=np.int64)
    pos = np.full((b, n, t_max), PAD_ID, dtype=np.int64)
    ner = np.full((b, n, t_max), PAD_ID, dtype=np.int64)
    mask = np.zeros((b, n, t_max))
    labeled = all(u.act is not None for c in conversations for u in c.utterances)
    gold = np.zeros((b, n), dtype=np.int64) if labeled else None
    for i, conv in enumerate(conversations):
        for j, utt in enumerate(conv.utterances):
            if gold is not None:
                gold[i, j] = vocab.act_id(utt.act)
            for t, tok in enumerate(utt.tokens):
                word[i, j, t] = vocab.word_id(tok.surface)
                pos[i, j, t] = vocab.pos_id(tok.pos)
                ner[i, j, t] = vocab.ner_id(tok.ner)
                mask[i, j, t] = 1.0
                for l, ch in enumerate(tok.chars):
                    char[i, j, t, l] = vocab.char_id(ch)
    return BatchArrays(
        conv_ids=[c.id for c in conversations],
        word=word,
        char=char,
        pos=pos,
        ner=ner,
        tok_mask=mask,
        gold=gold,
    )


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------


def init_gru(registry, prefix, input_dim, hidden_dim, rng, scale=0.08):
    """Reset/update/candidate gates; weights uniform(+-scale), biases zero."""
    for gate in GRU_GATES:
        registry.add(f"{prefix}.w_{gate}", rng.uniform(-scale, scale, (input_dim, hidden_dim)))
        registry.add(f"{prefix}.u_{gate}", rng.uniform(-scale, scale, (hidden_dim, hidden_dim)))
        registry.add(f"{prefix}.b_{gate}", np.zeros(hidden_dim))


def gru_params(registry, prefix):
    return {
        key: registry[f"{prefix}.{key}"]
        for key in (f"{kind}_{gate}" for gate in GRU_GATES for kind in ("w", "u", "b"))
    }


def gru_step(params, x, h):
    """One gated update; h' = z * h + (1 - z) * candidate."""
    r = ag.sigmoid(ag.add(ag.add(ag.matmul(x, params["w_r"]), ag.matmul(h, params["u_r"])), params["b_r"]))
    z = ag.sigmoid(ag.add(ag.add(ag.matmul(x, params["w_z"]), ag.matmul(h, params["u_z"])), params["b_z"]))
    cand = ag.tanh(
        ag.add(ag.add(ag.matmul(x, params["w_h"]), ag.matmul(ag.mul(r, h), params["u_h"])), params["b_h"])
    )
    return ag.add(ag.mul(z, h), ag.mul(ag.sub(1.0, z), cand))


def gru_sequence(params, xs, hidden_dim, mask=None, reverse=False, collect=False):
    """Run a GRU over axis 1 of ``xs`` (B, T, in).

    With a mask, padded steps freeze the state, so the final state of a
    right-padded row is the state at its last real token regardless of
    direction (the reverse pass idles over the padding first). Returns
    (final state (B, hidden), per-position states or None).
    """
    b, t_len, _ = xs.shape
    h = ag.Tensor(np.zeros((b, hidden_dim)))
    states = [None] * t_len if collect else None
    order = range(t_len - 1, -1, -1) if reverse else range(t_len)
    for t in order:
        h_new = gru_step(params, ag.select(xs, t, axis=1), h)
        if mask is not None:
            m = mask[:, t : t + 1]
            h = ag.add(ag.mul(h_new, m), ag.mul(h, 1.0 - m))
        else:
            h = h_new
        if collect:
            states[t] = h
    return h, states


# ---------------------------------------------------------------------------
# token embedding
# ---------------------------------------------------------------------------


def char_cnn(char_ids, char_table, filters):
    """Character convolutions with max-over-time pooling.

    char_ids: (N, L) ids; filters: {width: (weight, bias)}. Output
    (N, total_filters), widths concatenated in ascending order.
    """
    emb = ag.gather(char_table, char_ids)
    pooled = [
        ag.max_over_time(ag.conv1d(emb, w, b, width))
        for width, (w, b) in sorted(filters.items())
    ]
    return ag.concat(pooled, axis=1)


def embed_tokens(batch, params, train=False, rng=None, dropout_rate=0.0):
    """Token feature tensor (B*n, T, E) for a prepared batch."""
    b, n, t_len = batch.word.shape
    flat = b * n
    word = ag.gather(params["emb_word"], batch.word.reshape(flat, t_len))
    chars = char_cnn(
        batch.char.reshape(flat * t_len, -1), params["emb_char"], params["cnn_filters"]
    )
    chars = ag.reshape(chars, (flat, t_len, -1))
    pos = ag.gather(params["emb_pos"], batch.pos.reshape(flat, t_len))
    ner = ag.gather(params["emb_ner"], batch.ner.reshape(flat, t_len))
    e = ag.concat([word, chars, pos, ner], axis=2)
    return ag.dropout(e, dropout_rate, rng, train)


def encode_utterances(embedded, tok_mask, fwd_params, bwd_params, hidden_dim):
    """Utterance vectors (N, 2*hidden) from final BiGRU states."""
    mask = tok_mask.reshape(embedded.shape[0], -1)
    h_fwd, _ = gru_sequence(fwd_params, embedded, hidden_dim, mask=mask)
    h_bwd, _ = gru_sequence(bwd_params, embedded, hidden_dim, mask=mask, reverse=True)
    return ag.concat([h_fwd, h_bwd], axis=1)


def encode_context(us, fwd_params, bwd_params, combine, hidden_dim):
    """Contextual keys h_j = tanh(Wf fwd_j + Wb bwd_j + b) over (B, n, d)."""
    b, n, _ = us.shape
    _, fwd_states = gru_sequence(fwd_params, us, hidden_dim, collect=True)
    _, bwd_states = gru_sequence(bwd_params, us, hidden_dim, reverse=True, collect=True)

    def stacked(states):
        rows = [ag.reshape(s, (b, 1, hidden_dim)) for s in states]
        return rows[0] if n == 1 else ag.concat(rows, axis=1)

    fwd = ag.matmul(stacked(fwd_states), combine["w_fwd"])
    bwd = ag.matmul(stacked(bwd_states), combine["w_bwd"])
    return ag.tanh(ag.add(ag.add(fwd, bwd), combine["bias"]))


def memory_layer(us, hs, hops=1):
    """Attention over the utterance memory plus residual hop stacking.

    us, hs: (B, n, d). Returns (attention (B, n, n) from the last hop,
    last hop outputs o (B, n, d), finals (B, n, d)). Scores are query
    utterance against contextual key; values are the current-hop memory.
    """
    cur = us
    attention = out = None
    for _ in range(hops):
        scores = ag.matmul(cur, ag.transpose_last(hs))
        attention = ag.softmax(scores, axis=2)
        out = ag.matmul(attention, cur)
        cur = ag.add(out, cur)
    return attention, out, cur


@dataclass
class EncodedConversations:
    """Batched encoder outputs; all fields (B, n, ...) tensors."""

    original: ag.Tensor  # u_j as fed to the memory layer
    contextual: ag.Tensor  # h_j
    attention: ag.Tensor  # (B, n, n), rows sum to 1
    memory_out: ag.Tensor  # o_j of the last hop
    final: ag.Tensor  # u1_j = o_j + u_j


def encode_batch(batch, params, cfg, train=False, rng=None):
    """Full hierarchy over one prepared batch; see the module docstring."""
    b, n, _ = batch.word.shape
    rate = cfg.dropout if train else 0.0
    e = embed_tokens(batch, params, train=train, rng=rng, dropout_rate=rate)
    us_flat = encode_utterances(
        e, batch.tok_mask, params["utt_fwd"], params["utt_bwd"], cfg.d_u
    )
    us = ag.reshape(us_flat, (b, n, 2 * cfg.d_u))
    us = ag.dropout(us, rate, rng, train)
    hs = encode_context(us, params["ctx_fwd"], params["ctx_bwd"], params["ctx_combine"], cfg.d_u)
    attention, out, finals = memory_layer(us, hs, hops=cfg.hops)
    return EncodedConversations(
        original=us, contextual=hs, attention=attention, memory_out=out, final=finals
    )


# ---------------------------------------------------------------------------
# single-conversation wrappers
# ---------------------------------------------------------------------------


def embed_token(token, vocab, params, min_char_len=4):
    """Feature vector e_k for one token (word + char-CNN + POS + NER parts)."""
    l_max = max(min_char_len, len(token.chars))
    char_ids = np.full((1, l_max), PAD_ID, dtype=np.int64)
    for i, ch in enumerate(token.chars):
        char_ids[0, i] = vocab.char_id(ch)
    word = ag.gather(params["emb_word"], np.array([vocab.word_id(token.surface)]))
    chars = char_cnn(char_ids, params["emb_char"], params["cnn_filters"])
    pos = ag.gather(params["emb_pos"], np.array([vocab.pos_id(token.pos)]))
    ner = ag.gather(params["emb_ner"], np.array([vocab.ner_id(token.ner)]))
    return ag.reshape(ag.concat([word, chars, pos, ner], axis=1), (-1,))


def encode_utterance(embedded, fwd_params, bwd_params, hidden_dim):
    """One utterance (T, E) -> u in R^{2*hidden}."""
    t_len, e_dim = embedded.shape
    seq = ag.reshape(embedded, (1, t_len, e_dim))
    mask = np.ones((1, t_len))
    return ag.reshape(encode_utterances(seq, mask, fwd_params, bwd_params, hidden_dim), (-1,))


def encode_context_single(us, fwd_params, bwd_params, combine, hidden_dim):
    """One conversation (n, d) -> contextual keys (n, d)."""
    n, d = us.shape
    hs = encode_context(ag.reshape(us, (1, n, d)), fwd_params, bwd_params, combine, hidden_dim)
    return ag.reshape(hs, (n, d))


def memory_layer_single(us, hs, hops=1):
    """One conversation: (attention (n, n), out (n, d), finals (n, d))."""
    n, d = us.shape
    attention, out, finals = memory_layer(
        ag.reshape(us, (1, n, d)), ag.reshape(hs, (1, n, d)), hops=hops
    )
    return (
        ag.reshape(attention, (n, n)),
        ag.reshape(out, (n, d)),
        ag.reshape(finals, (n, d)),
    )
