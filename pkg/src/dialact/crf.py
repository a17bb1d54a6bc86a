"""Linear-chain scoring, exact inference, and the latent-selection layer.

Two routes coexist deliberately:

* pure-numpy inference over a frozen :class:`PotentialTable`
  (``log_partition``, ``forward_backward``, ``viterbi_decode``,
  ``sequence_log_prob``) used at decode time and by the enumeration
  oracles, and
* tape-recorded recursions (``chain_log_partition``, ``chain_marginals``)
  used during training, so the log-partition gradient produced by
  reverse-mode differentiation can be cross-checked against the
  forward-backward marginals computed independently here.

All recursions run in log space; overflow is impossible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag


def _logsumexp(a, axis):
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.exp(a - m).sum(axis=axis))


@dataclass(frozen=True)
class PotentialTable:
    """Chain scores: per-position unary (n x Y), pairwise transition (Y x Y).

    Optional start/stop vectors add boundary scores at the first and last
    positions. All entries must be finite.
    """

    unary: np.ndarray
    transition: np.ndarray
    start: np.ndarray | None = None
    stop: np.ndarray | None = None

    def __post_init__(self):
        unary = np.asarray(self.unary, dtype=np.float64)
        transition = np.asarray(self.transition, dtype=np.float64)
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "transition", transition)
        if unary.ndim != 2 or unary.shape[0] < 1:
            raise ValueError(f"unary must be (n, Y) with n >= 1, got {unary.shape}")
        n_labels = unary.shape[1]
        if transition.shape != (n_labels, n_labels):
            raise ValueError(
                f"transition shape {transition.shape} does not match {n_labels} labels"
            )
        for name in ("start", "stop"):
            vec = getattr(self, name)
            if vec is not None:
                vec = np.asarray(vec, dtype=np.float64)
                object.__setattr__(self, name, vec)
                if vec.shape != (n_labels,):
                    raise ValueError(f"{name} must have shape ({n_labels},), got {vec.shape}")
        for arr in (unary, transition, self.start, self.stop):
            if arr is not None and not np.isfinite(arr).all():
                raise ValueError("potentials must be finite")

    @property
    def n(self):
        return self.unary.shape[0]

    @property
    def n_labels(self):
        return self.unary.shape[1]


@dataclass(frozen=True)
class MarginalSet:
    """Exact chain marginals: node (n x Y), edge ((n-1) x Y x Y), log-partition."""

    node: np.ndarray
    edge: np.ndarray
    logZ: float


def _alphas(pot):
    n, k = pot.unary.shape
    alpha = np.empty((n, k))
    alpha[0] = pot.unary[0] + (pot.start if pot.start is not None else 0.0)
    for t in range(1, n):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + pot.transition, axis=0) + pot.unary[t]
    return alpha


def _betas(pot):
    n, k = pot.unary.shape
    beta = np.empty((n, k))
    beta[n - 1] = pot.stop if pot.stop is not None else 0.0
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(pot.transition + (pot.unary[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(pot):
    """log of the sum of exp(score) over all |Y|^n label sequences."""
    alpha = _alphas(pot)
    last = alpha[-1] + (pot.stop if pot.stop is not None else 0.0)
    return float(_logsumexp(last, axis=0))


def forward_backward(pot):
    """Node and edge marginals of the chain distribution, plus logZ."""
    alpha = _alphas(pot)
    beta = _betas(pot)
    logz = float(_logsumexp(alpha[-1] + beta[-1], axis=0))
    node = np.exp(alpha + beta - logz)
    n, k = pot.unary.shape
    edge = np.empty((n - 1, k, k))
    for t in range(n - 1):
        edge[t] = np.exp(
            alpha[t][:, None]
            + pot.transition
            + (pot.unary[t + 1] + beta[t + 1])[None, :]
            - logz
        )
    return MarginalSet(node=node, edge=edge, logZ=logz)


def sequence_score(pot, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (pot.n,):
        raise ValueError(f"label sequence length {labels.shape} does not match n={pot.n}")
    if labels.size and (labels.min() < 0 or labels.max() >= pot.n_labels):
        raise IndexError(f"label out of range [0, {pot.n_labels})")
    score = float(pot.unary[np.arange(pot.n), labels].sum())
    score += float(pot.transition[labels[:-1], labels[1:]].sum())
    if pot.start is not None:
        score += float(pot.start[labels[0]])
    if pot.stop is not None:
        score += float(pot.stop[labels[-1]])
    return score


def sequence_log_prob(pot, labels):
    """log p(labels) = score(labels) - logZ; never positive."""
    return sequence_score(pot, labels) - log_partition(pot)


def viterbi_decode(pot):
    """Exact argmax sequence via the score/backpointer tables.

    Ties break toward the lowest label id (argmax takes the first maximum),
    keeping decodes deterministic across platforms.
    """
    n, k = pot.unary.shape
    score = np.empty((n, k))
    back = np.zeros((n, k), dtype=np.int64)
    score[0] = pot.unary[0] + (pot.start if pot.start is not None else 0.0)
    for t in range(1, n):
        cand = score[t - 1][:, None] + pot.transition  # (from, to)
        back[t] = np.argmax(cand, axis=0)
        score[t] = cand[back[t], np.arange(k)] + pot.unary[t]
    last = score[n - 1] + (pot.stop if pot.stop is not None else 0.0)
    best_last = int(np.argmax(last))
    path = [best_last]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(last[best_last])


# ---------------------------------------------------------------------------
# tape-recorded chain recursions (training route)
# ---------------------------------------------------------------------------


def chain_log_partition(unary, transition, start=None, stop=None):
    """Differentiable logZ for a batch of equal-length chains.

    unary: tensor (B, n, Y); transition: tensor (Y, Y); returns (B,).
    """
    b, n, k = unary.shape
    alpha = ag.select(unary, 0, axis=1)
    if start is not None:
        alpha = ag.add(alpha, start)
    for t in range(1, n):
        prev = ag.reshape(alpha, (b, k, 1))
        alpha = ag.add(ag.logsumexp(ag.add(prev, transition), axis=1), ag.select(unary, t, axis=1))
    if stop is not None:
        alpha = ag.add(alpha, stop)
    return ag.logsumexp(alpha, axis=1)


def chain_gold_score(unary, transition, gold, start=None, stop=None):
    """Differentiable score of the gold paths; gold is an int array (B, n)."""
    gold = np.asarray(gold, dtype=np.int64)
    b, n, k = unary.shape
    if gold.shape != (b, n):
        raise ValueError(f"gold shape {gold.shape} does not match unary {unary.shape}")
    if gold.min() < 0 or gold.max() >= k:
        raise IndexError(f"gold label out of range [0, {k})")
    score = ag.reduce_sum(ag.pick(unary, gold), axis=1)
    if n > 1:
        score = ag.add(score, ag.reduce_sum(ag.gather_pairs(transition, gold[:, :-1], gold[:, 1:]), axis=1))
    if start is not None:
        score = ag.add(score, ag.gather(start, gold[:, 0]))
    if stop is not None:
        score = ag.add(score, ag.gather(stop, gold[:, -1]))
    return score


def chain_marginals(unary, transition):
    """Differentiable node marginals (B, n, Y) and logZ (B,) of a chain batch.

    Both forward and backward recursions stay on the tape, so downstream
    expectations (the selection context) backpropagate through the
    marginals themselves.
    """
    b, n, k = unary.shape
    alphas = [ag.select(unary, 0, axis=1)]
    for t in range(1, n):
        prev = ag.reshape(alphas[-1], (b, k, 1))
        alphas.append(
            ag.add(ag.logsumexp(ag.add(prev, transition), axis=1), ag.select(unary, t, axis=1))
        )
    betas = [None] * n
    betas[n - 1] = ag.Tensor(np.zeros((b, k)))
    for t in range(n - 2, -1, -1):
        nxt = ag.add(ag.select(unary, t + 1, axis=1), betas[t + 1])
        betas[t] = ag.logsumexp(ag.add(transition, ag.reshape(nxt, (b, 1, k))), axis=2)
    logz = ag.logsumexp(alphas[-1], axis=1)
    rows = [
        ag.reshape(ag.add(alphas[t], betas[t]), (b, 1, k)) for t in range(n)
    ]
    stacked = rows[0] if n == 1 else ag.concat(rows, axis=1)
    return ag.exp(ag.sub(stacked, ag.reshape(logz, (b, 1, 1)))), logz


# ---------------------------------------------------------------------------
# latent-selection attention
# ---------------------------------------------------------------------------


class SelectionAttention:
    """Binary-chain selection over positions and its expectation context.

    ``gamma[b, i]`` is the marginal probability that position i is
    selected; ``context[b] = sum_i gamma[b, i] * finals[b, i]``. Fields are
    tensors while a tape is live; ``.data`` gives the numpy view.
    """

    def __init__(self, unary, pairwise, gamma, context):
        self.unary = unary
        self.pairwise = pairwise
        self.gamma = gamma
        self.context = context


def selection_attention(finals, params):
    """Soft selection over utterance positions via a 2-state chain.

    finals: tensor (B, n, d). params: dict with ``sel_w`` (d, a),
    ``sel_b`` (a,), ``sel_v`` (a, 1), ``sel_trans`` (2, 2). The
    not-selected state scores 0 at every position.
    """
    b, n, d = finals.shape
    hidden = ag.tanh(ag.add(ag.matmul(finals, params["sel_w"]), params["sel_b"]))
    score_sel = ag.matmul(hidden, params["sel_v"])  # (B, n, 1)
    unary = ag.concat([ag.Tensor(np.zeros((b, n, 1))), score_sel], axis=2)
    marg, _ = chain_marginals(unary, params["sel_trans"])
    gamma = ag.select(marg, 1, axis=2)  # (B, n)
    context = ag.reduce_sum(ag.mul(ag.reshape(gamma, (b, n, 1)), finals), axis=1)
    return SelectionAttention(
        unary=unary, pairwise=params["sel_trans"], gamma=gamma, context=context
    )


# ---------------------------------------------------------------------------
# label-chain potentials
# ---------------------------------------------------------------------------


def compute_potentials(finals, context, params):
    """Unary and transition scores for the label chain, on the tape.

    unary[b, i, y] combines an act-embedding dot product with a one-hidden-
    layer emission over the utterance vector and the selection context:

        finals[b,i] . act_emb[y]
        + w_out[:, y] . tanh(finals[b,i] @ emit_wu + context[b] @ emit_wc + emit_b)

    params: ``act_emb`` (Y, d), ``emit_wu`` (d, h), ``emit_wc`` (d, h),
    ``emit_b`` (h,), ``emit_wout`` (h, Y), ``trans`` (Y, Y), and optionally
    ``start`` / ``stop`` (Y,). Returns (unary (B, n, Y), transition).
    """
    b, n, d = finals.shape
    act_dot = ag.matmul(finals, ag.transpose_last(params["act_emb"]))
    ctx_part = ag.reshape(ag.matmul(context, params["emit_wc"]), (b, 1, -1))
    hidden = ag.tanh(
        ag.add(ag.add(ag.matmul(finals, params["emit_wu"]), ctx_part), params["emit_b"])
    )
    unary = ag.add(act_dot, ag.matmul(hidden, params["emit_wout"]))
    return unary, params["trans"]


def freeze_potentials(unary, transition, start=None, stop=None):
    """Materialize per-conversation PotentialTables from batched tensors."""
    unary_data = unary.data if isinstance(unary, ag.Tensor) else np.asarray(unary)
    trans_data = transition.data if isinstance(transition, ag.Tensor) else np.asarray(transition)
    start_data = None if start is None else (start.data if isinstance(start, ag.Tensor) else start)
    stop_data = None if stop is None else (stop.data if isinstance(stop, ag.Tensor) else stop)
    return [
        PotentialTable(
            unary=unary_data[i].copy(),
            transition=trans_data.copy(),
            start=None if start_data is None else start_data.copy(),
            stop=None if stop_data is None else stop_data.copy(),
        )
        for i in range(unary_data.shape[0])
    ]
