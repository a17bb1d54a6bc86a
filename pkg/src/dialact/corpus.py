"""Transcript data model, JSONL ingestion, vocabulary, pretrained embeddings.

A transcript file is line-delimited JSON, one conversation per line:

    {"id": str, "utterances": [{"speaker": str, "tokens": [str],
                                "pos": [str]?, "ner": [str]?, "act": str?}]}

Tokens arrive pre-tokenized and pre-normalized. POS/NER columns are
optional; when absent they map to a dedicated ABSENT tag with its own
learned embedding. Acts are optional per utterance (absent means
unlabeled), but every utterance must carry one at training time.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD = "<pad>"
UNK = "<unk>"
ABSENT = "<absent>"

PAD_ID = 0
UNK_ID = 1
ABSENT_ID = 2  # pos/ner tables only


class TranscriptError(ValueError):
    """Malformed or invalid transcript content."""


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str | None = None
    ner: str | None = None
    chars: tuple = field(init=False)

    def __post_init__(self):
        if not self.surface:
            raise TranscriptError("token surface must be non-empty")
        object.__setattr__(self, "chars", tuple(self.surface))


@dataclass(frozen=True)
class Utterance:
    tokens: tuple
    speaker: str
    act: str | None = None

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise TranscriptError("utterance must contain at least one token")


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple

    def __post_init__(self):
        if len(self.utterances) == 0:
            raise TranscriptError(f"conversation {self.id!r} has no utterances")

    def __len__(self):
        return len(self.utterances)

    @property
    def acts(self):
        return [u.act for u in self.utterances]

    def fully_labeled(self):
        return all(u.act is not None for u in self.utterances)


def _utterance_from_obj(obj, conv_id, index):
    where = f"conversation {conv_id!r}, utterance {index}"
    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not tokens:
        raise TranscriptError(f"{where}: 'tokens' must be a non-empty list")
    pos = obj.get("pos")
    ner = obj.get("ner")
    for name, tags in (("pos", pos), ("ner", ner)):
        if tags is not None and len(tags) != len(tokens):
            raise TranscriptError(f"{where}: '{name}' length {len(tags)} != {len(tokens)} tokens")
    toks = tuple(
        Token(
            surface=str(t),
            pos=None if pos is None else str(pos[i]),
            ner=None if ner is None else str(ner[i]),
        )
        for i, t in enumerate(tokens)
    )
    speaker = str(obj.get("speaker", ""))
    act = obj.get("act")
    return Utterance(tokens=toks, speaker=speaker, act=None if act is None else str(act))


def parse_jsonl(path):
    """Read conversations in file order; raises with the 1-based line number."""
    conversations = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TranscriptError(f"{path}:{lineno}: malformed JSON ({e.msg})") from e
            try:
                conv_id = str(obj["id"])
                utts = obj["utterances"]
                if not isinstance(utts, list) or not utts:
                    raise TranscriptError("'utterances' must be a non-empty list")
                conversations.append(
                    Conversation(
                        id=conv_id,
                        utterances=tuple(
                            _utterance_from_obj(u, conv_id, i) for i, u in enumerate(utts)
                        ),
                    )
                )
            except KeyError as e:
                raise TranscriptError(f"{path}:{lineno}: missing field {e.args[0]!r}") from e
            except TranscriptError as e:
                raise TranscriptError(f"{path}:{lineno}: {e}") from e
    return conversations


def conversation_to_obj(conv):
    utts = []
    for u in conv.utterances:
        obj = {"speaker": u.speaker, "tokens": [t.surface for t in u.tokens]}
        if any(t.pos is not None for t in u.tokens):
            obj["pos"] = [t.pos for t in u.tokens]
        if any(t.ner is not None for t in u.tokens):
            obj["ner"] = [t.ner for t in u.tokens]
        if u.act is not None:
            obj["act"] = u.act
        utts.append(obj)
    return {"id": conv.id, "utterances": utts}


def write_jsonl(path, conversations):
    with open(path, "w", encoding="utf-8") as f:
        for conv in conversations:
            f.write(json.dumps(conversation_to_obj(conv)) + "\n")


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocab:
    """Symbol -> dense id maps; PAD=0 and UNK=1 everywhere except acts.

    Acts are a closed set: no PAD/UNK, ids cover exactly the observed
    labels. POS and NER tables additionally reserve ABSENT=2 for missing
    input columns.
    """

    word_index: dict
    char_index: dict
    pos_index: dict
    ner_index: dict
    act_index: dict

    @property
    def act_names(self):
        names = [None] * len(self.act_index)
        for sym, i in self.act_index.items():
            names[i] = sym
        return names

    def word_id(self, w):
        return self.word_index.get(w, UNK_ID)

    def char_id(self, c):
        return self.char_index.get(c, UNK_ID)

    def pos_id(self, p):
        if p is None:
            return ABSENT_ID
        return self.pos_index.get(p, UNK_ID)

    def ner_id(self, n):
        if n is None:
            return ABSENT_ID
        return self.ner_index.get(n, UNK_ID)

    def act_id(self, a):
        if a not in self.act_index:
            raise TranscriptError(f"unknown act label {a!r}; training acts are a closed set")
        return self.act_index[a]

    def to_json_obj(self):
        def as_list(index):
            out = [None] * len(index)
            for sym, i in index.items():
                out[i] = sym
            return out

        return {
            "words": as_list(self.word_index),
            "chars": as_list(self.char_index),
            "pos": as_list(self.pos_index),
            "ner": as_list(self.ner_index),
            "acts": as_list(self.act_index),
        }

    @staticmethod
    def from_json_obj(obj):
        return Vocab(
            word_index={s: i for i, s in enumerate(obj["words"])},
            char_index={s: i for i, s in enumerate(obj["chars"])},
            pos_index={s: i for i, s in enumerate(obj["pos"])},
            ner_index={s: i for i, s in enumerate(obj["ner"])},
            act_index={s: i for i, s in enumerate(obj["acts"])},
        )


def _ranked(counter):
    """Most frequent first; lexicographic order breaks frequency ties."""
    return [sym for sym, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]


def build_vocab(conversations, min_count=1):
    """Index every table from the corpus; pure function of its inputs."""
    if not conversations:
        raise TranscriptError("cannot build a vocabulary from an empty corpus")
    words, chars, pos, ner, acts = Counter(), Counter(), Counter(), Counter(), Counter()
    for conv in conversations:
        for utt in conv.utterances:
            if utt.act is not None:
                acts[utt.act] += 1
            for tok in utt.tokens:
                words[tok.surface] += 1
                chars.update(tok.chars)
                if tok.pos is not None:
                    pos[tok.pos] += 1
                if tok.ner is not None:
                    ner[tok.ner] += 1
    if not acts:
        raise TranscriptError("corpus has no labeled utterance; cannot index acts")

    def table(counter, reserved, threshold=1):
        index = {sym: i for i, sym in enumerate(reserved)}
        for sym in _ranked(counter):
            if counter[sym] >= threshold and sym not in index:
                index[sym] = len(index)
        return index

    return Vocab(
        word_index=table(words, (PAD, UNK), threshold=min_count),
        char_index=table(chars, (PAD, UNK)),
        pos_index=table(pos, (PAD, UNK, ABSENT)),
        ner_index=table(ner, (PAD, UNK, ABSENT)),
        act_index={sym: i for i, sym in enumerate(_ranked(acts))},
    )


# ---------------------------------------------------------------------------
# pretrained embeddings
# ---------------------------------------------------------------------------


def load_pretrained_embeddings(path, vocab, dim, rng=None):
    """Word matrix (|V_w| x dim): file rows where available, else uniform.

    Out-of-file words (UNK included) draw from uniform(-0.05, 0.05) using
    ``rng``; the PAD row is all zeros.
    """
    if rng is None:
        rng = np.random.default_rng(42)
    n_words = len(vocab.word_index)
    matrix = rng.uniform(-0.05, 0.05, size=(n_words, dim))
    matrix[PAD_ID] = 0.0
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise TranscriptError(
                    f"embedding row for {word!r} has {len(values)} values, expected {dim}"
                )
            idx = vocab.word_index.get(word)
            if idx is not None and idx != PAD_ID:
                matrix[idx] = [float(v) for v in values]
    return matrix
