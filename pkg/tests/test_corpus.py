"""Transcript parsing, vocabulary construction, embedding loading."""

import json

import numpy as np
import pytest

from dialact import corpus
from dialact.corpus import (
    ABSENT_ID,
    PAD,
    PAD_ID,
    UNK,
    UNK_ID,
    Conversation,
    Token,
    TranscriptError,
    Utterance,
    build_vocab,
    load_pretrained_embeddings,
    parse_jsonl,
    write_jsonl,
)

# Ten-turn two-speaker snippet: a greeting pair opening, a farewell pair
# closing, question answered in between.
SNIPPET = [
    ("A", "hi long time no see", "greet"),
    ("B", "hi how are you", "greet"),
    ("A", "what are you doing these days", "question"),
    ("B", "i am busy finishing my thesis", "answer"),
    ("A", "i heard the review is due soon", "statement"),
    ("B", "yeah", "backchannel"),
    ("A", "you should pick up the pace", "opinion"),
    ("B", "right that is exactly why i am swamped", "agreement"),
    ("A", "i will let you get back to it goodbye", "farewell"),
    ("B", "see you later", "farewell"),
]


def conv_from_snippet(conv_id="c-table"):
    return Conversation(
        id=conv_id,
        utterances=tuple(
            Utterance(tokens=tuple(Token(w) for w in text.split()), speaker=spk, act=act)
            for spk, text, act in SNIPPET
        ),
    )


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_parse_minimal_record(tmp_path):
    path = tmp_path / "one.jsonl"
    write_lines(
        path,
        ['{"id":"c1","utterances":[{"speaker":"A","tokens":["hello"],"act":"greet"}]}'],
    )
    convs = parse_jsonl(path)
    assert len(convs) == 1
    assert len(convs[0]) == 1
    assert convs[0].utterances[0].act == "greet"
    assert convs[0].utterances[0].tokens[0].surface == "hello"


def test_parse_rejects_empty_utterance(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_lines(path, ['{"id":"c1","utterances":[{"speaker":"A","tokens":[]}]}'])
    with pytest.raises(TranscriptError, match="tokens"):
        parse_jsonl(path)


def test_parse_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_lines(
        path,
        [
            '{"id":"ok","utterances":[{"speaker":"A","tokens":["x"]}]}',
            "{not json",
        ],
    )
    with pytest.raises(TranscriptError, match=":2:"):
        parse_jsonl(path)


def test_parse_rejects_misaligned_tags(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_lines(
        path,
        ['{"id":"c","utterances":[{"speaker":"A","tokens":["a","b"],"pos":["N"]}]}'],
    )
    with pytest.raises(TranscriptError, match="pos"):
        parse_jsonl(path)


def test_parse_ten_turn_snippet(tmp_path):
    path = tmp_path / "snippet.jsonl"
    write_jsonl(path, [conv_from_snippet()])
    convs = parse_jsonl(path)
    assert len(convs[0]) == 10
    assert convs[0].acts == [act for _, _, act in SNIPPET]
    assert convs[0].acts[:2] == ["greet", "greet"]
    assert convs[0].acts[-2:] == ["farewell", "farewell"]


def test_round_trip_exact(tmp_path):
    conv_a = conv_from_snippet("a")
    conv_b = Conversation(
        id="b",
        utterances=(
            Utterance(
                tokens=(Token("hello", pos="UH", ner="O"), Token("world", pos="NN", ner="O")),
                speaker="A",
                act="greet",
            ),
            Utterance(tokens=(Token("ok"),), speaker="B"),  # unlabeled, no tags
        ),
    )
    path = tmp_path / "io.jsonl"
    write_jsonl(path, [conv_a, conv_b])
    assert parse_jsonl(path) == [conv_a, conv_b]


def test_token_invariants():
    tok = Token("hello")
    assert tok.chars == ("h", "e", "l", "l", "o")
    with pytest.raises(TranscriptError):
        Token("")
    with pytest.raises(TranscriptError):
        Utterance(tokens=(), speaker="A")
    with pytest.raises(TranscriptError):
        Conversation(id="x", utterances=())


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------


def make_conv(phrases, acts):
    return Conversation(
        id="v",
        utterances=tuple(
            Utterance(tokens=tuple(Token(w) for w in p.split()), speaker="A", act=a)
            for p, a in zip(phrases, acts)
        ),
    )


def test_build_vocab_min_count_threshold():
    conv = make_conv(["a a a b"], ["x"])
    vocab = build_vocab([conv], min_count=2)
    assert vocab.word_index == {PAD: 0, UNK: 1, "a": 2}
    assert vocab.word_id("b") == UNK_ID
    assert vocab.word_id("a") == 2


def test_build_vocab_reserved_ids_everywhere():
    conv = make_conv(["hello there"], ["greet"])
    vocab = build_vocab([conv])
    for index in (vocab.word_index, vocab.char_index, vocab.pos_index, vocab.ner_index):
        assert index[PAD] == PAD_ID
        assert index[UNK] == UNK_ID
    assert vocab.pos_index[corpus.ABSENT] == ABSENT_ID
    assert PAD not in vocab.act_index and UNK not in vocab.act_index


def test_build_vocab_covers_42_act_classes():
    acts = [f"tag{i:02d}" for i in range(42)]
    conv = make_conv([f"w{i}" for i in range(42)], acts)
    vocab = build_vocab([conv])
    assert len(vocab.act_index) == 42
    assert sorted(vocab.act_index) == sorted(acts)


def test_build_vocab_deterministic_and_frequency_ordered(tmp_path):
    conv = make_conv(["b b c a a a", "c b"], ["x", "y"])
    path = tmp_path / "det.jsonl"
    write_jsonl(path, [conv])
    v1 = build_vocab(parse_jsonl(path))
    v2 = build_vocab(parse_jsonl(path))
    assert v1 == v2
    # a:3, b:3, c:2 -> frequency order with lexicographic ties
    assert v1.word_index["a"] == 2
    assert v1.word_index["b"] == 3
    assert v1.word_index["c"] == 4


def test_build_vocab_requires_labels():
    conv = Conversation(
        id="u", utterances=(Utterance(tokens=(Token("hi"),), speaker="A"),)
    )
    with pytest.raises(TranscriptError, match="labeled"):
        build_vocab([conv])
    with pytest.raises(TranscriptError):
        build_vocab([])


def test_vocab_json_round_trip():
    vocab = build_vocab([conv_from_snippet()])
    again = corpus.Vocab.from_json_obj(json.loads(json.dumps(vocab.to_json_obj())))
    assert again == vocab


def test_unknown_act_is_closed_set_error():
    vocab = build_vocab([make_conv(["hi"], ["greet"])])
    with pytest.raises(TranscriptError, match="unknown act"):
        vocab.act_id("farewell")


# ---------------------------------------------------------------------------
# pretrained embeddings
# ---------------------------------------------------------------------------


def test_embeddings_copy_pad_and_random_rows(tmp_path):
    vocab = build_vocab([make_conv(["hello world"], ["x"])])
    path = tmp_path / "vecs.txt"
    path.write_text("hello 0.1 0.2\nunrelated 9 9\n", encoding="utf-8")
    matrix = load_pretrained_embeddings(path, vocab, dim=2, rng=np.random.default_rng(0))
    assert np.array_equal(matrix[vocab.word_index["hello"]], [0.1, 0.2])
    assert np.array_equal(matrix[PAD_ID], [0.0, 0.0])
    # "world" is absent from the file: seeded uniform(-0.05, 0.05)
    row = matrix[vocab.word_index["world"]]
    assert np.all(np.abs(row) < 0.05) and np.any(row != 0.0)
    assert np.all(np.abs(matrix[UNK_ID]) < 0.05)


def test_embeddings_dimension_mismatch_names_word(tmp_path):
    vocab = build_vocab([make_conv(["hello"], ["x"])])
    path = tmp_path / "vecs.txt"
    path.write_text("hello 0.1 0.2 0.3\n", encoding="utf-8")
    with pytest.raises(TranscriptError, match="hello"):
        load_pretrained_embeddings(path, vocab, dim=2)


def test_every_encoded_id_indexes_its_table(tmp_path):
    from dialact.encoder import prepare_batch

    conv = conv_from_snippet()
    vocab = build_vocab([conv])
    batch = prepare_batch([conv], vocab)
    assert batch.word.max() < len(vocab.word_index) and batch.word.min() >= 0
    assert batch.char.max() < len(vocab.char_index) and batch.char.min() >= 0
    assert batch.pos.max() < len(vocab.pos_index)
    assert batch.ner.max() < len(vocab.ner_index)
    assert batch.gold.max() < len(vocab.act_index)
    # no POS/NER columns in the snippet: real tokens carry the ABSENT tag
    real = batch.tok_mask.astype(bool)
    assert np.all(batch.pos[real] == ABSENT_ID)
    assert np.all(batch.ner[real] == ABSENT_ID)
