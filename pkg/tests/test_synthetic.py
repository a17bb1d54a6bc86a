"""Generator: chain statistics, reproducibility, spec files, Bayes decoding."""

import numpy as np
import pytest

from dialact import synthetic
from dialact.corpus import write_jsonl
from dialact.synthetic import (
    GeneratorModel,
    SyntheticSpec,
    default_phrase_tables,
    default_spec,
    generate_synthetic,
    parse_spec_file,
    stationary_distribution,
    symmetric_transition,
)

# chi-square upper critical values at p = 0.01 by degrees of freedom
CHI2_CRIT_99 = {2: 9.2103, 3: 11.3449, 4: 13.2767, 5: 15.0863}


def acts_of(conversations):
    return [u.act for c in conversations for u in c.utterances]


def test_spec_validation():
    names, tables = default_phrase_tables(3)
    bad = np.array([[0.5, 0.4, 0.2], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])  # row 0 sums 1.1
    with pytest.raises(ValueError, match="sum to 1"):
        SyntheticSpec(3, bad, tables, 5, 2, 4, 0, names)
    with pytest.raises(ValueError, match="min_len"):
        SyntheticSpec(3, symmetric_transition(3, 0.7), tables, 5, 5, 4, 0, names)


def test_high_self_transition_yields_adjacent_repeats():
    spec = default_spec(num_acts=4, self_transition=0.9, num_conversations=120,
                        min_len=8, max_len=12, seed=17)
    convs, _ = generate_synthetic(spec)
    repeats = total = 0
    for conv in convs:
        acts = [u.act for u in conv.utterances]
        for a, b in zip(acts, acts[1:]):
            total += 1
            repeats += int(a == b)
    assert total > 1000
    # Binomial(total, 0.9): chance of an observed rate below 0.80 is negligible
    assert repeats / total >= 0.80


def test_frequencies_match_target_stationary_distribution():
    # Rows all equal to the target make that target the stationary law;
    # the heaviest act carries 0.36 of the mass.
    target = np.array([0.36, 0.19, 0.13, 0.06, 0.26])
    trans = np.tile(target, (5, 1))
    names, tables = default_phrase_tables(5)
    spec = SyntheticSpec(5, trans, tables, 1000, 10, 10, seed=3, act_names=names)
    convs, _ = generate_synthetic(spec)
    acts = acts_of(convs)
    assert len(acts) == 10_000
    freq = np.array([acts.count(n) for n in names]) / len(acts)
    assert abs(freq[0] - 0.36) <= 0.03
    assert np.abs(freq - target).max() <= 0.03


def test_frequencies_pass_chi_square_against_stationary():
    spec = default_spec(num_acts=5, self_transition=0.6, num_conversations=1000,
                        min_len=10, max_len=10, seed=23)
    convs, model = generate_synthetic(spec)
    acts = acts_of(convs)
    counts = np.array([acts.count(n) for n in spec.act_names], dtype=float)
    expected = stationary_distribution(spec.act_transition) * len(acts)
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_CRIT_99[len(counts) - 1]


def test_generation_byte_identical_for_fixed_seed(tmp_path):
    spec = default_spec(num_acts=3, num_conversations=25, seed=99)
    a, _ = generate_synthetic(spec)
    b, _ = generate_synthetic(spec)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(pa, a)
    write_jsonl(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_stationary_distribution_of_symmetric_chain_is_uniform():
    pi = stationary_distribution(symmetric_transition(5, 0.7))
    assert np.abs(pi - 0.2).max() < 1e-12


def test_generator_model_round_trip(tmp_path):
    spec = default_spec(num_acts=3, num_conversations=5, seed=1)
    _, model = generate_synthetic(spec)
    path = tmp_path / "gen.json"
    synthetic.save_generator(path, model)
    again = synthetic.load_generator(path)
    assert again.act_names == model.act_names
    assert np.array_equal(again.transition, model.transition)
    assert np.array_equal(again.initial, model.initial)
    assert again.phrase_tables == model.phrase_tables


def test_bayes_decoder_beats_chance_and_is_self_consistent():
    spec = default_spec(num_acts=5, self_transition=0.7, num_conversations=150,
                        min_len=6, max_len=10, seed=5)
    convs, model = generate_synthetic(spec)
    acc = model.decode_accuracy(convs)
    assert acc > 0.5  # far above the 0.2 chance level
    # unique cue phrases decode to their own act even in isolation
    from dialact.corpus import Conversation, Token, Utterance

    cue = spec.act_phrase_tables[0][0][0]
    conv = Conversation(
        id="cue", utterances=(Utterance(tokens=tuple(Token(w) for w in cue), speaker="A"),)
    )
    assert model.viterbi_acts(conv) == [spec.act_names[0]]


def test_parse_spec_file_full_grammar(tmp_path):
    path = tmp_path / "spec.cfg"
    path.write_text(
        """
# three-act toy
num_acts = 3
num_conversations = 7
min_len = 2
max_len = 4
seed = 13
act_names = hello ask tell
transition.hello = 0.6 0.2 0.2
transition.ask = 0.1 0.5 0.4
transition.tell = 0.3 0.3 0.4
phrases.hello = hi there | hello
phrase_weights.hello = 2 2
phrases.ask = how are you | what is new
phrases.tell = fine thanks | not much
""",
        encoding="utf-8",
    )
    spec = parse_spec_file(path)
    assert spec.act_names == ("hello", "ask", "tell")
    assert spec.act_transition[0, 0] == pytest.approx(0.6)
    assert spec.act_phrase_tables[0][0] == (("hi", "there"), 0.5)
    convs, _ = generate_synthetic(spec)
    assert len(convs) == 7


def test_parse_spec_file_defaults_and_errors(tmp_path):
    path = tmp_path / "spec.cfg"
    path.write_text(
        "num_acts = 4\nnum_conversations = 3\nmin_len = 2\nmax_len = 3\nself_transition = 0.8\n",
        encoding="utf-8",
    )
    spec = parse_spec_file(path)
    assert spec.num_acts == 4 and spec.seed == 42
    assert len(spec.act_phrase_tables) == 4

    bad = tmp_path / "bad.cfg"
    bad.write_text("num_acts = 2\nbogus_key = 1\n", encoding="utf-8")
    with pytest.raises(Exception, match="bogus_key|missing"):
        parse_spec_file(bad)


def test_unknown_phrase_gets_log_zero_emission():
    _, model = generate_synthetic(default_spec(num_acts=3, num_conversations=2, seed=0))
    from dialact.corpus import Conversation, Token, Utterance

    conv = Conversation(
        id="oov",
        utterances=(Utterance(tokens=(Token("zzz"), Token("qqq")), speaker="A"),),
    )
    pot = model.potentials_for(conv)
    assert np.all(pot.unary[0] <= synthetic.LOG_ZERO / 2)
    assert np.isfinite(pot.unary).all()
