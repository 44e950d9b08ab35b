"""Loader filtering rules and synthetic-corpus statistics."""

import json
import logging

import numpy as np

from mvsolver.augmentation import apply_distributive
from mvsolver.bottomup import gold_mappings
from mvsolver.data import (
    SYNTH_TEMPLATES, answers_match, dump_dataset, generate_synthetic,
    load_dataset,
)
from mvsolver.encoder import SharedEmbeddings, Vocab
from mvsolver.expression import OPS, iter_nodes, parse_infix, to_postorder, \
    to_preorder


def write_jsonl(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


GOOD = {"id": "case-6",
        "text": "tom bought 57 apples and 43 pens for 24 dollars each . "
                "how many dollars in all ?",
        "equation": "( N0 + N1 ) * N2",
        "answer": 2400}


def test_answers_match_relative_tolerance():
    assert answers_match(2400.1, 2400.0)      # 0.1 <= 1e-4 * 2400
    assert not answers_match(2401.0, 2400.0)
    assert answers_match(1.00005, 1.0)
    assert not answers_match(1.001, 1.0)
    # small gold values fall back to the absolute floor max(1, |gold|)
    assert answers_match(0.00005, 0.0)


def test_loader_accepts_known_good(tmp_path):
    path = tmp_path / "one.jsonl"
    write_jsonl(path, [GOOD])
    got = load_dataset(path)
    assert len(got) == 1
    p = got[0]
    assert p.pid == "case-6"
    assert [q.value for q in p.quantities] == [57.0, 43.0, 24.0]
    assert to_preorder(p.expression) == ["*", "+", "N0", "N1", "N2"]
    assert p.answer == 2400


def test_loader_drops_answer_mismatch(tmp_path, caplog):
    path = tmp_path / "bad.jsonl"
    write_jsonl(path, [dict(GOOD, answer=2401)])
    with caplog.at_level(logging.INFO, logger="mvsolver.data"):
        got = load_dataset(path)
    assert got == []
    assert any("dropping" in r.message for r in caplog.records)


def test_loader_drops_unusable_equation(tmp_path, caplog):
    # N5 exceeds the two quantities in the text; N1 = 0 breaks division
    recs = [
        {"id": "a", "text": "had 4 apples and 6 pens", "equation": "N0 + N5",
         "answer": 10},
        {"id": "b", "text": "had 4 apples and 0 pens", "equation": "N0 / N1",
         "answer": 1},
        GOOD,
    ]
    path = tmp_path / "mix.jsonl"
    write_jsonl(path, recs)
    with caplog.at_level(logging.INFO, logger="mvsolver.data"):
        got = load_dataset(path)
    assert [p.pid for p in got] == ["case-6"]
    assert sum("dropping" in r.message for r in caplog.records) == 2


def test_loader_skips_malformed(tmp_path, caplog):
    path = tmp_path / "broken.jsonl"
    with open(path, "w") as f:
        f.write("not json at all\n")
        f.write(json.dumps({"id": "x", "text": "no equation"}) + "\n")
        f.write(json.dumps(dict(GOOD, equation="N0 + +")) + "\n")
        f.write("\n")  # blank lines pass silently
        f.write(json.dumps(GOOD) + "\n")
    with caplog.at_level(logging.WARNING, logger="mvsolver.data"):
        got = load_dataset(path)
    assert [p.pid for p in got] == ["case-6"]
    assert sum("skipping" in r.message for r in caplog.records) == 3


def test_loader_skips_over_quantity_cap(tmp_path, caplog):
    text = " ".join(str(k) for k in range(1, 14)) + " things"
    path = tmp_path / "wide.jsonl"
    write_jsonl(path, [{"id": "w", "text": text, "equation": "N0",
                        "answer": 1}])
    with caplog.at_level(logging.WARNING, logger="mvsolver.data"):
        got = load_dataset(path)
    assert got == []
    assert any("cap" in r.message for r in caplog.records)


def test_loader_empty_file_warns(tmp_path, caplog):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with caplog.at_level(logging.WARNING, logger="mvsolver.data"):
        got = load_dataset(path)
    assert got == []
    assert any("no usable records" in r.message for r in caplog.records)


def test_dump_load_round_trip(tmp_path):
    probs = generate_synthetic(120, seed=11)
    path = tmp_path / "synth.jsonl"
    dump_dataset(probs, path)
    back = load_dataset(path)
    assert len(back) == len(probs)
    for a, b in zip(probs, back):
        assert a.pid == b.pid
        assert a.text == b.text
        assert to_preorder(a.expression) == to_preorder(b.expression)
        assert a.answer == b.answer


def test_generator_deterministic():
    a = generate_synthetic(60, seed=3)
    b = generate_synthetic(60, seed=3)
    assert [(p.pid, p.text, p.answer) for p in a] == \
           [(p.pid, p.text, p.answer) for p in b]
    assert [to_postorder(p.expression) for p in a] == \
           [to_postorder(p.expression) for p in b]


def test_generator_seed_changes_content():
    a = generate_synthetic(60, seed=1)
    b = generate_synthetic(60, seed=2)
    assert [p.text for p in a] != [p.text for p in b]


def corpus():
    return generate_synthetic(2000, seed=5)


def test_generator_value_and_size_envelope():
    probs = corpus()
    assert len(probs) == 2000
    assert [p.pid for p in probs[:2]] == ["syn-00000", "syn-00001"]
    seen_ops = set()
    for p in probs:
        n_ops = 0
        for n in iter_nodes(p.expression):
            if n.op is not None:
                seen_ops.add(n.op)
                n_ops += 1
        assert 1 <= n_ops <= 3
        for q in p.quantities:
            assert float(q.value).is_integer()
            assert 2 <= q.value <= 99
    assert seen_ops == set(OPS)


def test_generator_operator_histogram_tracks_design():
    design = {op: 0 for op in OPS}
    for t in SYNTH_TEMPLATES:
        for n in iter_nodes(parse_infix(t["equation"])):
            if n.op is not None:
                design[n.op] += 1
    got = {op: 0 for op in OPS}
    for p in corpus():
        for n in iter_nodes(p.expression):
            if n.op is not None:
                got[n.op] += 1
    for op in OPS:
        expected = 2000 * design[op] / len(SYNTH_TEMPLATES)
        assert 0.8 * expected <= got[op] <= 1.2 * expected, op


def test_generator_distributive_share():
    probs = corpus()
    n = sum(1 for p in probs if apply_distributive(p.expression))
    assert n >= 0.1 * len(probs)


def test_generator_vocabulary_stays_small():
    v = Vocab.build([p.tokens for p in corpus()])
    reserved = len(Vocab())
    content = len(v) - reserved
    assert 40 <= content <= 80


def test_generator_avoids_self_pair_golds():
    # bottom-up training rejects gold steps that pair a pool row with
    # itself, so no template may emit one
    rng = np.random.default_rng(0)
    probs = generate_synthetic(400, seed=9)
    vocab = Vocab.build([p.tokens for p in probs])
    shared = SharedEmbeddings(rng, vocab, d=8, constants=(1.0, 3.14))
    for p in probs:
        maps = gold_mappings(to_postorder(p.expression),
                             len(p.quantities), shared)
        for i, j, _ in maps:
            assert i != j, p.text
