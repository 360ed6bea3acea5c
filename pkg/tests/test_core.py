import numpy as np
import pytest
from hypothesis import given, strategies as st

from memabs.core import (
    Alphabet,
    InvalidArgument,
    WordDistribution,
    count_subwords,
    decode_codes,
    total_variation_like_gap,
    word_codes,
)

AB = Alphabet("ab")


def cw(text, k):
    return {AB.render(w): c for w, c in count_subwords(AB.parse(text), k).items()}


@pytest.mark.parametrize("text,k,expected", [
    ("aaab", 2, {"aa": 2, "ab": 1}),
    ("a", 1, {"a": 1}),
    ("ababa", 3, {"aba": 2, "bab": 1}),
])
def test_count_subwords_examples(text, k, expected):
    assert cw(text, k) == expected


@pytest.mark.parametrize("k", [0, 5, -1])
def test_count_subwords_rejects_bad_k(k):
    with pytest.raises(InvalidArgument):
        count_subwords((0, 1, 0, 1), k)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=30), st.integers(1, 30))
def test_count_subwords_total(word, k):
    if k > len(word):
        return
    assert sum(count_subwords(word, k).values()) == len(word) - k + 1


def dist(d):
    return WordDistribution.from_dict(AB, d)


def test_gap_examples():
    p = dist({"aa": 0.5, "ab": 0.5})
    assert total_variation_like_gap(p, p) == 0
    assert total_variation_like_gap(dist({"a": 1}), dist({"b": 1})) == 2
    assert total_variation_like_gap(p, dist({"aa": 1})) == pytest.approx(0.5)


def test_gap_rejects_mismatched_lengths():
    with pytest.raises(InvalidArgument):
        total_variation_like_gap(dist({"a": 1}), dist({"ab": 1}))


supports = st.dictionaries(st.sampled_from(["aaa", "aab", "aba", "abb", "baa", "bab", "bba", "bbb"]),
                           st.floats(0.01, 1.0), min_size=1)


@given(supports, supports)
def test_gap_properties(d1, d2):
    p, q = dist(d1), dist(d2)
    g = total_variation_like_gap(p, q)
    assert g == pytest.approx(total_variation_like_gap(q, p), abs=1e-15)
    assert 0 <= g <= 2 + 1e-12
    assert (g == 0) == (set(d1) == set(d2))


@given(supports)
def test_normalization_holds(d):
    p = dist(d)
    assert abs(p.probs.sum() - 1) < 1e-9
    assert (p.probs > 0).all()


def test_distribution_rejects_bad_mass():
    with pytest.raises(InvalidArgument):
        WordDistribution(AB, 1, np.array([0]), np.array([0.5]))
    with pytest.raises(InvalidArgument):
        WordDistribution.from_dict(AB, {"a": 1, "ab": 1})


def test_pruning_moves_dust():
    p = WordDistribution.from_dict(AB, {"a": 1.0, "b": 1e-14})
    assert p.as_dict(render=True) == {"a": pytest.approx(1.0)}
    assert p.pruned == pytest.approx(1e-14, rel=1e-3)


def test_alphabet():
    a = Alphabet(["0", "1", "2"])
    assert a.render((2, 0)) == "20" and a.parse("20") == (2, 0)
    long = Alphabet(["x1", "x2"])
    assert long.render((0, 1)) == "x1.x2" and long.parse("x1.x2") == (0, 1)
    with pytest.raises(InvalidArgument):
        Alphabet("aa")
    with pytest.raises(InvalidArgument):
        a.parse("3")


@given(st.lists(st.lists(st.integers(0, 8), min_size=25, max_size=25), min_size=1, max_size=5))
def test_codes_roundtrip_and_order(rows):
    letters = np.array(rows)
    codes = word_codes(letters, 9)  # 9**25 overflows int64: exercises the object path
    assert (decode_codes(codes, 9, 25) == letters).all()
    order = sorted(range(len(rows)), key=lambda i: rows[i])
    assert sorted(range(len(rows)), key=lambda i: codes[i]) == order
