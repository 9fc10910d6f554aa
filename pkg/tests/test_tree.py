import pytest
from hypothesis import given, strategies as st

from meshmap.errors import DomainError, TreeParseError
from meshmap.tree import (BRANCHES, TreeNumber, ancestor_at_level, branch, format_tree, level,
                          parse_tree_file)


@pytest.mark.parametrize("number, expected", [("C14", 1), ("C14.260", 2), ("C14.260.249", 3)])
def test_level(number, expected):
    assert level(number) == expected


@pytest.mark.parametrize("number, k, expected", [
    ("C14.260.249", 2, "C14.260"),
    ("C14", 1, "C14"),
    ("D13.150.650.700", 2, "D13.150"),
])
def test_ancestor(number, k, expected):
    assert str(ancestor_at_level(number, k)) == expected


def test_ancestor_too_deep():
    with pytest.raises(DomainError):
        ancestor_at_level("C14.260", 3)


@pytest.mark.parametrize("number, expected", [
    ("C14.260", "C"), ("D13.150.650.319", "D"), ("G05.355.315.203.374.790", "G"),
])
def test_branch(number, expected):
    assert branch(number) == expected


@pytest.mark.parametrize("bad", ["", "c14", "X14", "C1", "C14.26", "C14..260", "C14.2600"])
def test_invalid_numbers(bad):
    with pytest.raises(ValueError):
        TreeNumber.parse(bad)


tree_numbers = st.builds(
    lambda b, first, rest: TreeNumber((f"{b}{first:02d}",) + tuple(f"{r:03d}" for r in rest)),
    st.sampled_from(BRANCHES), st.integers(0, 99), st.lists(st.integers(0, 999), max_size=11),
)


@given(tree_numbers)
def test_number_roundtrip(t):
    assert TreeNumber.parse(str(t)) == t
    assert t.level == len(str(t).split("."))


@given(tree_numbers, st.data())
def test_ancestor_properties(t, data):
    assert t.ancestor(t.level) == t
    k = data.draw(st.integers(1, t.level))
    a = t.ancestor(k)
    assert a.ancestor(k) == a
    assert a.branch == t.branch
    assert a.level == k


def test_parse_single_level_one():
    tree = parse_tree_file("Cardiovascular Diseases;C14\n")
    d = tree.lookup("Cardiovascular Diseases")
    assert [str(n) for n in d.tree_numbers] == ["C14"]


def test_duplicate_label_is_multimap():
    tree = parse_tree_file("Cardiovascular Infections;C14.260\nCardiovascular Infections;C01.539.190\n")
    assert len(tree) == 1
    d = tree.lookup("cardiovascular infections ")
    assert sorted(str(n) for n in d.tree_numbers) == ["C01.539.190", "C14.260"]


def test_empty_input():
    tree = parse_tree_file("")
    assert len(tree) == 0 and tree.pairs() == []


def test_crlf_bom_and_duplicates():
    tree = parse_tree_file("\ufeffNeoplasms;C04\r\nNeoplasms;C04\r\n\r\nProteins;D12.776\r\n")
    assert tree.pairs() == [("Neoplasms", "C04"), ("Proteins", "D12.776")]


@pytest.mark.parametrize("text, lineno", [
    ("Neoplasms;C04\nno separator here\n", 2),
    (";C04\n", 1),
    ("Neoplasms;C4\n", 1),
    ("Neoplasms;C04\nProteins;C04\n", 2),
])
def test_malformed_lines(text, lineno):
    with pytest.raises(TreeParseError) as exc:
        parse_tree_file(text)
    assert exc.value.lineno == lineno


def test_roundtrip_fixed_point(tree):
    text = format_tree(tree)
    again = parse_tree_file(text)
    assert format_tree(again) == text
    assert again.pairs() == sorted(again.pairs(), key=lambda p: TreeNumber.parse(p[1]))


def test_branch_stats(tree):
    stats = {s.branch: s for s in tree.branch_stats()}
    assert set(stats) == {"B", "C", "D", "E", "G"}
    assert stats["C"].max_level == 4
    # Cardiovascular Infections and Endocarditis each hold two C numbers
    assert stats["C"].tree_numbers == 13 and stats["C"].terms == 11
    assert stats["B"].max_level == 10
