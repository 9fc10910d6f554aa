"""MeSH tree file parsing and tree-number arithmetic.

The tree file is the public ASCII serialization, one ``label;tree_number``
pair per line, e.g.::

    Cardiovascular Diseases;C14
    Cardiovascular Infections;C14.260
    Cardiovascular Infections;C01.539.190

A label may sit at several positions in the tree. Those are kept as a
multimap and never merged or corrected.
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import DomainError, TreeParseError

BRANCHES = "ABCDEFGHIJKLMNVZ"

_FIRST = re.compile(r"[A-Z]\d{2}")
_REST = re.compile(r"\d{3}")


@dataclass(frozen=True, order=True)
class TreeNumber:
    segments: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "TreeNumber":
        parts = text.strip().split(".")
        if not parts or not _FIRST.fullmatch(parts[0]):
            raise ValueError(f"invalid tree number {text!r}")
        if parts[0][0] not in BRANCHES:
            raise ValueError(f"unknown branch in tree number {text!r}")
        for p in parts[1:]:
            if not _REST.fullmatch(p):
                raise ValueError(f"invalid tree number {text!r}")
        return cls(tuple(parts))

    def __str__(self):
        return ".".join(self.segments)

    @property
    def level(self) -> int:
        return len(self.segments)

    @property
    def branch(self) -> str:
        return self.segments[0][0]

    def ancestor(self, k: int) -> "TreeNumber":
        if k < 1 or k > self.level:
            raise DomainError(f"cannot truncate {self} (level {self.level}) to level {k}")
        return TreeNumber(self.segments[:k])


def _as_number(t) -> TreeNumber:
    return t if isinstance(t, TreeNumber) else TreeNumber.parse(t)


def level(t) -> int:
    return _as_number(t).level


def branch(t) -> str:
    return _as_number(t).branch


def ancestor_at_level(t, k: int) -> TreeNumber:
    return _as_number(t).ancestor(k)


def label_key(label: str) -> str:
    """Lookup key for heading labels: trimmed and case-folded."""
    return " ".join(label.split()).casefold()


@dataclass(frozen=True)
class Descriptor:
    label: str
    tree_numbers: frozenset[TreeNumber]


@dataclass(frozen=True)
class BranchStats:
    branch: str
    terms: int
    tree_numbers: int
    max_level: int


@dataclass(frozen=True)
class MeshTree:
    descriptors: tuple[Descriptor, ...] = ()
    by_label: dict = field(default_factory=dict, compare=False, repr=False)
    by_number: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_pairs(cls, pairs) -> "MeshTree":
        numbers = defaultdict(set)
        labels = {}
        owner = {}
        for label, number in pairs:
            number = _as_number(number)
            key = label_key(label)
            if number in owner and owner[number] != key:
                raise ValueError(f"tree number {number} assigned to both "
                                 f"{labels[owner[number]]!r} and {label!r}")
            owner[number] = key
            labels.setdefault(key, label.strip())
            numbers[key].add(number)
        descriptors = tuple(
            Descriptor(labels[k], frozenset(numbers[k])) for k in sorted(labels)
        )
        by_label = {label_key(d.label): d for d in descriptors}
        by_number = {n: d.label for d in descriptors for n in d.tree_numbers}
        return cls(descriptors, by_label, by_number)

    def __len__(self):
        return len(self.descriptors)

    def lookup(self, label: str) -> Descriptor | None:
        return self.by_label.get(label_key(label))

    def label_of(self, number) -> str:
        return self.by_number[_as_number(number)]

    def pairs(self) -> list[tuple[str, str]]:
        """All (label, tree number) pairs sorted by tree number."""
        return [(lab, str(n)) for n, lab in sorted(self.by_number.items())]

    def numbers(self, branches=None, max_level=None, exact_level=None):
        out = []
        for n in sorted(self.by_number):
            if branches is not None and n.branch not in branches:
                continue
            if max_level is not None and n.level > max_level:
                continue
            if exact_level is not None and n.level != exact_level:
                continue
            out.append(n)
        return out

    def branch_stats(self) -> list[BranchStats]:
        """Per-branch descriptor counts and depths for the loaded edition."""
        terms = defaultdict(set)
        counts = defaultdict(int)
        depth = defaultdict(int)
        for n, lab in self.by_number.items():
            terms[n.branch].add(label_key(lab))
            counts[n.branch] += 1
            depth[n.branch] = max(depth[n.branch], n.level)
        return [BranchStats(b, len(terms[b]), counts[b], depth[b])
                for b in BRANCHES if b in counts]


def parse_tree_file(text: str) -> MeshTree:
    text = text.removeprefix("\ufeff")
    pairs = []
    seen = set()
    owner = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        label, sep, number = line.rpartition(";")
        if not sep:
            raise TreeParseError(lineno, "missing ';' separator")
        label = label.strip()
        if not label:
            raise TreeParseError(lineno, "empty label")
        try:
            tn = TreeNumber.parse(number)
        except ValueError as exc:
            raise TreeParseError(lineno, str(exc)) from None
        key = label_key(label)
        if owner.setdefault(tn, key) != key:
            raise TreeParseError(lineno, f"tree number {tn} already assigned to another label")
        if (key, tn) in seen:
            continue
        seen.add((key, tn))
        pairs.append((label, tn))
    return MeshTree.from_pairs(pairs)


def load_tree(path) -> MeshTree:
    with open(path, encoding="utf-8") as fh:
        return parse_tree_file(fh.read())


def format_tree(tree: MeshTree) -> str:
    return "".join(f"{lab};{num}\n" for lab, num in tree.pairs())
