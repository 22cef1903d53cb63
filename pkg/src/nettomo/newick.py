"""Newick reading and writing for routing trees.

The root is written as the label of the outermost group, so a logical
routing tree with root ``s`` and a single child ``a`` reads
``((1:0.1,2:0.2)a:0.3)s;``. Unlabelled internal nodes get synthetic ids.
"""

from __future__ import annotations

from typing import Mapping

from .errors import ParseError
from .tree import LinkMetric, Orientation, RoutedTree

_SPECIAL = set("(),:;")


def _fmt(x: float) -> str:
    return repr(float(x))


def to_newick(tree: RoutedTree, metric: LinkMetric | Mapping[str, float] | None = None) -> str:
    """Serialize ``tree``; lengths are written when ``metric`` is given.

    A plain mapping of lengths is accepted too, for inferred trees whose
    lengths may be non-positive.
    """
    lengths = metric.lengths if isinstance(metric, LinkMetric) else metric

    def render(node: str) -> str:
        kids = tree.children(node)
        text = node
        if kids:
            text = "(" + ",".join(render(k) for k in kids) + ")" + node
        if lengths is not None and node != tree.root:
            text += ":" + _fmt(lengths[node])
        return text

    for node in tree.preorder():
        if not node or _SPECIAL & set(node) or any(ch.isspace() for ch in node):
            raise ValueError(f"node id {node!r} cannot be written as a Newick label")
    return render(tree.root) + ";"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str):
        if self.peek() != ch:
            found = self.peek() or "end of input"
            raise ParseError(f"expected {ch!r}, found {found!r}", self.pos)
        self.pos += 1

    def label(self) -> str:
        self.skip_ws()
        start = self.pos
        while (
            self.pos < len(self.text)
            and self.text[self.pos] not in _SPECIAL
            and not self.text[self.pos].isspace()
        ):
            self.pos += 1
        return self.text[start : self.pos]

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.pos += 1
        start = self.pos
        token = self.label()
        try:
            return float(token)
        except ValueError:
            raise ParseError(f"bad branch length {token!r}", start) from None

    def subtree(self):
        """Returns (label, length, children, position)."""
        start = self.pos
        kids = []
        if self.peek() == "(":
            self.pos += 1
            kids.append(self.subtree())
            while self.peek() == ",":
                self.pos += 1
                kids.append(self.subtree())
            self.expect(")")
        lab = self.label()
        if not kids and not lab:
            raise ParseError("leaf without a label", self.pos)
        return lab, self.length(), kids, start


def parse_newick(
    text: str, orientation: Orientation = Orientation.SOURCE_ROOTED
) -> tuple[RoutedTree, LinkMetric | None]:
    """Parse a tree; the metric is returned only if every link has a length."""
    tree, lengths = parse_newick_raw(text, orientation)
    if any(v is None for v in lengths.values()):
        return tree, None
    bad = [k for k, v in lengths.items() if not v > 0]
    if bad:
        raise ParseError(f"non-positive branch lengths on {bad}; use parse_newick_raw", 0)
    return tree, LinkMetric(lengths)


def parse_newick_raw(
    text: str, orientation: Orientation = Orientation.SOURCE_ROOTED
) -> tuple[RoutedTree, dict[str, float | None]]:
    """Parse a tree keeping branch lengths as written (None when absent)."""
    p = _Parser(text)
    root_label, _, kids, _ = p.subtree()
    p.expect(";")
    if p.peek():
        raise ParseError("trailing characters after ';'", p.pos)
    if not kids:
        raise ParseError("tree has no links", 0)

    used = set()
    parent: dict[str, str] = {}
    lengths: dict[str, float | None] = {}
    counter = 0

    def collect(node):
        lab, _, ks, _ = node
        if lab:
            used.add(lab)
        for k in ks:
            collect(k)

    collect((root_label, None, kids, 0))

    def fresh() -> str:
        nonlocal counter
        while True:
            counter += 1
            name = f"n{counter}"
            if name not in used:
                used.add(name)
                return name

    seen = set()
    root = root_label or fresh()
    seen.add(root)
    stack = [(root, k) for k in reversed(kids)]
    while stack:
        par, (lab, length, ks, pos) = stack.pop()
        name = lab or fresh()
        if name in seen:
            raise ParseError(f"duplicate label {name!r}", pos)
        seen.add(name)
        parent[name] = par
        lengths[name] = length
        stack.extend((name, k) for k in reversed(ks))

    try:
        tree = RoutedTree(root, parent, orientation)
    except ValueError as exc:
        raise ParseError(str(exc), 0) from exc
    return tree, lengths
