"""Rooted directed trees truncated at a finite depth.

Every shift, kernel and commutant in this package lives on ``l^2`` of the
vertices of a leafless, locally finite rooted directed tree.  Infinite trees
are represented by their depth-``N`` truncation: vertices at depth ``N`` form
the *frontier* and are not considered leaves.

Vertices are stored breadth-first, children in declared order.  That order
fixes the row/column layout of every matrix built on the tree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Hashable

Vertex = Hashable

#: default bound on the number of vertices allowed in a single generation
DEFAULT_GENERATION_CAP = 10_000

_SPEC_FIELDS = {"kind", "depth", "counts"}
_SPEC_KINDS = ("path", "two_ray", "generations")


class TreeSpecError(ValueError):
    """Raised for malformed tree specifications or invalid tree queries."""


@dataclass(frozen=True)
class TreeSpec:
    """Declarative description of a truncated tree.

    ``kind`` is one of ``"path"``, ``"two_ray"`` or ``"generations"``.  For
    ``"generations"``, ``counts`` is either a flat list of generation sizes
    ``[1, c_1, ..., c_N]`` (extra children go to the leading vertices of the
    previous generation) or a nested list where ``counts[n][i]`` is the number
    of children of the ``i``-th vertex of generation ``n``.
    """

    kind: str
    depth: int
    counts: tuple | None = None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "depth": self.depth}
        if self.counts is not None:
            out["counts"] = _untuple(self.counts)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _untuple(obj):
    if isinstance(obj, (tuple, list)):
        return [_untuple(o) for o in obj]
    return obj


def _tuplify(obj):
    if isinstance(obj, (tuple, list)):
        return tuple(_tuplify(o) for o in obj)
    return obj


@dataclass(frozen=True, eq=False)
class DirectedTree:
    """Immutable truncated rooted directed tree.

    Attributes
    ----------
    vertices : tuple
        Vertex ids in breadth-first order.
    root : hashable
        The root vertex.
    children : dict
        Ordered children of each non-frontier vertex.
    parent : dict
        Parent of each non-root vertex.
    frontier_depth : int
        Truncation horizon ``N``.
    """

    vertices: tuple
    root: Vertex
    children: dict
    parent: dict
    frontier_depth: int
    depth: dict = field(init=False, repr=False)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        depth = {self.root: 0}
        for v in self.vertices[1:]:
            p = self.parent.get(v)
            if p is None or p not in depth:
                raise TreeSpecError(f"vertex {v!r} is not reachable from the root")
            depth[v] = depth[p] + 1
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "index", {v: i for i, v in enumerate(self.vertices)})
        self._validate()

    def _validate(self):
        if self.vertices[0] != self.root:
            raise TreeSpecError("root must be the first vertex")
        if self.root in self.parent:
            raise TreeSpecError("root cannot have a parent")
        if len(self.index) != len(self.vertices):
            raise TreeSpecError("duplicate vertex ids")
        for v, kids in self.children.items():
            for u in kids:
                if self.parent.get(u) != v:
                    raise TreeSpecError(f"children/parent mismatch at {v!r} -> {u!r}")
        for u, v in self.parent.items():
            if u not in self.children.get(v, ()):
                raise TreeSpecError(f"parent/children mismatch at {u!r}")
        for v in self.vertices:
            d = self.depth[v]
            if d > self.frontier_depth:
                raise TreeSpecError(f"vertex {v!r} lies beyond the horizon")
            if d < self.frontier_depth and not self.children.get(v):
                raise TreeSpecError(f"vertex {v!r} at depth {d} is a leaf")
            if d == self.frontier_depth and self.children.get(v):
                raise TreeSpecError(f"frontier vertex {v!r} has children")

    # -- basic queries -------------------------------------------------
    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def chi(self, v: Vertex) -> tuple:
        """Children of ``v`` (empty for frontier vertices)."""
        return tuple(self.children.get(v, ()))

    def is_frontier(self, v: Vertex) -> bool:
        return self.depth[v] == self.frontier_depth

    def generation(self, n: int) -> list:
        """Vertices of depth ``n`` in canonical order."""
        if n < 0 or n > self.frontier_depth:
            raise TreeSpecError(
                f"generation {n} outside 0..{self.frontier_depth}")
        return [v for v in self.vertices if self.depth[v] == n]

    def generation_sizes(self) -> list[int]:
        sizes = [0] * (self.frontier_depth + 1)
        for v in self.vertices:
            sizes[self.depth[v]] += 1
        return sizes

    @property
    def branching_vertices(self) -> list:
        """The set of vertices with at least two children, in canonical order."""
        return [v for v in self.vertices if len(self.chi(v)) >= 2]

    def depths(self):
        """Depth of every vertex as a list aligned with :attr:`vertices`."""
        return [self.depth[v] for v in self.vertices]

    def interior_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.vertices)
                if self.depth[v] < self.frontier_depth]


def generation(tree: DirectedTree, n: int) -> list:
    """Vertices of depth ``n``; raises beyond the horizon."""
    return tree.generation(n)


def branching_index(tree: DirectedTree) -> int:
    """``1 + max depth of a branching vertex``, or 0 if there is none."""
    bv = tree.branching_vertices
    if not bv:
        return 0
    return 1 + max(tree.depth[v] for v in bv)


def _check_depth(depth) -> int:
    if isinstance(depth, bool) or not isinstance(depth, int):
        raise TreeSpecError(f"depth must be an integer, got {depth!r}")
    if depth < 1:
        raise TreeSpecError(f"depth must be >= 1, got {depth}")
    return depth


def build_path_tree(depth: int) -> DirectedTree:
    """The tree without branching vertices, truncated at ``depth``."""
    depth = _check_depth(depth)
    vertices = tuple(range(depth + 1))
    children = {i: (i + 1,) for i in range(depth)}
    parent = {i + 1: i for i in range(depth)}
    return DirectedTree(vertices, 0, children, parent, depth)


def build_two_ray_tree(depth: int) -> DirectedTree:
    """Two rays glued at the root, vertices labelled ``(branch, level)``."""
    depth = _check_depth(depth)
    root = (0, 0)
    vertices = [root]
    children: dict = {root: ((1, 1), (2, 1))}
    parent: dict = {}
    for i in range(1, depth + 1):
        for j in (1, 2):
            v = (j, i)
            vertices.append(v)
            parent[v] = root if i == 1 else (j, i - 1)
            if i < depth:
                children[v] = ((j, i + 1),)
    return DirectedTree(tuple(vertices), root, children, parent, depth)


def _build_from_child_counts(counts, cap: int) -> DirectedTree:
    depth = len(counts)
    vertices = [0]
    children: dict = {}
    parent: dict = {}
    current = [0]
    nxt_id = 1
    for n, row in enumerate(counts):
        if len(row) != len(current):
            raise TreeSpecError(
                f"generation {n} has {len(current)} vertices but {len(row)} child counts")
        new = []
        for v, c in zip(current, row):
            if isinstance(c, bool) or not isinstance(c, int) or c < 1:
                raise TreeSpecError(
                    f"child counts must be positive integers, got {c!r} at generation {n}")
            kids = tuple(range(nxt_id, nxt_id + c))
            nxt_id += c
            children[v] = kids
            for u in kids:
                parent[u] = v
            new.extend(kids)
        if len(new) > cap:
            raise TreeSpecError(
                f"generation {n + 1} has {len(new)} vertices, above the cap {cap}")
        vertices.extend(new)
        current = new
    return DirectedTree(tuple(vertices), 0, children, parent, depth)


def _sizes_to_child_counts(sizes) -> list[list[int]]:
    if not sizes or sizes[0] != 1:
        raise TreeSpecError("generation sizes must start with 1 (the root)")
    out = []
    for n in range(len(sizes) - 1):
        a, b = sizes[n], sizes[n + 1]
        for c in (a, b):
            if isinstance(c, bool) or not isinstance(c, int) or c < 1:
                raise TreeSpecError(f"generation sizes must be positive integers, got {c!r}")
        if b < a:
            raise TreeSpecError(
                f"generation {n + 1} is smaller than generation {n}: the tree would have leaves")
        extra = b - a
        row = [1] * a
        i = 0
        while extra > 0:
            row[i % a] += 1
            extra -= 1
            i += 1
        out.append(row)
    return out


def parse_tree_spec(doc: dict | str) -> TreeSpec:
    """Validate a JSON tree-spec document (dict or JSON string)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise TreeSpecError(f"tree spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise TreeSpecError("tree spec must be a JSON object")
    unknown = set(doc) - _SPEC_FIELDS
    if unknown:
        raise TreeSpecError(f"unknown tree spec fields: {sorted(unknown)}")
    kind = doc.get("kind")
    if kind not in _SPEC_KINDS:
        raise TreeSpecError(f"kind must be one of {_SPEC_KINDS}, got {kind!r}")
    if "depth" not in doc:
        raise TreeSpecError("tree spec requires 'depth'")
    depth = _check_depth(doc["depth"])
    counts = doc.get("counts")
    if kind in ("path", "two_ray"):
        if counts is not None:
            raise TreeSpecError(f"kind {kind!r} takes no 'counts'")
        return TreeSpec(kind, depth)
    if not isinstance(counts, list) or not counts:
        raise TreeSpecError("kind 'generations' requires a non-empty 'counts' list")
    if all(isinstance(c, list) for c in counts):
        if len(counts) != depth:
            raise TreeSpecError(
                f"nested counts must list {depth} generations, got {len(counts)}")
    elif any(isinstance(c, list) for c in counts):
        raise TreeSpecError("counts must be all integers or all lists")
    elif len(counts) != depth + 1:
        raise TreeSpecError(
            f"generation sizes must have depth + 1 = {depth + 1} entries, got {len(counts)}")
    return TreeSpec(kind, depth, _tuplify(counts))


def build_from_spec(spec: TreeSpec | dict | str,
                    generation_cap: int = DEFAULT_GENERATION_CAP) -> DirectedTree:
    """Build the tree described by ``spec``.

    Parameters
    ----------
    spec
        A :class:`TreeSpec`, or a dict / JSON string accepted by
        :func:`parse_tree_spec`.
    generation_cap
        Upper bound on vertices per generation; exceeding it raises.
    """
    if not isinstance(spec, TreeSpec):
        spec = parse_tree_spec(spec)
    if spec.kind == "path":
        return build_path_tree(spec.depth)
    if spec.kind == "two_ray":
        return build_two_ray_tree(spec.depth)
    counts = spec.counts
    if counts and isinstance(counts[0], tuple):
        rows = [list(r) for r in counts]
    else:
        rows = _sizes_to_child_counts(list(counts))
    if len(rows[0]) != 1:
        raise TreeSpecError("the root generation has exactly one vertex")
    return _build_from_child_counts(rows, generation_cap)


def spec_of(tree: DirectedTree) -> TreeSpec:
    """Canonical nested ``generations`` spec of ``tree``."""
    rows = []
    for n in range(tree.frontier_depth):
        rows.append(tuple(len(tree.chi(v)) for v in tree.generation(n)))
    return TreeSpec("generations", tree.frontier_depth, tuple(rows))


def truncate(tree: DirectedTree, depth: int) -> DirectedTree:
    """Restrict ``tree`` to vertices of depth ``<= depth``."""
    depth = _check_depth(depth)
    if depth > tree.frontier_depth:
        raise TreeSpecError(
            f"cannot truncate at depth {depth} beyond the horizon {tree.frontier_depth}")
    if depth == tree.frontier_depth:
        return tree
    keep = tuple(v for v in tree.vertices if tree.depth[v] <= depth)
    children = {v: kids for v, kids in tree.children.items() if tree.depth[v] < depth}
    parent = {u: p for u, p in tree.parent.items() if tree.depth[u] <= depth}
    return DirectedTree(keep, tree.root, children, parent, depth)
