"""Causal DAGs and the d-separation queries behind censoring mechanisms C3-C5.

``d_separated`` uses a reachability search over (node, direction) states. The
path-enumeration routines (``enumerate_paths``, ``path_is_blocked``) are a slow
independent check and supply witness paths for failed queries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from completecase.errors import GraphError


class Dag:
    """Directed acyclic graph over named nodes."""

    def __init__(self, edges=(), nodes=()):
        self.nodes: set[str] = set(nodes)
        self.parents: dict[str, set[str]] = {}
        self.children: dict[str, set[str]] = {}
        for v in self.nodes:
            self.parents.setdefault(v, set())
            self.children.setdefault(v, set())
        for a, b in edges:
            if a == b:
                raise GraphError(f"self-loop on {a!r} is not allowed")
            for v in (a, b):
                self.nodes.add(v)
                self.parents.setdefault(v, set())
                self.children.setdefault(v, set())
            self.children[a].add(b)
            self.parents[b].add(a)
        try:
            self.order = list(TopologicalSorter({v: self.parents[v] for v in self.nodes}).static_order())
        except CycleError as exc:
            raise GraphError(f"graph is not acyclic (cycle through {' -> '.join(exc.args[1])})") from None

    @property
    def edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, kids in self.children.items() for b in kids}

    def neighbors(self, v: str) -> set[str]:
        return self.parents[v] | self.children[v]

    def descendants(self, v: str) -> set[str]:
        seen, stack = set(), [v]
        while stack:
            for c in self.children[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def ancestors_of(self, vs) -> set[str]:
        """``vs`` together with all of their ancestors."""
        seen, stack = set(vs), list(vs)
        while stack:
            for p in self.parents[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def _check(self, *names):
        for v in names:
            if v not in self.nodes:
                raise GraphError(f"unknown node {v!r}")

    @classmethod
    def parse(cls, text: str) -> "Dag":
        """One ``FROM -> TO`` edge per line; ``#`` starts a comment.

        A line holding a single name declares an isolated node.
        """
        edges, nodes = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "->" not in line:
                if line.split() == [line]:
                    nodes.append(line)
                    continue
                raise GraphError(f"line {lineno}: expected 'FROM -> TO', got {raw.strip()!r}")
            a, b = (part.strip() for part in line.split("->", 1))
            if not a or not b or "->" in b:
                raise GraphError(f"line {lineno}: expected 'FROM -> TO', got {raw.strip()!r}")
            edges.append((a, b))
        return cls(edges, nodes)


def d_separated(dag: Dag, a: str, b: str, cond=()) -> bool:
    """True iff every path between ``a`` and ``b`` is blocked given ``cond``."""
    cond = set(cond)
    dag._check(a, b, *cond)
    if a == b:
        raise GraphError("d-separation query needs two distinct nodes")
    if a in cond or b in cond:
        raise GraphError("query endpoints may not be in the conditioning set")
    # a collider is open iff it has a descendant (or is itself) in cond
    open_colliders = dag.ancestors_of(cond)
    # state (v, up): up means v was entered from one of its children
    start = [(p, True) for p in dag.parents[a]] + [(c, False) for c in dag.children[a]]
    seen = set()
    queue = deque(start)
    while queue:
        v, up = queue.popleft()
        if (v, up) in seen:
            continue
        seen.add((v, up))
        if up:
            # reached v from one of its children: v is a non-collider here
            if v in cond:
                continue
            if v == b:
                return False
            queue.extend((p, True) for p in dag.parents[v])
            queue.extend((c, False) for c in dag.children[v])
        else:
            # reached v from one of its parents
            if v == b:
                return False
            if v not in cond:
                queue.extend((c, False) for c in dag.children[v])
            if v in open_colliders:
                queue.extend((p, True) for p in dag.parents[v])
    return True


def enumerate_paths(dag: Dag, a: str, b: str) -> list[list[str]]:
    """All simple paths between ``a`` and ``b`` ignoring direction, sorted."""
    dag._check(a, b)
    if a == b:
        raise GraphError("path query needs two distinct nodes")
    paths = []
    path = [a]
    on_path = {a}

    def walk(v):
        for nxt in sorted(dag.neighbors(v)):
            if nxt in on_path:
                continue
            path.append(nxt)
            if nxt == b:
                paths.append(list(path))
            else:
                on_path.add(nxt)
                walk(nxt)
                on_path.discard(nxt)
            path.pop()

    walk(a)
    return sorted(paths)


def path_is_blocked(dag: Dag, path, cond=()) -> bool:
    cond = set(cond)
    for prev, v, nxt in zip(path, path[1:], path[2:]):
        collider = prev in dag.parents[v] and nxt in dag.parents[v]
        if collider:
            if v not in cond and not (dag.descendants(v) & cond):
                return True
        elif v in cond:
            return True
    return False


def d_separated_bruteforce(dag: Dag, a: str, b: str, cond=()) -> bool:
    return all(path_is_blocked(dag, p, cond) for p in enumerate_paths(dag, a, b))


def open_path(dag: Dag, a: str, b: str, cond=()) -> list[str] | None:
    """First unblocked path in enumeration order, or None."""
    for p in enumerate_paths(dag, a, b):
        if not path_is_blocked(dag, p, cond):
            return p
    return None


def format_path(dag: Dag, path) -> str:
    parts = [path[0]]
    for u, v in zip(path, path[1:]):
        parts.append("->" if v in dag.children[u] else "<-")
        parts.append(v)
    return " ".join(parts)


MECHANISMS = ("C3", "C4", "C5")


@dataclass(frozen=True)
class MechanismQuery:
    """Bind DAG nodes to roles. ``z`` may name several nodes."""

    target: str
    y: str
    x: str
    c: str
    z: tuple[str, ...] = ()
    delta: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        if self.target in ("C1", "C2"):
            raise GraphError(
                f"{self.target} is a statement about the error distribution given the censoring "
                "indicator; it has no DAG rendering and cannot be checked graphically"
            )
        if self.target not in MECHANISMS:
            raise GraphError(f"unknown mechanism {self.target!r}; expected C3, C4 or C5")
        bound = [self.y, self.x, self.c, *self.z] + ([self.delta] if self.delta else [])
        if len(set(bound)) != len(bound):
            raise GraphError("role bindings must name distinct nodes")


@dataclass
class Verdict:
    target: str
    holds: bool
    witness: list[str] | None = None
    witness_pair: tuple[str, str] | None = None
    cond: frozenset = field(default_factory=frozenset)


def _queries(q: MechanismQuery):
    """(a, b, cond) triples whose conjunction defines the mechanism."""
    if q.target == "C3":
        return [(q.c, q.y, frozenset({q.x, *q.z}))]
    if q.target == "C4":
        return [(q.c, v, frozenset(q.z)) for v in (q.x, q.y)]
    return [(q.c, v, frozenset()) for v in (q.x, q.y, *q.z)]


def _bindings_exist(dag: Dag, q: MechanismQuery):
    names = [q.y, q.x, q.c, *q.z] + ([q.delta] if q.delta else [])
    dag._check(*names)


def check_mechanism(dag: Dag, q: MechanismQuery) -> bool:
    _bindings_exist(dag, q)
    return all(d_separated(dag, a, b, cond) for a, b, cond in _queries(q))


def explain_mechanism(dag: Dag, q: MechanismQuery) -> Verdict:
    """Like ``check_mechanism`` but also returns an open path when it fails."""
    _bindings_exist(dag, q)
    for a, b, cond in _queries(q):
        if not d_separated(dag, a, b, cond):
            return Verdict(q.target, False, open_path(dag, a, b, cond), (a, b), cond)
    return Verdict(q.target, True)
