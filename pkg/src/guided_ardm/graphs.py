"""Small-graph domain: variable layout, generation orders, validity.

A graph on n nodes is flattened into D = n + n(n-1)/2 categorical
variables: node-type variables 0..n-1 first, then one variable per
unordered pair (i, j), i < j, in lexicographic pair order. Edge category
0 always means "no edge".

The toy alphabet has two node types {A, B} (categories 0 and 1) and two
edge categories {none, bond}. A graph is valid when

* every type-B node has at least one incident edge ("isolated-B"), and
* the edge graph restricted to nodes of degree >= 1 is connected or
  empty ("disconnected").

Three generation-order families are provided. "uniform" permutes all D
variables. "nses" places all node variables (in random order), then all
edge variables (in random order). "nesn" interleaves: a random node
sequence v_1..v_n, where each v_k is followed immediately by the edge
variables joining v_k to the already-placed v_1..v_{k-1}, shuffled within
that block. For n = 3 the block pattern is node, node, edge, node, edge,
edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import GenerationOrder, MaskedSample
from .models import TabularJoint, fit_tabular

NO_EDGE = 0

REASON_ISOLATED_B = "isolated-B"
REASON_DISCONNECTED = "disconnected"


def graph_dimension(n: int) -> int:
    """Variable count for an n-node graph: n node vars + C(n,2) edge vars."""
    if n < 1:
        raise ValueError("need at least one node")
    return n + n * (n - 1) // 2


@dataclass(frozen=True, slots=True)
class GraphLayout:
    """Bijection between graph structure and flat variable positions."""

    n: int
    node_categories: int = 2
    edge_categories: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one node")
        if self.node_categories < 1 or self.edge_categories < 1:
            raise ValueError("need at least one category per variable")

    @property
    def dimension(self) -> int:
        return graph_dimension(self.n)

    @property
    def num_edge_vars(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def categories(self) -> tuple[int, ...]:
        return (self.node_categories,) * self.n + (
            self.edge_categories,
        ) * self.num_edge_vars

    def node_var(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise ValueError(f"node {i} out of range")
        return i

    def edge_var(self, i: int, j: int) -> int:
        """Variable index of the unordered pair; order of i, j is free."""
        if i == j:
            raise ValueError("no self edges")
        i, j = (i, j) if i < j else (j, i)
        if not 0 <= i < j < self.n:
            raise ValueError(f"pair ({i}, {j}) out of range")
        # pairs (0,1), (0,2), ..., (0,n-1), (1,2), ... in lexicographic order
        offset = i * (2 * self.n - i - 1) // 2 + (j - i - 1)
        return self.n + offset

    def var_pair(self, var: int) -> tuple[int, int]:
        """Inverse of edge_var."""
        if not self.n <= var < self.dimension:
            raise ValueError(f"variable {var} is not an edge variable")
        offset = var - self.n
        i = 0
        row = self.n - 1
        while offset >= row:
            offset -= row
            i += 1
            row -= 1
        return i, i + 1 + offset

    def edge_pairs(self) -> list[tuple[int, int]]:
        return [
            (i, j) for i in range(self.n) for j in range(i + 1, self.n)
        ]


class OrderKind(str, Enum):
    UNIFORM = "uniform"
    NSES = "nses"
    NESN = "nesn"


def sample_order(
    layout: GraphLayout, kind: OrderKind, generator: np.random.Generator
) -> GenerationOrder:
    """Draw a generation order of the given family for this layout."""
    kind = OrderKind(kind)
    d = layout.dimension
    if kind is OrderKind.UNIFORM:
        return GenerationOrder(tuple(int(p) for p in generator.permutation(d)))
    if kind is OrderKind.NSES:
        nodes = generator.permutation(layout.n)
        edges = generator.permutation(layout.num_edge_vars) + layout.n
        return GenerationOrder(
            tuple(int(p) for p in nodes) + tuple(int(p) for p in edges)
        )
    # nesn: each node is followed by its edges to already-placed nodes
    nodes = [int(v) for v in generator.permutation(layout.n)]
    seq: list[int] = [nodes[0]]
    for k in range(1, layout.n):
        v = nodes[k]
        seq.append(v)
        block = [layout.edge_var(v, u) for u in nodes[:k]]
        generator.shuffle(block)
        seq.extend(block)
    return GenerationOrder(tuple(seq))


@dataclass(frozen=True, slots=True)
class ValidityReport:
    valid: bool
    reasons: tuple[str, ...]


def graph_validity(sample: MaskedSample, layout: GraphLayout) -> ValidityReport:
    """Check the validity grammar on a complete graph sample."""
    if sample.categories != layout.categories:
        raise ValueError("sample does not match the layout")
    if not sample.is_complete:
        raise ValueError("validity needs a complete sample")
    n = layout.n
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, j in layout.edge_pairs():
        if sample.values[layout.edge_var(i, j)] != NO_EDGE:
            adjacency[i].append(j)
            adjacency[j].append(i)
    reasons = []
    if any(
        sample.values[layout.node_var(i)] == 1 and not adjacency[i]
        for i in range(n)
    ):
        reasons.append(REASON_ISOLATED_B)
    touched = [i for i in range(n) if adjacency[i]]
    if touched:
        seen = {touched[0]}
        frontier = [touched[0]]
        while frontier:
            cur = frontier.pop()
            for nxt in adjacency[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        if len(seen) != len(touched):
            reasons.append(REASON_DISCONNECTED)
    return ValidityReport(valid=not reasons, reasons=tuple(reasons))


@dataclass(frozen=True, slots=True)
class DimensionDistribution:
    """Distribution over node counts, hence over graph dimensions."""

    node_counts: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.node_counts)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "node_counts", counts)
        object.__setattr__(self, "probs", probs)
        if len(counts) != len(probs) or not counts:
            raise ValueError("need matching nonempty counts and probs")
        if len(set(counts)) != len(counts):
            raise ValueError("node counts must be distinct")
        if any(c < 1 for c in counts):
            raise ValueError("node counts must be positive")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("probs must be nonnegative and sum to 1")

    @classmethod
    def from_mapping(cls, mapping) -> "DimensionDistribution":
        items = sorted((int(n), float(p)) for n, p in mapping.items())
        return cls(tuple(n for n, _ in items), tuple(p for _, p in items))

    @classmethod
    def fit(cls, node_counts) -> "DimensionDistribution":
        """Empirical distribution of observed node counts."""
        counts: dict[int, int] = {}
        total = 0
        for n in node_counts:
            counts[int(n)] = counts.get(int(n), 0) + 1
            total += 1
        if total == 0:
            raise ValueError("need at least one observation")
        return cls.from_mapping({n: c / total for n, c in counts.items()})

    def prob_of(self, n: int) -> float:
        try:
            return self.probs[self.node_counts.index(n)]
        except ValueError:
            return 0.0

    def sample(self, generator: np.random.Generator) -> int:
        u = generator.random()
        acc = 0.0
        for n, p in zip(self.node_counts, self.probs):
            acc += p
            if u < acc:
                return n
        return self.node_counts[-1]


def sample_dimension(
    dist: DimensionDistribution, generator: np.random.Generator
) -> tuple[int, int]:
    """Draw a node count and return (n, D)."""
    n = dist.sample(generator)
    return n, graph_dimension(n)


def fit_valid_graphs(
    layout: GraphLayout,
    num_samples: int,
    generator: np.random.Generator,
    smoothing: float = 0.0,
) -> TabularJoint:
    """Data distribution for the toy benchmark: uniform conditioned on valid.

    Draws uniform assignments, keeps the valid ones (rejection), and fits
    a table to them. num_samples counts accepted graphs.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    categories = layout.categories
    accepted = []
    # Uniform proposals; acceptance rate is bounded away from zero at toy
    # sizes, but guard against a grammar that rejects everything.
    attempts = 0
    limit = 10000 * num_samples
    while len(accepted) < num_samples:
        if attempts >= limit:
            raise RuntimeError(
                f"rejection sampling accepted {len(accepted)} of {attempts} draws"
            )
        values = tuple(
            int(generator.integers(0, c)) for c in categories
        )
        attempts += 1
        sample = MaskedSample(categories, values)
        if graph_validity(sample, layout).valid:
            accepted.append(sample)
    return fit_tabular(accepted, smoothing=smoothing, categories=categories)


def to_graph_json(sample: MaskedSample, layout: GraphLayout) -> dict:
    """Graph form: node types plus the nonzero edges only."""
    if sample.categories != layout.categories:
        raise ValueError("sample does not match the layout")
    if not sample.is_complete:
        raise ValueError("need a complete sample")
    edges = [
        [i, j, sample.values[layout.edge_var(i, j)]]
        for i, j in layout.edge_pairs()
        if sample.values[layout.edge_var(i, j)] != NO_EDGE
    ]
    return {
        "n": layout.n,
        "node_types": [sample.values[layout.node_var(i)] for i in range(layout.n)],
        "edges": edges,
    }


def graph_from_json(
    doc: dict, node_categories: int = 2, edge_categories: int = 2
) -> tuple[MaskedSample, GraphLayout]:
    """Inverse of to_graph_json; absent pairs decode as NO_EDGE."""
    if not isinstance(doc, dict) or not {"n", "node_types", "edges"} <= set(doc):
        raise ValueError("expected an object with n, node_types, edges")
    layout = GraphLayout(int(doc["n"]), node_categories, edge_categories)
    node_types = list(doc["node_types"])
    if len(node_types) != layout.n:
        raise ValueError("node_types length must equal n")
    values = [int(v) for v in node_types] + [NO_EDGE] * layout.num_edge_vars
    for entry in doc["edges"]:
        i, j, c = (int(x) for x in entry)
        if c == NO_EDGE:
            raise ValueError("edge list must contain nonzero edges only")
        values[layout.edge_var(i, j)] = c
    return MaskedSample(layout.categories, tuple(values)), layout
