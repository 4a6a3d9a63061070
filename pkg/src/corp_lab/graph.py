"""Leader-follower digraph model and its spectral quantities.

Node 0 is the leader; followers are nodes 1..N. Edge (j, i, w) means agent i
receives information from agent j with weight a_ij = w > 0.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from corp_lab.errors import AssumptionError
from corp_lab.matlib import eig

# Safety factor applied to the spectral bound when resolving omega = "auto":
# the bound itself is admissible, the margin guards eigenvalue error.
OMEGA_SAFETY = 0.9


@dataclass(frozen=True)
class Digraph:
    """Weighted digraph over nodes {0..N} with node 0 as the leader."""

    n_followers: int
    edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_followers < 1:
            raise ValueError("need at least one follower")
        norm_edges = []
        seen = set()
        for edge in self.edges:
            src, dst, w = int(edge[0]), int(edge[1]), float(edge[2])
            if not (0 <= src <= self.n_followers and 0 <= dst <= self.n_followers):
                raise ValueError(f"edge ({src},{dst}) references unknown node")
            if src == dst:
                raise ValueError(f"self-loop at node {src}")
            if dst == 0:
                raise ValueError("edges into the leader (node 0) are not allowed")
            if w <= 0.0:
                raise ValueError(f"edge ({src},{dst}) has nonpositive weight {w}")
            if (src, dst) in seen:
                raise ValueError(f"duplicate edge ({src},{dst})")
            seen.add((src, dst))
            norm_edges.append((src, dst, w))
        object.__setattr__(self, "edges", tuple(norm_edges))

    def adjacency(self):
        """(N+1)x(N+1) matrix with a[i, j] = weight of edge j -> i."""
        n = self.n_followers + 1
        a = np.zeros((n, n))
        for src, dst, w in self.edges:
            a[dst, src] = w
        return a

    def in_neighbors(self, node):
        return sorted(src for src, dst, _ in self.edges if dst == node)

    def in_weight(self, node):
        return sum(w for _, dst, w in self.edges if dst == node)


@dataclass(frozen=True)
class GraphMatrices:
    h: np.ndarray
    d: np.ndarray
    dh: np.ndarray
    spectrum_dh: np.ndarray


def build_matrices(g: Digraph) -> GraphMatrices:
    """Assemble H (in-weight Laplacian over followers), D = diag(1/in-weight),
    DH, and the spectrum of DH."""
    n = g.n_followers
    adj = g.adjacency()
    weights = adj.sum(axis=1)  # total in-weight per node, leader row is zero
    for i in range(1, n + 1):
        if weights[i] <= 0.0:
            raise AssumptionError(
                f"normalization undefined: follower {i} has no in-neighbor"
            )
    h = np.diag(weights[1:]) - adj[1:, 1:]
    d = np.diag(1.0 / weights[1:])
    dh = d @ h
    return GraphMatrices(h=h, d=d, dh=dh, spectrum_dh=eig(dh))


def check_spanning_tree(g: Digraph) -> bool:
    """True iff every follower is reachable from the leader node 0."""
    succ = {node: [] for node in range(g.n_followers + 1)}
    for src, dst, _ in g.edges:
        succ[src].append(dst)
    seen = {0}
    frontier = deque([0])
    while frontier:
        node = frontier.popleft()
        for nxt in succ[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen) == g.n_followers + 1


def omega_bound(gm: GraphMatrices) -> float:
    """Upper end of the admissible gain-scaling interval: 2 * min Re(lambda(DH))."""
    min_re = float(np.min(gm.spectrum_dh.real))
    if min_re <= 1e-12:
        raise AssumptionError(
            "DH has an eigenvalue with nonpositive real part; leader-rooted "
            "connectivity is violated or the spectrum computation failed"
        )
    return 2.0 * min_re


def default_omega(gm: GraphMatrices) -> float:
    """omega resolved as a safe fraction of the admissible bound."""
    return OMEGA_SAFETY * omega_bound(gm)
