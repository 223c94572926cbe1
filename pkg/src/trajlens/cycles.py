"""Maximum mean cycle values of a deterministic program (Karp's algorithm).

For a finite deterministic program the limit of ``v_n(s)`` is the largest
mean payoff over the cycles reachable from ``s``.  This module computes that
quantity directly from the graph, independently of the value recursion, and
serves as its oracle.
"""

from __future__ import annotations

from fractions import Fraction

import networkx as nx

from .dp import DPModel


def karp_max_mean(nodes: list[int], edges: dict[int, tuple[int, ...]], weight: dict[int, int]) -> Fraction:
    """Maximum cycle mean of a strongly connected digraph.

    Edge ``u -> v`` carries the weight of its tail ``u``.  ``nodes`` must
    induce a strongly connected subgraph containing at least one cycle.
    """
    k = len(nodes)
    pos = {u: i for i, u in enumerate(nodes)}
    neg = None  # stands for -infinity
    # best[j][v]: maximal weight of a walk of exactly j edges from nodes[0] to v
    best = [[neg] * k for _ in range(k + 1)]
    best[0][0] = 0
    for j in range(1, k + 1):
        prev, cur = best[j - 1], best[j]
        for u in nodes:
            pu = prev[pos[u]]
            if pu is None:
                continue
            w = pu + weight[u]
            for v in edges[u]:
                if v in pos and (cur[pos[v]] is None or w > cur[pos[v]]):
                    cur[pos[v]] = w
    result = None
    for i in range(k):
        dn = best[k][i]
        if dn is None:
            continue
        worst = min(
            Fraction(dn - best[j][i], k - j) for j in range(k) if best[j][i] is not None
        )
        if result is None or worst > result:
            result = worst
    assert result is not None, "component has no cycle"
    return result


def max_mean_cycle_values(model: DPModel) -> list[Fraction]:
    """Exact best reachable cycle mean for every state."""
    scale = model.scale
    weight = dict(enumerate(model.int_payoffs))
    edges = {s: st.successors for s, st in enumerate(model.states)}
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(model)))
    graph.add_edges_from((s, t) for s, succ in edges.items() for t in succ)
    dag = nx.condensation(graph)

    best: dict[int, Fraction] = {}
    for c in reversed(list(nx.topological_sort(dag))):
        members = sorted(dag.nodes[c]["members"])
        cyclic = len(members) > 1 or members[0] in edges[members[0]]
        value = None
        if cyclic:
            value = karp_max_mean(members, edges, weight) / scale
        for d in dag.successors(c):
            if value is None or best[d] > value:
                value = best[d]
        best[c] = value
    mapping = dag.graph["mapping"]
    return [best[mapping[s]] for s in range(len(model))]
