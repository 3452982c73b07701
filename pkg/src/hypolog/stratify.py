"""Temporal dependency analysis and the T-stratification decision.

Negation is admissible when no derivation can pass through negated
dependencies infinitely often.  Over the quotient graph (one node per
predicate, edges weighted with relative time shifts) that is equivalent
to: no closed walk that contains a negative edge and has total shift >= 0,
and no negative edge in a strongly connected component whose time tracking
is broken by a rigid or unanchored dependency.

Shifts are relative: a rule `q(X, T+b), ... -> p(X, T+a)` contributes an
edge p -> q with shift b-a.  Edges whose body time is not tied to the head
time variable (rigid heads, constant timestamps, unshared variables) are
unanchored: any shift is realizable through them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .program import Program
from .terms import TimeExpr, TimePoint


@dataclass(frozen=True)
class DepEdge:
    src: str
    dst: str
    shift: Optional[int]  # None when unanchored
    negative: bool

    def label(self) -> str:
        sign = "-" if self.negative else "+"
        shift = "?" if self.shift is None else f"{self.shift:+d}"
        return f"{self.src} {sign}({shift})> {self.dst}"


@dataclass
class StratificationReport:
    stratified: bool
    strata: dict[str, int]              # finite-graph node label -> level
    counterexample: Optional[tuple[str, ...]]
    predicate_levels: dict[str, int]    # base level per predicate
    time_coefficient: int               # ground level = coeff * t + base
    has_unanchored: bool = False

    def ground_level(self, pred: str, t: Optional[int]) -> int:
        base = self.predicate_levels.get(pred, 0)
        if t is None:
            return base
        return self.time_coefficient * t + base


def dependency_edges(program: Program) -> list[DepEdge]:
    edges: list[DepEdge] = []
    for rule in program.rules:
        head = rule.head
        head_temporal = program.is_temporal(head.pred)
        head_time = head.args[-1] if head_temporal else None
        for lit in rule.body:
            body_temporal = program.is_temporal(lit.pred)
            shift: Optional[int]
            if not body_temporal:
                shift = 0
            elif (
                isinstance(head_time, TimeExpr)
                and isinstance(lit.atom.args[-1], TimeExpr)
                and lit.atom.args[-1].var == head_time.var
            ):
                shift = lit.atom.args[-1].offset - head_time.offset
            else:
                shift = None
            edges.append(DepEdge(head.pred, lit.pred, shift, lit.negated))
    return edges


def _sccs(nodes: list[str], edges: list[DepEdge]) -> list[set[str]]:
    """Tarjan's strongly connected components, iterative."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        if e.src in succ and e.dst in succ:
            succ[e.src].append(e.dst)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[set[str]] = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in index:
                    index[child] = low[child] = counter[0]
                    counter[0] += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(succ[child])))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.add(member)
                    if member == node:
                        break
                out.append(comp)
    return out


def _longest_walks(source: str, comp: set[str], edges: list[DepEdge]
                   ) -> Optional[dict[str, int]]:
    """Maximal total shift of walks from source within the component.

    Returns None when a positive-shift cycle makes walks unbounded.
    Standard Bellman-Ford, maximizing."""
    dist = {n: None for n in comp}
    dist[source] = 0
    inner = [e for e in edges if e.src in comp and e.dst in comp]
    for _ in range(len(comp)):
        changed = False
        for e in inner:
            d = dist[e.src]
            if d is None:
                continue
            cand = d + (e.shift or 0)
            if dist[e.dst] is None or cand > dist[e.dst]:
                dist[e.dst] = cand
                changed = True
        if not changed:
            return {n: d for n, d in dist.items() if d is not None}
    return None  # still relaxing after |comp| rounds: positive cycle


def _find_cycle_through(edge: DepEdge, comp: set[str], edges: list[DepEdge]
                        ) -> tuple[str, ...]:
    """A simple path dst -> src inside the component, rendered with
    cumulative shifts, closing the loop through `edge`."""
    succ: dict[str, list[DepEdge]] = {}
    for e in edges:
        if e.src in comp and e.dst in comp:
            succ.setdefault(e.src, []).append(e)
    path: list[DepEdge] = []
    seen = {edge.dst}

    def dfs(node: str) -> bool:
        if node == edge.src:
            return True
        for e in succ.get(node, []):
            if e.dst in seen and e.dst != edge.src:
                continue
            path.append(e)
            seen.add(e.dst)
            if dfs(e.dst):
                return True
            path.pop()
        return False

    dfs(edge.dst)
    labels = [f"{edge.src}(T)"]
    total = edge.shift or 0
    labels.append(_node_label(edge.dst, total) + ("  [via not]" if edge.negative else ""))
    for e in path:
        total += e.shift or 0
        labels.append(_node_label(e.dst, total) + ("  [via not]" if e.negative else ""))
    return tuple(labels)


def _node_label(pred: str, shift: int) -> str:
    if shift == 0:
        return f"{pred}(T)"
    return f"{pred}(T{shift:+d})"


def check_t_stratification(program: Program) -> StratificationReport:
    """Decide whether negation admits a time-indexed stratification.

    The verdict is computed on the quotient graph; the report also carries
    the finite node-level assignment (on nodes p(T+k)) and a per-predicate
    linear form for ground levels: level(p, t) = coeff * t + base."""
    edges = dependency_edges(program)
    nodes = sorted(program.signature)
    negatives = [e for e in edges if e.negative]
    if not negatives:
        report = StratificationReport(
            stratified=True,
            strata=_finite_node_levels(program, edges),
            counterexample=None,
            predicate_levels={p: 0 for p in nodes},
            time_coefficient=0,
        )
        return report

    has_unanchored = any(e.shift is None for e in edges)
    comps = _sccs(nodes, edges)
    comp_of = {n: i for i, comp in enumerate(comps) for n in comp}
    for e in negatives:
        if comp_of[e.src] != comp_of[e.dst]:
            continue
        comp = comps[comp_of[e.src]]
        inner_unanchored = any(
            x.shift is None
            for x in edges
            if x.src in comp and x.dst in comp
        )
        if inner_unanchored:
            return StratificationReport(
                stratified=False,
                strata={},
                counterexample=_find_cycle_through(e, comp, edges),
                predicate_levels={},
                time_coefficient=0,
                has_unanchored=True,
            )
        walks = _longest_walks(e.dst, comp, edges)
        if walks is None or (e.shift or 0) + walks.get(e.src, 0) >= 0:
            return StratificationReport(
                stratified=False,
                strata={},
                counterexample=_find_cycle_through(e, comp, edges),
                predicate_levels={},
                time_coefficient=0,
                has_unanchored=has_unanchored,
            )

    coeff, base = _linear_assignment(program, edges)
    return StratificationReport(
        stratified=True,
        strata=_finite_node_levels(program, edges),
        counterexample=None,
        predicate_levels=base,
        time_coefficient=coeff,
        has_unanchored=has_unanchored,
    )


def _linear_assignment(program: Program, edges: list[DepEdge]
                       ) -> tuple[int, dict[str, int]]:
    """Ground levels of shape coeff * t + base[pred].

    An anchored edge p ->(shift d) q demands base[q] <= base[p] - coeff*d
    (minus 1 more when negative); rigid endpoints contribute no t term.
    Solved as difference constraints by Bellman-Ford; feasible whenever the
    verdict was positive and anchoring is complete."""
    nodes = sorted(program.signature)
    negative_count = sum(1 for e in edges if e.negative)
    coeff = negative_count + 1

    def constraint(e: DepEdge) -> Optional[int]:
        # base[dst] - base[src] <= bound
        src_t = program.is_temporal(e.src)
        dst_t = program.is_temporal(e.dst)
        strict = 1 if e.negative else 0
        if e.shift is None:
            return None  # unanchored: handled conservatively below
        if src_t and dst_t:
            return -coeff * e.shift - strict
        if src_t and not dst_t:
            return -strict  # worst case t = 0
        if not src_t and not dst_t:
            return -strict
        return None  # rigid -> temporal is unanchored by construction

    base = {n: 0 for n in nodes}
    for _ in range(len(nodes) + 1):
        changed = False
        for e in edges:
            bound = constraint(e)
            if bound is None:
                continue
            if base[e.dst] > base[e.src] + bound:
                base[e.dst] = base[e.src] + bound
                changed = True
        if not changed:
            break
    else:
        # Negative cycle in the constraint graph; fall back to zero levels.
        # Only reachable through unanchored corners that the verdict has
        # already vetted.
        return coeff, {n: 0 for n in nodes}
    lift = -min(base.values(), default=0)
    return coeff, {n: b + lift for n, b in base.items()}


def _finite_node_levels(program: Program, edges: list[DepEdge]
                        ) -> dict[str, int]:
    """The iterative strata construction on the finite node graph.

    Nodes are predicates at relative shifts p(T+k), expanded only for
    k >= 0 and capped; a node is assigned level i when, after removing all
    lower levels, no negative edge is reachable from it."""
    cap = max(
        (abs(e.shift) for e in edges if e.shift is not None), default=0
    ) * max(1, len(program.signature))
    anchored: dict[str, list[DepEdge]] = {}
    for e in edges:
        anchored.setdefault(e.src, []).append(e)

    nodes: set[tuple[str, int]] = set()
    graph: dict[tuple[str, int], list[tuple[tuple[str, int], bool]]] = {}
    work = [(p, 0) for p in sorted(program.signature)]
    while work:
        node = work.pop()
        if node in nodes:
            continue
        nodes.add(node)
        pred, k = node
        graph[node] = []
        if k < 0 or k > cap:
            continue  # boundary: created but not expanded
        for e in anchored.get(pred, []):
            child_k = k + e.shift if e.shift is not None else 0
            child = (e.dst, child_k)
            graph[node].append((child, e.negative))
            work.append(child)

    levels: dict[tuple[str, int], int] = {}
    remaining = set(nodes)
    level = 0
    while remaining:
        # Nodes from which no negative edge is reachable inside `remaining`.
        reach_neg: set[tuple[str, int]] = set()
        changed = True
        while changed:
            changed = False
            for node in remaining:
                if node in reach_neg:
                    continue
                for child, negative in graph.get(node, []):
                    if child not in remaining:
                        continue
                    if negative or child in reach_neg:
                        reach_neg.add(node)
                        changed = True
                        break
        drained = remaining - reach_neg
        if not drained:
            break  # cannot drain: leave the rest unassigned
        for node in drained:
            levels[node] = level
        remaining -= drained
        level += 1
    return {_node_label(p, k): lvl for (p, k), lvl in levels.items()}
