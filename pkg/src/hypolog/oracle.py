"""Brute-force reference semantics on finite worlds.

Everything here is deliberately ground and exhaustive: rules are
instantiated over a finite object universe and a bounded time range,
models are computed by naive forward chaining (stratified when negation is
present), and hypothetical/supported answers are enumerated by walking the
power set of candidate future atoms in cardinality order.  The engine is
never consulted; these functions are the independent side of every
soundness and completeness test.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import BudgetExceededError, NotStratifiedError
from .program import Program, Query
from .terms import (
    Atom,
    ObjectConst,
    ObjectVar,
    Substitution,
    TimeExpr,
    TimePoint,
)


@dataclass(frozen=True)
class GroundWorld:
    constants: tuple[str, ...]
    horizon: int

    @staticmethod
    def around(program: Program, facts: Iterable[Atom] = (),
               horizon: int | None = None, extra: Iterable[str] = ()
               ) -> "GroundWorld":
        consts = set(program.constants()) | set(extra)
        top = 0
        for f in facts:
            for arg in f.args:
                if isinstance(arg, ObjectConst):
                    consts.add(arg.name)
                elif isinstance(arg, TimePoint):
                    top = max(top, arg.value)
        if horizon is None:
            horizon = top + program.max_abs_offset() + 1
        return GroundWorld(tuple(sorted(consts)), horizon)


class GroundSpace:
    """Interned atoms and precomputed rule instances for one finite world."""

    def __init__(self, program: Program, world: GroundWorld):
        self.program = program
        self.world = world
        self.time_cap = world.horizon + program.max_abs_offset()
        self._ids: dict[Atom, int] = {}
        self._atoms: list[Atom] = []
        # (head, positive body, negative body), all interned.
        self.instances: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = []
        self.static_facts: list[int] = []
        self._by_pos_body: dict[int, list[int]] = {}
        self._by_head: dict[int, list[int]] = {}
        self._negation = program.has_negation()
        self._component_order: Optional[list[list[int]]] = None
        self._build()

    # -- interning

    def intern(self, atom: Atom) -> int:
        found = self._ids.get(atom)
        if found is None:
            found = len(self._atoms)
            self._ids[atom] = found
            self._atoms.append(atom)
        return found

    def atom(self, idx: int) -> Atom:
        return self._atoms[idx]

    # -- construction

    def _assignments(self, rule):
        object_vars: list[str] = []
        time_vars: list[str] = []
        for atom in [rule.head] + [l.atom for l in rule.body]:
            for arg in atom.args:
                if isinstance(arg, ObjectVar) and arg.name not in object_vars:
                    object_vars.append(arg.name)
                elif isinstance(arg, TimeExpr) and arg.var not in time_vars:
                    time_vars.append(arg.var)
        consts = [ObjectConst(c) for c in self.world.constants]
        times = [TimePoint(t) for t in range(self.time_cap + 1)]
        for objs in itertools.product(consts, repeat=len(object_vars)):
            for ts in itertools.product(times, repeat=len(time_vars)):
                mapping = dict(zip(object_vars, objs))
                mapping.update(zip(time_vars, ts))
                yield Substitution(mapping)

    def _build(self) -> None:
        from .errors import NegativeTimeError

        for rule in self.program.rules:
            if rule.is_fact():
                self.static_facts.append(self.intern(rule.head))
                continue
            for subst in self._assignments(rule):
                try:
                    head = subst.apply_atom(rule.head)
                    body = [subst.apply_literal(l) for l in rule.body]
                except NegativeTimeError:
                    continue
                atoms = [head] + [l.atom for l in body]
                if any(
                    isinstance(a.args[-1], TimePoint)
                    and a.args[-1].value > self.time_cap
                    for a in atoms
                    if self.program.is_temporal(a.pred)
                ):
                    continue
                h = self.intern(head)
                pos = tuple(
                    self.intern(l.atom) for l in body if not l.negated
                )
                negs = tuple(
                    self.intern(l.atom) for l in body if l.negated
                )
                iid = len(self.instances)
                self.instances.append((h, pos, negs))
                self._by_head.setdefault(h, []).append(iid)
                for b in pos:
                    self._by_pos_body.setdefault(b, []).append(iid)

    # -- models

    def model(self, base: Iterable[int]) -> set[int]:
        if self._negation:
            return self.stratified_model(base)
        counts = [len(pos) for (_, pos, _) in self.instances]
        model: set[int] = set()
        queue = deque()

        def add(a: int) -> None:
            if a not in model:
                model.add(a)
                queue.append(a)

        for a in self.static_facts:
            add(a)
        for a in base:
            add(a)
        for iid, (h, pos, _) in enumerate(self.instances):
            if not pos:
                add(h)
        while queue:
            a = queue.popleft()
            for iid in self._by_pos_body.get(a, ()):
                counts[iid] -= 1
                if counts[iid] == 0:
                    add(self.instances[iid][0])
        return model

    def _components(self) -> list[list[int]]:
        """SCCs of the ground dependency graph in bodies-first order;
        raises when a negative edge stays inside a component."""
        if self._component_order is not None:
            return self._component_order
        succ: dict[int, list[int]] = {}
        involved: set[int] = set()
        for h, pos, negs in self.instances:
            succ.setdefault(h, []).extend(pos + negs)
            involved.add(h)
            involved.update(pos)
            involved.update(negs)
        order: list[list[int]] = []
        index: dict[int, int] = {}
        low: dict[int, int] = {}
        on_stack: set[int] = set()
        stack: list[int] = []
        counter = [0]
        for root in sorted(involved):
            if root in index:
                continue
            work = [(root, iter(succ.get(root, ())))]
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
                        work.append((child, iter(succ.get(child, ()))))
                        advanced = True
                        break
                    if child in on_stack:
                        low[node] = min(low[node], index[child])
                if advanced:
                    continue
                work.pop()
                if work:
                    low[work[-1][0]] = min(low[work[-1][0]], low[node])
                if low[node] == index[node]:
                    comp = []
                    while True:
                        member = stack.pop()
                        on_stack.discard(member)
                        comp.append(member)
                        if member == node:
                            break
                    order.append(comp)
        comp_of: dict[int, int] = {}
        for i, comp in enumerate(order):
            for a in comp:
                comp_of[a] = i
        for h, _, negs in self.instances:
            for b in negs:
                if comp_of.get(h) == comp_of.get(b):
                    raise NotStratifiedError(
                        f"ground negation cycle through {self.atom(h)} "
                        f"and not {self.atom(b)}"
                    )
        self._component_order = order
        return order

    def stratified_model(self, base: Iterable[int]) -> set[int]:
        order = self._components()
        model: set[int] = set(self.static_facts)
        model.update(base)
        comp_index: dict[int, int] = {}
        for i, comp in enumerate(order):
            for a in comp:
                comp_index[a] = i
        instances_by_comp: dict[int, list[int]] = {}
        for iid, (h, _, _) in enumerate(self.instances):
            instances_by_comp.setdefault(comp_index[h], []).append(iid)
        for i, comp in enumerate(order):
            pending = instances_by_comp.get(i, [])
            changed = True
            while changed:
                changed = False
                for iid in pending:
                    h, pos, negs = self.instances[iid]
                    if h in model:
                        continue
                    if all(b in model for b in pos) and not any(
                        b in model for b in negs
                    ):
                        model.add(h)
                        changed = True
        return model

    # -- relevance restriction for hypothesis pools

    def future_edb_atoms(self, tau: int) -> list[int]:
        out = []
        for t in range(max(tau + 1, 0), self.world.horizon + 1):
            for pred, info in sorted(self.program.signature.items()):
                if not info.edb or not info.temporal:
                    continue
                for objs in itertools.product(
                    self.world.constants, repeat=info.arity - 1
                ):
                    atom = Atom(
                        pred,
                        tuple(ObjectConst(c) for c in objs)
                        + (TimePoint(t),),
                    )
                    out.append(self.intern(atom))
        return out

    def positively_relevant(self, goal: int) -> set[int]:
        """Atoms that can contribute positively to deriving the goal,
        through any parity of nested negation."""
        seen: set[tuple[int, bool]] = set()
        work = [(goal, True)]
        out: set[int] = set()
        while work:
            atom, positive = work.pop()
            if (atom, positive) in seen:
                continue
            seen.add((atom, positive))
            if positive:
                out.add(atom)
            for iid in self._by_head.get(atom, ()):
                _, pos, negs = self.instances[iid]
                for b in pos:
                    work.append((b, positive))
                for b in negs:
                    work.append((b, not positive))
        return out

    def derivation_support(self, goal: int, model: set[int]) -> set[int]:
        """Atoms appearing in some derivation of the goal inside `model`
        (positive programs only)."""
        out: set[int] = set()
        work = [goal]
        while work:
            atom = work.pop()
            if atom in out:
                continue
            out.add(atom)
            for iid in self._by_head.get(atom, ()):
                _, pos, _ = self.instances[iid]
                if all(b in model for b in pos):
                    work.extend(pos)
        return out


# ---------------------------------------------------------------------------
# Public operations

def ground_consequences(program: Program, facts: Iterable[Atom],
                        world: GroundWorld) -> set[Atom]:
    """Least model restricted to the world; stratified when negation is
    present (raises NotStratifiedError if the ground closure is not)."""
    space = GroundSpace(program, world)
    base = {space.intern(f) for f in facts}
    return {space.atom(i) for i in space.model(base)}


def _ground_substitutions(goal: Atom, world: GroundWorld):
    object_vars: list[str] = []
    time_vars: list[str] = []
    for arg in goal.args:
        if isinstance(arg, ObjectVar) and arg.name not in object_vars:
            object_vars.append(arg.name)
        elif isinstance(arg, TimeExpr) and arg.var not in time_vars:
            time_vars.append(arg.var)
    consts = [ObjectConst(c) for c in world.constants]
    times = [TimePoint(t) for t in range(world.horizon + 1)]
    for objs in itertools.product(consts, repeat=len(object_vars)):
        for ts in itertools.product(times, repeat=len(time_vars)):
            mapping = dict(zip(object_vars, objs))
            mapping.update(zip(time_vars, ts))
            yield Substitution(mapping)


def _minimal_subsets(pool: list[int], entails, max_size: int,
                     budget: list[int], require_nonempty: bool = False):
    """All inclusion-minimal subsets of `pool` satisfying `entails`,
    enumerated in cardinality order with a superset filter."""
    found: list[frozenset[int]] = []
    for size in range(max_size + 1):
        for combo in itertools.combinations(pool, size):
            budget[0] -= 1
            if budget[0] < 0:
                raise BudgetExceededError(
                    "oracle enumeration budget exhausted"
                )
            candidate = frozenset(combo)
            if any(prev <= candidate for prev in found):
                continue
            if entails(candidate):
                if require_nonempty and not candidate:
                    # An empty entailing set means no nonempty set is
                    # minimal: every candidate would be a superset.
                    return []
                found.append(candidate)
    return found


def enumerate_hans(query: Query, d_tau: Iterable[Atom], tau: int,
                   world: GroundWorld, *,
                   max_hypotheses: int | None = None,
                   budget: int = 2_000_000,
                   space: GroundSpace | None = None
                   ) -> set[tuple[Substitution, frozenset[Atom]]]:
    """All minimal hypothetical answers over the tau-history, restricted
    to the world: ground substitutions plus minimal sets of future ground
    extensional atoms (timestamps in (tau, horizon]) that entail the goal.
    """
    from .errors import NegativeTimeError

    program = query.program
    space = space or GroundSpace(program, world)
    base = frozenset(space.intern(f) for f in d_tau)
    negation = program.has_negation()
    pool_all = space.future_edb_atoms(tau)
    budget_box = [budget]
    results: set[tuple[Substitution, frozenset[Atom]]] = set()

    full_model: Optional[set[int]] = None
    if not negation:
        full_model = space.model(base | set(pool_all))

    for theta in _ground_substitutions(query.goal, world):
        try:
            goal_inst = theta.apply_atom(query.goal)
        except NegativeTimeError:
            continue
        g = space.intern(goal_inst)
        if not negation:
            assert full_model is not None
            if g not in full_model:
                continue
            support = space.derivation_support(g, full_model)
            pool = [a for a in pool_all if a in support]
        else:
            relevant = space.positively_relevant(g)
            pool = [a for a in pool_all if a in relevant]
        cap = len(pool) if max_hypotheses is None else min(
            max_hypotheses, len(pool)
        )

        def entails(candidate: frozenset[int]) -> bool:
            return g in space.model(base | candidate)

        for h in _minimal_subsets(pool, entails, cap, budget_box):
            results.add(
                (theta, frozenset(space.atom(i) for i in h))
            )
    return results


def enumerate_sans(query: Query, d_tau: Iterable[Atom], tau: int,
                   world: GroundWorld, *,
                   max_hypotheses: int | None = None,
                   budget: int = 2_000_000,
                   space: GroundSpace | None = None
                   ) -> set[tuple[Substitution, frozenset[Atom],
                                  frozenset[Atom]]]:
    """All supported answers: each minimal hypothetical answer paired with
    every minimal nonempty evidence set drawn from the history."""
    program = query.program
    space = space or GroundSpace(program, world)
    fact_list = sorted(
        {space.intern(f) for f in d_tau}
    )
    hans = enumerate_hans(
        query, d_tau, tau, world,
        max_hypotheses=max_hypotheses, budget=budget, space=space,
    )
    budget_box = [budget]
    results = set()
    for theta, hyps in hans:
        g = space.intern(theta.apply_atom(query.goal))
        h_ints = {space.intern(a) for a in hyps}
        if not program.has_negation():
            support = space.derivation_support(
                g, space.model(set(fact_list) | h_ints)
            )
            pool = [a for a in fact_list if a in support]
        else:
            relevant = space.positively_relevant(g)
            pool = [a for a in fact_list if a in relevant]

        def entails(candidate: frozenset[int]) -> bool:
            return g in space.model(h_ints | candidate)

        for e in _minimal_subsets(pool, entails, len(pool), budget_box,
                                  require_nonempty=True):
            if not e:
                continue
            results.add(
                (theta, hyps, frozenset(space.atom(i) for i in e))
            )
    return results


# ---------------------------------------------------------------------------
# Truncated temporal closure (reference check for T-stratification)

def truncated_closure_edges(program: Program, horizon: int
                            ) -> list[tuple[tuple, tuple, bool]]:
    """Dependency edges of the per-timestamp predicate copies, truncated at
    the horizon.  Timestamps beyond the horizon saturate onto it (the top
    copy stands in for the unbounded future); instances needing negative
    timestamps do not exist."""
    edges = []
    max_off = program.max_abs_offset()
    for rule in program.rules:
        if rule.is_fact():
            continue
        time_vars: list[str] = []
        for atom in [rule.head] + [l.atom for l in rule.body]:
            for arg in atom.args:
                if isinstance(arg, TimeExpr) and arg.var not in time_vars:
                    time_vars.append(arg.var)

        def node(atom, assign, clamp: bool) -> Optional[tuple]:
            if not program.is_temporal(atom.pred):
                return (atom.pred, None)
            t = atom.args[-1]
            if isinstance(t, TimePoint):
                value = t.value
            else:
                value = assign[t.var] + t.offset
            if value < 0:
                return None
            if value > horizon:
                # Body references beyond the window saturate onto the top
                # copy, which stands in for the unbounded future; heads
                # beyond the window are outside the truncation.
                return (atom.pred, horizon) if clamp else None
            return (atom.pred, value)

        for values in itertools.product(
            range(-max_off, horizon + max_off + 1), repeat=len(time_vars)
        ):
            assign = dict(zip(time_vars, values))
            head_node = node(rule.head, assign, clamp=False)
            if head_node is None:
                continue
            body_nodes = [(node(l.atom, assign, clamp=True), l.negated)
                          for l in rule.body]
            if any(n is None for n, _ in body_nodes):
                continue
            for n, negated in body_nodes:
                edges.append((head_node, n, negated))
    return sorted(set(edges), key=repr)


def truncated_closure_stratifiable(program: Program, horizon: int) -> bool:
    """Standard stratification check on the truncated temporal closure."""
    edges = truncated_closure_edges(program, horizon)
    nodes = sorted({e[0] for e in edges} | {e[1] for e in edges})
    succ: dict[tuple, list[tuple]] = {n: [] for n in nodes}
    for src, dst, _ in edges:
        succ[src].append(dst)
    index: dict[tuple, int] = {}
    low: dict[tuple, int] = {}
    on_stack: set[tuple] = set()
    stack: list[tuple] = []
    comp_of: dict[tuple, int] = {}
    counter = [0]
    comp_counter = [0]
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            n, it = work[-1]
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
                    low[n] = min(low[n], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[n])
            if low[n] == index[n]:
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp_of[member] = comp_counter[0]
                    if member == n:
                        break
                comp_counter[0] += 1
    return not any(
        comp_of[src] == comp_of[dst] for src, dst, negated in edges if negated
    )
