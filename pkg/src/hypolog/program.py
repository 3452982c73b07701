"""Programs, queries, and static classification.

A program couples its rules with an inferred signature: per predicate, the
arity, whether the last argument is temporal, and whether the predicate is
extensional (never the head of a rule with a non-empty body).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import SignatureError, UnsafeRuleError
from .terms import Atom, Literal, ObjectConst, Rule, TimeExpr, TimePoint


@dataclass(frozen=True)
class PredicateInfo:
    arity: int
    temporal: bool
    edb: bool


@dataclass
class Program:
    rules: tuple[Rule, ...]
    signature: dict[str, PredicateInfo]
    rigid_declared: frozenset[str] = frozenset()

    def __post_init__(self):
        index: dict[str, list[Rule]] = {}
        for rule in self.rules:
            index.setdefault(rule.head.pred, []).append(rule)
        self._rules_by_head = index

    def rules_for(self, pred: str) -> list[Rule]:
        return self._rules_by_head.get(pred, [])

    def is_temporal(self, pred: str) -> bool:
        return self.signature[pred].temporal

    def is_edb(self, pred: str) -> bool:
        return self.signature[pred].edb

    def is_idb(self, pred: str) -> bool:
        return not self.signature[pred].edb

    @property
    def facts(self) -> list[Rule]:
        """Empty-body rules: static facts resolvable during preprocessing."""
        return [r for r in self.rules if r.is_fact()]

    def has_negation(self) -> bool:
        return any(lit.negated for r in self.rules for lit in r.body)

    def constants(self) -> set[str]:
        out: set[str] = set()
        for rule in self.rules:
            for atom in [rule.head] + [l.atom for l in rule.body]:
                for arg in atom.args:
                    if isinstance(arg, ObjectConst):
                        out.add(arg.name)
        return out

    def max_abs_offset(self) -> int:
        best = 0
        for rule in self.rules:
            for atom in [rule.head] + [l.atom for l in rule.body]:
                for arg in atom.args:
                    if isinstance(arg, TimeExpr):
                        best = max(best, abs(arg.offset))
                    elif isinstance(arg, TimePoint):
                        best = max(best, arg.value)
        return best


@dataclass(frozen=True)
class Query:
    goal: Atom
    program: Program

    def __post_init__(self):
        info = self.program.signature.get(self.goal.pred)
        if info is None:
            raise SignatureError(f"unknown query predicate {self.goal.pred}")
        if info.edb:
            raise SignatureError(
                f"query goal {self.goal} must be intensional, "
                f"but {self.goal.pred} is extensional"
            )

    def __str__(self) -> str:
        return str(self.goal)


@dataclass(frozen=True)
class Classification:
    safe: bool
    edb_predicates: frozenset[str]
    idb_predicates: frozenset[str]
    connected: bool
    nonrecursive: bool
    has_negation: bool
    recursive_cycle: tuple[str, ...] = ()
    unconnected_rules: tuple[str, ...] = ()


def _rule_time_vars(rule: Rule) -> tuple[set[str], set[str]]:
    """Time variables of the head and of the body."""
    def collect(atoms) -> set[str]:
        out: set[str] = set()
        for a in atoms:
            for arg in a.args:
                if isinstance(arg, TimeExpr):
                    out.add(arg.var)
        return out

    return collect([rule.head]), collect([l.atom for l in rule.body])


def check_safety(program: Program) -> None:
    """Enforce safety and negation safety; raise UnsafeRuleError otherwise."""
    for rule in program.rules:
        positive_vars: set[str] = set()
        for lit in rule.body:
            if not lit.negated:
                positive_vars |= lit.vars()
        if rule.is_fact():
            if not rule.head.is_ground():
                raise UnsafeRuleError(
                    f"fact {rule.head} is not ground", rule=rule
                )
            continue
        for v in sorted(rule.head.vars()):
            if v not in {x for lit in rule.body for x in lit.vars()}:
                raise UnsafeRuleError(
                    f"head variable {v} of rule '{rule}' does not occur "
                    f"in the body",
                    rule=rule,
                    variable=v,
                )
        for lit in rule.body:
            if lit.negated:
                for v in sorted(lit.vars()):
                    if v not in positive_vars:
                        raise UnsafeRuleError(
                            f"variable {v} of negated literal {lit} has no "
                            f"positive occurrence in rule '{rule}'",
                            rule=rule,
                            variable=v,
                        )
                info = program.signature[lit.pred]
                if not info.temporal and not info.edb:
                    raise UnsafeRuleError(
                        f"negation of rigid intensional predicate "
                        f"{lit.pred} is not supported",
                        rule=rule,
                    )


def dependency_cycle(program: Program) -> Optional[tuple[str, ...]]:
    """A cycle in the predicate dependency digraph, or None if acyclic.

    Edges run from the head predicate to every body predicate.
    """
    edges: dict[str, set[str]] = {}
    for rule in program.rules:
        edges.setdefault(rule.head.pred, set()).update(
            l.pred for l in rule.body
        )
    WHITE, GREY, BLACK = 0, 1, 2
    color = {p: WHITE for p in program.signature}
    stack: list[str] = []

    def visit(p: str) -> Optional[tuple[str, ...]]:
        color[p] = GREY
        stack.append(p)
        for q in sorted(edges.get(p, ())):
            if color.get(q, WHITE) == GREY:
                return tuple(stack[stack.index(q):] + [q])
            if color.get(q, WHITE) == WHITE:
                found = visit(q)
                if found:
                    return found
        stack.pop()
        color[p] = BLACK
        return None

    for p in sorted(program.signature):
        if color[p] == WHITE:
            found = visit(p)
            if found:
                return found
    return None


def validate_program(program: Program, query: Query | None = None
                     ) -> Classification:
    """Safety checks plus the static classification used by preprocessing."""
    check_safety(program)
    unconnected: list[str] = []
    for rule in program.rules:
        head_tv, body_tv = _rule_time_vars(rule)
        all_tv = head_tv | body_tv
        if len(all_tv) > 1 or (body_tv and not body_tv <= head_tv):
            unconnected.append(str(rule))
    cycle = dependency_cycle(program)
    edb = frozenset(p for p, info in program.signature.items() if info.edb)
    idb = frozenset(p for p, info in program.signature.items() if not info.edb)
    return Classification(
        safe=True,
        edb_predicates=edb,
        idb_predicates=idb,
        connected=not unconnected,
        nonrecursive=cycle is None,
        has_negation=program.has_negation(),
        recursive_cycle=cycle or (),
        unconnected_rules=tuple(unconnected),
    )
