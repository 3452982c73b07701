"""SLD machinery: resolvents, derivations, refutations with future premises.

Derivations are explored in stratified order: first resolve against program
clauses (rules and static facts) until no positive intensional literal is
left, then match the surviving extensional literals against stream facts.
A derivation qualifies as a refutation with future premises when every
positive literal of its last goal is an extensional atom whose time term is
a variable or lies strictly beyond the current tick; negated literals ride
along untouched and are discharged by the online negation step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import LimitExceededError, NegativeTimeError
from .program import Program, Query
from .terms import (
    Atom,
    EMPTY_SUBST,
    Literal,
    ObjectConst,
    ObjectVar,
    Rule,
    Substitution,
    TimeExpr,
    TimePoint,
    VarRenamer,
    canonical_renaming,
    match,
    mgu,
    rename_literals,
)


@dataclass(frozen=True)
class Goal:
    """The negated conjunction of its literals; empty means contradiction."""

    literals: tuple[Literal, ...]

    @property
    def is_empty(self) -> bool:
        return not self.literals

    def vars(self) -> set[str]:
        out: set[str] = set()
        for lit in self.literals:
            out |= lit.vars()
        return out

    def __str__(self) -> str:
        return "[]" if self.is_empty else ", ".join(map(str, self.literals))


@dataclass(frozen=True)
class DerivationStep:
    selected: int
    clause: Rule
    unifier: Substitution
    result: Goal


@dataclass(frozen=True)
class ComputedAnswer:
    """A computed answer with premises: the substitution restricted to the
    query variables, plus the residual conjunction."""

    subst: Substitution
    premises: tuple[Literal, ...]

    def __str__(self) -> str:
        prem = ", ".join(map(str, self.premises)) or "[]"
        return f"<{self.subst}, {prem}>"


@dataclass(frozen=True)
class SearchLimits:
    max_depth: int = 400
    max_nodes: int = 200_000


def is_future_atom(atom: Atom, tau: int, program: Program) -> bool:
    """True iff the atom is temporal and its time term is a variable or a
    time point beyond tau."""
    if not program.signature[atom.pred].temporal:
        return False
    t = atom.args[-1]
    if isinstance(t, TimeExpr):
        return True
    assert isinstance(t, TimePoint)
    return t.value > tau


def resolve_step(goal: Goal, clause: Rule, k: int
                 ) -> Optional[tuple[Goal, Substitution]]:
    """Resolve the k-th goal literal against a renamed-apart clause.

    Returns the resolvent and the mgu, or None if the literal does not
    unify (including unifications forcing a negative time point anywhere
    in the resolvent)."""
    lit = goal.literals[k]
    if lit.negated:
        return None
    unifier = mgu(lit.atom, clause.head)
    if unifier is None:
        return None
    try:
        new_lits = (
            unifier.apply_literals(goal.literals[:k])
            + unifier.apply_literals(clause.body)
            + unifier.apply_literals(goal.literals[k + 1:])
        )
    except NegativeTimeError:
        return None
    return Goal(new_lits), unifier


def match_conjunct_against_facts(conjunct: Sequence[Atom],
                                 facts: Iterable[Atom]
                                 ) -> list[Substitution]:
    """All substitutions grounding-matching every atom of the conjunct to
    some fact; the empty conjunct yields exactly the identity."""
    fact_list = list(facts)
    results: list[Substitution] = []
    seen: set[Substitution] = set()

    def walk(i: int, subst: Substitution) -> None:
        if i == len(conjunct):
            if subst not in seen:
                seen.add(subst)
                results.append(subst)
            return
        for fact in fact_list:
            extended = match(conjunct[i], fact, subst)
            if extended is not None:
                walk(i + 1, extended)

    walk(0, EMPTY_SUBST)
    return results


def _partial_matchings(literals: Sequence[Literal], facts: Sequence[Atom]
                       ) -> Iterator[tuple[Substitution, tuple[Literal, ...]]]:
    """Enumerate ways to match a sub-multiset of the positive literals
    against facts; yields (substitution, kept literals).  Negated literals
    are always kept."""
    out_seen: set[tuple[Substitution, tuple[Literal, ...]]] = set()

    def walk(i: int, subst: Substitution, kept: tuple[Literal, ...]
             ) -> Iterator[tuple[Substitution, tuple[Literal, ...]]]:
        if i == len(literals):
            try:
                final = subst.apply_literals(kept)
            except NegativeTimeError:
                return
            key = (subst, final)
            if key not in out_seen:
                out_seen.add(key)
                yield subst, final
            return
        lit = literals[i]
        if not lit.negated:
            try:
                pattern = subst.apply_atom(lit.atom)
            except NegativeTimeError:
                pattern = None  # invalid instance; only the keep option fails later
            if pattern is not None:
                for fact in facts:
                    extended = match(pattern, fact)
                    if extended is not None:
                        yield from walk(i + 1, subst.compose(extended), kept)
        yield from walk(i + 1, subst, kept + (lit,))

    yield from walk(0, EMPTY_SUBST, ())


# ---------------------------------------------------------------------------
# Goal normalization modulo temporal shift (guarded-mode loop detection)

def normalize_goal(literals: Sequence[Literal]) -> tuple[str, ...]:
    """Canonical form of a goal up to variable renaming and a uniform shift
    of each temporal variable's offsets (minimal offset becomes 0)."""
    min_offset: dict[str, int] = {}
    for lit in literals:
        for arg in lit.atom.args:
            if isinstance(arg, TimeExpr):
                cur = min_offset.get(arg.var)
                min_offset[arg.var] = (
                    arg.offset if cur is None else min(cur, arg.offset)
                )
    names: dict[str, str] = {}

    def canon_term(t) -> str:
        if isinstance(t, ObjectVar):
            name = names.setdefault(t.name, f"v{len(names)}")
            return name
        if isinstance(t, TimeExpr):
            name = names.setdefault(t.var, f"v{len(names)}")
            return f"{name}+{t.offset - min_offset[t.var]}"
        return str(t)

    rendered = []
    for lit in literals:
        args = ", ".join(canon_term(a) for a in lit.atom.args)
        prefix = "not " if lit.negated else ""
        rendered.append(f"{prefix}{lit.atom.pred}({args})")
    return tuple(sorted(rendered))


# ---------------------------------------------------------------------------
# The SLD tree search (program phase)

class _ProgramPhase:
    """DFS over SLD derivations resolving only against program clauses.

    Leaves are goals without positive intensional literals; each leaf is
    additionally closed off against the program's static facts in every
    possible way.  In guarded mode, fresh object variables introduced by a
    clause body are instantiated over the declared universe, and a goal
    repeating an ancestor modulo temporal shift fails the branch and is
    reported as a loop."""

    def __init__(self, query: Query, limits: SearchLimits, *,
                 guarded: bool = False,
                 universe: Sequence[str] = ()):
        self.query = query
        self.program = query.program
        self.limits = limits
        self.guarded = guarded
        self.universe = [ObjectConst(c) for c in sorted(set(universe))]
        self.renamer = VarRenamer()
        self.goal_vars = query.goal.vars()
        self.main_time_var = self._main_time_var()
        self.static_facts = [r.head for r in self.program.facts]
        self.nodes = 0
        self.loops: list[str] = []
        self.results: list[tuple[Substitution, tuple[Literal, ...]]] = []

    def _main_time_var(self) -> Optional[str]:
        last = self.query.goal.args[-1]
        if isinstance(last, TimeExpr):
            return last.var
        return None

    def run(self) -> list[tuple[Substitution, tuple[Literal, ...]]]:
        root = Goal((Literal(self.query.goal, False),))
        self._explore(root, EMPTY_SUBST, 0, (normalize_goal(root.literals),))
        return self.results

    # -- selection rule: leftmost positive intensional literal, delaying
    # atoms whose time term carries a temporal variable other than the
    # query's main one.

    def _select(self, goal: Goal) -> Optional[int]:
        fallback = None
        for i, lit in enumerate(goal.literals):
            if lit.negated or self.program.is_edb(lit.pred):
                continue
            t = lit.atom.args[-1] if lit.atom.args else None
            delayed = (
                isinstance(t, TimeExpr)
                and self.main_time_var is not None
                and t.var != self.main_time_var
            )
            if not delayed:
                return i
            if fallback is None:
                fallback = i
        return fallback

    def _fresh_object_vars(self, child: Goal, parent: Goal) -> list[str]:
        fresh: list[str] = []
        parent_vars = parent.vars()
        for lit in child.literals:
            for arg in lit.atom.args:
                if isinstance(arg, ObjectVar) and arg.name not in parent_vars:
                    if arg.name not in fresh:
                        fresh.append(arg.name)
        return fresh

    def _explore(self, goal: Goal, answer: Substitution, depth: int,
                 path: tuple[tuple[str, ...], ...]) -> None:
        self.nodes += 1
        if self.nodes > self.limits.max_nodes:
            raise LimitExceededError(
                f"node budget {self.limits.max_nodes} exhausted",
                partial=self.results,
                diagnosis="too many SLD tree nodes",
            )
        k = self._select(goal)
        if k is None:
            self._finish(goal, answer)
            return
        if depth >= self.limits.max_depth:
            raise LimitExceededError(
                f"derivation depth {self.limits.max_depth} exceeded",
                partial=self.results,
                diagnosis=f"goal at the depth limit: {goal}",
            )
        for clause in self.program.rules_for(goal.literals[k].pred):
            renamed = self.renamer.rename_rule(clause)
            step = resolve_step(goal, renamed, k)
            if step is None:
                continue
            child, unifier = step
            for grounded, extra in self._ground_fresh(child, goal):
                combined = answer.compose(unifier).compose(extra)
                norm = normalize_goal(grounded.literals)
                if self.guarded and norm in path:
                    self.loops.append(
                        f"goal repeats modulo temporal shift: {grounded}"
                    )
                    continue
                self._explore(grounded, combined, depth + 1, path + (norm,))

    def _ground_fresh(self, child: Goal, parent: Goal
                      ) -> Iterator[tuple[Goal, Substitution]]:
        if not self.guarded:
            yield child, EMPTY_SUBST
            return
        fresh = self._fresh_object_vars(child, parent)
        if not fresh:
            yield child, EMPTY_SUBST
            return
        if not self.universe:
            raise LimitExceededError(
                "guarded mode needs a nonempty object universe to "
                "instantiate fresh body variables",
                partial=self.results,
                diagnosis=f"fresh variables {fresh} in {child}",
            )

        def assign(i: int, subst: Substitution) -> Iterator[
                tuple[Goal, Substitution]]:
            if i == len(fresh):
                try:
                    yield Goal(subst.apply_literals(child.literals)), subst
                except NegativeTimeError:
                    return
                return
            for const in self.universe:
                yield from assign(
                    i + 1, subst.compose(Substitution({fresh[i]: const}))
                )

        yield from assign(0, EMPTY_SUBST)

    def _finish(self, goal: Goal, answer: Substitution) -> None:
        for subst, kept in _partial_matchings(goal.literals,
                                              self.static_facts):
            self.results.append((answer.compose(subst), kept))


def derive_preconditions(query: Query, limits: SearchLimits, *,
                         guarded: bool = False,
                         universe: Sequence[str] = ()
                         ) -> list[ComputedAnswer]:
    """Program-phase leaves over the empty history: computed answers with
    premises at tick -1, deduplicated but not yet minimized.

    In guarded mode, loop detection makes divergent searches fail loudly:
    a detected repetition aborts with LimitExceededError carrying whatever
    answers were already found."""
    search = _ProgramPhase(query, limits, guarded=guarded, universe=universe)
    results = search.run()
    filtered = [
        (subst, kept)
        for subst, kept in results
        if all(
            lit.negated or is_future_atom(lit.atom, -1, query.program)
            for lit in kept
        )
    ]
    answers = _canonical_answers(filtered, query)
    if search.loops:
        raise LimitExceededError(
            "derivation loops detected; the precondition set may be "
            "incomplete",
            partial=answers,
            diagnosis=search.loops[0],
        )
    return answers


def refute_with_future_premises(query: Query, facts: Iterable[Atom],
                                tau: int, limits: SearchLimits, *,
                                guarded: bool = False,
                                universe: Sequence[str] = ()
                                ) -> list[ComputedAnswer]:
    """All computed answers with premises of the query over the given
    tau-history, each the end of a stratified derivation (program clauses
    first, then facts)."""
    search = _ProgramPhase(query, limits, guarded=guarded, universe=universe)
    program_leaves = search.run()
    fact_list = [f for f in facts]
    raw: list[tuple[Substitution, tuple[Literal, ...]]] = []
    for answer, residual in program_leaves:
        for subst, kept in _partial_matchings(residual, fact_list):
            combined = answer.compose(subst)
            if all(
                lit.negated or is_future_atom(lit.atom, tau, query.program)
                for lit in kept
            ):
                raw.append((combined, kept))
    answers = _canonical_answers(raw, query)
    if search.loops:
        raise LimitExceededError(
            "derivation loops detected; results may be incomplete",
            partial=answers,
            diagnosis=search.loops[0],
        )
    return answers


def _canonical_answers(raw: Iterable[tuple[Substitution, tuple[Literal, ...]]],
                       query: Query) -> list[ComputedAnswer]:
    """Restrict substitutions to the query variables, canonically rename the
    remaining free variables, and deduplicate."""
    out: list[ComputedAnswer] = []
    seen: set[tuple[Substitution, tuple[Literal, ...]]] = set()
    for subst, residual in raw:
        answer = canonicalize_answer(subst, residual, query.goal)
        key = (answer.subst, answer.premises)
        if key not in seen:
            seen.add(key)
            out.append(answer)
    return out


def canonicalize_answer(subst: Substitution, residual: Sequence[Literal],
                        goal: Atom) -> ComputedAnswer:
    goal_vars = goal.vars()
    restricted = subst.restrict(goal_vars)
    order: list[str] = []
    for _, term in sorted(restricted.items()):
        for v in _term_var_names(term):
            if v not in goal_vars and v not in order:
                order.append(v)
    for lit in residual:
        for arg in lit.atom.args:
            for v in _term_var_names(arg):
                if v not in goal_vars and v not in order:
                    order.append(v)
    names: dict[str, str] = {}
    used = set(goal_vars)
    counter = 0
    for v in order:
        while f"V{counter}" in used:
            counter += 1
        names[v] = f"V{counter}"
        used.add(f"V{counter}")
        counter += 1
    renamed_subst = Substitution(
        {
            v: _rename_in_term(t, names)
            for v, t in restricted.items()
        }
    )
    renamed_residual = rename_literals(residual, names)
    return ComputedAnswer(renamed_subst, renamed_residual)


def _term_var_names(term) -> list[str]:
    if isinstance(term, ObjectVar):
        return [term.name]
    if isinstance(term, TimeExpr):
        return [term.var]
    return []


def _rename_in_term(term, names):
    if isinstance(term, ObjectVar):
        return ObjectVar(names.get(term.name, term.name))
    if isinstance(term, TimeExpr):
        return TimeExpr(names.get(term.var, term.var), term.offset)
    return term
