"""The per-tick incremental evaluator.

State is a set of schematic supported-answer tuples per query.  Each tick:

  1. seed new tuples from precondition entries whose trigger group matches
     the tick's facts;
  2. advance live tuples whose pending literals carry the just-closed
     timestamp (matched literals become evidence, an unmatched one kills
     the tuple);
  3. run the fixpoint for tuples that still carry free temporal variables,
     retaining the originals (a free hypothesis may match again later);
  4. resolve negated hypotheses whose timestamps are closed, consulting
     the auxiliary queries in stratification order.

Tuples whose hypothesis set empties are definite answers and move to the
archive.  The per-tick delta reports definite, newly supported, updated,
and discarded tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import HypologError, NegativeTimeError, StreamError
from .parser import TickBlock
from .preprocess import PreconditionEntry, QueryFamily
from .program import Program
from .resolution import match_conjunct_against_facts
from .terms import (
    Atom,
    Literal,
    ObjectConst,
    ObjectVar,
    Substitution,
    TimeExpr,
    TimePoint,
    mgu,
    rename_literals,
)

DISCARD_UNMATCHED = "unmatched premise at closed timestamp"
DISCARD_NEGATION = "defeated by negation"


class BoundViolationError(HypologError):
    """A configured delay or window bound was violated by the state."""


@dataclass(frozen=True)
class AnswerTuple:
    query_id: str
    subst: Substitution
    evidence: frozenset[Literal]
    pending: frozenset[Literal]
    born_at: int = field(compare=False)

    @property
    def definite(self) -> bool:
        return not self.pending

    def __str__(self) -> str:
        ev = ", ".join(sorted(map(str, self.evidence)))
        hy = ", ".join(sorted(map(str, self.pending)))
        return f"<{self.subst}, E={{{ev}}}, H={{{hy}}}>"


@dataclass
class TickDelta:
    tick: int
    new_definite: list[AnswerTuple] = field(default_factory=list)
    new_supported: list[AnswerTuple] = field(default_factory=list)
    updated: list[AnswerTuple] = field(default_factory=list)
    discarded: list[tuple[AnswerTuple, str]] = field(default_factory=list)

    def sort(self) -> "TickDelta":
        key = lambda t: (t.query_id, str(t.subst), str(t))
        self.new_definite.sort(key=key)
        self.new_supported.sort(key=key)
        self.updated.sort(key=key)
        self.discarded.sort(key=lambda pair: (key(pair[0]), pair[1]))
        return self


class FactStore:
    """Accumulated stream facts plus the program's static facts."""

    def __init__(self, program: Program):
        self.atoms: set[Atom] = set()
        self.constants: set[str] = set(program.constants())
        self._by_tick: dict[int, list[Atom]] = {}
        for rule in program.facts:
            self.atoms.add(rule.head)
            self._note_constants(rule.head)

    def _note_constants(self, atom: Atom) -> None:
        for arg in atom.args:
            if isinstance(arg, ObjectConst):
                self.constants.add(arg.name)

    def add_tick(self, block: TickBlock) -> None:
        self._by_tick[block.tick] = list(block.facts)
        for fact in block.facts:
            self.atoms.add(fact)
            self._note_constants(fact)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    def prune_before(self, cutoff: int) -> None:
        for tick in [t for t in self._by_tick if t < cutoff]:
            for fact in self._by_tick.pop(tick):
                self.atoms.discard(fact)


class EvalState:
    """Single-writer evaluation state: one tick in flight at a time."""

    def __init__(self, family: QueryFamily, *,
                 universe: Iterable[str] = (),
                 delay: Optional[int] = None,
                 window: Optional[int] = None,
                 archive_keep: Optional[int] = None):
        self.family = family
        self.program = family.program
        self.tick = -1
        self.live: dict[str, set[AnswerTuple]] = {
            qid: set() for qid in family.records
        }
        self.definite: dict[str, dict[AnswerTuple, None]] = {
            qid: {} for qid in family.records
        }
        self.facts = FactStore(family.program)
        self.configured_universe = set(universe) | set(family.universe)
        self.delay = delay
        self.window = window
        self.archive_keep = archive_keep
        self.negation = family.program.has_negation()
        self._rename_tag = 0

    # -- public API

    def universe(self) -> list[str]:
        return sorted(self.configured_universe | self.facts.constants)

    def tuples(self, qid: Optional[str] = None) -> set[AnswerTuple]:
        """Live and definite tuples: the current schematic answer set."""
        ids = [qid] if qid else list(self.family.records)
        out: set[AnswerTuple] = set()
        for q in ids:
            out |= self.live[q]
            out |= set(self.definite[q])
        return out

    def run_tick(self, block: TickBlock) -> TickDelta:
        if block.tick != self.tick + 1:
            raise StreamError(
                f"out-of-order tick @{block.tick}, expected @{self.tick + 1}"
            )
        self.tick = block.tick
        t = self.tick
        self.facts.add_tick(block)
        new_facts = list(block.facts)
        delta = TickDelta(t)
        born: dict[str, set[AnswerTuple]] = {}
        advanced: dict[str, set[AnswerTuple]] = {}

        for qid in self.family.order:
            record = self.family.records[qid]
            prev = self.live[qid]
            survivors: set[AnswerTuple] = set()
            changed: set[AnswerTuple] = set()
            fresh: set[AnswerTuple] = set()
            for tup in prev:
                outcome = self._advance_tuple(tup, t, new_facts)
                if outcome is None:
                    delta.discarded.append((tup, DISCARD_UNMATCHED))
                elif outcome is tup:
                    survivors.add(tup)
                else:
                    changed.update(outcome)
            for entry in record.entries:
                fresh.update(self._seed_entry(qid, entry, t, new_facts))
            merged = survivors | changed | fresh
            extra = self._multivar_fixpoint(qid, merged, t, new_facts)
            fresh |= extra
            self.live[qid] = merged | extra
            born[qid] = fresh - survivors - changed
            advanced[qid] = changed - survivors

        if self.negation:
            self._resolve_negations(t, delta, born, advanced)

        self._finalize(delta, born, advanced)
        self._check_bounds(t)
        if self.window is not None:
            self.facts.prune_before(t - self.window)
        return delta.sort()

    # -- shared helpers

    def _goal_vars(self, qid: str) -> set[str]:
        return self.family.records[qid].goal.vars()

    def _ground_time(self, lit: Literal) -> Optional[int]:
        if not self.program.signature[lit.pred].temporal:
            return None
        ts = lit.atom.args[-1]
        if isinstance(ts, TimePoint):
            return ts.value
        return None

    def _settle(self, qid: str, subst: Substitution,
                evidence: frozenset[Literal], pending: Iterable[Literal],
                t: int, born: int) -> set[AnswerTuple]:
        """Discharge pending positive literals whose timestamps are already
        closed against the accumulated facts.  The result is empty when a
        closed literal has no match (the tuple is stillborn)."""
        pending = tuple(pending)
        closed = [
            l for l in pending
            if not l.negated
            and (ts := self._ground_time(l)) is not None
            and ts <= t
        ]
        if not closed:
            return {
                AnswerTuple(qid, subst, evidence, frozenset(pending), born)
            }
        rest = [l for l in pending if l not in closed]
        out: set[AnswerTuple] = set()
        goal_vars = self._goal_vars(qid)
        for sigma in match_conjunct_against_facts(
            [l.atom for l in closed], self.facts.atoms
        ):
            try:
                matched = frozenset(
                    Literal(sigma.apply_atom(l.atom), False) for l in closed
                )
                pend = sigma.apply_literals(rest)
                theta = subst.compose(sigma).restrict(goal_vars)
                ev = frozenset(
                    sigma.apply_literal(l) for l in evidence
                ) | matched
            except NegativeTimeError:
                continue
            out.add(AnswerTuple(qid, theta, ev, frozenset(pend), born))
        return out

    # -- step 1: seeding

    def _seed_entry(self, qid: str, entry: PreconditionEntry, t: int,
                    new_facts: list[Atom]) -> set[AnswerTuple]:
        out: set[AnswerTuple] = set()
        goal_vars = self._goal_vars(qid)
        if not entry.groups:
            # Derivable with no stream trigger at all: realize once, at @0.
            if t == 0:
                out |= self._settle(
                    qid, entry.subst, frozenset(), entry.deferred, t, t
                )
            return out
        for group in entry.groups:
            if group.time_var is None:
                if group.offset != t:
                    continue
                anchor = Substitution()
            else:
                base = t - group.offset
                if base < 0:
                    continue
                anchor = Substitution({group.time_var: TimePoint(base)})
            try:
                anchored = anchor.apply_literals(group.literals)
            except NegativeTimeError:
                continue
            positives = [l.atom for l in anchored if not l.negated]
            negatives = [l for l in anchored if l.negated]
            rest = [
                l
                for g in entry.groups
                if g is not group
                for l in g.literals
            ] + list(entry.deferred)
            for sigma in match_conjunct_against_facts(positives, new_facts):
                binding = anchor.compose(sigma)
                try:
                    evidence = frozenset(
                        Literal(sigma.apply_atom(a), False) for a in positives
                    )
                    pending = binding.apply_literals(rest) + tuple(
                        sigma.apply_literal(l) for l in negatives
                    )
                    theta = entry.subst.compose(binding).restrict(goal_vars)
                except NegativeTimeError:
                    continue
                out |= self._settle(qid, theta, evidence, pending, t, t)
        return out

    # -- step 2: advancing

    def _advance_tuple(self, tup: AnswerTuple, t: int,
                       new_facts: list[Atom]
                       ) -> Optional[Iterable[AnswerTuple]]:
        """None = discard; the tuple itself = unchanged; otherwise the set
        of successors."""
        slice_lits = [
            l for l in tup.pending
            if not l.negated and self._ground_time(l) == t
        ]
        if not slice_lits:
            return tup
        rest = [l for l in tup.pending if l not in slice_lits]
        sigmas = match_conjunct_against_facts(
            [l.atom for l in slice_lits], new_facts
        )
        if not sigmas:
            return None
        out: set[AnswerTuple] = set()
        for sigma in sigmas:
            try:
                matched = frozenset(
                    Literal(sigma.apply_atom(l.atom), False)
                    for l in slice_lits
                )
                evidence = frozenset(
                    sigma.apply_literal(l) for l in tup.evidence
                ) | matched
                pending = sigma.apply_literals(rest)
                theta = tup.subst.compose(sigma).restrict(
                    self._goal_vars(tup.query_id)
                )
            except NegativeTimeError:
                continue
            out.add(AnswerTuple(tup.query_id, theta, evidence,
                                frozenset(pending), tup.born_at))
        return out if out else None

    # -- step 3: the free-temporal-variable fixpoint

    def _multivar_fixpoint(self, qid: str, live: set[AnswerTuple], t: int,
                           new_facts: list[Atom]) -> set[AnswerTuple]:
        added: set[AnswerTuple] = set()
        queue = [tup for tup in live if self._has_free_time(tup)]
        while queue:
            tup = queue.pop()
            for var, offset, group in self._free_groups(tup):
                base = t - offset
                if base < 0:
                    continue
                anchor = Substitution({var: TimePoint(base)})
                try:
                    anchored = anchor.apply_literals(group)
                except NegativeTimeError:
                    continue
                positives = [l.atom for l in anchored if not l.negated]
                negatives = [l for l in anchored if l.negated]
                rest = [l for l in tup.pending if l not in group]
                for sigma in match_conjunct_against_facts(
                    positives, new_facts
                ):
                    binding = anchor.compose(sigma)
                    try:
                        matched = frozenset(
                            Literal(sigma.apply_atom(a), False)
                            for a in positives
                        )
                        evidence = frozenset(
                            binding.apply_literal(l) for l in tup.evidence
                        ) | matched
                        pending = binding.apply_literals(rest) + tuple(
                            sigma.apply_literal(l) for l in negatives
                        )
                        theta = tup.subst.compose(binding).restrict(
                            self._goal_vars(qid)
                        )
                    except NegativeTimeError:
                        continue
                    for settled in self._settle(
                        qid, theta, evidence, pending, t, tup.born_at
                    ):
                        if settled in live or settled in added:
                            continue
                        added.add(settled)
                        if self._has_free_time(settled):
                            queue.append(settled)
        return added

    def _has_free_time(self, tup: AnswerTuple) -> bool:
        return any(
            isinstance(l.atom.args[-1], TimeExpr)
            for l in tup.pending
            if self.program.signature[l.pred].temporal
        )

    def _free_groups(self, tup: AnswerTuple
                     ) -> list[tuple[str, int, list[Literal]]]:
        by_var: dict[str, list[tuple[int, Literal]]] = {}
        for lit in tup.pending:
            if not self.program.signature[lit.pred].temporal:
                continue
            ts = lit.atom.args[-1]
            if isinstance(ts, TimeExpr):
                by_var.setdefault(ts.var, []).append((ts.offset, lit))
        out = []
        for var in sorted(by_var):
            entries = by_var[var]
            k_min = min(k for k, _ in entries)
            out.append(
                (var, k_min, [l for k, l in entries if k == k_min])
            )
        return out

    # -- step 4: negation

    def _resolve_negations(self, t: int, delta: TickDelta,
                           born: dict[str, set[AnswerTuple]],
                           advanced: dict[str, set[AnswerTuple]]) -> None:
        for qid in self.family.order:
            changed = True
            while changed:
                changed = False
                for tup in sorted(self.live[qid], key=str):
                    action = self._resolve_tuple_negation(qid, tup, t)
                    if action is None:
                        continue
                    replacement, died = action
                    was_born = tup in born[qid]
                    self.live[qid].discard(tup)
                    born[qid].discard(tup)
                    advanced[qid].discard(tup)
                    if died and not replacement:
                        # A tuple born this very tick dies silently; its
                        # birth was never reported.
                        if not was_born:
                            delta.discarded.append((tup, DISCARD_NEGATION))
                    for new in replacement:
                        if new in self.live[qid]:
                            continue
                        self.live[qid].add(new)
                        if was_born:
                            born[qid].add(new)
                        else:
                            advanced[qid].add(new)
                    changed = True
                    break

    def _resolve_tuple_negation(self, qid: str, tup: AnswerTuple, t: int
                                ) -> Optional[tuple[set[AnswerTuple], bool]]:
        """Resolve one decidable negated hypothesis of the tuple, if any.

        Returns (replacement tuples, died) or None when nothing is
        decidable yet."""
        for lit in sorted(
            (l for l in tup.pending if l.negated), key=str
        ):
            info = self.program.signature[lit.pred]
            ts = self._ground_time(lit)
            if info.temporal and (ts is None or ts > t):
                continue  # not closed yet, or a free time: never resolvable
            free_vars = sorted(
                v for v in lit.atom.vars()
                if self._is_object_var(lit.atom, v)
            )
            if info.edb:
                if not free_vars:
                    if lit.atom in self.facts:
                        return set(), True
                    return {self._move_to_evidence(tup, lit)}, False
                instances = self._ground_instances(tup, lit, free_vars)
                survivors = {
                    self._move_to_evidence(inst, inst_lit)
                    for inst, inst_lit in instances
                    if inst_lit.atom not in self.facts
                }
                return survivors, not survivors
            aux_id = self.family.aux_for.get(lit.pred)
            if aux_id is None:
                raise HypologError(
                    f"no auxiliary query for negated predicate {lit.pred}"
                )
            candidates = [
                c for c in self.tuples(aux_id)
                if self._unifiable_with_answer(lit.atom, aux_id, c)
            ]
            if not candidates:
                return {self._move_to_evidence(tup, lit)}, False
            definite = [c for c in candidates if c.definite]
            if not definite:
                continue  # only pending candidates: fate undecided
            if not free_vars:
                return set(), True
            instances = self._ground_instances(tup, lit, free_vars)
            survivors = set()
            for inst, inst_lit in instances:
                if not any(
                    self._unifiable_with_answer(inst_lit.atom, aux_id, c)
                    for c in definite
                ):
                    survivors.add(inst)
            return survivors, not survivors
        return None

    def _is_object_var(self, atom: Atom, name: str) -> bool:
        return any(
            isinstance(arg, ObjectVar) and arg.name == name
            for arg in atom.args
        )

    def _move_to_evidence(self, tup: AnswerTuple, lit: Literal
                          ) -> AnswerTuple:
        return AnswerTuple(
            tup.query_id,
            tup.subst,
            tup.evidence | {lit},
            tup.pending - {lit},
            tup.born_at,
        )

    def _ground_instances(self, tup: AnswerTuple, lit: Literal,
                          free_vars: list[str]
                          ) -> list[tuple[AnswerTuple, Literal]]:
        """All universe groundings of the literal's free object variables,
        applied across the tuple; pairs of (instance, instantiated lit)."""
        out: list[tuple[AnswerTuple, Literal]] = []
        consts = [ObjectConst(c) for c in self.universe()]

        def assign(i: int, subst: Substitution) -> None:
            if i == len(free_vars):
                try:
                    inst_lit = subst.apply_literal(lit)
                    inst = AnswerTuple(
                        tup.query_id,
                        tup.subst.compose(subst).restrict(
                            self._goal_vars(tup.query_id)
                        ),
                        frozenset(
                            subst.apply_literal(l) for l in tup.evidence
                        ),
                        frozenset(
                            subst.apply_literal(l) for l in tup.pending
                        ),
                        tup.born_at,
                    )
                    out.append((inst, inst_lit))
                except NegativeTimeError:
                    pass
                return
            for c in consts:
                assign(i + 1, subst.compose(
                    Substitution({free_vars[i]: c})
                ))

        assign(0, Substitution())
        return out

    def _unifiable_with_answer(self, atom: Atom, aux_id: str,
                               candidate: AnswerTuple) -> bool:
        goal = self.family.records[aux_id].goal
        try:
            instance = candidate.subst.apply_atom(goal)
        except NegativeTimeError:
            return False
        self._rename_tag += 1
        names = {
            v: f"{v.split('#')[0]}#n{self._rename_tag}"
            for v in instance.vars()
        }
        renamed = rename_literals([Literal(instance, False)], names)[0].atom
        return mgu(atom, renamed) is not None

    # -- finalization

    def _finalize(self, delta: TickDelta, born: dict[str, set[AnswerTuple]],
                  advanced: dict[str, set[AnswerTuple]]) -> None:
        for qid in self.family.order:
            still_live: set[AnswerTuple] = set()
            for tup in self.live[qid]:
                if tup.definite:
                    if tup not in self.definite[qid]:
                        self.definite[qid][tup] = None
                        delta.new_definite.append(tup)
                else:
                    still_live.add(tup)
                    if tup in born.get(qid, ()):
                        delta.new_supported.append(tup)
                    elif tup in advanced.get(qid, ()):
                        delta.updated.append(tup)
            self.live[qid] = still_live
            if self.archive_keep is not None:
                while len(self.definite[qid]) > self.archive_keep:
                    oldest = next(iter(self.definite[qid]))
                    del self.definite[qid][oldest]

    def _check_bounds(self, t: int) -> None:
        if self.delay is None and self.window is None:
            return
        for qid in self.family.records:
            for tup in self.live[qid]:
                answer_time = self._answer_time(tup)
                if (
                    self.delay is not None
                    and answer_time is not None
                    and answer_time <= t
                ):
                    for lit in tup.pending:
                        ts = self._ground_time(lit)
                        if ts is not None and ts > t + self.delay:
                            raise BoundViolationError(
                                f"pending {lit} of {tup} exceeds the "
                                f"configured delay {self.delay}"
                            )
                if self.window is not None:
                    for lit in tup.evidence:
                        ts = self._ground_time(lit)
                        if ts is not None and ts < t - self.window:
                            raise BoundViolationError(
                                f"evidence {lit} of {tup} is older than "
                                f"the configured window {self.window}"
                            )

    def _answer_time(self, tup: AnswerTuple) -> Optional[int]:
        goal = self.family.records[tup.query_id].goal
        last = goal.args[-1]
        if not isinstance(last, TimeExpr):
            return None
        bound = tup.subst.get(last.var)
        if isinstance(bound, TimePoint):
            return bound.value
        return None


def replay(family: QueryFamily, blocks: Iterable[TickBlock], **kwargs
           ) -> tuple[EvalState, list[TickDelta]]:
    """Run a whole stream through a fresh state; convenience for tests."""
    state = EvalState(family, **kwargs)
    deltas = [state.run_tick(block) for block in blocks]
    return state, deltas
