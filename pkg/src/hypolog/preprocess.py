"""Offline phase: compile a query into its finite precondition set.

Each precondition entry is one schema of answers the query can still
produce: an answer substitution, the trigger groups of minimal-timestamp
literals (one group per temporal variable, plus at most one group of
constant-timestamp literals), and the remaining future literals.  The
online evaluator seeds new answer tuples by matching trigger groups
against each tick's facts.

With negation, every negated intensional predicate reachable from the
root's residuals spawns an auxiliary query whose own preconditions are
compiled the same way, to closure.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import NotEligibleError, NotStratifiedError, SignatureError
from .parser import parse_literal_text
from .program import Program, Query, validate_program
from .resolution import (
    ComputedAnswer,
    SearchLimits,
    derive_preconditions,
)
from .stratify import StratificationReport, check_t_stratification
from .terms import (
    Atom,
    Literal,
    ObjectConst,
    ObjectVar,
    Substitution,
    TimeExpr,
    TimePoint,
    match,
)

GROUND_GROUP = ""  # m_groups key for literals with a constant timestamp


@dataclass(frozen=True)
class TriggerGroup:
    time_var: Optional[str]  # None for the constant-timestamp group
    offset: int              # minimal offset, or minimal timestamp
    literals: tuple[Literal, ...]

    @property
    def key(self) -> str:
        return self.time_var if self.time_var is not None else GROUND_GROUP


@dataclass(frozen=True)
class PreconditionEntry:
    subst: Substitution
    groups: tuple[TriggerGroup, ...]
    deferred: tuple[Literal, ...]

    def all_literals(self) -> tuple[Literal, ...]:
        out: tuple[Literal, ...] = ()
        for g in self.groups:
            out += g.literals
        return out + self.deferred

    def __str__(self) -> str:
        groups = "; ".join(
            f"{g.key or '@'}: {{{', '.join(map(str, g.literals))}}}"
            for g in self.groups
        )
        deferred = ", ".join(map(str, self.deferred))
        return f"<{self.subst}, {{{groups}}}, {{{deferred}}}>"


def split_trigger_groups(premises: Sequence[Literal], program: Program
                         ) -> tuple[tuple[TriggerGroup, ...],
                                    tuple[Literal, ...]]:
    """Partition residual literals into minimal-timestamp trigger groups
    and the deferred rest."""
    by_var: dict[str, list[tuple[int, Literal]]] = {}
    ground_time: list[tuple[int, Literal]] = []
    deferred: list[Literal] = []
    for lit in premises:
        if not program.signature[lit.pred].temporal:
            deferred.append(lit)  # rigid literals never trigger seeding
            continue
        t = lit.atom.args[-1]
        if isinstance(t, TimeExpr):
            by_var.setdefault(t.var, []).append((t.offset, lit))
        else:
            assert isinstance(t, TimePoint)
            ground_time.append((t.value, lit))
    groups: list[TriggerGroup] = []
    for var in sorted(by_var):
        entries = by_var[var]
        k_min = min(k for k, _ in entries)
        trigger = tuple(l for k, l in entries if k == k_min)
        deferred.extend(l for k, l in entries if k != k_min)
        groups.append(TriggerGroup(var, k_min, trigger))
    if ground_time:
        t_min = min(t for t, _ in ground_time)
        trigger = tuple(l for t, l in ground_time if t == t_min)
        deferred.extend(l for t, l in ground_time if t != t_min)
        groups.append(TriggerGroup(None, t_min, trigger))
    return tuple(groups), tuple(deferred)


# ---------------------------------------------------------------------------
# Subsumption

def _answer_pattern(answer: ComputedAnswer, goal: Atom) -> Atom:
    order = sorted(goal.vars())
    args = []
    for v in order:
        bound = answer.subst.get(v)
        if bound is not None:
            args.append(bound)
        else:
            # Unbound goal variables keep their own name; its sort does not
            # matter for matching, object-variable form is enough.
            args.append(_var_term(v, goal))
    return Atom("__answer__", tuple(args))


def _var_term(name: str, goal: Atom):
    for arg in goal.args:
        if isinstance(arg, TimeExpr) and arg.var == name:
            return TimeExpr(name, 0)
    return ObjectVar(name)


def _subsumes(general: ComputedAnswer, specific: ComputedAnswer, goal: Atom
              ) -> bool:
    """True when some instantiation of `general` answers at least as much
    with a subset of the premises of `specific`."""
    start = match(_answer_pattern(general, goal),
                  _answer_pattern(specific, goal))
    if start is None:
        return False
    targets = list(specific.premises)

    def cover(i: int, subst: Substitution) -> bool:
        if i == len(general.premises):
            return True
        lit = general.premises[i]
        for target in targets:
            if target.negated != lit.negated:
                continue
            extended = match(subst.apply_atom(lit.atom), target.atom)
            if extended is not None and cover(i + 1, subst.compose(extended)):
                return True
        return False

    return cover(0, start)


def subsumption_minimize(answers: Sequence[ComputedAnswer], goal: Atom
                         ) -> list[ComputedAnswer]:
    """Antichain under subsumption: drop any answer that another answer
    instantiates to, with a subset of its premises."""
    unique: list[ComputedAnswer] = []
    seen = set()
    for a in answers:
        key = (a.subst, frozenset(a.premises))
        if key not in seen:
            seen.add(key)
            unique.append(a)

    def preference(a: ComputedAnswer) -> tuple:
        return (len(a.premises), str(a))

    kept: list[ComputedAnswer] = []
    for i, a in enumerate(unique):
        dominated = False
        for j, b in enumerate(unique):
            if i == j:
                continue
            if _subsumes(b, a, goal):
                if _subsumes(a, b, goal):
                    # Mutually subsuming: keep the preferred representative.
                    if preference(b) < preference(a):
                        dominated = True
                        break
                else:
                    dominated = True
                    break
        if not dominated:
            kept.append(a)
    return sorted(kept, key=str)


# ---------------------------------------------------------------------------
# Compilation

def precompute_preconditions(query: Query, mode: str = "strict",
                             limits: SearchLimits | None = None,
                             universe: Sequence[str] = ()
                             ) -> list[PreconditionEntry]:
    """Compile the precondition set of one query.

    `strict` mode demands a nonrecursive and connected query and then
    terminates unconditionally.  `guarded` mode takes a finite object
    universe, instantiates fresh body variables over it, and fails loudly
    (LimitExceededError with a loop diagnosis) when a derivation repeats
    modulo temporal shift."""
    if mode not in ("strict", "guarded"):
        raise ValueError(f"unknown mode {mode!r}")
    limits = limits or SearchLimits()
    program = query.program
    if mode == "strict":
        classification = validate_program(program, query)
        problems = []
        if not classification.nonrecursive:
            problems.append(
                "recursive through " + " -> ".join(
                    classification.recursive_cycle
                )
            )
        if not classification.connected:
            problems.append(
                "unconnected rule(s): "
                + "; ".join(classification.unconnected_rules)
            )
        if problems:
            raise NotEligibleError(
                "strict preprocessing requires a nonrecursive, connected "
                "query: " + "; ".join(problems),
                classification=classification,
            )
        answers = derive_preconditions(query, limits)
    else:
        full_universe = sorted(set(universe) | program.constants())
        answers = derive_preconditions(
            query, limits, guarded=True, universe=full_universe
        )
    minimized = subsumption_minimize(answers, query.goal)
    entries = [
        PreconditionEntry(
            a.subst, *split_trigger_groups(a.premises, program)
        )
        for a in minimized
    ]
    return sorted(entries, key=str)


@dataclass
class QueryRecord:
    query_id: str
    goal: Atom
    entries: tuple[PreconditionEntry, ...]
    kind: str  # "root" or "auxiliary"
    negated_predicate: Optional[str] = None


@dataclass
class QueryFamily:
    program: Program
    root_id: str
    records: dict[str, QueryRecord]
    order: tuple[str, ...]
    report: StratificationReport
    mode: str
    limits: SearchLimits
    universe: tuple[str, ...]
    aux_for: dict[str, str]  # negated predicate -> query id

    @property
    def root(self) -> QueryRecord:
        return self.records[self.root_id]


_AUX_OBJECT_NAMES = "ABCDEFGHIJKLMNOPQRSUVWXYZ"  # T reserved for time


def _aux_goal(pred: str, program: Program) -> Atom:
    info = program.signature[pred]
    args: list = []
    for i in range(info.arity - 1):
        if i < len(_AUX_OBJECT_NAMES):
            args.append(ObjectVar(_AUX_OBJECT_NAMES[i]))
        else:
            args.append(ObjectVar(f"A{i}"))
    args.append(TimeExpr("T", 0))
    return Atom(pred, tuple(args))


def _general_goal_covers(goal: Atom) -> bool:
    """The goal's arguments are pairwise distinct variables, so the query
    already answers every instance of its predicate."""
    seen = set()
    for arg in goal.args:
        if isinstance(arg, ObjectVar):
            key = arg.name
        elif isinstance(arg, TimeExpr) and arg.offset == 0:
            key = arg.var
        else:
            return False
        if key in seen:
            return False
        seen.add(key)
    return True


def build_query_family(query: Query, mode: str = "strict",
                       limits: SearchLimits | None = None,
                       universe: Sequence[str] = (),
                       allow_unstratified: bool = False) -> QueryFamily:
    """Compile the root query plus auxiliary queries for every negated
    intensional predicate reachable through any residual, to closure."""
    limits = limits or SearchLimits()
    program = query.program
    report = check_t_stratification(program)
    if program.has_negation() and not report.stratified:
        if not allow_unstratified:
            raise NotStratifiedError(
                "program is not T-stratified; negation resolution order "
                "would be unsound (pass allow_unstratified to force)",
                report=report,
            )
    root_id = str(query.goal)
    records: dict[str, QueryRecord] = {}
    aux_for: dict[str, str] = {}
    root_entries = precompute_preconditions(query, mode, limits, universe)
    records[root_id] = QueryRecord(root_id, query.goal,
                                   tuple(root_entries), "root")
    if _general_goal_covers(query.goal):
        aux_for[query.goal.pred] = root_id

    pending = [root_id]
    while pending:
        record = records[pending.pop()]
        for entry in record.entries:
            for lit in entry.all_literals():
                if not lit.negated or program.is_edb(lit.pred):
                    continue
                if lit.pred in aux_for:
                    continue
                goal = _aux_goal(lit.pred, program)
                aux_id = str(goal)
                aux_query = Query(goal, program)
                entries = precompute_preconditions(
                    aux_query, mode, limits, universe
                )
                records[aux_id] = QueryRecord(
                    aux_id, goal, tuple(entries), "auxiliary",
                    negated_predicate=lit.pred,
                )
                aux_for[lit.pred] = aux_id
                pending.append(aux_id)

    order = tuple(sorted(
        records,
        key=lambda qid: (
            report.predicate_levels.get(records[qid].goal.pred, 0), qid
        ),
    ))
    return QueryFamily(
        program=program,
        root_id=root_id,
        records=records,
        order=order,
        report=report,
        mode=mode,
        limits=limits,
        universe=tuple(sorted(set(universe))),
        aux_for=aux_for,
    )


# ---------------------------------------------------------------------------
# Serialization: the contract between `preprocess` and `run`

FORMAT_NAME = "hypolog-preconditions"
FORMAT_VERSION = 1


def program_fingerprint(program: Program) -> str:
    text = "\n".join(str(r) for r in program.rules)
    text += "\n" + "\n".join(
        f"{p}/{info.arity}:{'t' if info.temporal else 'r'}"
        f"{'e' if info.edb else 'i'}"
        for p, info in sorted(program.signature.items())
    )
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _term_to_json(term):
    if isinstance(term, TimePoint):
        return term.value
    return str(term)


def _term_from_json(value, time_sorted: bool):
    if isinstance(value, int):
        return TimePoint(value)
    text = str(value)
    if text and text[0].isupper():
        head = text
        offset = 0
        for sep in ("+", "-"):
            if sep in text[1:]:
                idx = text.index(sep, 1)
                head, offset = text[:idx], int(text[idx:])
                break
        if time_sorted or offset:
            return TimeExpr(head, offset)
        return ObjectVar(head)
    if text.startswith("'") and text.endswith("'"):
        return ObjectConst(text[1:-1].replace("\\'", "'"))
    return ObjectConst(text)


def _subst_to_json(subst: Substitution) -> dict:
    return {v: _term_to_json(t) for v, t in subst.items()}


def _subst_from_json(data: dict, goal: Atom) -> Substitution:
    time_vars = {
        a.var for a in goal.args if isinstance(a, TimeExpr)
    }
    return Substitution({
        v: _term_from_json(raw, v in time_vars) for v, raw in data.items()
    })


def _entry_to_json(entry: PreconditionEntry) -> dict:
    return {
        "theta": _subst_to_json(entry.subst),
        "m_groups": {
            g.key: [str(l) for l in g.literals] for g in entry.groups
        },
        "f_rest": [str(l) for l in entry.deferred],
    }


def _entry_from_json(data: dict, goal: Atom, program: Program
                     ) -> PreconditionEntry:
    subst = _subst_from_json(data["theta"], goal)
    literals: list[Literal] = []
    for key in data["m_groups"]:
        literals.extend(
            parse_literal_text(text, program) for text in data["m_groups"][key]
        )
    deferred = [parse_literal_text(t, program) for t in data["f_rest"]]
    groups, extra = split_trigger_groups(
        tuple(literals) + tuple(deferred), program
    )
    return PreconditionEntry(subst, groups, extra)


def family_to_json(family: QueryFamily) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "program_fingerprint": program_fingerprint(family.program),
        "mode": family.mode,
        "limits": {
            "max_depth": family.limits.max_depth,
            "max_nodes": family.limits.max_nodes,
        },
        "universe": list(family.universe),
        "root": family.root_id,
        "order": list(family.order),
        "queries": {
            qid: {
                "goal": str(rec.goal),
                "kind": rec.kind,
                "negated_predicate": rec.negated_predicate,
                "entries": [_entry_to_json(e) for e in rec.entries],
            }
            for qid, rec in sorted(family.records.items())
        },
        "stratification": {
            "stratified": family.report.stratified,
            "strata": dict(sorted(family.report.strata.items())),
            "counterexample": (
                list(family.report.counterexample)
                if family.report.counterexample
                else None
            ),
            "predicate_levels": dict(
                sorted(family.report.predicate_levels.items())
            ),
            "time_coefficient": family.report.time_coefficient,
        },
    }


def family_from_json(data: dict, program: Program) -> QueryFamily:
    if data.get("format") != FORMAT_NAME:
        raise SignatureError(
            f"not a {FORMAT_NAME} document: {data.get('format')!r}"
        )
    if data.get("version") != FORMAT_VERSION:
        raise SignatureError(
            f"unsupported {FORMAT_NAME} version {data.get('version')!r}"
        )
    fingerprint = program_fingerprint(program)
    if data.get("program_fingerprint") != fingerprint:
        raise SignatureError(
            "precondition file was compiled from a different program "
            f"(fingerprint {data.get('program_fingerprint')}, "
            f"expected {fingerprint})"
        )
    records: dict[str, QueryRecord] = {}
    aux_for: dict[str, str] = {}
    for qid, rec in data["queries"].items():
        goal = parse_literal_text(rec["goal"], program).atom
        entries = tuple(
            _entry_from_json(e, goal, program) for e in rec["entries"]
        )
        records[qid] = QueryRecord(
            qid, goal, entries, rec["kind"], rec.get("negated_predicate")
        )
        if rec.get("negated_predicate"):
            aux_for[rec["negated_predicate"]] = qid
    strat = data["stratification"]
    report = StratificationReport(
        stratified=strat["stratified"],
        strata=dict(strat["strata"]),
        counterexample=(
            tuple(strat["counterexample"]) if strat["counterexample"] else None
        ),
        predicate_levels=dict(strat["predicate_levels"]),
        time_coefficient=strat["time_coefficient"],
    )
    root_goal = records[data["root"]].goal
    if _general_goal_covers(root_goal):
        aux_for.setdefault(root_goal.pred, data["root"])
    return QueryFamily(
        program=program,
        root_id=data["root"],
        records=records,
        order=tuple(data["order"]),
        report=report,
        mode=data["mode"],
        limits=SearchLimits(**data["limits"]),
        universe=tuple(data["universe"]),
        aux_for=aux_for,
    )


def dump_family(family: QueryFamily) -> str:
    return json.dumps(family_to_json(family), indent=2, sort_keys=True)


def load_family(text: str, program: Program) -> QueryFamily:
    return family_from_json(json.loads(text), program)
