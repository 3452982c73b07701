"""Abstract syntax and substitution machinery for temporal Datalog.

Terms come in two sorts: object terms (constants and variables) and time
terms (naturals, or a time variable plus an integer offset).  Predicates
carry at most one temporal argument, always in last position; that fact is
recorded in the program signature rather than on the atoms themselves.

Everything here is immutable and hashable, so atoms and literals can live
in sets and dict keys freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import NegativeTimeError, SortError


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True, slots=True)
class ObjectConst:
    name: str

    def __str__(self) -> str:
        if _BARE_CONST.fullmatch(self.name):
            return self.name
        return "'" + self.name.replace("'", "\\'") + "'"


@dataclass(frozen=True, slots=True)
class ObjectVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class TimePoint:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise NegativeTimeError(f"time point {self.value} is negative")

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class TimeExpr:
    """A time variable plus an integer offset; offset 0 is the bare variable."""

    var: str
    offset: int = 0

    def __str__(self) -> str:
        if self.offset == 0:
            return self.var
        if self.offset > 0:
            return f"{self.var}+{self.offset}"
        return f"{self.var}{self.offset}"

    def shifted(self, delta: int) -> "TimeExpr":
        return TimeExpr(self.var, self.offset + delta)


Term = Union[ObjectConst, ObjectVar, TimePoint, TimeExpr]

# Bare (unquoted) constants and numbers; anything else pretty-prints quoted.
_BARE_CONST = re.compile(r"[a-z][A-Za-z0-9_]*|[0-9]+")


def is_object_term(t: Term) -> bool:
    return isinstance(t, (ObjectConst, ObjectVar))


def is_time_term(t: Term) -> bool:
    return isinstance(t, (TimePoint, TimeExpr))


def term_vars(t: Term) -> set[str]:
    if isinstance(t, ObjectVar):
        return {t.name}
    if isinstance(t, TimeExpr):
        return {t.var}
    return set()


# ---------------------------------------------------------------------------
# Atoms, literals, rules


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    end_line: int
    end_column: int
    file: str = "<input>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(str(a) for a in self.args)})"

    @property
    def last(self) -> Term:
        return self.args[-1]

    def vars(self) -> set[str]:
        out: set[str] = set()
        for a in self.args:
            out |= term_vars(a)
        return out

    def is_ground(self) -> bool:
        return not any(isinstance(a, (ObjectVar, TimeExpr)) for a in self.args)

    def time_term(self) -> Term:
        """Last argument; only meaningful for temporal predicates."""
        return self.args[-1]


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return ("not " + str(self.atom)) if self.negated else str(self.atom)

    def vars(self) -> set[str]:
        return self.atom.vars()

    @property
    def pred(self) -> str:
        return self.atom.pred


def pos(atom: Atom) -> Literal:
    return Literal(atom, False)


def neg(atom: Atom) -> Literal:
    return Literal(atom, True)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Literal, ...]
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{', '.join(str(b) for b in self.body)} -> {self.head}."

    def is_fact(self) -> bool:
        return not self.body

    def vars(self) -> set[str]:
        out = self.head.vars()
        for lit in self.body:
            out |= lit.vars()
        return out


# ---------------------------------------------------------------------------
# Substitutions


class Substitution:
    """Finite-support map from variable names to terms.

    Identity bindings are never stored.  Object variables map to object
    terms and time variables to time terms; the sort of each binding is
    implied by the term on the right-hand side.
    """

    __slots__ = ("_bindings", "_hash")

    def __init__(self, bindings: Mapping[str, Term] | None = None):
        data: dict[str, Term] = {}
        if bindings:
            for var, term in bindings.items():
                if isinstance(term, ObjectVar) and term.name == var:
                    continue
                if isinstance(term, TimeExpr) and term.var == var and term.offset == 0:
                    continue
                data[var] = term
        self._bindings = data
        self._hash: int | None = None

    # -- mapping-ish protocol

    def __contains__(self, var: str) -> bool:
        return var in self._bindings

    def get(self, var: str) -> Optional[Term]:
        return self._bindings.get(var)

    def __len__(self) -> int:
        return len(self._bindings)

    def __iter__(self) -> Iterator[str]:
        return iter(self._bindings)

    def items(self) -> list[tuple[str, Term]]:
        return sorted(self._bindings.items())

    @property
    def support(self) -> set[str]:
        return set(self._bindings)

    def is_ground(self) -> bool:
        return all(
            isinstance(t, (ObjectConst, TimePoint)) for t in self._bindings.values()
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Substitution):
            return NotImplemented
        return self._bindings == other._bindings

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._bindings.items()))
        return self._hash

    def __str__(self) -> str:
        inner = ", ".join(f"{v}:={t}" for v, t in self.items())
        return "{" + inner + "}"

    __repr__ = __str__

    # -- application

    def apply_term(self, t: Term) -> Term:
        if isinstance(t, ObjectVar):
            return self._bindings.get(t.name, t)
        if isinstance(t, TimeExpr):
            bound = self._bindings.get(t.var)
            if bound is None:
                return t
            if isinstance(bound, TimePoint):
                value = bound.value + t.offset
                if value < 0:
                    raise NegativeTimeError(
                        f"instantiating {t} with {t.var}:={bound} yields {value}"
                    )
                return TimePoint(value)
            if isinstance(bound, TimeExpr):
                return TimeExpr(bound.var, bound.offset + t.offset)
            raise SortError(f"time variable {t.var} bound to object term {bound}")
        return t

    def apply_atom(self, a: Atom) -> Atom:
        if not self._bindings:
            return a
        return Atom(a.pred, tuple(self.apply_term(t) for t in a.args), a.span)

    def apply_literal(self, lit: Literal) -> Literal:
        return Literal(self.apply_atom(lit.atom), lit.negated)

    def apply_literals(self, lits: Iterable[Literal]) -> tuple[Literal, ...]:
        return tuple(self.apply_literal(l) for l in lits)

    def apply_rule(self, r: Rule) -> Rule:
        return Rule(self.apply_atom(r.head), self.apply_literals(r.body), r.span)

    # -- algebra

    def compose(self, other: "Substitution") -> "Substitution":
        """Composition: applying the result equals applying self, then other.

        Bindings that collapse to the identity are deleted, and bindings of
        `other` whose variable is already bound by self are dropped.
        """
        data: dict[str, Term] = {}
        for var, term in self._bindings.items():
            data[var] = other.apply_term(term)
        for var, term in other._bindings.items():
            if var not in self._bindings:
                data[var] = term
        return Substitution(data)

    def restrict(self, variables: set[str]) -> "Substitution":
        return Substitution(
            {v: t for v, t in self._bindings.items() if v in variables}
        )

    @staticmethod
    def of(**bindings: Term) -> "Substitution":
        return Substitution(bindings)


EMPTY_SUBST = Substitution()


def apply_substitution(atom: Atom, subst: Substitution) -> Atom:
    """Instantiate `atom`, folding temporal arithmetic.

    Raises NegativeTimeError when a time term would fall below zero; such
    instances lie outside the temporal sort and callers discard them.
    """
    return subst.apply_atom(atom)


# ---------------------------------------------------------------------------
# Unification

def _unify_pair(x: Term, y: Term) -> Optional[Substitution]:
    """Unify two already-instantiated terms.

    Returns the binding to add, or None when no unifier exists.  When both
    sides are variables the right-hand (`y`) side is bound, so that callers
    unifying goal atoms against renamed clause heads obtain mgus whose
    right-hand sides only mention goal variables.
    """
    if x == y:
        return EMPTY_SUBST
    if isinstance(x, ObjectConst) or isinstance(x, ObjectVar):
        if isinstance(y, ObjectVar):
            return Substitution({y.name: x})
        if isinstance(x, ObjectVar):
            return Substitution({x.name: y}) if is_object_term(y) else None
        return None  # distinct constants, or object/time clash
    if isinstance(x, TimePoint):
        if isinstance(y, TimePoint):
            return None  # distinct values
        if isinstance(y, TimeExpr):
            value = x.value - y.offset
            if value < 0:
                return None
            return Substitution({y.var: TimePoint(value)})
        return None
    if isinstance(x, TimeExpr):
        if isinstance(y, TimeExpr):
            if x.var == y.var:
                return None  # same variable, distinct offsets
            return Substitution({y.var: TimeExpr(x.var, x.offset - y.offset)})
        if isinstance(y, TimePoint):
            value = y.value - x.offset
            if value < 0:
                return None
            return Substitution({x.var: TimePoint(value)})
        return None
    return None


def mgu(a: Atom, b: Atom) -> Optional[Substitution]:
    """Most general unifier of two atoms, or None.

    The result is idempotent: bindings are folded left to right as they are
    produced.  Unification of time terms is arithmetic: T+k against a time
    point v binds T := v-k and fails when v-k < 0.
    """
    if a.pred != b.pred or len(a.args) != len(b.args):
        return None
    subst = EMPTY_SUBST
    for x, y in zip(a.args, b.args):
        try:
            xi = subst.apply_term(x)
            yi = subst.apply_term(y)
        except NegativeTimeError:
            return None
        binding = _unify_pair(xi, yi)
        if binding is None:
            return None
        subst = subst.compose(binding)
    return subst


def match(pattern: Atom, target: Atom, subst: Substitution | None = None
          ) -> Optional[Substitution]:
    """One-way matching: instantiate `pattern` to equal `target`.

    Variables of `target` are treated as rigid symbols, so the result only
    binds pattern variables.  Used for fact matching and subsumption.
    """
    if pattern.pred != target.pred or len(pattern.args) != len(target.args):
        return None
    out = subst if subst is not None else EMPTY_SUBST
    for p, t in zip(pattern.args, target.args):
        try:
            p = out.apply_term(p)
        except NegativeTimeError:
            return None
        if p == t:
            continue
        if isinstance(p, ObjectVar) and is_object_term(t):
            out = out.compose(Substitution({p.name: t}))
        elif isinstance(p, TimeExpr):
            if isinstance(t, TimePoint):
                value = t.value - p.offset
                if value < 0:
                    return None
                out = out.compose(Substitution({p.var: TimePoint(value)}))
            elif isinstance(t, TimeExpr):
                out = out.compose(
                    Substitution({p.var: TimeExpr(t.var, t.offset - p.offset)})
                )
            else:
                return None
        else:
            return None
    return out


# ---------------------------------------------------------------------------
# Renaming

class VarRenamer:
    """Deterministic fresh-variable supply for renaming clauses apart.

    Renamed variables carry a '#' marker, which the concrete grammar cannot
    produce, so an internal name leaking into output fails loudly in
    round-trip tests.
    """

    def __init__(self):
        self._counter = 0

    def rename_rule(self, rule: Rule) -> Rule:
        self._counter += 1
        tag = self._counter
        names = {v: f"{v.split('#')[0]}#{tag}" for v in rule.vars()}
        return _rename_rule_vars(rule, names)


def _rename_term(t: Term, names: Mapping[str, str]) -> Term:
    if isinstance(t, ObjectVar):
        return ObjectVar(names.get(t.name, t.name))
    if isinstance(t, TimeExpr):
        return TimeExpr(names.get(t.var, t.var), t.offset)
    return t


def _rename_atom(a: Atom, names: Mapping[str, str]) -> Atom:
    return Atom(a.pred, tuple(_rename_term(t, names) for t in a.args), a.span)


def _rename_rule_vars(rule: Rule, names: Mapping[str, str]) -> Rule:
    return Rule(
        _rename_atom(rule.head, names),
        tuple(Literal(_rename_atom(l.atom, names), l.negated) for l in rule.body),
        rule.span,
    )


def rename_literals(lits: Iterable[Literal], names: Mapping[str, str]
                    ) -> tuple[Literal, ...]:
    return tuple(Literal(_rename_atom(l.atom, names), l.negated) for l in lits)


def canonical_renaming(order: Iterable[str]) -> dict[str, str]:
    """Map variables to V0, V1, ... in first-occurrence order."""
    names: dict[str, str] = {}
    for v in order:
        if v not in names:
            names[v] = f"V{len(names)}"
    return names
