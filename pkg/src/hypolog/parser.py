"""Concrete syntax for programs, queries, and timestamped fact streams.

Program grammar (line comments start with '%'):

    Temp(X, high, T), Flag(X, T+1) -> Cool(X, T+1).   % rule: Body -> Head.
    Temp(wt25, high, 3).                              % static fact
    #query Malf(X, T).                                % continuous query
    #rigid parent/2.                                  % rigid predicate decl

Variables match [A-Z][A-Za-z0-9_]*, constants [a-z][A-Za-z0-9_]* or
single-quoted strings, time terms are `T`, `T+2`, `T-2` or integer
literals.  `not ` prefixes a negated body literal.

Stream blocks are line oriented:

    @0
    Temp(wt25, high, 0).
    @1

Each block starts with `@<n>`; facts must be ground, extensional, and
stamped with the block's tick.  Ticks are strictly consecutive; a tick with
no facts is written as a bare header.

Predicate sorts are not declared: they are inferred.  Integer literals and
offset expressions in last argument position mark a predicate as temporal,
object constants there mark it rigid, and the sorts propagate through
shared variables.  Variables left unconstrained in last position default
to the temporal sort; `#rigid p/n.` overrides the default.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .errors import ParseError, SignatureError, SortError, StreamError
from .program import PredicateInfo, Program, Query, check_safety
from .terms import (
    Atom,
    Literal,
    ObjectConst,
    ObjectVar,
    Rule,
    SourceSpan,
    TimeExpr,
    TimePoint,
)

# ---------------------------------------------------------------------------
# Tokens

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>%[^\n]*)
  | (?P<newline>\n)
  | (?P<arrow>->)
  | (?P<upper>[A-Z][A-Za-z0-9_]*)
  | (?P<lower>[a-z][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<string>'(?:\\'|[^'])*')
  | (?P<hash>\#[a-z]+)
  | (?P<punct>[(),./+@-])
    """,
    re.VERBOSE,
)

_PUNCT_NAMES = {
    "(": "lparen", ")": "rparen", ",": "comma", ".": "dot",
    "/": "slash", "+": "plus", "-": "minus", "@": "at",
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            span = SourceSpan(line, col, line, col + 1, filename)
            raise ParseError(f"unexpected character {text[i]!r}", span)
        kind = m.lastgroup or ""
        raw = m.group()
        span = SourceSpan(line, col, line, col + len(raw), filename)
        if kind == "newline":
            line += 1
            col = 1
        else:
            col += len(raw)
            if kind == "punct":
                tokens.append(Token(_PUNCT_NAMES[raw], raw, span))
            elif kind not in ("ws", "comment"):
                tokens.append(Token(kind, raw, span))
        i = m.end()
    tokens.append(Token("eof", "", SourceSpan(line, col, line, col, filename)))
    return tokens


# ---------------------------------------------------------------------------
# Raw (sort-unresolved) syntax trees

@dataclass(frozen=True)
class RawVar:
    name: str
    span: SourceSpan


@dataclass(frozen=True)
class RawNum:
    value: int
    span: SourceSpan


@dataclass(frozen=True)
class RawConst:
    name: str
    span: SourceSpan


@dataclass(frozen=True)
class RawOffset:
    var: str
    offset: int
    span: SourceSpan


@dataclass(frozen=True)
class RawAtom:
    pred: str
    args: tuple
    span: SourceSpan


@dataclass(frozen=True)
class RawLiteral:
    atom: RawAtom
    negated: bool


@dataclass(frozen=True)
class RawRule:
    head: RawAtom
    body: tuple[RawLiteral, ...]
    span: SourceSpan


class _TokenCursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(
                f"expected {what}, found {tok.text!r}" if tok.text
                else f"expected {what}, found end of input",
                tok.span,
            )
        return self.next()


def _parse_term(cur: _TokenCursor):
    tok = cur.peek()
    if tok.kind == "upper":
        cur.next()
        sign = cur.peek()
        if sign.kind in ("plus", "minus"):
            cur.next()
            num = cur.expect("int", "an integer offset")
            k = int(num.text)
            if sign.kind == "minus":
                k = -k
            return RawOffset(tok.text, k, tok.span)
        return RawVar(tok.text, tok.span)
    if tok.kind == "lower":
        cur.next()
        return RawConst(tok.text, tok.span)
    if tok.kind == "int":
        cur.next()
        return RawNum(int(tok.text), tok.span)
    if tok.kind == "string":
        cur.next()
        body = tok.text[1:-1].replace("\\'", "'")
        return RawConst(body, tok.span)
    raise ParseError(f"expected a term, found {tok.text!r}", tok.span)


def _parse_atom(cur: _TokenCursor) -> RawAtom:
    name = cur.peek()
    if name.kind not in ("upper", "lower"):
        raise ParseError(
            f"expected a predicate name, found {name.text!r}", name.span
        )
    cur.next()
    cur.expect("lparen", "'('")
    args = [_parse_term(cur)]
    while cur.peek().kind == "comma":
        cur.next()
        args.append(_parse_term(cur))
    close = cur.expect("rparen", "')'")
    span = SourceSpan(
        name.span.line, name.span.column,
        close.span.end_line, close.span.end_column, name.span.file,
    )
    return RawAtom(name.text, tuple(args), span)


def _parse_literal(cur: _TokenCursor) -> RawLiteral:
    tok = cur.peek()
    if tok.kind == "lower" and tok.text == "not" and cur.peek(1).kind in (
        "upper", "lower",
    ):
        cur.next()
        return RawLiteral(_parse_atom(cur), True)
    return RawLiteral(_parse_atom(cur), False)


@dataclass
class ParseResult:
    program: Program
    queries: list[Query]

    @property
    def query(self) -> Optional[Query]:
        """The unique query of the file, or None."""
        if len(self.queries) > 1:
            raise ParseError(
                f"expected at most one #query, found {len(self.queries)}"
            )
        return self.queries[0] if self.queries else None


def parse_program(text: str, filename: str = "<input>") -> ParseResult:
    """Parse program text: rules, facts, #query and #rigid directives."""
    cur = _TokenCursor(tokenize(text, filename))
    raw_rules: list[RawRule] = []
    raw_queries: list[RawAtom] = []
    rigid_decls: dict[str, int] = {}

    while cur.peek().kind != "eof":
        tok = cur.peek()
        if tok.kind == "hash":
            cur.next()
            if tok.text == "#query":
                raw_queries.append(_parse_atom(cur))
                cur.expect("dot", "'.'")
            elif tok.text == "#rigid":
                name = cur.next()
                if name.kind not in ("upper", "lower"):
                    raise ParseError("expected a predicate name", name.span)
                cur.expect("slash", "'/'")
                arity = cur.expect("int", "an arity")
                rigid_decls[name.text] = int(arity.text)
                cur.expect("dot", "'.'")
            else:
                raise ParseError(f"unknown directive {tok.text}", tok.span)
            continue
        first = _parse_literal(cur)
        if cur.peek().kind == "dot":
            cur.next()
            if first.negated:
                raise ParseError("a fact cannot be negated", first.atom.span)
            raw_rules.append(RawRule(first.atom, (), first.atom.span))
            continue
        body = [first]
        while cur.peek().kind == "comma":
            cur.next()
            body.append(_parse_literal(cur))
        cur.expect("arrow", "'->', ',' or '.'")
        head = _parse_atom(cur)
        dot = cur.expect("dot", "'.'")
        span = SourceSpan(
            first.atom.span.line, first.atom.span.column,
            dot.span.end_line, dot.span.end_column, filename,
        )
        raw_rules.append(RawRule(head, tuple(body), span))

    signature, temporal = _infer_signature(raw_rules, raw_queries, rigid_decls)
    rules = tuple(
        Rule(
            _type_atom(r.head, temporal, signature),
            tuple(
                Literal(_type_atom(l.atom, temporal, signature), l.negated)
                for l in r.body
            ),
            r.span,
        )
        for r in raw_rules
    )
    program = Program(rules, signature, frozenset(rigid_decls))
    check_safety(program)
    queries = [
        Query(_type_atom(q, temporal, signature), program) for q in raw_queries
    ]
    return ParseResult(program, queries)


# ---------------------------------------------------------------------------
# Sort inference

def _infer_signature(
    raw_rules: list[RawRule],
    raw_queries: list[RawAtom],
    rigid_decls: dict[str, int],
) -> tuple[dict[str, PredicateInfo], dict[str, bool]]:
    scopes: list[list[RawAtom]] = []
    for rule in raw_rules:
        scopes.append([rule.head] + [l.atom for l in rule.body])
    for q in raw_queries:
        scopes.append([q])

    arity: dict[str, int] = {}
    for scope in scopes:
        for atom in scope:
            seen = arity.setdefault(atom.pred, len(atom.args))
            if seen != len(atom.args):
                raise SignatureError(
                    f"predicate {atom.pred} used with arity {len(atom.args)} "
                    f"and {seen}"
                )
    for pred, declared in rigid_decls.items():
        if pred in arity and arity[pred] != declared:
            raise SignatureError(
                f"#rigid {pred}/{declared} conflicts with arity {arity[pred]}"
            )
        arity.setdefault(pred, declared)

    # temporal[p]: True/False once evidence fixes it; absent while unknown.
    temporal: dict[str, bool] = {p: False for p in rigid_decls}
    # var_sort is per scope: maps variable name to "time" | "object".
    var_sorts: list[dict[str, str]] = [dict() for _ in scopes]

    def set_pred(pred: str, is_temporal: bool, why: str) -> bool:
        old = temporal.get(pred)
        if old is None:
            temporal[pred] = is_temporal
            return True
        if old != is_temporal:
            raise SignatureError(
                f"predicate {pred} is both temporal and rigid ({why})"
            )
        return False

    def set_var(sorts: dict[str, str], name: str, sort: str, span: SourceSpan
                ) -> bool:
        old = sorts.get(name)
        if old is None:
            sorts[name] = sort
            return True
        if old != sort:
            raise SortError(
                f"{span}: variable {name} is used both as a time variable "
                f"and as an object variable"
            )
        return False

    changed = True
    while changed:
        changed = False
        for scope, sorts in zip(scopes, var_sorts):
            for atom in scope:
                n = len(atom.args)
                for i, arg in enumerate(atom.args):
                    last = i == n - 1
                    if isinstance(arg, RawOffset):
                        if not last:
                            raise SortError(
                                f"{arg.span}: time expression "
                                f"{arg.var}{arg.offset:+d} outside the "
                                f"last argument position"
                            )
                        changed |= set_var(sorts, arg.var, "time", arg.span)
                        changed |= set_pred(
                            atom.pred, True, f"offset in {atom.pred}"
                        )
                    elif isinstance(arg, RawNum):
                        if last and temporal.get(atom.pred) is not False:
                            changed |= set_pred(
                                atom.pred, True,
                                f"integer timestamp in {atom.pred}",
                            )
                    elif isinstance(arg, RawConst):
                        if last:
                            changed |= set_pred(
                                atom.pred, False,
                                f"object constant in last argument of "
                                f"{atom.pred}",
                            )
                    elif isinstance(arg, RawVar):
                        if not last:
                            changed |= set_var(
                                sorts, arg.name, "object", arg.span
                            )
                        else:
                            known = temporal.get(atom.pred)
                            if known is True:
                                changed |= set_var(
                                    sorts, arg.name, "time", arg.span
                                )
                            elif known is False:
                                changed |= set_var(
                                    sorts, arg.name, "object", arg.span
                                )
                            elif sorts.get(arg.name) == "time":
                                changed |= set_pred(
                                    atom.pred, True,
                                    f"time variable {arg.name} in {atom.pred}",
                                )
                            elif sorts.get(arg.name) == "object":
                                changed |= set_pred(
                                    atom.pred, False,
                                    f"object variable {arg.name} in "
                                    f"{atom.pred}",
                                )

    # Default: predicates with no sort evidence get a temporal last argument.
    for pred in sorted(arity):
        if pred not in temporal:
            temporal[pred] = True

    nonempty_heads = {
        r.head.pred for r in raw_rules if r.body
    }
    signature = {
        pred: PredicateInfo(
            arity=arity[pred],
            temporal=temporal[pred],
            edb=pred not in nonempty_heads,
        )
        for pred in arity
    }
    return signature, temporal


def _type_atom(
    raw: RawAtom,
    temporal: dict[str, bool],
    signature: dict[str, PredicateInfo],
) -> Atom:
    info = signature.get(raw.pred)
    if info is None:
        raise SignatureError(f"unknown predicate {raw.pred}")
    if len(raw.args) != info.arity:
        raise SignatureError(
            f"{raw.span}: predicate {raw.pred} used with arity "
            f"{len(raw.args)}, expected {info.arity}"
        )
    args = []
    n = len(raw.args)
    for i, arg in enumerate(raw.args):
        time_position = info.temporal and i == n - 1
        if isinstance(arg, RawOffset):
            if not time_position:
                raise SortError(
                    f"{arg.span}: time expression in non-temporal position"
                )
            args.append(TimeExpr(arg.var, arg.offset))
        elif isinstance(arg, RawNum):
            if time_position:
                args.append(TimePoint(arg.value))
            else:
                args.append(ObjectConst(str(arg.value)))
        elif isinstance(arg, RawConst):
            if time_position:
                raise SortError(
                    f"{arg.span}: object constant {arg.name!r} in temporal "
                    f"position of {raw.pred}"
                )
            args.append(ObjectConst(arg.name))
        elif isinstance(arg, RawVar):
            if time_position:
                args.append(TimeExpr(arg.name, 0))
            else:
                args.append(ObjectVar(arg.name))
        else:  # pragma: no cover - parser produces no other node kinds
            raise SortError(f"unexpected raw term {arg!r}")
    return Atom(raw.pred, tuple(args), raw.span)


def parse_literal_text(text: str, program: Program) -> Literal:
    """Parse a single literal in the context of an existing program."""
    cur = _TokenCursor(tokenize(text))
    lit = _parse_literal(cur)
    cur.expect("eof", "end of literal")
    temporal = {p: info.temporal for p, info in program.signature.items()}
    return Literal(_type_atom(lit.atom, temporal, program.signature),
                   lit.negated)


def parse_atom_text(text: str, program: Program) -> Atom:
    lit = parse_literal_text(text, program)
    if lit.negated:
        raise ParseError("expected an atom, found a negated literal")
    return lit.atom


# ---------------------------------------------------------------------------
# Streams

@dataclass(frozen=True)
class TickBlock:
    tick: int
    facts: tuple[Atom, ...]


def _type_fact(raw: RawAtom, tick: int, program: Program) -> Atom:
    info = program.signature.get(raw.pred)
    if info is None:
        raise StreamError(
            f"{raw.span}: unknown predicate {raw.pred} in stream"
        )
    if not info.edb:
        raise StreamError(
            f"{raw.span}: predicate {raw.pred} is intensional; streams may "
            f"only carry extensional facts"
        )
    if not info.temporal:
        raise StreamError(
            f"{raw.span}: predicate {raw.pred} is rigid; stream facts must "
            f"be timestamped"
        )
    temporal = {p: i.temporal for p, i in program.signature.items()}
    atom = _type_atom(raw, temporal, program.signature)
    if not atom.is_ground():
        raise StreamError(f"{raw.span}: stream fact {atom} is not ground")
    last = atom.args[-1]
    assert isinstance(last, TimePoint)
    if last.value != tick:
        raise StreamError(
            f"{raw.span}: fact {atom} has timestamp {last.value} inside "
            f"tick block @{tick}"
        )
    return atom


def parse_stream_tick(text: str, program: Program,
                      expected_tick: int | None = None) -> TickBlock:
    """Parse one `@n` block of ground facts."""
    cur = _TokenCursor(tokenize(text))
    at = cur.expect("at", "'@'")
    num = cur.expect("int", "a tick number")
    tick = int(num.text)
    if expected_tick is not None and tick != expected_tick:
        raise StreamError(
            f"{at.span}: out-of-order tick @{tick}, expected "
            f"@{expected_tick}"
        )
    facts = []
    while cur.peek().kind != "eof":
        raw = _parse_atom(cur)
        cur.expect("dot", "'.'")
        facts.append(_type_fact(raw, tick, program))
    return TickBlock(tick, tuple(facts))


def iter_stream_blocks(lines: Iterable[str], program: Program,
                       first_tick: int = 0) -> Iterator[TickBlock]:
    """Incrementally read `@n` blocks from a line source.

    Ticks must be consecutive starting at `first_tick`; a block is emitted
    as soon as the next header (or end of input) is seen.
    """
    expected = first_tick
    current: Optional[int] = None
    facts: list[Atom] = []

    def flush() -> Optional[TickBlock]:
        nonlocal current, facts
        if current is None:
            return None
        block = TickBlock(current, tuple(facts))
        current, facts = None, []
        return block

    for lineno, line in enumerate(lines, 1):
        stripped = line.split("%", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("@"):
            block = flush()
            if block is not None:
                yield block
            try:
                tick = int(stripped[1:])
            except ValueError:
                raise StreamError(
                    f"line {lineno}: malformed tick header {stripped!r}"
                ) from None
            if tick != expected:
                raise StreamError(
                    f"line {lineno}: out-of-order tick @{tick}, expected "
                    f"@{expected} (write empty blocks for silent ticks)"
                )
            current = tick
            expected = tick + 1
        else:
            if current is None:
                raise StreamError(
                    f"line {lineno}: fact before the first @tick header"
                )
            cur = _TokenCursor(tokenize(stripped))
            raw = _parse_atom(cur)
            cur.expect("dot", "'.'")
            cur.expect("eof", "end of line")
            facts.append(_type_fact(raw, current, program))
    block = flush()
    if block is not None:
        yield block


# ---------------------------------------------------------------------------
# Pretty printing

def format_program(result: ParseResult) -> str:
    """Render a parsed program so that it reparses structurally identically.

    Every rigid predicate is pinned with a #rigid directive, since the
    default sort for otherwise-unconstrained predicates is temporal.
    """
    program = result.program
    lines: list[str] = []
    for pred in sorted(program.signature):
        info = program.signature[pred]
        if not info.temporal:
            lines.append(f"#rigid {pred}/{info.arity}.")
    for rule in program.rules:
        lines.append(str(rule))
    for query in result.queries:
        lines.append(f"#query {query.goal}.")
    return "\n".join(lines) + ("\n" if lines else "")


def format_stream(blocks: Iterable[TickBlock]) -> str:
    lines: list[str] = []
    for block in blocks:
        lines.append(f"@{block.tick}")
        for fact in block.facts:
            lines.append(f"{fact}.")
    return "\n".join(lines) + ("\n" if lines else "")
