"""Random program/stream generators for the randomized test suites.

Three families:

* connected nonrecursive positive programs (oracle-equivalence tests);
* unconstrained negation programs (stratification-verdict tests only);
* T-stratified negation programs safe for online evaluation: negated
  predicates are extensional or defined by extensional bodies with
  non-positive offsets, so their answers are always supported no later
  than the timestamp they speak about, and every rule anchors a negated
  literal with a positive literal at an offset no larger than it.
"""

from __future__ import annotations

import random

from hypolog.parser import TickBlock, parse_atom_text, parse_program
from hypolog.program import Program
from hypolog.terms import Atom, ObjectConst, TimePoint

CONSTANTS = ["a", "b"]


def _offset_text(k: int) -> str:
    if k == 0:
        return "T"
    return f"T{k:+d}"


def random_connected_program(rng: random.Random):
    """Nonrecursive, connected, negation-free; every rule's object argument
    chain is the single head variable, so compiled answers ground fully on
    seeding."""
    n_edb = rng.randint(1, 2)
    n_idb = rng.randint(1, 3)
    edb = [f"e{i}" for i in range(n_edb)]
    idb = [f"p{i}" for i in range(n_idb)]
    lines = []
    for level, pred in enumerate(idb):
        n_rules = 1 if rng.random() < 0.7 else 2
        for _ in range(n_rules):
            below = edb + idb[:level]
            body = []
            # at most one intensional atom per body keeps residuals small
            if level > 0 and rng.random() < 0.6:
                body.append((rng.choice(idb[:level]), rng.randint(-2, 2)))
            body.append((rng.choice(edb), rng.randint(-2, 2)))
            if rng.random() < 0.4:
                body.append((rng.choice(edb), rng.randint(-2, 2)))
            rng.shuffle(body)
            body_text = ", ".join(
                f"{p}(X, {_offset_text(k)})" for p, k in body
            )
            lines.append(f"{body_text} -> {pred}(X, T).")
    goal = idb[-1]
    lines.append(f"#query {goal}(X, T).")
    return parse_program("\n".join(lines))


def random_negation_program(rng: random.Random) -> Program:
    """Arbitrary negation programs for stratification-verdict testing:
    cycles, both signs, offsets up to 2.  Not meant to run online."""
    n_pred = rng.randint(2, 5)
    preds = [f"p{i}" for i in range(n_pred)]
    lines = []
    n_rules = rng.randint(2, 6)
    for _ in range(n_rules):
        head = rng.choice(preds)
        body = [("e", 0, False)]  # safety anchor: binds X positively
        for _ in range(rng.randint(1, 2)):
            body.append(
                (
                    rng.choice(preds),
                    rng.randint(-2, 2),
                    rng.random() < 0.4,
                )
            )
        body_text = ", ".join(
            ("not " if negated else "") + f"{p}(X, {_offset_text(k)})"
            for p, k, negated in body
        )
        lines.append(f"{body_text} -> {head}(X, T).")
    return parse_program("\n".join(lines)).program


def random_tstrat_program(rng: random.Random):
    """T-stratified programs with at most one negated literal per rule,
    shaped so the online negation step is decidable in time:

    * negated predicates are extensional, or intensional with purely
      extensional bodies at offsets <= 0 (their answers are supported no
      later than the time they talk about);
    * a negated literal never sits strictly below every positive literal
      of its rule, so seeded tuples always carry positive evidence.
    """
    edb = ["e0", "e1"]
    blocked = ["b0"]  # negated-only extensional predicate
    lines = []
    negatable = []
    if rng.random() < 0.7:
        negatable.append("n0")
        body_off = rng.randint(-2, 0)
        lines.append(
            f"{rng.choice(edb)}(X, {_offset_text(body_off)}) -> n0(X, T)."
        )
    n_idb = rng.randint(1, 3)
    idb = [f"p{i}" for i in range(n_idb)]
    for level, pred in enumerate(idb):
        below = edb + idb[:level]
        body = []
        if level > 0 and rng.random() < 0.6:
            body.append((rng.choice(idb[:level]), rng.randint(-2, 2), False))
        anchor_offset = rng.randint(-2, 2)
        body.append((rng.choice(edb), anchor_offset, False))
        if rng.random() < 0.6:
            target = rng.choice(blocked + negatable)
            body.append((target, rng.randint(anchor_offset, 2), True))
        body_text = ", ".join(
            ("not " if negated else "") + f"{p}(X, {_offset_text(k)})"
            for p, k, negated in body
        )
        lines.append(f"{body_text} -> {pred}(X, T).")
    lines.append(f"#query {idb[-1]}(X, T).")
    return parse_program("\n".join(lines))


def random_stream(rng: random.Random, program: Program, ticks: int,
                  max_facts: int = 3) -> list[TickBlock]:
    """Random ground facts over the program's extensional predicates."""
    edb = [
        p for p, info in sorted(program.signature.items())
        if info.edb and info.temporal
    ]
    blocks = []
    for t in range(ticks):
        facts = []
        seen = set()
        for _ in range(rng.randint(0, max_facts)):
            pred = rng.choice(edb)
            arity = program.signature[pred].arity
            args = tuple(
                ObjectConst(rng.choice(CONSTANTS))
                for _ in range(arity - 1)
            ) + (TimePoint(t),)
            atom = Atom(pred, args)
            if atom not in seen:
                seen.add(atom)
                facts.append(atom)
        blocks.append(TickBlock(t, tuple(facts)))
    return blocks


def project_tuple(tup):
    """Positive projection of an engine tuple for oracle comparison."""
    hyps = frozenset(l.atom for l in tup.pending if not l.negated)
    evidence = frozenset(l.atom for l in tup.evidence if not l.negated)
    return (tup.subst, hyps, evidence)


def engine_answer_set(state, qid, horizon):
    """Grounded, positively projected root tuples whose hypotheses fit the
    oracle's horizon; supported means nonempty positive evidence."""
    out = set()
    beyond = set()
    for tup in state.tuples(qid):
        theta, hyps, evidence = project_tuple(tup)
        if not evidence:
            continue  # no positive backing: not a supported answer
        if any(
            isinstance(a.args[-1], TimePoint) and a.args[-1].value > horizon
            for a in hyps
        ):
            beyond.add(tup)
            continue
        out.add((theta, hyps, evidence))
    return out, beyond
