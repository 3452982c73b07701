import random
import string

import pytest

from hypolog.errors import ParseError, SignatureError, SortError, StreamError, UnsafeRuleError
from hypolog.parser import (
    format_program,
    format_stream,
    iter_stream_blocks,
    parse_program,
    parse_stream_tick,
)
from hypolog.terms import ObjectConst, TimeExpr, TimePoint


class TestProgramGrammar:
    def test_running_example(self, turbine):
        program = turbine.program
        assert len(program.rules) == 4
        assert program.is_edb("Temp")
        for p in ["Flag", "Cool", "Shdn", "Malf"]:
            assert program.is_idb(p)
        assert turbine.query.goal.pred == "Malf"

    def test_empty_file(self):
        result = parse_program("")
        assert result.program.rules == ()
        assert result.query is None

    def test_two_time_variable_rule(self):
        result = parse_program(
            "Temp(X, high, T1), Temp(X, 'n/a', T2) -> Defective(X, 0).\n"
        )
        (rule,) = result.program.rules
        tvars = {
            a.var
            for lit in rule.body
            for a in lit.atom.args
            if isinstance(a, TimeExpr)
        }
        assert tvars == {"T1", "T2"}
        assert rule.head.args[-1] == TimePoint(0)

    def test_quoted_constants(self):
        result = parse_program("Temp(X, 'n/a', T) -> Malf(X, T).")
        body_atom = result.program.rules[0].body[0].atom
        assert body_atom.args[1] == ObjectConst("n/a")

    def test_comments_and_whitespace(self):
        text = "% header\nTemp(X, high, T) -> Flag(X, T). % trailing\n\n"
        assert len(parse_program(text).program.rules) == 1

    def test_negated_body_literal(self):
        result = parse_program(
            "E(X, T) -> Q(X, T).\nE(X, T), not Q(X, T) -> P(X, T).\n"
        )
        negs = [
            lit for r in result.program.rules for lit in r.body if lit.negated
        ]
        assert [str(l) for l in negs] == ["not Q(X, T)"]

    def test_rigid_directive(self):
        result = parse_program("#rigid kind/2.\nkind(wt25, offshore).")
        assert not result.program.signature["kind"].temporal

    def test_rigid_conflict_with_offset(self):
        with pytest.raises((SignatureError, SortError)):
            parse_program("#rigid P/1.\nE(X, T) -> P(T+1).")

    def test_arity_conflict(self):
        with pytest.raises(SignatureError):
            parse_program("E(X, T) -> P(X, T).\nE(X) -> Q(X).")

    def test_unsafe_rule(self):
        with pytest.raises(UnsafeRuleError):
            parse_program("E(X, T) -> P(Y, T).")

    def test_unsafe_negation(self):
        with pytest.raises(UnsafeRuleError):
            parse_program("E(X, T), not Q(Y, T) -> P(X, T).")

    def test_syntax_error_carries_span(self):
        with pytest.raises(ParseError) as err:
            parse_program("Temp(X, high T) -> Flag(X, T).")
        assert err.value.span is not None
        assert err.value.span.line == 1

    def test_default_last_variable_is_temporal(self):
        result = parse_program("E(X, T) -> P(X, T).")
        assert result.program.signature["E"].temporal
        assert result.program.signature["P"].temporal

    def test_object_evidence_beats_temporal_default(self):
        result = parse_program("Edge(X, Y), Edge(Y, Z) -> Path(X, Z).")
        assert not result.program.signature["Edge"].temporal
        assert not result.program.signature["Path"].temporal

    def test_sort_conflict_is_rejected(self):
        with pytest.raises((SortError, SignatureError)):
            parse_program("P(T, T) -> Q(T+1).")


class TestRoundTrip:
    def test_turbine_round_trip(self, turbine):
        text = format_program(turbine)
        again = parse_program(text)
        assert again.program.rules == turbine.program.rules
        assert again.program.signature == turbine.program.signature
        assert [q.goal for q in again.queries] == [
            q.goal for q in turbine.queries
        ]

    def test_random_programs_round_trip(self):
        rng = random.Random(42)
        for _ in range(40):
            rules = []
            for i in range(rng.randrange(1, 5)):
                body = ", ".join(
                    f"E{rng.randrange(2)}(X, T{'+' if k >= 0 else ''}{k})"
                    for k in [rng.randrange(-2, 3)]
                )
                rules.append(f"{body} -> P{i}(X, T).")
            text = "\n".join(rules) + "\n"
            first = parse_program(text)
            printed = format_program(first)
            second = parse_program(printed)
            assert first.program.rules == second.program.rules
            assert first.program.signature == second.program.signature

    def test_fuzz_never_crashes_unexpectedly(self):
        rng = random.Random(99)
        alphabet = string.ascii_letters + "()->,.#@%'+-0123456789 \n"
        for _ in range(300):
            text = "".join(
                rng.choice(alphabet) for _ in range(rng.randrange(0, 60))
            )
            try:
                parse_program(text)
            except (ParseError, SignatureError, SortError, UnsafeRuleError):
                pass


class TestStream:
    def test_single_block(self, turbine):
        block = parse_stream_tick(
            "@1\nTemp(wt25, high, 1).", turbine.program
        )
        assert block.tick == 1
        assert [str(f) for f in block.facts] == ["Temp(wt25, high, 1)"]

    def test_empty_block(self, turbine):
        block = parse_stream_tick("@3\n", turbine.program)
        assert block.tick == 3 and block.facts == ()

    def test_timestamp_mismatch(self, turbine):
        with pytest.raises(StreamError, match="timestamp 5"):
            parse_stream_tick("@2\nTemp(wt25, high, 5).", turbine.program)

    def test_non_ground_fact(self, turbine):
        with pytest.raises(StreamError, match="not ground"):
            parse_stream_tick("@2\nTemp(X, high, 2).", turbine.program)

    def test_idb_fact_rejected(self, turbine):
        with pytest.raises(StreamError, match="intensional"):
            parse_stream_tick("@2\nMalf(wt25, 2).", turbine.program)

    def test_unknown_predicate(self, turbine):
        with pytest.raises(StreamError, match="unknown predicate"):
            parse_stream_tick("@0\nWind(wt25, 0).", turbine.program)

    def test_blocks_must_be_consecutive(self, turbine):
        lines = ["@0", "Temp(wt25, high, 0).", "@2"]
        with pytest.raises(StreamError, match="out-of-order"):
            list(iter_stream_blocks(lines, turbine.program))

    def test_iter_blocks(self, turbine):
        lines = [
            "@0", "Temp(wt25, high, 0).",
            "@1", "Temp(wt25, high, 1).", "Temp(wt42, high, 1).",
            "@2",
        ]
        blocks = list(iter_stream_blocks(lines, turbine.program))
        assert [b.tick for b in blocks] == [0, 1, 2]
        assert [len(b.facts) for b in blocks] == [1, 2, 0]

    def test_stream_round_trip(self, turbine):
        lines = ["@0", "Temp(wt25, high, 0).", "@1"]
        blocks = list(iter_stream_blocks(lines, turbine.program))
        printed = format_stream(blocks)
        again = list(
            iter_stream_blocks(printed.splitlines(), turbine.program)
        )
        assert again == blocks
