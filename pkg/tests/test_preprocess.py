import pytest

from hypolog.errors import LimitExceededError, NotEligibleError, NotStratifiedError
from hypolog.parser import parse_program
from hypolog.preprocess import (
    GROUND_GROUP,
    build_query_family,
    dump_family,
    load_family,
    precompute_preconditions,
    subsumption_minimize,
)
from hypolog.resolution import ComputedAnswer, SearchLimits
from hypolog.terms import Literal, ObjectConst, Substitution, TimePoint, pos


def entry_strings(entries):
    return sorted(str(e) for e in entries)


class TestRunningExample:
    def test_single_entry(self, turbine):
        entries = precompute_preconditions(turbine.query)
        assert entry_strings(entries) == [
            "<{}, {T: {Temp(X, high, T)}}, "
            "{Temp(X, high, T+1), Temp(X, high, T+2)}>"
        ]

    def test_trigger_group_holds_minimal_offset(self, turbine):
        (entry,) = precompute_preconditions(turbine.query)
        (group,) = entry.groups
        assert group.time_var == "T"
        assert group.offset == 0
        assert len(entry.deferred) == 2

    def test_extended_program_adds_immediate_entry(self, turbine_na):
        entries = precompute_preconditions(turbine_na.query)
        assert entry_strings(entries) == [
            "<{}, {T: {Temp(X, 'n/a', T)}}, {}>",
            "<{}, {T: {Temp(X, high, T)}}, "
            "{Temp(X, high, T+1), Temp(X, high, T+2)}>",
        ]


class TestDefectiveQuery:
    def test_strict_mode_rejects_unconnected(self, defective):
        with pytest.raises(NotEligibleError, match="unconnected"):
            precompute_preconditions(defective.query, mode="strict")

    def test_guarded_mode_compiles_two_groups(self, defective):
        (entry,) = precompute_preconditions(defective.query, mode="guarded")
        assert entry.subst == Substitution({"T": TimePoint(0)})
        keys = [g.key for g in entry.groups]
        assert len(keys) == 2 and GROUND_GROUP not in keys
        rendered = {
            key: [str(l) for l in group.literals]
            for key, group in zip(keys, entry.groups)
        }
        assert sorted(rendered.values()) == [
            ["Temp(X, 'n/a', V1)"],
            ["Temp(X, high, V0)"],
        ]
        assert entry.deferred == ()


class TestInfiniteQuery:
    def test_strict_rejects_recursion(self, infinite):
        with pytest.raises(NotEligibleError, match="recursive"):
            precompute_preconditions(infinite.query, mode="strict")

    def test_guarded_reports_loop(self, infinite):
        with pytest.raises(LimitExceededError) as err:
            precompute_preconditions(
                infinite.query, mode="guarded",
                limits=SearchLimits(max_depth=50),
            )
        assert "repeats modulo temporal shift" in (err.value.diagnosis or "")
        # The non-looping derivation is still reported.
        assert [str(a) for a in err.value.partial] == ["<{}, R(X, T)>"]


class TestSubsumption:
    def _answers(self, program, *pairs):
        out = []
        for theta, premises in pairs:
            out.append(
                ComputedAnswer(
                    Substitution(theta),
                    tuple(pos(a) for a in premises),
                )
            )
        return out

    def test_smaller_premises_win(self):
        result = parse_program(
            "P(X, T) -> R(X, T).\nP(X, T), Q(X, T) -> R(X, T).\n"
            "#query R(X, T).\n"
        )
        entries = precompute_preconditions(result.query)
        # The P-and-Q derivation is subsumed by the P-only derivation.
        assert entry_strings(entries) == ["<{}, {T: {P(X, T)}}, {}>"]

    def test_singleton_unchanged(self, turbine):
        from hypolog.parser import parse_atom_text

        answers = self._answers(
            turbine.program,
            ({"X": ObjectConst("a")},
             [parse_atom_text("Temp(a, high, T)", turbine.program)]),
        )
        assert subsumption_minimize(answers, turbine.query.goal) == answers

    def test_incomparable_kept(self, turbine):
        from hypolog.parser import parse_atom_text

        answers = self._answers(
            turbine.program,
            ({}, [parse_atom_text("Temp(X, high, T)", turbine.program)]),
            ({}, [parse_atom_text("Temp(X, 'n/a', T)", turbine.program)]),
        )
        kept = subsumption_minimize(answers, turbine.query.goal)
        assert len(kept) == 2

    def test_idempotent(self, turbine):
        from hypolog.parser import parse_atom_text

        answers = self._answers(
            turbine.program,
            ({}, [parse_atom_text("Temp(X, high, T)", turbine.program)]),
            ({}, [parse_atom_text("Temp(X, high, T)", turbine.program),
                  parse_atom_text("Temp(X, high, T+1)", turbine.program)]),
        )
        once = subsumption_minimize(answers, turbine.query.goal)
        twice = subsumption_minimize(once, turbine.query.goal)
        assert once == twice
        assert len(once) == 1


class TestQueryFamily:
    def test_positive_program_has_root_only(self, turbine):
        family = build_query_family(turbine.query)
        assert set(family.records) == {family.root_id}
        assert family.aux_for == {}

    def test_negated_idb_spawns_auxiliary(self):
        result = parse_program(
            "Temp(X, high, T) -> Flag(X, T).\n"
            "Flag(X, T) -> Cool(X, T).\n"
            "Temp(X, high, T), not Cool(X, T+1) -> Alert(X, T).\n"
            "#query Alert(X, T).\n"
        )
        family = build_query_family(result.query)
        assert "Cool(A, T)" in family.records
        aux = family.records["Cool(A, T)"]
        assert aux.kind == "auxiliary"
        assert aux.negated_predicate == "Cool"
        assert family.aux_for["Cool"] == "Cool(A, T)"
        # Auxiliaries precede the root in processing order.
        assert family.order.index("Cool(A, T)") < family.order.index(
            family.root_id
        )

    def test_auxiliary_chain_reaches_closure(self):
        result = parse_program(
            "E(X, T) -> R(X, T).\n"
            "E(X, T), not R(X, T) -> Q(X, T).\n"
            "E(X, T), not Q(X, T) -> P(X, T).\n"
            "#query P(X, T).\n"
        )
        family = build_query_family(result.query)
        assert set(family.aux_for) == {"Q", "R"}

    def test_negated_edb_needs_no_auxiliary(self):
        result = parse_program(
            "E(X, T), not B(X, T) -> P(X, T).\n"
            "B(X, T) .\n".replace(" .", "(placeholder, 0)."),
        )
        # B occurs only in a fact and a negated body: extensional.
        assert result.program.is_edb("B")
        query = [
            q for q in parse_program(
                "E(X, T), not B(X, T) -> P(X, T).\n"
                "B(placeholder, 0).\n#query P(X, T).\n"
            ).queries
        ][0]
        family = build_query_family(query)
        assert family.aux_for == {}

    def test_unstratified_is_rejected(self):
        result = parse_program(
            "E(X, T), not P(X, T+1) -> P(X, T).\n#query P(X, T).\n"
        )
        with pytest.raises(NotStratifiedError):
            build_query_family(result.query)


class TestSerialization:
    def test_round_trip(self, turbine_na):
        family = build_query_family(turbine_na.query)
        text = dump_family(family)
        again = load_family(text, turbine_na.program)
        assert again.root_id == family.root_id
        assert set(again.records) == set(family.records)
        for qid in family.records:
            assert (
                entry_strings(again.records[qid].entries)
                == entry_strings(family.records[qid].entries)
            )
        assert again.order == family.order

    def test_deterministic_dump(self, turbine):
        a = dump_family(build_query_family(turbine.query))
        b = dump_family(build_query_family(turbine.query))
        assert a == b

    def test_fingerprint_mismatch_rejected(self, turbine, turbine_na):
        text = dump_family(build_query_family(turbine.query))
        with pytest.raises(Exception, match="different program"):
            load_family(text, turbine_na.program)
