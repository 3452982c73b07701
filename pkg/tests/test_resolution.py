import pytest

from hypolog.errors import LimitExceededError
from hypolog.parser import parse_atom_text, parse_program
from hypolog.resolution import (
    ComputedAnswer,
    Goal,
    SearchLimits,
    derive_preconditions,
    is_future_atom,
    match_conjunct_against_facts,
    normalize_goal,
    refute_with_future_premises,
    resolve_step,
)
from hypolog.terms import (
    Literal,
    ObjectConst,
    Substitution,
    TimeExpr,
    TimePoint,
    pos,
)

LIMITS = SearchLimits(max_depth=60, max_nodes=20_000)


def facts_at(result, *texts):
    return [parse_atom_text(t, result.program) for t in texts]


D1 = ["Temp(wt25, high, 0)", "Temp(wt25, high, 1)"]


class TestFutureAtoms:
    def test_ground_future(self, turbine):
        a = parse_atom_text("Temp(wt25, high, 2)", turbine.program)
        assert is_future_atom(a, 1, turbine.program)
        assert not is_future_atom(a, 2, turbine.program)

    def test_variable_time_is_always_future(self, turbine):
        goal = parse_program(
            "Temp(X, high, T) -> Flag(X, T)."
        ).program.rules[0].body[0].atom
        assert is_future_atom(goal, 100, turbine.program)

    def test_monotone_in_tau(self, turbine):
        a = parse_atom_text("Temp(wt25, high, 4)", turbine.program)
        values = [is_future_atom(a, tau, turbine.program) for tau in range(8)]
        assert values == sorted(values, reverse=True)


class TestResolveStep:
    def test_against_rule(self, turbine):
        from hypolog.terms import VarRenamer

        goal = Goal((pos(turbine.query.goal),))
        malf_rule = VarRenamer().rename_rule(turbine.program.rules_for("Malf")[0])
        out = resolve_step(goal, malf_rule, 0)
        assert out is not None
        resolvent, unifier = out
        assert [l.pred for l in resolvent.literals] == ["Shdn"]
        shdn = resolvent.literals[0].atom
        # The rule's time variable is bound goal-side: T' := T+2.
        assert shdn.args[-1] == TimeExpr("T", 2)
        assert shdn.args[0] == goal.literals[0].atom.args[0]

    def test_against_fact_reaches_contradiction(self, turbine):
        fact = parse_atom_text("Temp(wt25, high, 0)", turbine.program)
        goal = Goal((pos(fact),))
        out = resolve_step(goal, __import__("hypolog.terms", fromlist=["Rule"]).Rule(fact, ()), 0)
        resolvent, unifier = out
        assert resolvent.is_empty
        assert unifier == Substitution()

    def test_predicate_mismatch_fails(self, turbine):
        goal = Goal((pos(parse_atom_text("Flag(X, 5)", turbine.program)),))
        fact = parse_atom_text("Temp(wt42, high, 5)", turbine.program)
        from hypolog.terms import Rule

        assert resolve_step(goal, Rule(fact, ()), 0) is None


class TestRefuteWithFuturePremises:
    def test_running_example_tau1(self, turbine):
        answers = refute_with_future_premises(
            turbine.query, facts_at(turbine, *D1), 1, LIMITS
        )
        rendered = {
            (str(a.subst), tuple(str(p) for p in a.premises))
            for a in answers
        }
        # The grounded derivation through both stream facts.
        assert ("{T:=0, X:=wt25}", ("Temp(wt25, high, 2)",)) in rendered
        # The fully schematic derivation: all premises still pending.
        assert (
            "{}",
            (
                "Temp(X, high, T)",
                "Temp(X, high, T+1)",
                "Temp(X, high, T+2)",
            ),
        ) in rendered

    def test_all_results_are_future_only(self, turbine):
        answers = refute_with_future_premises(
            turbine.query, facts_at(turbine, *D1), 1, LIMITS
        )
        for a in answers:
            for lit in a.premises:
                assert is_future_atom(lit.atom, 1, turbine.program)

    def test_infinite_program_hits_limit(self, infinite):
        with pytest.raises(LimitExceededError):
            refute_with_future_premises(
                infinite.query, [], -1, SearchLimits(max_depth=50,
                                                     max_nodes=100_000)
            )


class TestMatchConjunct:
    def test_single_atom(self, turbine):
        m = [parse_atom_text("Temp(X, high, T)", turbine.program)]
        facts = facts_at(turbine, "Temp(wt25, high, 0)")
        assert match_conjunct_against_facts(m, facts) == [
            Substitution({"X": ObjectConst("wt25"), "T": TimePoint(0)})
        ]

    def test_empty_conjunct_yields_identity(self, turbine):
        facts = facts_at(turbine, "Temp(wt25, high, 0)")
        assert match_conjunct_against_facts([], facts) == [Substitution()]

    def test_no_match_is_empty(self, turbine):
        m = [parse_atom_text("Temp(wt25, high, 2)", turbine.program)]
        assert match_conjunct_against_facts(m, []) == []

    def test_equals_bruteforce_subset_semantics(self, turbine):
        # All sigma with every conjunct grounded to a present fact.
        facts = facts_at(
            turbine,
            "Temp(wt25, high, 0)",
            "Temp(wt42, high, 0)",
        )
        m = [parse_atom_text("Temp(X, high, T)", turbine.program)]
        got = {str(s) for s in match_conjunct_against_facts(m, facts)}
        assert got == {"{T:=0, X:=wt25}", "{T:=0, X:=wt42}"}


class TestNormalization:
    def test_shift_invariance(self, infinite):
        goal1 = [pos(parse_atom_text("S(X, T)", infinite.program))]
        rule = infinite.program.rules_for("S")[0]
        # S(X, T-1) is the same goal shifted by one tick.
        shifted = [
            Literal(
                parse_atom_text("S(X, T)", infinite.program).__class__(
                    "S",
                    (goal1[0].atom.args[0], TimeExpr("T", -1)),
                ),
                False,
            )
        ]
        assert normalize_goal(goal1) == normalize_goal(shifted)

    def test_distinct_programs_differ(self, infinite):
        a = [pos(parse_atom_text("S(X, T)", infinite.program))]
        b = [pos(parse_atom_text("R(X, T)", infinite.program))]
        assert normalize_goal(a) != normalize_goal(b)
