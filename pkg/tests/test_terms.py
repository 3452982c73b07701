import random

import pytest

from hypolog.errors import NegativeTimeError
from hypolog.terms import (
    Atom,
    ObjectConst,
    ObjectVar,
    Substitution,
    TimeExpr,
    TimePoint,
    apply_substitution,
    match,
    mgu,
)


def atom(pred, *args):
    return Atom(pred, tuple(args))


def var(name):
    return ObjectVar(name)


def const(name):
    return ObjectConst(name)


MALF_XT = atom("Malf", var("X"), TimeExpr("T", -2))


class TestApply:
    def test_temporal_arithmetic_folds(self):
        s = Substitution({"X": const("wt25"), "T": TimePoint(2)})
        assert apply_substitution(MALF_XT, s) == atom(
            "Malf", const("wt25"), TimePoint(0)
        )

    def test_empty_substitution_is_identity(self):
        a = atom("Flag", var("X"), TimeExpr("T"))
        assert apply_substitution(a, Substitution()) == a

    def test_negative_instantiation_is_rejected(self):
        s = Substitution({"T": TimePoint(1)})
        with pytest.raises(NegativeTimeError):
            apply_substitution(MALF_XT, s)

    def test_time_expr_over_time_expr_shifts(self):
        s = Substitution({"T": TimeExpr("S", 3)})
        a = apply_substitution(atom("Flag", var("X"), TimeExpr("T", -1)), s)
        assert a == atom("Flag", var("X"), TimeExpr("S", 2))


class TestCompose:
    def test_chained_bindings(self):
        theta = Substitution({"X": var("Y")})
        sigma = Substitution({"Y": const("wt25")})
        got = theta.compose(sigma)
        assert got == Substitution({"X": const("wt25"), "Y": const("wt25")})

    def test_identity_right_unit(self):
        theta = Substitution({"X": var("Y"), "T": TimePoint(3)})
        assert theta.compose(Substitution()) == theta

    def test_identity_bindings_are_deleted(self):
        theta = Substitution({"X": var("Y")})
        sigma = Substitution({"Y": var("X")})
        # X:=Y then Y:=X folds X back to itself; only Y:=X survives.
        assert theta.compose(sigma) == Substitution({"Y": var("X")})

    def test_no_identity_bindings_stored(self):
        s = Substitution({"X": var("X"), "T": TimeExpr("T", 0)})
        assert len(s) == 0

    def test_composition_law_randomized(self):
        rng = random.Random(7)
        objvars = ["X", "Y", "Z"]
        timevars = ["T", "S"]

        def rand_subst():
            d = {}
            for v in objvars:
                if rng.random() < 0.5:
                    d[v] = rng.choice(
                        [var(rng.choice(objvars)), const("a"), const("b")]
                    )
            for v in timevars:
                if rng.random() < 0.5:
                    d[v] = rng.choice(
                        [TimePoint(rng.randrange(5)),
                         TimeExpr(rng.choice(timevars), rng.randrange(-1, 3))]
                    )
            return Substitution(d)

        a = atom("P", var("X"), var("Y"), var("Z"), TimeExpr("T", 1))
        for _ in range(300):
            theta, sigma = rand_subst(), rand_subst()
            try:
                via_compose = apply_substitution(a, theta.compose(sigma))
                stepwise = apply_substitution(
                    apply_substitution(a, theta), sigma
                )
            except NegativeTimeError:
                continue
            assert via_compose == stepwise


class TestMgu:
    def test_goal_side_variables_kept(self):
        a = atom("Malf", var("X"), TimeExpr("T"))
        b = atom("Malf", var("Y"), TimeExpr("Tp", -2))
        s = mgu(a, b)
        assert s == Substitution({"Y": var("X"), "Tp": TimeExpr("T", 2)})
        assert apply_substitution(a, s) == apply_substitution(b, s)

    def test_time_point_against_offset(self):
        a = atom("Flag", const("wt25"), TimePoint(2))
        b = atom("Flag", var("X"), TimeExpr("T", 1))
        s = mgu(a, b)
        assert s == Substitution({"X": const("wt25"), "T": TimePoint(1)})

    def test_forced_negative_time_fails(self):
        a = atom("Flag", const("wt25"), TimePoint(0))
        b = atom("Flag", var("X"), TimeExpr("T", 1))
        assert mgu(a, b) is None

    def test_predicate_mismatch(self):
        assert mgu(atom("P", var("X")), atom("Q", var("X"))) is None

    def test_constant_clash(self):
        assert mgu(atom("P", const("a")), atom("P", const("b"))) is None

    def test_same_time_var_distinct_offsets(self):
        a = atom("P", TimeExpr("T", 1))
        b = atom("P", TimeExpr("T", 2))
        assert mgu(a, b) is None

    def test_unifier_instances_agree_randomized(self):
        rng = random.Random(13)
        consts = [const("a"), const("b")]

        def rand_atom(goal_side):
            args = []
            pool = ["X", "Y"] if goal_side else ["U", "V"]
            for _ in range(2):
                args.append(
                    rng.choice(consts + [var(rng.choice(pool))])
                )
            tpool = "T" if goal_side else "S"
            args.append(
                rng.choice(
                    [TimePoint(rng.randrange(4)),
                     TimeExpr(tpool, rng.randrange(-2, 3))]
                )
            )
            return atom("P", *args)

        for _ in range(500):
            a, b = rand_atom(True), rand_atom(False)
            s = mgu(a, b)
            if s is None:
                continue
            assert apply_substitution(a, s) == apply_substitution(b, s)
            # The mgu only mentions goal-side variables on the right.
            for _, t in s.items():
                for v in [t] if isinstance(t, (ObjectVar, TimeExpr)) else []:
                    name = v.name if isinstance(v, ObjectVar) else v.var
                    assert name in a.vars()

    def test_mgu_most_general_via_factoring(self):
        # Any other unifier factors through the mgu.
        a = atom("P", var("X"), TimeExpr("T"))
        b = atom("P", var("Y"), TimeExpr("S", 1))
        s = mgu(a, b)
        other = Substitution(
            {"X": const("a"), "Y": const("a"),
             "T": TimePoint(4), "S": TimePoint(3)}
        )
        assert apply_substitution(a, other) == apply_substitution(b, other)
        gamma = Substitution({"X": const("a"), "T": TimePoint(4)})
        assert s.compose(gamma).restrict(other.support) == other


class TestMatch:
    def test_match_binds_pattern_only(self):
        pattern = atom("Temp", var("X"), const("high"), TimeExpr("T"))
        target = atom("Temp", const("wt25"), const("high"), TimePoint(0))
        s = match(pattern, target)
        assert s == Substitution({"X": const("wt25"), "T": TimePoint(0)})

    def test_match_respects_existing_bindings(self):
        pattern = atom("Temp", var("X"), TimeExpr("T"))
        target = atom("Temp", const("a"), TimePoint(1))
        s = match(pattern, target, Substitution({"X": const("b")}))
        assert s is None

    def test_match_is_directional(self):
        pattern = atom("P", const("a"))
        target = atom("P", var("X"))
        assert match(pattern, target) is None
