import pytest

from hypolog import parse_program

TURBINE_TEXT = """\
Temp(X, high, T) -> Flag(X, T).
Flag(X, T), Flag(X, T+1) -> Cool(X, T+1).
Cool(X, T), Flag(X, T+1) -> Shdn(X, T+1).
Shdn(X, T) -> Malf(X, T-2).
#query Malf(X, T).
"""

# Turbine program extended with an immediate-malfunction rule for missing
# temperature readings.
TURBINE_NA_TEXT = TURBINE_TEXT.replace(
    "#query Malf(X, T).",
    "Temp(X, 'n/a', T) -> Malf(X, T).\n#query Malf(X, T).",
)

# Turbine program plus a manufacturing-defect rule with two time variables.
DEFECTIVE_TEXT = TURBINE_TEXT.replace(
    "#query Malf(X, T).",
    "Temp(X, high, T1), Temp(X, 'n/a', T2) -> Defective(X, 0).\n"
    "#query Defective(X, T).",
)

# Infinitely recursive program: answers need unboundedly old premises.
INFINITE_TEXT = """\
S(X, T) -> S(X, T+1).
R(X, T) -> S(X, T).
#query S(X, T).
"""


@pytest.fixture
def turbine():
    return parse_program(TURBINE_TEXT)


@pytest.fixture
def turbine_na():
    return parse_program(TURBINE_NA_TEXT)


@pytest.fixture
def defective():
    return parse_program(DEFECTIVE_TEXT)


@pytest.fixture
def infinite():
    return parse_program(INFINITE_TEXT)
