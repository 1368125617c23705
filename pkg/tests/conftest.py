from fractions import Fraction

import pytest

from ptsubplanck.ptcore import PTParams, coherent_coefficients, evolve_fraction


@pytest.fixture(scope="session")
def sym():
    return PTParams(50.0, 50.0, 2.0)


@pytest.fixture(scope="session")
def cs06(sym):
    return coherent_coefficients(sym, 0.6)


@pytest.fixture(scope="session")
def compass06(cs06):
    return evolve_fraction(cs06, Fraction(1, 8))
