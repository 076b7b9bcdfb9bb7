import cmath

import mpmath
import pytest

from badflow.number_field import WeightVector, quadratic_field

# Root of z^2 - z - i over Q(i); its discriminant 1 + 4i is not a square in Z[i].
WITNESS = complex((1 + mpmath.sqrt(mpmath.mpc(1, 4))) / 2)
WITNESS_BAD_CONSTANT = 0.4710867950615797
WITNESS_MIN_SYSTOLE = 0.9711665817855967  # [0, 20], 201 grid points, exact


@pytest.fixture(scope="session")
def gauss():
    return quadratic_field(1)


@pytest.fixture(scope="session")
def eisenstein():
    return quadratic_field(3)


@pytest.fixture(scope="session")
def balanced():
    return WeightVector.balanced(2)


def diag(z):
    z = complex(z)
    return [z, z.conjugate()]


def witness_vector():
    return diag(WITNESS)


def unit_disc_sample(rng):
    return cmath.rect(rng.random() ** 0.5, 2 * cmath.pi * rng.random())


ACCEPTANCE: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
