import numpy as np
import pytest

from plhomog import (Coefficient, Problem1D, cosine_coefficient,
                     exponential_defect)
from plhomog.oned import rhs_linear

# high-precision reference values for the canonical experiment
# (p = 3, f(x) = 2x, a = 2 + cos(2 pi y) + 10 exp(-|y|))
A_STAR_REF = 1.7981024073469526        # (int (2+cos 2 pi y)^(-1/2))^(-2)
C_STAR_REF = -0.1747805110548834       # root of the signed zero-mean integral

PAPER_EPS = (0.1, 0.05, 0.01, 0.005, 0.001, 0.0005)


@pytest.fixture(scope="session")
def paper_periodic():
    return cosine_coefficient(2.0, 1.0, lam=14.0)


@pytest.fixture(scope="session")
def paper_coefficient(paper_periodic):
    return Coefficient(paper_periodic, exponential_defect(10.0, 1.0), 3.0)


@pytest.fixture(scope="session")
def paper_problem(paper_coefficient):
    return Problem1D(paper_coefficient, rhs_linear(2.0), 0.1, 3.0)


@pytest.fixture(scope="session")
def paper_sweep(paper_problem):
    """The canonical six-epsilon remainder table, computed once per session."""
    from plhomog.oned import table_sweep
    return table_sweep(paper_problem, list(PAPER_EPS))


def lp_of_cells(values, volume, p):
    mags = np.linalg.norm(np.asarray(values), axis=-1) \
        if np.asarray(values).ndim > 1 else np.abs(values)
    return float((volume * np.sum(mags ** p)) ** (1.0 / p))
