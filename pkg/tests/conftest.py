import numpy as np
import pytest

import fairshift as fs

LOAN_SEED = 20_240_501


@pytest.fixture(scope="session")
def loan100k():
    """Full-size loan scenario shared by the expensive tests."""
    sample, oracle = fs.generate_loan(fs.LoanScenarioSpec(n=100_000, seed=LOAN_SEED))
    return sample, oracle


@pytest.fixture(scope="session")
def loan_views(loan100k):
    sample, oracle = loan100k
    return sample, oracle, fs.view(sample, "z=1"), fs.view(sample, "t=1")


@pytest.fixture(scope="session")
def loan_oracle_weights(loan_views):
    """Full-length inverse-propensity weights from the simulation oracle."""
    sample, oracle, train, _ = loan_views
    w = np.zeros(sample.n)
    w[train.indices] = 1.0 / oracle.propensity[train.indices]
    return w
