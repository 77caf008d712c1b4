import pytest

from errmoments.model import (
    ReducedConditional,
    ReducedUnconditional,
    equicorrelated_setup,
)


@pytest.fixture
def worked_conditional():
    """p=4, n0=n1=20, beta=1, delta2=4, priors centred on the true means."""
    return ReducedConditional(
        p=4, n0=20, n1=20, beta0=1, beta1=1, c=0.0, delta2=4.0,
        eta_m0_mu1=4.0, eta_m1_mu0=4.0,
    )


@pytest.fixture
def worked_unconditional():
    return ReducedUnconditional(p=4, n0=20, n1=20, nu0=20, nu1=20, c=0.0, Delta2=4.0)


@pytest.fixture
def sim_spec():
    """Simulation design: p=15, nu=50, delta2=4, m_i = 1.01 mu_i."""
    return equicorrelated_setup(15, 20, 20, nu0=50.0)
