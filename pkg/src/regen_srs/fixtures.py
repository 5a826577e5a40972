"""Ready-made inputs: the four-state toy recursion and small model calibrations."""
from fractions import Fraction as F

from .drivers import explicit_cycle_driver
from .ordered import StateGrid, clamp_add_map

# published values for the toy recursion on {0, 1, 2, 3}
EXAMPLE4_P = (
    (F(1, 4), F(1, 4), F(1, 4), F(1, 4)),
    (F(1, 4), F(1, 4), F(1, 4), F(1, 4)),
    (F(3, 16), F(1, 4), F(1, 4), F(5, 16)),
    (F(3, 32), F(3, 16), F(1, 4), F(15, 32)),
)
EXAMPLE4_PI = (F(29, 160), F(183, 800), F(1, 4), F(17, 50))


def example4_grid(backend="rational"):
    return StateGrid([0, 1, 2, 3], backend)


def example4_map():
    """``x -> min(3, max(0, x + v))``."""
    return clamp_add_map(0, 3)


def example4_driver(backend="rational"):
    """Cycles ``(2, 1)`` and ``(2, 2, 1)`` with probability 1/2 each.

    State 1 shocks are uniform on {0, 1, 2, 3}; state 2 shocks are -1 or -2
    with probability 1/2 each.
    """
    half, quarter = F(1, 2), F(1, 4)
    shocks = {1: [(k, quarter) for k in range(4)], 2: [(-1, half), (-2, half)]}
    return explicit_cycle_driver([(half, (2, 1)), (half, (2, 2, 1))], shocks,
                                 labels=[1, 2], backend=backend)


def huggett_fixture(n_grid: int = 500):
    """Two-state persistent endowment process with an interior upper asset bound."""
    from .models import HuggettSpec
    return HuggettSpec(gamma=1.5, beta=0.93, R=1.03, endowments=(0.1, 1.0),
                       transition=((0.8, 0.2), (0.2, 0.8)), a_lower=-0.5, a_max=20.0, n_grid=n_grid)


def growth_fixture(n_grid: int = 500):
    """Log utility, Cobb-Douglas, full depreciation; the low and high states share a row."""
    from .models import GrowthSpec
    P = ((0.3, 0.4, 0.3), (0.2, 0.6, 0.2), (0.3, 0.4, 0.3))
    return GrowthSpec(beta=0.95, alpha=0.36, shocks=(0.9, 1.0, 1.1), transition=P, n_grid=n_grid)


def risk_sharing_fixture(beta: float = 0.55):
    """Symmetric two-state endowments; the intervals are disjoint at this discount factor."""
    from .models import RiskSharingSpec
    return RiskSharingSpec(beta=beta, Y=1.0, endowments=(0.3, 0.7), transition=((0.6, 0.4), (0.4, 0.6)),
                           gamma=2.0)


def first_best_fixture():
    """Same economy, patient enough for the intervals to overlap."""
    return risk_sharing_fixture(beta=0.9)
