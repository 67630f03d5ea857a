"""Shared fixtures: the canonical increasing-birth-rate chains.

The family b = (3, 6, 8, 10), d = 0, alpha_self = alpha_neighbor = 1,
m_neighbor = 0.5 is the reference workhorse: every derived constant of the
theory is a small rational there (equilibria (3, 6, 8, 10), step fitnesses
(3, 2, 2), c1 = 1, c2 = 2/3, tbar2 = 7/6, tbar3 = 8/3), which makes frozen
oracle values exact.
"""

import pytest

from tstree import KernelSpec, OrderedTraitSpace, TraitSpec

CANONICAL_B = (3.0, 6.0, 8.0, 10.0)


def make_chain(bs, *, mu=0.0, d=0.0, m_neighbor=0.5, alpha_self=1.0, alpha_neighbor=1.0,
               ids=None):
    """Build a validated chain from birth rates (mu may be scalar or per-trait)."""
    kernel = KernelSpec(alpha_self=alpha_self, alpha_neighbor=alpha_neighbor,
                        m_neighbor=m_neighbor)
    if ids is None:
        ids = [f"x{i}" for i in range(len(bs))]
    mus = mu if isinstance(mu, (list, tuple)) else [mu] * len(bs)
    traits = [TraitSpec(id=i, b=float(b), d=float(d), mu=float(m))
              for i, b, m in zip(ids, bs, mus)]
    return OrderedTraitSpace(traits, kernel).require_valid()


@pytest.fixture
def kernel():
    return KernelSpec(alpha_self=1.0, alpha_neighbor=1.0, m_neighbor=0.5)


@pytest.fixture
def chain3():
    return make_chain(CANONICAL_B[:3])


@pytest.fixture
def chain4():
    return make_chain(CANONICAL_B)
