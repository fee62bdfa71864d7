"""Shared graph builders for the test suite."""

import pytest

from census import Topology


def build_two_cluster():
    """Two masters bridged by one PMP, two pure slaves each.

    ids: 0, 1 masters; 2 the PMP; 3, 4 pure slaves of 0; 5, 6 pure slaves
    of 1.  Both masters have degree 3, the PMP degree 2, N = 7 and e = 6.
    """
    t = Topology()
    m_a, m_b = t.add_master(), t.add_master()
    pmp = t.add_slave()
    s = [t.add_slave() for _ in range(4)]
    t.add_edge(m_a, pmp)
    t.add_edge(m_b, pmp)
    t.add_edge(m_a, s[0])
    t.add_edge(m_a, s[1])
    t.add_edge(m_b, s[2])
    t.add_edge(m_b, s[3])
    return t


def build_star(k: int):
    """One master with k pure slaves; ids 0 (master), 1..k."""
    t = Topology()
    m = t.add_master()
    for _ in range(k):
        t.add_edge(t.add_slave(), m)
    return t


@pytest.fixture
def two_cluster():
    return build_two_cluster()


@pytest.fixture
def star5():
    return build_star(5)
