from __future__ import annotations

import functools

import pytest

from critperc.hexlattice import DomainSpec, delta_approximation


@functools.lru_cache(maxsize=None)
def disk(radius: float, mesh: float = 1.0):
    """Discrete disk of the given radius (in lattice units when mesh=1)."""
    return delta_approximation(DomainSpec.disk(radius=radius), mesh)


@pytest.fixture
def small_disk():
    return disk(6.0)
