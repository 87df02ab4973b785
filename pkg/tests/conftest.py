"""Shared finite-difference oracles and fixtures.

The FD helpers differentiate plain float evaluations only, so they stay
independent of the jet arithmetic they are used to check.
"""

from __future__ import annotations

import numpy as np
import pytest

from sistruct import systems
from sistruct.structure import sample_points


def fd_grad(f, x, i, h=1e-4):
    e = np.zeros(len(x))
    e[i] = h
    return (f(x + e) - f(x - e)) / (2 * h)


def fd_hess(f, x, i, j, h=1e-4):
    if i == j:
        e = np.zeros(len(x))
        e[i] = h
        return (f(x + e) - 2 * f(x) + f(x - e)) / h**2
    ej = np.zeros(len(x))
    ej[j] = h
    return (fd_grad(f, x + ej, i, h) - fd_grad(f, x - ej, i, h)) / (2 * h)


def fd_third(f, x, i, j, k, h=1e-3):
    idx = sorted((i, j, k))
    if idx[0] == idx[2]:
        e = np.zeros(len(x))
        e[i] = h
        return (f(x + 2 * e) - 2 * f(x + e) + 2 * f(x - e) - f(x - 2 * e)) / (
            2 * h**3
        )
    if idx[0] == idx[1] or idx[1] == idx[2]:
        rep = idx[1]
        single = idx[0] if idx[1] == idx[2] else idx[2]
        e = np.zeros(len(x))
        e[single] = h
        return (fd_hess(f, x + e, rep, rep, h) - fd_hess(f, x - e, rep, rep, h)) / (
            2 * h
        )
    e = np.zeros(len(x))
    e[k] = h
    return (fd_hess(f, x + e, i, j, h) - fd_hess(f, x - e, i, j, h)) / (2 * h)


def builtin_expression_corpus():
    """Every expression of every builtin system, with its sampling setup."""
    corpus = []
    for name in ("sw:3", "sw:4", "em1", "osc-trivial", "sphere3"):
        system = systems.load_system(name)
        exprs = list(system.basis)
        exprs += [e for _, e in sorted(system.metric_exprs.items())]
        for killing in system.killing:
            exprs += [e for row in killing.entries for e in row]
        for e in exprs:
            corpus.append((name, system, e))
    return corpus


@pytest.fixture(scope="session")
def seeded_points():
    """Ten deterministic points per builtin system, inside each domain."""

    def points_for(system, npoints=10, seed=1234):
        return sample_points(system, npoints, seed)

    return points_for
