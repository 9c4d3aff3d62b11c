"""Shared fixtures and small oracles used across the suite."""

import itertools

import numpy as np
import pytest

from guided_ardm import MaskedSample, TabularJoint, kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile / load any jitted backend once so timed tests stay clean
    kernels.warmup()


def random_joint(rng, categories, zeros=0):
    """Random table; optionally force a few exact zeros."""
    size = int(np.prod(categories))
    t = rng.random(size) + 0.05
    if zeros:
        idx = rng.choice(size, size=min(zeros, size - 1), replace=False)
        t[idx] = 0.0
    t /= t.sum()
    return TabularJoint(categories, t)


def enumerate_complete(categories):
    for values in itertools.product(*(range(c) for c in categories)):
        yield MaskedSample(tuple(categories), values)


def enumerate_partials(categories):
    from guided_ardm import UNASSIGNED

    axes = [(UNASSIGNED,) + tuple(range(c)) for c in categories]
    for values in itertools.product(*axes):
        yield MaskedSample(tuple(categories), values)


def brute_marginal(joint, partial):
    """Marginal by direct enumeration; independent of the cached axis sums."""
    total = 0.0
    for s in enumerate_complete(joint.categories):
        if all(
            pv in (-1, sv) for pv, sv in zip(partial.values, s.values)
        ):
            total += float(joint.table[s.values])
    return total
