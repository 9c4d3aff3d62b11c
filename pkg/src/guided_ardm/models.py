"""Joint distributions over small discrete product spaces.

TabularJoint stores the complete probability table and answers marginal
and conditional queries exactly by summation over the unassigned axes.
That exactness is the point: every sampler in this package can be checked
against enumeration at desk scale. The product-space size is capped
(default 2^20 states) so an accidental large domain fails fast instead of
thrashing.

Marginal tables are memoized per assigned-position set, and value-level
marginal/conditional lookups carry LRU caches, so repeated queries along
sampling paths cost a dictionary hit. The caches are invisible in
semantics: instances are immutable and all queries are pure functions.
"""

from __future__ import annotations

import abc
import math
from functools import lru_cache

import numpy as np

from .core import (
    Categorical,
    GenerationOrder,
    MaskedSample,
    UNASSIGNED,
    UnreachablePrefix,
)

MAX_STATES = 1 << 20

_TABLE_CACHE_SIZE = 2048
_VALUE_CACHE_SIZE = 1 << 16


class ConditionalModel(abc.ABC):
    """Anything that can extend a partial sample one position at a time."""

    @property
    @abc.abstractmethod
    def categories(self) -> tuple[int, ...]:
        ...

    @property
    def dimension(self) -> int:
        return len(self.categories)

    @abc.abstractmethod
    def conditional(self, partial: MaskedSample, position: int) -> Categorical:
        """Distribution of the variable at `position` given the assigned ones."""


class TabularJoint(ConditionalModel):
    """Exact joint distribution held as a dense probability table.

    Parameters
    ----------
    categories : sequence of int
        Number of categories per variable.
    probs : array-like
        Probability table, either flat in row-major order (variable 0
        slowest) or already shaped to `categories`. Nonnegative, summing
        to 1 within 1e-9.
    max_states : int
        Refuse tables with more states than this.
    """

    def __init__(self, categories, probs, *, max_states: int = MAX_STATES):
        self._categories = tuple(int(c) for c in categories)
        if not self._categories:
            raise ValueError("need at least one variable")
        if any(c < 1 for c in self._categories):
            raise ValueError("every variable needs at least one category")
        size = math.prod(self._categories)
        if size > max_states:
            raise ValueError(
                f"product space has {size} states, cap is {max_states}"
            )
        table = np.ascontiguousarray(probs, dtype=np.float64)
        if table.size != size:
            raise ValueError(
                f"table has {table.size} entries, expected {size}"
            )
        table = table.reshape(self._categories)
        if np.any(table < 0.0):
            raise ValueError("probabilities must be nonnegative")
        total = float(table.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"table must sum to 1 within 1e-9, got {total!r}")
        table.flags.writeable = False
        self._table = table
        self._flat_cumsum = None
        self._marginal_table = lru_cache(maxsize=_TABLE_CACHE_SIZE)(
            self._marginal_table_uncached
        )
        self._marginal_of = lru_cache(maxsize=_VALUE_CACHE_SIZE)(
            self._marginal_uncached
        )
        self._conditional_of = lru_cache(maxsize=_VALUE_CACHE_SIZE)(
            self._conditional_uncached
        )

    @property
    def categories(self) -> tuple[int, ...]:
        return self._categories

    @property
    def table(self) -> np.ndarray:
        return self._table

    def _check_partial(self, partial: MaskedSample) -> None:
        if partial.categories != self._categories:
            raise ValueError("sample categories do not match the joint")

    def _marginal_table_uncached(self, positions: tuple[int, ...]) -> np.ndarray:
        other = tuple(i for i in range(self.dimension) if i not in positions)
        if not other:
            return self._table
        out = np.asarray(self._table.sum(axis=other))
        out.flags.writeable = False
        return out

    def _marginal_uncached(self, values: tuple[int, ...]) -> float:
        positions = tuple(i for i, v in enumerate(values) if v != UNASSIGNED)
        tab = self._marginal_table(positions)
        idx = tuple(values[p] for p in positions)
        return float(tab[idx])

    def marginal(self, partial: MaskedSample) -> float:
        """Probability of the assigned values, unassigned ones summed out.

        A fully masked sample has marginal 1 (the table total).
        """
        self._check_partial(partial)
        return self._marginal_of(partial.values)

    def _conditional_uncached(
        self, values: tuple[int, ...], position: int
    ) -> Categorical:
        denom = self._marginal_of(values)
        if denom <= 0.0:
            raise UnreachablePrefix(
                f"conditioning event has zero probability: values={values}"
            )
        assigned = tuple(i for i, v in enumerate(values) if v != UNASSIGNED)
        positions = tuple(sorted(assigned + (position,)))
        tab = self._marginal_table(positions)
        idx = tuple(
            values[p] if p != position else slice(None) for p in positions
        )
        return Categorical(np.asarray(tab[idx]) / denom)

    def conditional(self, partial: MaskedSample, position: int) -> Categorical:
        """Exact conditional of one unassigned variable given the prefix."""
        self._check_partial(partial)
        if not 0 <= position < self.dimension:
            raise ValueError(f"position {position} out of range")
        if partial.is_assigned(position):
            raise ValueError(f"position {position} is already assigned")
        return self._conditional_of(partial.values, position)

    def loglik(self, sample: MaskedSample, order: GenerationOrder | None = None) -> float:
        """Log-probability of a complete sample via the conditional chain.

        The chain is evaluated in the given order (identity by default);
        the result is order-invariant. Zero-probability samples return
        -inf rather than raising.
        """
        self._check_partial(sample)
        if not sample.is_complete:
            raise ValueError("loglik needs a complete sample")
        if order is None:
            order = GenerationOrder.identity(self.dimension)
        if len(order) != self.dimension:
            raise ValueError("order length must match the joint dimension")
        partial = MaskedSample.fully_masked(self._categories)
        total = 0.0
        for pos in order:
            cond = self.conditional(partial, pos)
            p = float(cond.probs[sample.values[pos]])
            if p <= 0.0:
                return -math.inf
            total += math.log(p)
            partial = partial.assign(pos, sample.values[pos])
        return total

    def sample(self, generator: np.random.Generator) -> MaskedSample:
        """Draw one complete sample (inverse CDF over the flat table)."""
        if self._flat_cumsum is None:
            self._flat_cumsum = np.cumsum(self._table.ravel(order="C"))
        u = generator.random()
        flat = int(np.searchsorted(self._flat_cumsum, u, side="right"))
        flat = min(flat, self._table.size - 1)
        values = np.unravel_index(flat, self._categories)
        return MaskedSample(self._categories, tuple(int(v) for v in values))

    def to_json(self) -> dict:
        """Row-major table form: variable 0 varies slowest."""
        return {
            "categories": list(self._categories),
            "probs": self._table.ravel(order="C").tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict, *, max_states: int = MAX_STATES) -> "TabularJoint":
        if not isinstance(doc, dict) or set(doc) != {"categories", "probs"}:
            raise ValueError("expected an object with 'categories' and 'probs'")
        return cls(doc["categories"], doc["probs"], max_states=max_states)


def fit_tabular(samples, smoothing: float = 1.0, categories=None) -> TabularJoint:
    """Maximum-likelihood table with additive smoothing.

    Each cell gets count + smoothing, then the table is normalized. An
    empty dataset needs positive smoothing (yielding the uniform table)
    and explicit categories.
    """
    if smoothing < 0.0:
        raise ValueError("smoothing must be nonnegative")
    samples = list(samples)
    if categories is None:
        if not samples:
            raise ValueError("empty dataset needs explicit categories")
        categories = samples[0].categories
    categories = tuple(int(c) for c in categories)
    if not samples and smoothing == 0.0:
        raise ValueError("cannot fit an empty dataset without smoothing")
    counts = np.full(categories, float(smoothing))
    if samples:
        rows = np.empty((len(samples), len(categories)), dtype=np.int64)
        for k, s in enumerate(samples):
            if not isinstance(s, MaskedSample) or not s.is_complete:
                raise ValueError("fit needs complete samples")
            if s.categories != categories:
                raise ValueError("samples disagree on categories")
            rows[k] = s.values
        flat = np.ravel_multi_index(rows.T, categories)
        counts += np.bincount(flat, minlength=counts.size).reshape(categories)
    total = counts.sum()
    if total <= 0.0:
        raise ValueError("nothing to normalize")
    return TabularJoint(categories, counts / total)


def perturb(joint: TabularJoint, temperature: float, uniform_mix: float) -> TabularJoint:
    """Flatten a joint: temper the table, renormalize, mix with uniform.

    new_p proportional to (1 - uniform_mix) * p^(1/temperature) / Z
    plus uniform_mix / num_states. temperature >= 1 and uniform_mix > 0
    both widen the support; uniform_mix > 0 guarantees full support.
    """
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    if not 0.0 <= uniform_mix <= 1.0:
        raise ValueError("uniform_mix must lie in [0, 1]")
    powered = joint.table ** (1.0 / temperature)
    z = powered.sum()
    if z <= 0.0:
        raise ValueError("tempered table has no mass")
    mixed = (1.0 - uniform_mix) * (powered / z) + uniform_mix / joint.table.size
    return TabularJoint(joint.categories, mixed)
