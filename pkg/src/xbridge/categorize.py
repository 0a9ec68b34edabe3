"""Group instances by exact field set and size the quintuple search space."""

from __future__ import annotations

from math import comb
from typing import Iterable, Mapping

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .model import ROLES, CandidateQuintuple, Category, TransactionInstance, category_key
from .validation import check_instances


def fields_of(tx: TransactionInstance) -> list[str]:
    return list(tx.field_set)


def categorize(txs: Iterable[TransactionInstance]) -> list[Category]:
    """Partition instances into categories, largest first, ties by key."""
    groups: dict[tuple[str, ...], Category] = {}
    for tx in txs:
        fs = tx.field_set
        cat = groups.get(fs)
        if cat is None:
            cat = groups[fs] = Category(fs, side=tx.side)
        cat.members.append(tx)
    return sorted(groups.values(), key=lambda c: (-len(c.members), c.key))


def combination_count(categories: Iterable[Category | int]) -> int:
    """Number of ways to pick 5 fields, summed over categories."""
    total = 0
    for cat in categories:
        n = cat if isinstance(cat, int) else len(cat.field_set)
        total += comb(n, 5)
    return total


def candidate_space_size(candidates: Mapping[str, CandidateQuintuple] | Iterable[CandidateQuintuple]) -> int:
    """Sum over categories of the product of per-role candidate counts."""
    if isinstance(candidates, Mapping):
        candidates = candidates.values()
    total = 0
    for cq in candidates:
        prod = 1
        for role in ROLES:
            prod *= len(cq.roles.get(role, []))
        total += prod
    return total


class Categorizer(TransformerMixin, BaseEstimator):
    """Learns the categories of a set of instances.

    ``transform`` maps instances to their category key, or ``None`` for a
    field set not seen during ``fit``.
    """

    def __init__(self, min_fields: int = 5):
        self.min_fields = min_fields

    def fit(self, X, y=None):
        X = check_instances(X)
        self.categories_ = categorize(X)
        self.by_key_ = {c.key: c for c in self.categories_}
        self.skipped_ = [c.key for c in self.categories_ if len(c.field_set) < self.min_fields]
        return self

    def transform(self, X):
        check_is_fitted(self, "categories_")
        X = check_instances(X)
        out = []
        for tx in X:
            key = tx.category_key
            out.append(key if key in self.by_key_ else None)
        return out

    @property
    def pairable_(self) -> list[Category]:
        check_is_fitted(self, "categories_")
        return [c for c in self.categories_ if len(c.field_set) >= self.min_fields]

    def combination_count(self) -> int:
        return combination_count(self.pairable_)
