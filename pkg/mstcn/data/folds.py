import numpy as np
from collections import OrderedDict
from .preprocess import DataError
from ..utils.random import check_state, derive_state, state_seed

__all__ = ['FoldPlan', 'split_folds']


class FoldPlan:
    """
    User-grouped fold assignment with a nested train/validation split.

    Parameters
    ----------
    assignment : dict
        user id -> test fold index in `range(k)`.
    k : int
    seed : int
        Seeds the nested splits.
    validation : float, optional
        Share of training users held out by `inner_split`. Set to 0.2 by
        default.
    """
    def __init__(self, assignment, k, seed=0, validation=0.2):
        self._k = int(k)
        self._seed = state_seed(seed)
        self._assignment = OrderedDict(
            (str(u), int(f)) for u, f in sorted(dict(assignment).items()))
        if any(not 0 <= f < self._k for f in self._assignment.values()):
            raise ValueError('fold indices should be in [0, {}).'.format(
                self._k))
        validation = float(validation)
        if not 0. <= validation < 1.:
            raise ValueError('validation should be in [0, 1), instead of '
                             '{}.'.format(validation))
        self._validation = validation

    @property
    def k(self):
        return self._k

    @property
    def seed(self):
        return self._seed

    @property
    def users(self):
        return list(self._assignment)

    @property
    def assignment(self):
        return OrderedDict(self._assignment)

    def fold_of(self, user):
        return self._assignment[str(user)]

    def _check_fold(self, i):
        i = int(i)
        if not 0 <= i < self._k:
            raise ValueError('fold should be in [0, {}), instead of '
                             '{}.'.format(self._k, i))
        return i

    def test_users(self, i):
        i = self._check_fold(i)
        return [u for u, f in self._assignment.items() if f == i]

    def train_users(self, i):
        i = self._check_fold(i)
        return [u for u, f in self._assignment.items() if f != i]

    def inner_split(self, i):
        """
        Split the training users of fold `i` into (train, validation) lists,
        holding out `round(validation * n)` users, at least one when
        possible. The split is a pure function of (seed, i).
        """
        users = self.train_users(i)
        n = len(users)
        n_val = int(round(self._validation * n))
        if self._validation > 0. and n >= 2:
            n_val = min(max(n_val, 1), n - 1)
        else:
            n_val = 0
        order = derive_state(self._seed, 2, i).permutation(n)
        val = sorted(users[j] for j in order[:n_val])
        train = sorted(users[j] for j in order[n_val:])
        return train, val

    def indices(self, users, dataset):
        return dataset.user_indices(users)

    def to_dict(self):
        return OrderedDict([('k', self._k), ('seed', self._seed),
                            ('validation', self._validation),
                            ('assignment', self.assignment)])

    @classmethod
    def from_dict(cls, d):
        return cls(d['assignment'], d['k'], d['seed'], d['validation'])

    def __eq__(self, other):
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'FoldPlan(k={}, n_users={}, seed={})'.format(
            self._k, len(self._assignment), self._seed)


def split_folds(user_ids, k=5, random_state=None, validation=0.2):
    """
    Shuffle the distinct users with the seed and deal them round-robin into
    `k` test folds, so fold sizes differ by at most one.
    """
    users = sorted(set(str(u) for u in user_ids))
    try:
        k = int(k)
        assert k >= 2
    except (TypeError, ValueError, AssertionError):
        raise ValueError('k should be an int >= 2, instead of {}.'.format(k))
    if len(users) < k:
        raise DataError('cannot split {} user(s) into {} folds.'.format(
            len(users), k))
    seed = state_seed(random_state)
    order = check_state(seed).permutation(len(users))
    assignment = {users[j]: pos % k for pos, j in enumerate(order)}
    return FoldPlan(assignment, k, seed, validation)
