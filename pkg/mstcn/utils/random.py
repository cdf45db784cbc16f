import numpy as np
import numbers

__all__ = ['check_state', 'split_state', 'derive_state', 'state_seed']


def check_state(seed):
    """Turn seed into a np.random.Generator over the Philox bit generator.

    Parameters
    ----------
    seed : None | int | instance of Generator
        If seed is None, return a fresh Generator seeded with 0.
        If seed is an int, return a new Generator seeded with seed.
        If seed is already a Generator, return it.
        Otherwise raise ValueError.
    """
    if seed is None:
        seed = 0
    if isinstance(seed, (numbers.Integral, np.integer)):
        if seed < 0:
            raise ValueError('seed should be a non-negative int, instead of '
                             '{}.'.format(seed))
        return np.random.Generator(np.random.Philox(int(seed)))
    if isinstance(seed, np.random.Generator):
        return seed
    raise ValueError('%r cannot be used to seed a numpy.random.Generator'
                     ' instance' % seed)


def split_state(seed, n):
    """One Generator per worker, worker i seeded with seed + i."""
    n = int(n)
    if n <= 0:
        raise ValueError('n should be a positive int instead of {}.'.format(n))
    seed = state_seed(seed)
    return [check_state(seed + i) for i in range(n)]


def derive_state(seed, *keys):
    """
    Stateless stream for a (seed, key...) tuple, e.g. (seed, epoch) or
    (seed, fold). Identical arguments always give identical draws.
    """
    seed = state_seed(seed)
    keys = [int(k) for k in keys]
    if any(k < 0 for k in keys):
        raise ValueError('keys should be non-negative ints, instead of '
                         '{}.'.format(keys))
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed] + keys)))


def state_seed(seed):
    if seed is None:
        return 0
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    try:
        seed = int(seed)
        assert seed >= 0
    except (TypeError, ValueError, AssertionError):
        raise ValueError('seed should be a non-negative int, instead of '
                         '{}.'.format(seed))
    return seed
