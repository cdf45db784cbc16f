from distributed import Client, LocalCluster, get_client

__all__ = ['check_client', 'map_jobs']


def check_client(client):
    """
    Resolve the worker pool used to fan out folds or ablation cells.

    Returns `(client, new)` where `new` tells the caller to close it. `None`
    means run in-process; an int asks for a local cluster with that many
    single-threaded workers; `'auto'` reuses the current dask client if any.
    """
    if isinstance(client, Client):
        return client, False
    if client is None:
        return None, False
    if client == 'auto':
        try:
            return get_client(), False
        except ValueError:
            return None, False
    try:
        n_workers = int(client)
        assert n_workers > 0
    except (TypeError, ValueError, AssertionError):
        raise ValueError(
            'I do not know how to get a client from what you gave me.')
    cluster = LocalCluster(n_workers=n_workers, threads_per_worker=1,
                           processes=True)
    return Client(cluster), True


def map_jobs(fun, jobs, client=None):
    """Run `fun` over `jobs`, in order, locally or on the dask client."""
    client, _new_client = check_client(client)
    if client is None:
        return [fun(job) for job in jobs]
    try:
        futures = client.map(fun, jobs, pure=False)
        return client.gather(futures)
    finally:
        if _new_client:
            client.cluster.close()
            client.close()
