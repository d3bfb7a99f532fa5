import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "FASTSWITCH_THREADS"


def n_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def pmap(fn, items, threads=None):
    """Ordered map; runs on a thread pool when more than one thread is allowed.

    The compiled kernels release the GIL, so threads give real parallelism.
    """
    items = list(items)
    threads = n_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
