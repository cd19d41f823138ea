"""
Ordered parallel map for per-image batch work.

The pipeline and descriptor code are numpy-bound and release the GIL in their
inner loops, so a thread pool is enough. Results always come back in input
order, so the output of a batch does not depend on the number of workers.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def map_ordered(fn, items, jobs=1):
    """
    Apply fn to every item, optionally on a pool of worker threads.

    Args:
        fn: Callable taking one item
        items: Iterable of inputs
        jobs: Number of worker threads; 1 runs inline

    Returns:
        list: fn(item) for each item, in input order

    Raises:
        Exception: The first exception raised by fn, in input order
    """
    items = list(items)
    jobs = max(1, int(jobs))
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug("Dispatching %d items to %d workers", len(items), jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
