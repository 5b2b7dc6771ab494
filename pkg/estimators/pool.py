"""
Block-parallel map over path indices.

Paths are split into contiguous blocks of ``BLOCK_SIZE`` indices. Each block
is handled by a top-level (picklable) function that receives
``path_indices`` and returns per-path arrays with the path axis last. Blocks
come back in order and are concatenated before any reduction, so results do
not depend on the number of workers.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
from decouple import config

from spectrum.conf import lab_settings
from spectrum.exceptions import ParameterError

logger = logging.getLogger(__name__)


def resolve_workers(workers=None):
    """SLE_LAB_THREADS from the environment wins over ``workers``, read on every call."""
    override = config('SLE_LAB_THREADS', default=0, cast=int)
    if override > 0:
        return override
    if workers:
        return int(workers)
    return lab_settings.THREADS or 1


def path_blocks(n_paths, block_size=None):
    if n_paths < 1:
        raise ParameterError(f"n_paths must be positive, got {n_paths}")
    if block_size is None:
        block_size = lab_settings.BLOCK_SIZE
    return [range(start, min(start + block_size, n_paths)) for start in range(0, n_paths, block_size)]


def map_blocks(fn, n_paths, workers=None, block_size=None, **kwargs):
    """[fn(path_indices=block, **kwargs) for block in path_blocks(...)], in block order."""
    blocks = path_blocks(n_paths, block_size)
    task = partial(fn, **kwargs)
    workers = min(resolve_workers(workers), len(blocks))
    logger.debug("running %d blocks of %s on %d workers", len(blocks), fn.__name__, workers)
    if workers <= 1:
        return [task(path_indices=block) for block in blocks]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(task, path_indices=block) for block in blocks]
        return [future.result() for future in futures]


def gather(results):
    """Concatenate block results along the path axis; tuples are gathered field by field."""
    if isinstance(results[0], tuple):
        return tuple(np.concatenate(parts, axis=-1) for parts in zip(*results))
    return np.concatenate(results, axis=-1)
