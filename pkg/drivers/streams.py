"""
Counter-based random streams.

Every path owns a Philox stream keyed by (seed, path_index); the step index is
the position inside that stream. Draws therefore depend only on the path, not
on how paths are grouped into blocks or spread over workers.
"""
import numpy as np

from spectrum.exceptions import ParameterError

MAIN = 0
BRIDGE = 1
TILTED = 2
STATIONARY = 3

SEED_BOUND = 2 ** 64
CHUNK_STEPS = 4096


def path_generator(seed, path_index, substream=MAIN):
    if not 0 <= seed < SEED_BOUND:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= path_index < SEED_BOUND:
        raise ParameterError(f"path_index out of range: {path_index}")
    bit_generator = np.random.Philox(key=(int(seed) << 64) | int(path_index), counter=int(substream) << 192)
    return np.random.Generator(bit_generator)


class NormalStream:
    """Standard normals for a block of paths, drawn in step chunks."""

    def __init__(self, seed, path_indices, substream=MAIN):
        self.path_indices = [int(p) for p in path_indices]
        self.generators = [path_generator(seed, p, substream) for p in self.path_indices]

    def __len__(self):
        return len(self.generators)

    def draw(self, n_steps):
        """(n_steps, n_paths) array; column j continues path j's stream."""
        if not self.generators:
            return np.empty((n_steps, 0))
        return np.column_stack([g.standard_normal(n_steps) for g in self.generators])

    def chunks(self, n_steps, chunk=CHUNK_STEPS):
        done = 0
        while done < n_steps:
            m = min(chunk, n_steps - done)
            yield done, self.draw(m)
            done += m
