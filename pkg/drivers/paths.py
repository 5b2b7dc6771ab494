from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from loewner.maps import slit_driver
from spectrum.exceptions import ParameterError
from spectrum.params import SleParams

from .exceptions import ForcePointCollision


@dataclass
class DriverPath:
    """W (and the force-point images V) on the grid t_k = k*dt."""

    dt: float
    w: np.ndarray
    v: Optional[np.ndarray]
    a: float
    x_r: float = 0.0
    seed: int = 0
    path_index: int = 0
    params: Optional[SleParams] = None
    v_right: Optional[np.ndarray] = field(default=None, repr=False)
    v_left: Optional[np.ndarray] = field(default=None, repr=False)
    continuation_hit: Optional[int] = None

    def __str__(self):
        return f"driver seed={self.seed} path={self.path_index} steps={self.n_steps} dt={self.dt:g}"

    @property
    def n_steps(self):
        return len(self.w) - 1

    @property
    def t_max(self):
        return self.n_steps * self.dt

    @property
    def times(self):
        return np.arange(len(self.w)) * self.dt

    @property
    def gap(self):
        return None if self.v is None else self.v - self.w

    @property
    def w_mid(self):
        """Midpoint driver value on each grid interval."""
        return 0.5 * (self.w[:-1] + self.w[1:])

    @property
    def w_step(self):
        """Frozen driver value on each grid interval used by the Loewner flow.

        One-point drivers freeze at the value whose slit map carries V_k to
        V_{k+1}; everything else uses the midpoint.
        """
        one_point = self.v is not None and self.v_left is None and (
            self.v_right is None or self.v_right.shape[1] == 1)
        if not one_point:
            return self.w_mid
        return slit_driver(self.w, self.v, self.a, self.dt)

    @property
    def csv_header(self):
        header = ['t', 'w', 'v']
        if self.v_right is not None and self.v_right.shape[1] > 1:
            header += [f'v_r{j + 1}' for j in range(1, self.v_right.shape[1])]
        if self.v_left is not None:
            header += [f'v_l{j + 1}' for j in range(self.v_left.shape[1])]
        return header

    def csv_rows(self):
        v = self.v if self.v is not None else np.full_like(self.w, np.nan)
        columns = [self.times, self.w, v]
        if self.v_right is not None and self.v_right.shape[1] > 1:
            columns += list(self.v_right[:, 1:].T)
        if self.v_left is not None:
            columns += list(self.v_left.T)
        return np.column_stack(columns)


@dataclass(frozen=True)
class MultiForceConfig:
    """Force points x_{l,L} < ... < x_{1,L} <= 0 <= x_{1,R} < ... < x_{r,R} and their weights."""

    x_left: tuple = ()
    rho_left: tuple = ()
    x_right: tuple = ()
    rho_right: tuple = ()

    def __post_init__(self):
        for name in ('x_left', 'rho_left', 'x_right', 'rho_right'):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.x_left) != len(self.rho_left) or len(self.x_right) != len(self.rho_right):
            raise ParameterError("every force point needs exactly one weight")
        self._check_side(self.x_right, 'x_right', sign=1)
        self._check_side(self.x_left, 'x_left', sign=-1)

    @staticmethod
    def _check_side(points, name, sign):
        if any(sign * p < 0 for p in points):
            raise ParameterError(f"{name} must lie on its own side of 0, got {points}")
        if len(set(points)) != len(points):
            raise ForcePointCollision(f"{name} contains coinciding force points: {points}")
        if any(sign * (q - p) <= 0 for p, q in zip(points, points[1:])):
            raise ParameterError(f"{name} must move monotonically away from 0, got {points}")

    @property
    def is_empty(self):
        return not (self.x_left or self.x_right)

    def cumulative_right(self, j):
        return sum(self.rho_right[:j + 1])

    def cumulative_left(self, j):
        return sum(self.rho_left[:j + 1])

    @classmethod
    def single(cls, x_r, rho):
        return cls(x_right=(x_r,), rho_right=(rho,))
