"""
One-step solutions of the half-plane Loewner equation with constant driver.

With hcap(K_t) = a t, a constant driver w moves a point along
u(tau)^2 = u0^2 + 2 a tau, u = g - w.
"""
import numpy as np

from spectrum.exceptions import ParameterError

from .exceptions import Swallowed


def upper_sqrt(z):
    """Square root on the branch with nonnegative imaginary part."""
    root = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(root.imag < 0, -root, root)


def slit_step(g, gp, w, a, dtau):
    """(g, g') after dtau of capacity-time with driver frozen at w."""
    if dtau < 0:
        raise ParameterError(f"dtau must be nonnegative, got {dtau}")
    u0 = np.asarray(g) - w
    if np.iscomplexobj(u0):
        u = upper_sqrt(u0 * u0 + 2 * a * dtau)
    else:
        if np.any(u0 <= 0):
            raise Swallowed(f"boundary point at or left of the driver: g - w = {u0}")
        u = np.sqrt(u0 * u0 + 2 * a * dtau)
    g_next = w + u
    gp_next = gp * u0 / u
    if np.ndim(g_next) == 0:
        return g_next.item(), np.asarray(gp_next).item()
    return g_next, gp_next


def slit_step_inverse(z, w, a, dtau):
    """Inverse of the frozen-driver map, landing in the closed upper half-plane."""
    return w + upper_sqrt((np.asarray(z, dtype=complex) - w) ** 2 - 2 * a * dtau)


def slit_driver(w, v, a, dt):
    """Frozen driver value on each grid interval that carries V_k to V_{k+1}.

    A point at distance d0 to the right of a frozen driver moves to
    sqrt(d0^2 + 2 a dt), so matching the increment dV fixes
    d0 = (2 a dt - dV^2) / (2 dV). Steps with dV above sqrt(2 a dt) start
    the force point on the driver; steps where V does not advance fall back
    to the midpoint of W. Extra trailing axes of ``w`` and ``v`` are kept.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    if w.shape != v.shape:
        raise ParameterError(f"w and v must have the same shape, got {w.shape} and {v.shape}")
    cap = 2 * a * dt
    root = np.sqrt(cap)
    dv = np.diff(v, axis=0)
    moving = dv > 0
    safe = np.where(moving, dv, 1.0)
    inside = v[:-1] - (cap - safe * safe) / (2 * safe)
    outside = v[1:] - root
    frozen = np.where(safe <= root, inside, outside)
    return np.where(moving, frozen, 0.5 * (w[:-1] + w[1:]))
