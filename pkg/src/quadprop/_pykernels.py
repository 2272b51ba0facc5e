"""Reference numpy implementations of the hot loops.

These define the semantics; ``_ckernels.pyx`` must agree with them to
rounding error.
"""
import numpy as np


def rk4_path(gens, h, x0):
    """Integrate ``dX/dt = G(t) X`` with classical RK4 on a uniform grid.

    Parameters
    ----------
    gens : (2N+1, d, d) array
        Generator sampled at the half-step nodes, ``gens[j] = G(j h / 2)``.
    h : float
        Step size.
    x0 : (d, d) array
        Initial value.

    Returns
    -------
    (N+1, d, d) array with ``X`` at every full step.
    """
    gens = np.ascontiguousarray(gens, dtype=float)
    nsteps = (gens.shape[0] - 1) // 2
    out = np.empty((nsteps + 1,) + np.shape(x0))
    x = np.array(x0, dtype=float)
    out[0] = x
    half = 0.5 * h
    for k in range(nsteps):
        g0, gm, g1 = gens[2 * k], gens[2 * k + 1], gens[2 * k + 2]
        k1 = g0 @ x
        k2 = gm @ (x + half * k1)
        k3 = gm @ (x + half * k2)
        k4 = g1 @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x
    return out


def chirp_apply(x_out, x_in, phi, c):
    """``out[r, i] = sum_j exp(1j * c * x_out[i] * x_in[j]) * phi[r, j]``.

    ``phi`` is complex with shape ``(rows, len(x_in))``.
    """
    x_out = np.asarray(x_out, dtype=float)
    x_in = np.asarray(x_in, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    kernel = np.exp(1j * c * np.outer(x_out, x_in))
    return phi @ kernel.T
