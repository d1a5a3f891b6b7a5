"""Leapfrog stencil kernels.

Fields carry a two-cell zero halo so the 4th-order stencil needs no
branches. One step computes::

    out = g * (2 u + c * stencil(u)) - g**2 * u_prev

with ``c = (v dt / dx)^2`` and ``g`` the per-step sponge factor (1 in
the interior). Sources are added as ``g * c * f`` on top of ``out``.
Run backwards in time with the same injection, this recurrence is the
exact discrete adjoint of itself up to the diagonal similarity
``diag(c * g)``.
"""
import numba

HALO = 2

STENCILS = {
    2: (1.0, 0.0),
    4: (4.0 / 3.0, -1.0 / 12.0),
}


@numba.njit(cache=True, nogil=True)
def _step_numba(u, u_prev, out, g, d, c, c1, c2):
    nzp, nxp = u.shape
    c0 = -4.0 * (c1 + c2)
    for i in range(2, nzp - 2):
        for j in range(2, nxp - 2):
            w = u[i, j]
            lap = (c0 * w
                   + c1 * (u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1])
                   + c2 * (u[i - 2, j] + u[i + 2, j] + u[i, j - 2] + u[i, j + 2]))
            out[i, j] = g[i, j] * (2.0 * w + c[i, j] * lap) - d[i, j] * u_prev[i, j]


def step_numpy(u, u_prev, out, g, d, c, c1, c2):
    """Reference implementation of :func:`step` in plain numpy."""
    c0 = -4.0 * (c1 + c2)
    w = u[2:-2, 2:-2]
    lap = (c0 * w
           + c1 * (u[1:-3, 2:-2] + u[3:-1, 2:-2] + u[2:-2, 1:-3] + u[2:-2, 3:-1])
           + c2 * (u[:-4, 2:-2] + u[4:, 2:-2] + u[2:-2, :-4] + u[2:-2, 4:]))
    out[2:-2, 2:-2] = (g[2:-2, 2:-2] * (2.0 * w + c[2:-2, 2:-2] * lap)
                       - d[2:-2, 2:-2] * u_prev[2:-2, 2:-2])


def step(u, u_prev, out, g, d, c, c1, c2):
    _step_numba(u, u_prev, out, g, d, c, c1, c2)
