"""Compiled inner loop for the explicit field stepper."""

import numpy as np
from numba import njit


@njit(fastmath=True, cache=True)
def step_kernel(ur, ui, vr, vi, dx, dt, q, nsteps):
    """Advance nsteps Euler steps of the nine-point scheme.

    Mirror (even-reflection) ghost cells realize the Neumann walls on the
    cell-centered grid: the out-of-domain neighbour index clamps to the
    adjacent interior cell.  The final state is left in (ur, ui).
    """
    ny, nx = ur.shape
    inv = 1.0 / (dx * dx)
    w1 = 2.0 / 3.0
    w2 = 1.0 / 6.0
    w0 = -10.0 / 3.0
    for it in range(nsteps):
        if it % 2 == 0:
            sr, si, dr, di = ur, ui, vr, vi
        else:
            sr, si, dr, di = vr, vi, ur, ui
        for j in range(ny):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < ny - 1 else ny - 1
            for i in range(nx):
                im = i - 1 if i > 0 else 0
                ip = i + 1 if i < nx - 1 else nx - 1
                cr = sr[j, i]
                ci = si[j, i]
                lr = (w1 * (sr[jm, i] + sr[jp, i] + sr[j, im] + sr[j, ip])
                      + w2 * (sr[jm, im] + sr[jm, ip] + sr[jp, im] + sr[jp, ip])
                      + w0 * cr) * inv
                li = (w1 * (si[jm, i] + si[jp, i] + si[j, im] + si[j, ip])
                      + w2 * (si[jm, im] + si[jm, ip] + si[jp, im] + si[jp, ip])
                      + w0 * ci) * inv
                g = 1.0 - (cr * cr + ci * ci)
                dr[j, i] = cr + dt * (g * (cr - q * ci) + lr)
                di[j, i] = ci + dt * (g * (ci + q * cr) + li)
    if nsteps % 2 == 1:
        ur[:, :] = vr
        ui[:, :] = vi
