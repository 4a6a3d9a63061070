"""Pure-NumPy fixed-step integrator for the collection/closed-loop dynamics.

Same contract as the compiled kernel in ``_stepper.pyx``:

    state:        x' = a_mat @ x + b_mat @ d(t)
    forcing:      d_c(t) = sum_k amp[c, k] * sin(omg[c, k] * t + phs[c, k])
    readouts:     av = pa @ x + qa @ d,  bv = pb @ x + qb @ d
    accumulators: acc_r' = av[ia[r]] * bv[ib[r]]

Both x and acc are advanced in place with the classical 4th-order
Runge-Kutta scheme over n_steps of size dt starting at t_start.
"""

import numpy as np

BACKEND = "python"


def _deriv(t, x, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib):
    d = (amp * np.sin(omg * t + phs)).sum(axis=1)
    dx = a_mat @ x + b_mat @ d
    av = pa @ x + qa @ d
    bv = pb @ x + qb @ d
    return dx, av[ia] * bv[ib]


def rk4_collect(x, acc, t_start, n_steps, dt,
                a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib):
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(n_steps):
        t = t_start + i * dt
        dx1, da1 = _deriv(t, x, a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib)
        dx2, da2 = _deriv(t + half, x + half * dx1,
                          a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib)
        dx3, da3 = _deriv(t + half, x + half * dx2,
                          a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib)
        dx4, da4 = _deriv(t + dt, x + dt * dx3,
                          a_mat, b_mat, amp, omg, phs, pa, qa, pb, qb, ia, ib)
        x += sixth * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        acc += sixth * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
