"""Closed-loop verification and complexity/rank comparison tables."""

import warnings
from dataclasses import dataclass

import numpy as np

from corp_lab import stepper
from corp_lab.errors import DivergenceError
from corp_lab.graph import GraphMatrices
from corp_lab.learn import Gains
from corp_lab.matlib import eig, kron
from corp_lab.plant import InternalModel, Scenario

# Spectral-abscissa slack absorbing eigenvalue error in Hurwitz verdicts.
HURWITZ_MARGIN = 1e-6
# Fraction of the horizon over which the tail error is measured.
TAIL_FRACTION = 0.2


def assemble_ac_hat(scn: Scenario, im: InternalModel, gm: GraphMatrices,
                    gains: Gains) -> np.ndarray:
    """Network closed-loop matrix of the normalized design, size N(n + n_z)."""
    n_foll = scn.n_followers
    eye_n = np.eye(n_foll)
    top = np.hstack([
        kron(eye_n, scn.a) + kron(gm.dh, scn.b @ gains.k_x),
        kron(eye_n, scn.b @ gains.k_z),
    ])
    bottom = np.hstack([
        kron(gm.dh, im.g2 @ scn.c),
        kron(eye_n, im.g1),
    ])
    return np.vstack([top, bottom])


@dataclass
class ClosedLoopResult:
    hurwitz: bool
    abscissa: float
    tail_error: float
    settle_time: float | None
    threshold: float
    horizon: float
    times: np.ndarray
    errors: np.ndarray  # (len(times), N * p) tracking errors per follower


def _closed_loop_system(scn, im, gm, gains):
    """Full autonomous closed loop over (v, x, zhat) plus the error readout."""
    n, p, q, nz = scn.n, scn.p, scn.q, im.n_z
    n_foll = scn.n_followers
    eye_n = np.eye(n_foll)
    e_stack = np.vstack(scn.e)
    ones = np.ones((n_foll, 1))
    a_cl = np.block([
        [scn.s, np.zeros((q, n_foll * n)), np.zeros((q, n_foll * nz))],
        [e_stack,
         kron(eye_n, scn.a) + kron(gm.dh, scn.b @ gains.k_x),
         kron(eye_n, scn.b @ gains.k_z)],
        [kron(gm.dh @ ones, im.g2 @ scn.f),
         kron(gm.dh, im.g2 @ scn.c),
         kron(eye_n, im.g1)],
    ])
    err_read = np.hstack([
        kron(ones, scn.f),
        kron(eye_n, scn.c),
        np.zeros((n_foll * p, n_foll * nz)),
    ])
    return a_cl, err_read


def closed_loop_simulate(scn: Scenario, im: InternalModel, gm: GraphMatrices,
                         gains: Gains, horizon=60.0, dt=1e-3, v0=None,
                         x0=None, zhat0=None, stride=20, threshold=1e-2,
                         guard=1e8) -> ClosedLoopResult:
    """Simulate the true closed loop (neighbor-relative control only) and
    report the tracking-error tail against the reference -F v."""
    ac_hat = assemble_ac_hat(scn, im, gm, gains)
    abscissa = float(np.max(eig(ac_hat).real))
    hurwitz = abscissa < -HURWITZ_MARGIN
    if not hurwitz:
        warnings.warn(
            f"closed-loop matrix is not Hurwitz (abscissa {abscissa:.3e}); "
            "simulating anyway",
            stacklevel=2,
        )

    n, q, nz = scn.n, scn.q, im.n_z
    n_foll = scn.n_followers
    a_cl, err_read = _closed_loop_system(scn, im, gm, gains)
    nx = a_cl.shape[0]

    x = np.zeros(nx)
    if v0 is None:
        x[0] = 1.0
    else:
        v0 = np.asarray(v0, dtype=float).ravel()
        if v0.size != q:
            raise ValueError("v0 has wrong dimension")
        x[:q] = v0
    if x0 is not None:
        x[q:q + n_foll * n] = np.asarray(x0, dtype=float).reshape(-1)
    if zhat0 is not None:
        x[q + n_foll * n:] = np.asarray(zhat0, dtype=float).reshape(-1)

    n_steps = int(round(horizon / dt))
    stride = max(1, int(stride))
    n_records = n_steps // stride
    times = np.empty(n_records + 1)
    errors = np.empty((n_records + 1, err_read.shape[0]))
    times[0] = 0.0
    errors[0] = err_read @ x

    empty2 = np.zeros((0, 0))
    b_zero = np.zeros((nx, 0))
    pq_zero = np.zeros((0, nx))
    q_zero = np.zeros((0, 0))
    idx = np.zeros(0, dtype=np.intp)
    acc = np.zeros(0)
    done = 0
    for rec in range(1, n_records + 1):
        take = stride if rec < n_records else n_steps - done
        stepper.rk4_collect(x, acc, done * dt, take, dt, a_cl, b_zero,
                            empty2, empty2, empty2, pq_zero, q_zero,
                            pq_zero, q_zero, idx, idx)
        done += take
        times[rec] = done * dt
        errors[rec] = err_read @ x
        if np.abs(x).max() > guard:
            raise DivergenceError("closed-loop trajectory exceeded the guard")

    err_norm = np.abs(errors).max(axis=1)
    tail_mask = times >= (1.0 - TAIL_FRACTION) * horizon
    tail_error = float(err_norm[tail_mask].max())
    # first recorded time after which every error stays below the threshold
    below_forever = np.flip(np.maximum.accumulate(np.flip(err_norm))) < threshold
    settle_time = float(times[np.argmax(below_forever)]) if below_forever.any() else None

    return ClosedLoopResult(
        hurwitz=hurwitz, abscissa=abscissa, tail_error=tail_error,
        settle_time=settle_time, threshold=threshold, horizon=float(horizon),
        times=times, errors=errors,
    )


@dataclass(frozen=True)
class DimRow:
    """Unknown counts and rank requirements of one learner, with the coupled
    single-input baseline for comparison."""

    method: str
    unknowns: int
    rank_required: int
    gao_unknowns: int
    gao_rank: int
    degenerate: bool = False


def dim_report(n, m, p, q, n_z, neighbor_count):
    """Closed-form per-follower equation sizes for all four methods."""
    if min(n, m, p, q) < 1 or n_z < 0 or neighbor_count < 0:
        raise ValueError("dimensions must be positive (n_z, neighbors >= 0)")
    nxi = n + n_z
    nv = nxi * (nxi + 1) // 2
    ours = nv + nxi * (m + q)
    h_i = neighbor_count * nxi
    gao = ours + nxi * h_i
    improved_unknowns = nv
    improved_rank = nv + n * (m + q)
    degenerate = n_z == 0
    rows = [
        DimRow("pi", ours, ours, gao, gao, degenerate),
        DimRow("vi", ours, ours, gao, gao, degenerate),
        DimRow("ipi", improved_unknowns, improved_rank, gao, gao, degenerate),
        DimRow("ivi", improved_unknowns, improved_rank, gao, gao, degenerate),
    ]
    return rows
