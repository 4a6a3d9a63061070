"""Independent test oracles.

`exact_regressors` builds regressor rows in closed form from a known
(Y, J, E_i): the behavior signals (u, eta, gamma) are readouts of an
autonomous oscillator bank, the joint dynamics are linear, and every interval
integral of a state product is evaluated exactly through one matrix
exponential of the lifted second-moment system. No Runge-Kutta code is
involved, so agreement with the simulator or the model-based iteration is a
genuine dual-route check.
"""

import numpy as np
from scipy.linalg import block_diag, expm

from corp_lab.matlib import vecv
from corp_lab.sim import FollowerRegressors

_FREQS = (0.31, 0.73, 1.37, 2.19, 3.41)


def exact_regressors(y, j, e_i, n_plant, samples=40, spacing=0.25, seed=0,
                     signal_scale=0.4):
    """Machine-precision regressors for the truncated augmented dynamics
    xi' = Y xi + J u + [E_i; 0] eta + gamma."""
    y = np.asarray(y, dtype=float)
    j = np.asarray(j, dtype=float)
    e_i = np.asarray(e_i, dtype=float)
    nxi = y.shape[0]
    m = j.shape[1]
    q = e_i.shape[1]
    nz = nxi - n_plant
    rng = np.random.default_rng(seed)

    # Autonomous oscillator bank driving (u, eta, gamma).
    osc = [np.array([[0.0, w], [-w, 0.0]]) for w in _FREQS]
    omega_blk = block_diag(*osc)
    nw = omega_blk.shape[0]
    l_u = signal_scale * rng.standard_normal((m, nw))
    l_eta = signal_scale * rng.standard_normal((q, nw))
    l_gam = np.vstack([
        np.zeros((n_plant, nw)),
        signal_scale * rng.standard_normal((nz, nw)),
    ])

    e_top = np.vstack([e_i, np.zeros((nz, q))])
    coupling = j @ l_u + e_top @ l_eta + l_gam
    nz_joint = nxi + nw
    f_joint = np.block([
        [y, coupling],
        [np.zeros((nw, nxi)), omega_blk],
    ])
    z = np.concatenate([
        0.5 * rng.standard_normal(nxi),
        rng.standard_normal(nw),
    ])

    # Readouts of the joint state.
    r_xi = np.hstack([np.eye(nxi), np.zeros((nxi, nw))])
    r_x = r_xi[:n_plant]
    r_u = np.hstack([np.zeros((m, nxi)), l_u])
    r_eta = np.hstack([np.zeros((q, nxi)), l_eta])
    r_gam = np.hstack([np.zeros((nxi, nxi)), l_gam])

    # One-step propagator and the lifted second-moment integrator:
    # d/dt [vec(Z Z^T); acc] = [[F (+) F, 0], [I, 0]] [vec(Z Z^T); acc].
    prop = expm(f_joint * spacing)
    f_sum = np.kron(np.eye(nz_joint), f_joint) + np.kron(f_joint, np.eye(nz_joint))
    nn = nz_joint * nz_joint
    lifted = np.zeros((2 * nn, 2 * nn))
    lifted[:nn, :nn] = f_sum
    lifted[nn:, :nn] = np.eye(nn)
    moment_map = expm(lifted * spacing)[nn:, :nn]

    iu, ju = np.triu_indices(nxi)
    rows = {name: [] for name in
            ("delta", "xixi", "xiu", "xieta", "xigam", "xu", "xeta", "vecv")}
    for _ in range(samples):
        second = moment_map @ np.outer(z, z).flatten(order="F")
        macc = second.reshape((nz_joint, nz_joint), order="F")
        z_next = prop @ z
        rows["delta"].append(vecv(r_xi @ z_next) - vecv(r_xi @ z))
        xi_mom = r_xi @ macc
        rows["xixi"].append((xi_mom @ r_xi.T).ravel())
        rows["xiu"].append((xi_mom @ r_u.T).ravel())
        rows["xieta"].append((xi_mom @ r_eta.T).ravel())
        rows["xigam"].append((xi_mom @ r_gam.T).ravel())
        x_mom = r_x @ macc
        rows["xu"].append((x_mom @ r_u.T).ravel())
        rows["xeta"].append((x_mom @ r_eta.T).ravel())
        xi_sq = xi_mom @ r_xi.T
        rows["vecv"].append(xi_sq[iu, ju])
        z = z_next

    return FollowerRegressors(
        n=n_plant, m=m, q=q, nz=nz,
        delta_xi=np.asarray(rows["delta"]),
        g_xixi=np.asarray(rows["xixi"]),
        g_xiu=np.asarray(rows["xiu"]),
        g_xieta=np.asarray(rows["xieta"]),
        g_xigam=np.asarray(rows["xigam"]),
        g_xu=np.asarray(rows["xu"]),
        g_xeta=np.asarray(rows["xeta"]),
        gamma_hat=np.asarray(rows["vecv"]),
    )


def random_connected_digraph(rng, n_max=5):
    """Leader-rooted random digraph: spanning arborescence plus extra edges."""
    from corp_lab.graph import Digraph

    n = int(rng.integers(2, n_max + 1))
    edges = {}
    order = rng.permutation(np.arange(1, n + 1))
    for idx, node in enumerate(order):
        parent = 0 if idx == 0 else int(rng.choice([0, *order[:idx]]))
        edges[(parent, int(node))] = float(rng.uniform(0.5, 2.0))
    for _ in range(int(rng.integers(0, 2 * n))):
        src = int(rng.integers(0, n + 1))
        dst = int(rng.integers(1, n + 1))
        if src != dst:
            edges[(src, dst)] = float(rng.uniform(0.5, 2.0))
    return Digraph(n_followers=n, edges=tuple((s, d, w) for (s, d), w in edges.items()))


def stabilizing_gain(y, j, scale=1.5):
    """A non-optimal stabilizing start: scaled LQR gain of the known pair."""
    from scipy.linalg import solve_continuous_are

    nxi = y.shape[0]
    p = solve_continuous_are(y, j, np.eye(nxi), np.eye(j.shape[1]))
    return -scale * (j.T @ p)
