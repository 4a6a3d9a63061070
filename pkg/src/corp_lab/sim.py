"""Deterministic fixed-step simulation of the networked collection phase.

Integrates the joint state (exosystem v, follower states x_i, compensator
states zhat_i driven by the normalized neighborhood error, observer states
eta_i) with classical RK4, while the regressor integrals are advanced as
auxiliary states inside the same integrator step. Sampling starts at t0,
either fixed or auto-selected once the distributed observer has converged.
"""

from dataclasses import dataclass, field

import numpy as np

from corp_lab import stepper
from corp_lab.errors import AssumptionError, DivergenceError
from corp_lab.graph import build_matrices
from corp_lab.matlib import duplication, kron, spectral_abscissa, vecv
from corp_lab.plant import InternalModel, Scenario


@dataclass(frozen=True)
class NoiseSpec:
    """Per-follower exploration signal: a sum of `count` sinusoids per input
    channel, frequencies log-uniform in [fmin, fmax] Hz, total amplitude bound
    `amplitude`."""

    count: int = 10
    amplitude: float = 1.0
    fmin: float = 0.1
    fmax: float = 10.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("noise count must be >= 0")
        if self.amplitude < 0.0:
            raise ValueError("noise amplitude must be >= 0")
        if not (0.0 < self.fmin <= self.fmax):
            raise ValueError("need 0 < fmin <= fmax")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t0: float | None = None  # None: auto-select at observer convergence
    samples: int = 40
    spacing: float = 0.1
    mu: float = 5.0
    seed: int = 0
    noise: NoiseSpec = NoiseSpec()
    v0: tuple | None = None
    x0: tuple | None = None  # one row per follower
    zhat0: tuple | None = None
    eta0: tuple | None = None
    t0_tol: float = 1e-6
    warmup_max: float = 400.0
    guard: float = 1e8

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t0 is not None and self.t0 < 0.0:
            raise ValueError("t0 must be >= 0")
        if self.samples < 1:
            raise ValueError("need at least one sample interval")
        if self.spacing < self.dt:
            raise ValueError("sample spacing must be >= dt")
        if self.mu <= 0.0:
            raise ValueError("observer gain mu must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def steps_per_sample(self):
        k = int(round(self.spacing / self.dt))
        if abs(self.spacing - k * self.dt) > 1e-9 * self.spacing:
            raise ValueError("sample spacing must be an integer multiple of dt")
        return k


def noise_params(noise: NoiseSpec, seed: int, follower: int, m: int):
    """Deterministic sinusoid bank (amplitudes, angular freqs, phases) for one
    follower; arrays of shape (m, count)."""
    rng = np.random.default_rng([int(seed), int(follower)])
    u = rng.random((m, noise.count))
    freq = noise.fmin * (noise.fmax / noise.fmin) ** u
    omega = 2.0 * np.pi * freq
    phase = rng.uniform(0.0, 2.0 * np.pi, (m, noise.count))
    if noise.count:
        amp = np.full((m, noise.count), noise.amplitude / noise.count)
    else:
        amp = np.zeros((m, 0))
    return amp, omega, phase


def exploration_noise(noise: NoiseSpec, seed: int, follower: int, m: int, t):
    """Exploration input of one follower at time(s) t."""
    amp, omega, phase = noise_params(noise, seed, follower, m)
    t = np.asarray(t, dtype=float)
    out = (amp[..., None] * np.sin(omega[..., None] * t + phase[..., None])).sum(axis=1)
    return out[:, 0] if t.ndim == 0 else out


class _Layout:
    """Index bookkeeping for the stacked collection state and accumulators."""

    def __init__(self, scn: Scenario, im: InternalModel):
        self.n, self.m, self.p, self.q = scn.n, scn.m, scn.p, scn.q
        self.n_followers = scn.n_followers
        self.nz = im.n_z
        self.nxi = self.n + self.nz
        self.nv = self.nxi * (self.nxi + 1) // 2
        self.nx = self.q + self.n_followers * (self.nxi + self.q)
        # a-side readout rows: [xi_hat, x] per follower
        self.a_rows = self.nxi + self.n
        # b-side readout rows: [xi_hat, u, eta, gamma_hat] per follower
        self.b_rows = self.nxi + self.m + self.q + self.nxi
        self.blocks = (
            ("xixi", self.nxi * self.nxi),
            ("xiu", self.nxi * self.m),
            ("xieta", self.nxi * self.q),
            ("xigam", self.nxi * self.nxi),
            ("xu", self.n * self.m),
            ("xeta", self.n * self.q),
            ("vecv", self.nv),
        )
        self.per_follower_acc = sum(size for _, size in self.blocks)
        self.nacc = self.n_followers * self.per_follower_acc

    def off_x(self, i):
        return self.q + (i - 1) * self.nxi

    def off_z(self, i):
        return self.off_x(i) + self.n

    def off_eta(self, i):
        return self.q + self.n_followers * self.nxi + (i - 1) * self.q

    def xi_slice(self, i):
        return slice(self.off_x(i), self.off_x(i) + self.nxi)

    def eta_slice(self, i):
        return slice(self.off_eta(i), self.off_eta(i) + self.q)

    def acc_block(self, i, name):
        off = (i - 1) * self.per_follower_acc
        for block, size in self.blocks:
            if block == name:
                return slice(off, off + size)
            off += size
        raise KeyError(name)


def _kron_pairs(a_off, na, b_off, nb):
    k = np.arange(na * nb)
    return a_off + k // nb, b_off + k % nb


def _build_system(scn: Scenario, im: InternalModel, cfg: SimConfig, k0):
    lay = _Layout(scn, im)
    n, m, q, nz, nxi, N = lay.n, lay.m, lay.q, lay.nz, lay.nxi, lay.n_followers
    adj = scn.graph.adjacency()
    w = adj.sum(axis=1)
    for i in range(1, N + 1):
        if w[i] <= 0.0:
            raise AssumptionError(f"follower {i} has no in-neighbor")

    a_mat = np.zeros((lay.nx, lay.nx))
    b_mat = np.zeros((lay.nx, N * m))
    a_mat[:q, :q] = scn.s
    g2c = im.g2 @ scn.c
    g2f = im.g2 @ scn.f
    eye_q = np.eye(q)
    for i in range(1, N + 1):
        ox, oz, oe = lay.off_x(i), lay.off_z(i), lay.off_eta(i)
        a_mat[ox:ox + n, ox:ox + n] += scn.a
        a_mat[ox:ox + n, :q] += scn.e[i - 1]
        if k0 is not None:
            a_mat[ox:ox + n, ox:ox + nxi] += scn.b @ k0
        b_mat[ox:ox + n, (i - 1) * m:i * m] = scn.b
        # compensator driven by the normalized neighborhood error
        a_mat[oz:oz + nz, oz:oz + nz] += im.g1
        a_mat[oz:oz + nz, ox:ox + n] += g2c
        for j in range(1, N + 1):
            if adj[i, j] > 0.0:
                oxj = lay.off_x(j)
                a_mat[oz:oz + nz, oxj:oxj + n] -= (adj[i, j] / w[i]) * g2c
        if adj[i, 0] > 0.0:
            a_mat[oz:oz + nz, :q] += (adj[i, 0] / w[i]) * g2f
        # distributed observer
        a_mat[oe:oe + q, oe:oe + q] += scn.s - cfg.mu * w[i] * eye_q
        for j in range(1, N + 1):
            if adj[i, j] > 0.0:
                oej = lay.off_eta(j)
                a_mat[oe:oe + q, oej:oej + q] += cfg.mu * adj[i, j] * eye_q
        if adj[i, 0] > 0.0:
            a_mat[oe:oe + q, :q] += cfg.mu * adj[i, 0] * eye_q

    # readouts
    na, nb = N * lay.a_rows, N * lay.b_rows
    nd = N * m
    pa = np.zeros((na, lay.nx))
    qa = np.zeros((na, nd))
    pb = np.zeros((nb, lay.nx))
    qb = np.zeros((nb, nd))
    for i in range(1, N + 1):
        ra = (i - 1) * lay.a_rows
        rb = (i - 1) * lay.b_rows
        ox = lay.off_x(i)
        pa[ra:ra + nxi, ox:ox + nxi] = np.eye(nxi)  # xi_hat
        pa[ra + nxi:ra + nxi + n, ox:ox + n] = np.eye(n)  # x
        pb[rb:rb + nxi, ox:ox + nxi] = np.eye(nxi)  # xi_hat
        if k0 is not None:
            pb[rb + nxi:rb + nxi + m, ox:ox + nxi] = k0  # feedback part of u
        qb[rb + nxi:rb + nxi + m, (i - 1) * m:i * m] = np.eye(m)  # noise part of u
        oe = lay.off_eta(i)
        pb[rb + nxi + m:rb + nxi + m + q, oe:oe + q] = np.eye(q)  # eta
        rg = rb + nxi + m + q  # gamma_hat: lumped neighbor-output term
        for j in range(1, N + 1):
            if adj[i, j] > 0.0:
                oxj = lay.off_x(j)
                pb[rg + n:rg + nxi, oxj:oxj + n] -= (adj[i, j] / w[i]) * g2c
        if adj[i, 0] > 0.0:
            pb[rg + n:rg + nxi, :q] += (adj[i, 0] / w[i]) * g2f

    # accumulator index pairs
    ia = np.empty(lay.nacc, dtype=np.intp)
    ib = np.empty(lay.nacc, dtype=np.intp)
    iu, ju = np.triu_indices(nxi)
    for i in range(1, N + 1):
        ra = (i - 1) * lay.a_rows
        rb = (i - 1) * lay.b_rows
        a_xi, a_x = ra, ra + nxi
        b_xi, b_u, b_eta, b_gam = rb, rb + nxi, rb + nxi + m, rb + nxi + m + q
        for name, (ao, asz, bo, bsz) in (
            ("xixi", (a_xi, nxi, b_xi, nxi)),
            ("xiu", (a_xi, nxi, b_u, m)),
            ("xieta", (a_xi, nxi, b_eta, q)),
            ("xigam", (a_xi, nxi, b_gam, nxi)),
            ("xu", (a_x, n, b_u, m)),
            ("xeta", (a_x, n, b_eta, q)),
        ):
            sl = lay.acc_block(i, name)
            ia[sl], ib[sl] = _kron_pairs(ao, asz, bo, bsz)
        sl = lay.acc_block(i, "vecv")
        ia[sl] = a_xi + iu
        ib[sl] = b_xi + ju

    amps, omgs, phss = [], [], []
    for i in range(1, N + 1):
        amp, omg, phs = noise_params(cfg.noise, cfg.seed, i, m)
        amps.append(amp)
        omgs.append(omg)
        phss.append(phs)
    amp = np.vstack(amps) if amps else np.zeros((0, 0))
    omg = np.vstack(omgs) if omgs else np.zeros((0, 0))
    phs = np.vstack(phss) if phss else np.zeros((0, 0))

    return lay, dict(
        a_mat=a_mat, b_mat=b_mat, amp=amp, omg=omg, phs=phs,
        pa=pa, qa=qa, pb=pb, qb=qb, ia=ia, ib=ib,
    )


def observer_error_matrix(scn: Scenario, mu: float):
    """Block matrix governing the stacked observer error col(eta_i - v)."""
    gm = build_matrices(scn.graph)
    return kron(np.eye(scn.n_followers), scn.s) - mu * kron(gm.h, np.eye(scn.q))


@dataclass
class DataLog:
    """Sampled states and running regressor integrals of one collection run."""

    layout: _Layout
    times: np.ndarray
    states: np.ndarray  # (samples + 1, nx)
    acc: np.ndarray  # (samples + 1, nacc)
    t0: float
    observer_margin: float
    backend: str
    cfg: SimConfig
    k0: np.ndarray | None
    trajectory: tuple | None = None  # (times, states) at the recording stride

    def xi_samples(self, follower):
        return self.states[:, self.layout.xi_slice(follower)]


@dataclass(frozen=True)
class FollowerRegressors:
    """Sampled-difference and integral regressors of one follower; the sole
    input to every learner."""

    n: int
    m: int
    q: int
    nz: int
    delta_xi: np.ndarray  # (s, nv)
    g_xixi: np.ndarray  # (s, nxi^2)
    g_xiu: np.ndarray  # (s, nxi*m)
    g_xieta: np.ndarray  # (s, nxi*q)
    g_xigam: np.ndarray  # (s, nxi^2)
    g_xu: np.ndarray  # (s, n*m)
    g_xeta: np.ndarray  # (s, n*q)
    gamma_hat: np.ndarray  # (s, nv), independently accumulated integral vecv

    @property
    def nxi(self):
        return self.n + self.nz

    @property
    def nv(self):
        return self.nxi * (self.nxi + 1) // 2

    @property
    def samples(self):
        return self.delta_xi.shape[0]


def _initial_state(cfg: SimConfig, lay: _Layout):
    x = np.zeros(lay.nx)
    if cfg.v0 is None:
        x[0] = 1.0
    else:
        v0 = np.asarray(cfg.v0, dtype=float).ravel()
        if v0.size != lay.q:
            raise ValueError("v0 has wrong dimension")
        x[:lay.q] = v0

    def fill(values, offset_fn, width, what):
        if values is None:
            return
        arr = np.asarray(values, dtype=float)
        if arr.shape != (lay.n_followers, width):
            raise ValueError(f"{what} must have shape (N, {width})")
        for i in range(1, lay.n_followers + 1):
            x[offset_fn(i):offset_fn(i) + width] = arr[i - 1]

    fill(cfg.x0, lay.off_x, lay.n, "x0")
    fill(cfg.zhat0, lay.off_z, lay.nz, "zhat0")
    fill(cfg.eta0, lay.off_eta, lay.q, "eta0")
    return x


def simulate_collection(scn: Scenario, im: InternalModel, cfg: SimConfig,
                        k0=None, record_stride=None) -> DataLog:
    """Run the collection phase and return sampled states plus regressor
    integrals.

    k0 given: behavior input u_i = k0 @ xi_hat_i + noise (PI-style).
    k0 None:  u_i = noise alone (VI-style, no stabilizing gain needed).
    """
    if k0 is not None:
        k0 = np.atleast_2d(np.asarray(k0, dtype=float))
        if k0.shape != (scn.m, scn.n + im.n_z):
            raise ValueError(f"k0 must be m x (n + n_z), got {k0.shape}")

    lay, sys = _build_system(scn, im, cfg, k0)
    margin = -spectral_abscissa(observer_error_matrix(scn, cfg.mu))
    if margin <= 0.0:
        raise AssumptionError(
            f"observer error matrix is not Hurwitz for mu={cfg.mu}; "
            "increase the observer gain"
        )

    x = _initial_state(cfg, lay)
    acc = np.zeros(lay.nacc)
    chunk = cfg.steps_per_sample()
    steps_done = 0

    traj_times, traj_states = [], []
    if record_stride is not None:
        record_stride = int(record_stride)
        if record_stride < 1 or chunk % record_stride != 0:
            raise ValueError("record stride must divide the steps per sample")

    def advance(n_steps):
        nonlocal steps_done
        if record_stride is None:
            stepper.rk4_collect(x, acc, steps_done * cfg.dt, n_steps, cfg.dt, **sys)
            steps_done += n_steps
        else:
            remaining = n_steps
            while remaining > 0:
                take = min(record_stride, remaining)
                stepper.rk4_collect(x, acc, steps_done * cfg.dt, take, cfg.dt, **sys)
                steps_done += take
                remaining -= take
                traj_times.append(steps_done * cfg.dt)
                traj_states.append(x.copy())
        if np.abs(x).max() > cfg.guard:
            raise DivergenceError(
                "trajectory divergence during collection; check the initial "
                "gain and the noise amplitude"
            )

    if record_stride is not None:
        traj_times.append(0.0)
        traj_states.append(x.copy())

    def observer_error_ok():
        v = x[:lay.q]
        err = max(
            np.linalg.norm(x[lay.eta_slice(i)] - v)
            for i in range(1, lay.n_followers + 1)
        )
        return err < cfg.t0_tol * (1.0 + np.linalg.norm(v))

    if cfg.t0 is None:
        while not observer_error_ok():
            if steps_done * cfg.dt >= cfg.warmup_max:
                raise AssumptionError(
                    "observer did not converge within the warmup budget; "
                    "raise mu or warmup_max"
                )
            advance(chunk)
        t0 = steps_done * cfg.dt
    else:
        steps0 = int(round(cfg.t0 / cfg.dt))
        if abs(cfg.t0 - steps0 * cfg.dt) > 1e-9 * max(cfg.t0, cfg.dt):
            raise ValueError("t0 must be an integer multiple of dt")
        if steps0 > 0:
            advance(steps0)
        t0 = steps0 * cfg.dt

    s = cfg.samples
    times = np.empty(s + 1)
    states = np.empty((s + 1, lay.nx))
    acc_hist = np.empty((s + 1, lay.nacc))
    times[0] = t0
    states[0] = x
    acc_hist[0] = acc
    for j in range(1, s + 1):
        advance(chunk)
        times[j] = steps_done * cfg.dt
        states[j] = x
        acc_hist[j] = acc

    trajectory = None
    if record_stride is not None:
        trajectory = (np.asarray(traj_times), np.asarray(traj_states))

    return DataLog(
        layout=lay, times=times, states=states, acc=acc_hist, t0=t0,
        observer_margin=margin, backend=stepper.BACKEND, cfg=cfg, k0=k0,
        trajectory=trajectory,
    )


def finalize_regressors(log: DataLog) -> dict:
    """Assemble per-follower regressor rows from the sampled log."""
    lay = log.layout
    out = {}
    for i in range(1, lay.n_followers + 1):
        xi = log.xi_samples(i)
        delta = np.diff(np.stack([vecv(row) for row in xi]), axis=0)
        blocks = {
            name: np.diff(log.acc[:, lay.acc_block(i, name)], axis=0)
            for name, _ in lay.blocks
        }
        out[i] = FollowerRegressors(
            n=lay.n, m=lay.m, q=lay.q, nz=lay.nz,
            delta_xi=delta,
            g_xixi=blocks["xixi"],
            g_xiu=blocks["xiu"],
            g_xieta=blocks["xieta"],
            g_xigam=blocks["xigam"],
            g_xu=blocks["xu"],
            g_xeta=blocks["xeta"],
            gamma_hat=blocks["vecv"],
        )
    return out


def vecv_integral_identity_gap(reg: FollowerRegressors) -> float:
    """Max deviation between g_xixi @ M and the independently accumulated
    integral of vecv(xi_hat); a joint consistency check of the integrator and
    the duplication operator."""
    m_dup = duplication(reg.nxi)
    return float(np.max(np.abs(reg.g_xixi @ m_dup - reg.gamma_hat)))
