"""Model-based Riccati oracle and the four data-driven learners.

All learners consume FollowerRegressors only; the truth matrices never enter
here. Unknown vectors are packed as [vecs(P); vec(K); vec(Z)] with column-major
vec, where Z is the disturbance-coupling block recovered alongside P.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from corp_lab.errors import (
    AssumptionError,
    CorpLabError,
    DivergenceError,
    RankDeficiencyError,
)
from corp_lab.matlib import (
    duplication,
    is_hurwitz,
    lstsq,
    rank_tol,
    solve_lyapunov,
    unvec,
    unvecs,
    vec,
    vecs,
)

# Methods whose per-iteration unknowns carry no follower-specific block, so a
# solved (P, K) may be shared across the network.
REDUCED_METHODS = ("ipi", "ivi")


@dataclass(frozen=True)
class Gains:
    """Final controller gain split into plant and compensator parts."""

    k_x: np.ndarray  # m x n
    k_z: np.ndarray  # m x n_z
    omega: float

    @property
    def k(self):
        return np.hstack([self.k_x, self.k_z])


@dataclass
class LearnReport:
    method: str
    p: np.ndarray
    k: np.ndarray  # unscaled gain -J^T P (scaled by 1/omega only at deployment)
    p_norms: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rank: dict | None = None
    b_hat: np.ndarray | None = None
    e_hat: np.ndarray | None = None
    resets: int = 0
    p_iterates: list | None = None
    k_iterates: list | None = None


def kleinman_oracle(ap, k0, tol=1e-8, max_iter=100, residual_tol=1e-8):
    """Newton-type policy iteration on the known augmented pair (Y, J).

    Each step solves one Lyapunov equation; iterates decrease monotonically to
    the stabilizing Riccati solution. Returns (P_star, [P_0, P_1, ...]).
    """
    y, j = ap.y, ap.j
    nxi = y.shape[0]
    k = np.atleast_2d(np.asarray(k0, dtype=float))
    if not is_hurwitz(y + j @ k):
        raise AssumptionError("initial gain is not stabilizing")
    eye = np.eye(nxi)
    history = []
    p_prev = None
    for _ in range(max_iter):
        p = solve_kleinman_step(y, j, k)
        history.append(p)
        k = -(j.T @ p)
        if p_prev is not None and np.linalg.norm(p - p_prev, "fro") < tol:
            break
        p_prev = p
    else:
        raise CorpLabError(f"Kleinman iteration did not converge in {max_iter} steps")
    residual = np.linalg.norm(y.T @ p + p @ y - p @ j @ j.T @ p + eye, "fro")
    if residual > residual_tol:
        raise CorpLabError(f"Riccati residual {residual:.3e} above {residual_tol:.1e}")
    return p, history


def solve_kleinman_step(y, j, k):
    """One policy-evaluation step: (Y+JK)^T P + P (Y+JK) + I + K^T K = 0."""
    nxi = y.shape[0]
    return solve_lyapunov(y + j @ k, np.eye(nxi) + k.T @ k)


def _sizes(reg):
    nxi = reg.nxi
    return reg.n, reg.m, reg.q, reg.nz, nxi, reg.nv


def rank_check(reg, method):
    """Excitation diagnostics: required vs achieved numerical rank for the
    regressor block of the given method ('pi', 'vi', 'identify', 'reduced')."""
    n, m, q, _, nxi, nv = _sizes(reg)
    if method in ("pi", "vi"):
        mat = np.hstack([reg.g_xixi, reg.g_xiu, reg.g_xieta])
        required = nv + nxi * (m + q)
    elif method == "identify":
        mat = np.hstack([reg.g_xixi, reg.g_xu, reg.g_xeta])
        required = nv + n * (m + q)
    elif method == "reduced":
        mat = reg.g_xixi
        required = nv
    else:
        raise ValueError(f"unknown rank-check method {method!r}")
    achieved, gap = rank_tol(mat)
    return {
        "method": method,
        "required": int(required),
        "achieved": int(achieved),
        "ok": bool(achieved >= required),
        "gap": gap,
    }


def _require_rank(reg, method):
    info = rank_check(reg, method)
    if not info["ok"]:
        raise RankDeficiencyError(
            f"{method} rank condition failed: achieved {info['achieved']} < "
            f"required {info['required']}; collect more or richer data",
            achieved=info["achieved"],
            required=info["required"],
        )
    return info


def _pi_system(reg, k, w1):
    _, m, _, _, nxi, _ = _sizes(reg)
    psi2 = -2.0 * reg.g_xixi @ np.kron(np.eye(nxi), k.T) + 2.0 * reg.g_xiu
    psi = np.hstack([w1, psi2, -2.0 * reg.g_xieta])
    phi = -(reg.g_xixi @ vec(np.eye(nxi) + k.T @ k))
    return psi, phi


def pi_learn(reg, k0, tol=1e-6, max_iter=50, guard=1e8, keep_iterates=False):
    """Off-policy policy iteration on collected data.

    Solves, per iteration, for [vecs(P_k); vec(K_{k+1}); vec(Z_k)] given the
    current gain K_k; the caller guarantees K_0 is stabilizing for the unknown
    augmented dynamics.
    """
    n, m, q, _, nxi, nv = _sizes(reg)
    rank = _require_rank(reg, "pi")
    m_dup = duplication(nxi)
    w1 = reg.delta_xi - 2.0 * reg.g_xigam @ m_dup
    k = np.atleast_2d(np.asarray(k0, dtype=float))
    report = LearnReport(method="pi", p=None, k=None, rank=rank)
    if keep_iterates:
        report.p_iterates, report.k_iterates = [], []
    p_prev = None
    for it in range(1, max_iter + 1):
        psi, phi = _pi_system(reg, k, w1)
        sol = lstsq(psi, phi)
        p = unvecs(sol[:nv], nxi)
        k_next = unvec(sol[nv:nv + nxi * m], (m, nxi))
        report.iterations = it
        report.p_norms.append(float(np.linalg.norm(p, "fro")))
        if keep_iterates:
            report.p_iterates.append(p)
            report.k_iterates.append(k_next)
        if np.linalg.norm(p, "fro") > guard:
            raise DivergenceError("policy-iteration iterate exceeded the guard")
        step = np.inf if p_prev is None else np.linalg.norm(p - p_prev, "fro")
        report.step_norms.append(float(step))
        k = k_next
        p_prev = p
        if step < tol:
            report.converged = True
            break
    report.p = p_prev
    report.k = k
    return report


def _vi_prepare(reg):
    _, m, q, _, nxi, nv = _sizes(reg)
    m_dup = duplication(nxi)
    psi = np.hstack([reg.g_xixi @ m_dup, -2.0 * reg.g_xiu, 2.0 * reg.g_xieta])
    achieved, _ = rank_tol(psi)
    if achieved < psi.shape[1]:
        raise RankDeficiencyError(
            "value-iteration regressor matrix is rank deficient",
            achieved=achieved,
            required=psi.shape[1],
        )
    w = reg.delta_xi - 2.0 * reg.g_xigam @ m_dup
    return np.linalg.pinv(psi), w


def vi_solve(reg, p, psi_pinv=None, w=None):
    """Single value-iteration solve: recover (H, K, Z) for the given P."""
    _, m, q, _, nxi, nv = _sizes(reg)
    if psi_pinv is None or w is None:
        psi_pinv, w = _vi_prepare(reg)
    sol = psi_pinv @ (w @ vecs(p))
    h = unvecs(sol[:nv], nxi)
    k = unvec(sol[nv:nv + nxi * m], (m, nxi))
    z = unvec(sol[nv + nxi * m:], (q, nxi))
    return h, k, z


def _check_p0(p0, nxi):
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    if p0.shape != (nxi, nxi):
        raise ValueError(f"P0 must be {nxi} x {nxi}")
    if np.linalg.norm(p0 - p0.T) > 1e-10 * max(1.0, np.linalg.norm(p0)):
        raise ValueError("P0 must be symmetric")
    if np.min(np.linalg.eigvalsh(0.5 * (p0 + p0.T))) <= 0.0:
        raise ValueError("P0 must be positive definite")
    return 0.5 * (p0 + p0.T)


def harmonic_schedule(eps_a=1.0, eps_b=10.0):
    """Diminishing steps eps_k = eps_a / (k + eps_b): divergent sum, finite
    sum of squares."""
    if eps_a <= 0.0 or eps_b <= 0.0:
        raise ValueError("schedule parameters must be positive")
    return lambda k: eps_a / (k + eps_b)


def doubling_confinement(confine_c=100.0):
    """Frobenius-ball radii confine_c * 2^q growing out to the full cone."""
    if confine_c <= 0.0:
        raise ValueError("confinement radius must be positive")
    return lambda q: confine_c * 2.0 ** q


def _vi_loop(method, p0, advance, schedule, confinement, eps_stop, max_iter,
             rank, keep_iterates):
    """Shared stochastic-approximation loop with confinement resets.

    advance(p) -> (direction, k) where direction is the full update term
    H_k - P J J^T P + I and k the current unscaled gain estimate.
    """
    p = p0.copy()
    report = LearnReport(method=method, p=None, k=None, rank=rank)
    if keep_iterates:
        report.p_iterates, report.k_iterates = [], []
    q_idx = 0
    k_cur = None
    for it in range(max_iter):
        direction, k_cur = advance(p)
        eps = schedule(it)
        p_tilde = p + eps * direction
        step = float(np.linalg.norm(p_tilde - p, "fro") / eps)
        report.iterations = it + 1
        report.p_norms.append(float(np.linalg.norm(p, "fro")))
        report.step_norms.append(step)
        if keep_iterates:
            report.p_iterates.append(p)
            report.k_iterates.append(k_cur)
        if np.linalg.norm(p_tilde, "fro") > confinement(q_idx):
            p = p0.copy()
            q_idx += 1
            report.resets += 1
        elif step < eps_stop:
            report.converged = True
            break
        else:
            p = p_tilde
    report.p = p
    report.k = k_cur
    return report


def vi_learn(reg, p0, schedule=None, confinement=None, eps_stop=1e-4,
             max_iter=500000, keep_iterates=False):
    """Value iteration on collected data; no stabilizing initial gain needed.

    The regressor matrix is fixed across iterations, so it is factored once;
    each iteration solves for (H_k, K_k, Z_k) at the current P_k and takes a
    diminishing step along H_k - K_k^T K_k + I, with growing confinement sets
    guarding the excursion. schedule and confinement default to
    harmonic_schedule() and doubling_confinement().
    """
    rank = _require_rank(reg, "vi")
    _, _, _, _, nxi, _ = _sizes(reg)
    p0 = _check_p0(p0, nxi)
    psi_pinv, w = _vi_prepare(reg)
    eye = np.eye(nxi)

    def advance(p):
        h, k, _ = vi_solve(reg, p, psi_pinv, w)
        return h - k.T @ k + eye, k

    return _vi_loop("vi", p0, advance,
                    schedule or harmonic_schedule(),
                    confinement or doubling_confinement(),
                    eps_stop, max_iter, rank, keep_iterates)


def identify_be(reg):
    """Stage-one identification: recover (B, E_i) from the unit-weight
    relation; also returns the symmetric part estimate of the drift."""
    n, m, q, _, nxi, nv = _sizes(reg)
    _require_rank(reg, "identify")
    m_dup = duplication(nxi)
    psi0 = np.hstack([reg.g_xixi @ m_dup, 2.0 * reg.g_xu, 2.0 * reg.g_xeta])
    phi0 = (reg.delta_xi - 2.0 * reg.g_xigam @ m_dup) @ vecs(np.eye(nxi))
    sol = lstsq(psi0, phi0)
    y_sym = unvecs(sol[:nv], nxi)
    b_hat = unvec(sol[nv:nv + n * m], (m, n)).T
    e_hat = unvec(sol[nv + n * m:], (q, n)).T
    return b_hat, e_hat, y_sym


def _hatted_blocks(reg, b_hat, e_hat):
    n, m, q, nz, nxi, _ = _sizes(reg)
    b_hat = np.atleast_2d(np.asarray(b_hat, dtype=float))
    e_hat = np.atleast_2d(np.asarray(e_hat, dtype=float))
    if b_hat.shape != (n, m) or e_hat.shape != (n, q):
        raise ValueError("identified blocks have wrong shapes")
    j_hat = np.vstack([b_hat, np.zeros((nz, m))])
    e_top = np.vstack([e_hat, np.zeros((nz, q))])
    return j_hat, e_top


def ipi_learn(reg, b_hat, e_hat, k0, tol=1e-6, max_iter=50, guard=1e8,
              keep_iterates=False):
    """Reduced policy iteration: with (B, E_i) identified, each iteration
    solves for vecs(P_k) alone and reconstructs the gain as -J_hat^T P_k."""
    n, m, q, _, nxi, nv = _sizes(reg)
    rank = _require_rank(reg, "reduced")
    j_hat, e_top = _hatted_blocks(reg, b_hat, e_hat)
    m_dup = duplication(nxi)
    eye = np.eye(nxi)
    w1 = reg.delta_xi - 2.0 * reg.g_xigam @ m_dup
    a_u = 2.0 * reg.g_xiu @ np.kron(eye, j_hat.T) @ m_dup
    a_eta = 2.0 * reg.g_xieta @ np.kron(eye, e_top.T) @ m_dup
    k = np.atleast_2d(np.asarray(k0, dtype=float))
    report = LearnReport(method="ipi", p=None, k=None, rank=rank,
                         b_hat=j_hat[:n], e_hat=e_top[:n])
    if keep_iterates:
        report.p_iterates, report.k_iterates = [], []
    p_prev = None
    for it in range(1, max_iter + 1):
        coupling = 2.0 * reg.g_xixi @ np.kron(eye, k.T @ j_hat.T) @ m_dup
        psi = w1 + coupling - a_u - a_eta
        phi = -(reg.g_xixi @ vec(eye + k.T @ k))
        p = unvecs(lstsq(psi, phi), nxi)
        k_next = -(j_hat.T @ p)
        report.iterations = it
        report.p_norms.append(float(np.linalg.norm(p, "fro")))
        if keep_iterates:
            report.p_iterates.append(p)
            report.k_iterates.append(k_next)
        if np.linalg.norm(p, "fro") > guard:
            raise DivergenceError("reduced policy iteration exceeded the guard")
        step = np.inf if p_prev is None else np.linalg.norm(p - p_prev, "fro")
        report.step_norms.append(float(step))
        k = k_next
        p_prev = p
        if step < tol:
            report.converged = True
            break
    report.p = p_prev
    report.k = k
    return report


def ivi_learn(reg, b_hat, e_hat, p0, schedule=None, confinement=None,
              eps_stop=1e-4, max_iter=500000, keep_iterates=False):
    """Reduced value iteration: with (B, E_i) identified, each iteration
    solves for vecs(H_k) alone from a fixed regressor matrix."""
    n, _, _, _, nxi, nv = _sizes(reg)
    rank = _require_rank(reg, "reduced")
    j_hat, e_top = _hatted_blocks(reg, b_hat, e_hat)
    m_dup = duplication(nxi)
    eye = np.eye(nxi)
    psi = reg.g_xixi @ m_dup
    achieved, _ = rank_tol(psi)
    if achieved < nv:
        raise RankDeficiencyError(
            "reduced value-iteration regressor matrix is rank deficient",
            achieved=achieved, required=nv,
        )
    psi_pinv = np.linalg.pinv(psi)
    w = (reg.delta_xi - 2.0 * reg.g_xigam @ m_dup
         - 2.0 * reg.g_xiu @ np.kron(eye, j_hat.T) @ m_dup
         - 2.0 * reg.g_xieta @ np.kron(eye, e_top.T) @ m_dup)
    jj = j_hat @ j_hat.T

    def advance(p):
        h = unvecs(psi_pinv @ (w @ vecs(p)), nxi)
        return h - p @ jj @ p + eye, -(j_hat.T @ p)

    report = _vi_loop("ivi", _check_p0(p0, nxi), advance,
                      schedule or harmonic_schedule(),
                      confinement or doubling_confinement(),
                      eps_stop, max_iter, rank, keep_iterates)
    report.b_hat = j_hat[:n]
    report.e_hat = e_top[:n]
    return report


def gain_from_p(p, j, omega, n_plant, omega_max=None):
    """Deployment gain [K_x, K_z] = -(1/omega) J^T P."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    if omega_max is not None and omega > omega_max * (1.0 + 1e-12):
        raise ValueError(f"omega {omega} exceeds the admissible bound {omega_max}")
    k = -(np.asarray(j, dtype=float).T @ np.asarray(p, dtype=float)) / omega
    return Gains(k_x=k[:, :n_plant], k_z=k[:, n_plant:], omega=float(omega))


def gains_from_report(report: LearnReport, omega, n_plant, omega_max=None) -> Gains:
    """Scale a learner's unscaled gain estimate into deployment form."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    if omega_max is not None and omega > omega_max * (1.0 + 1e-12):
        raise ValueError(f"omega {omega} exceeds the admissible bound {omega_max}")
    k = report.k / omega
    return Gains(k_x=k[:, :n_plant], k_z=k[:, n_plant:], omega=float(omega))


def share_solution(report: LearnReport, followers):
    """Propagate a reduced-method solution to every follower.

    The recovered (P, K) of the reduced equations carry no follower-specific
    unknowns, so one follower's solution serves the whole network; the
    identified disturbance blocks stay local and are stripped from the copies.
    """
    if report.method not in REDUCED_METHODS:
        raise ValueError(
            "only reduced-method solutions are index-independent; "
            f"got method {report.method!r}"
        )
    out = {}
    for i in followers:
        clone = copy.copy(report)
        clone.e_hat = None
        out[i] = clone
    return out
