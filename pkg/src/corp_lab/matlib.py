"""Dense real linear-algebra kernel used by every other layer.

Conventions:
    * ``vec`` stacks columns (column-major).
    * ``vecv(b)`` lists squares and cross products of a vector in row-scan
      order: [b1^2, b1*b2, ..., b1*bn, b2^2, b2*b3, ..., bn^2].
    * ``vecs(P)`` packs a symmetric matrix in the same index order with the
      off-diagonal entries doubled: [p11, 2*p12, ..., 2*p1n, p22, ...].
    * the duplication matrix ``duplication(n)`` satisfies
      M @ vecs(Q) == vec(Q) for every symmetric Q, which also forces
      (a (x) a)^T M == vecv(a)^T and a^T Q a == vecv(a)^T vecs(Q).
"""

from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from corp_lab.errors import AssumptionError, CorpLabError, RankDeficiencyError

# Relative numerical-rank threshold: sigma > RANK_RTOL * max(shape) * sigma_max.
RANK_RTOL = 1e-8
# Relative symmetry tolerance for vecs / Lyapunov inputs.
SYM_RTOL = 1e-10


def vec(a):
    """Column-major vectorization of a matrix."""
    return np.asarray(a, dtype=float).flatten(order="F")


def unvec(v, shape):
    """Inverse of :func:`vec` for a given (rows, cols) shape."""
    return np.asarray(v, dtype=float).reshape(shape, order="F")


def vecv(b):
    """Quadratic monomials of a vector in row-scan order, length n(n+1)/2."""
    b = np.asarray(b, dtype=float).ravel()
    if b.size < 1:
        raise ValueError("vecv needs a vector of length >= 1")
    iu, ju = np.triu_indices(b.size)
    return b[iu] * b[ju]


def _check_symmetric(p, what):
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"{what} must be square, got shape {p.shape}")
    scale = max(1.0, np.abs(p).max())
    asym = np.abs(p - p.T).max()
    if asym > SYM_RTOL * scale:
        raise ValueError(f"{what} is asymmetric beyond tolerance: |P-P^T|={asym:.3e}")
    return 0.5 * (p + p.T)


def vecs(p):
    """Pack a symmetric matrix; off-diagonal entries carry a factor 2."""
    p = _check_symmetric(p, "vecs input")
    n = p.shape[0]
    iu, ju = np.triu_indices(n)
    out = p[iu, ju].copy()
    out[iu != ju] *= 2.0
    return out


def unvecs(v, n):
    """Unpack :func:`vecs` output back into a symmetric n-by-n matrix."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != n * (n + 1) // 2:
        raise ValueError(f"packed length {v.size} does not match order {n}")
    iu, ju = np.triu_indices(n)
    upper = np.zeros((n, n))
    upper[iu, ju] = np.where(iu == ju, v, 0.5 * v)
    return upper + upper.T - np.diag(np.diag(upper))


@lru_cache(maxsize=32)
def _duplication_cached(n):
    nv = n * (n + 1) // 2
    m = np.zeros((n * n, nv))
    k = 0
    for i in range(n):
        for j in range(i, n):
            if i == j:
                m[i * n + i, k] = 1.0
            else:
                m[j * n + i, k] = 0.5  # entry (i, j), column-major index
                m[i * n + j, k] = 0.5  # entry (j, i)
            k += 1
    m.flags.writeable = False
    return m


def duplication(n):
    """Matrix M of shape (n^2, n(n+1)/2) with M @ vecs(Q) == vec(Q)."""
    if n < 1:
        raise ValueError("duplication needs n >= 1")
    return _duplication_cached(int(n))


def kron(a, b):
    """Kronecker product in the standard block layout."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def eig(a):
    """Eigenvalues of a real square matrix (LAPACK Hessenberg + shifted QR)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eig needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("eig needs finite entries")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - desk scale converges
        raise CorpLabError(f"eigenvalue iteration failed: {exc}") from exc


def spectral_abscissa(a):
    """Largest real part over the spectrum of a."""
    return float(np.max(eig(a).real))


def is_hurwitz(a, margin=0.0):
    """True iff every eigenvalue satisfies Re(lambda) < -margin."""
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    return spectral_abscissa(a) < -margin


def solve_lyapunov(a, q):
    """Solve A^T P + P A + Q = 0 for symmetric P via Kronecker vectorization.

    A must be Hurwitz (checked) and Q symmetric. Orders here stay small, so
    the dense (n^2 x n^2) solve is acceptable and easy to verify; the residual
    is asserted to be below 1e-9 * (1 + |Q|).
    """
    a = np.asarray(a, dtype=float)
    q = _check_symmetric(q, "Lyapunov right-hand side")
    if not is_hurwitz(a):
        raise AssumptionError("solve_lyapunov requires a Hurwitz matrix")
    n = a.shape[0]
    lhs = np.kron(np.eye(n), a.T) + np.kron(a.T, np.eye(n))
    p = np.linalg.solve(lhs, -vec(q)).reshape((n, n), order="F")
    p = 0.5 * (p + p.T)
    residual = np.linalg.norm(a.T @ p + p @ a + q)
    bound = 1e-9 * (1.0 + np.linalg.norm(q))
    if residual > bound:
        raise CorpLabError(
            f"Lyapunov residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return p


def lstsq(psi, phi):
    """Least squares by QR with column pivoting; errors on rank deficiency.

    Returns the minimizer of |psi @ x - phi|_2. The pivoted factorization
    doubles as the rank probe: if the achieved numerical rank is below the
    column count a RankDeficiencyError carrying both numbers is raised.
    """
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if psi.ndim != 2:
        raise ValueError("psi must be 2-D")
    rows, cols = psi.shape
    if rows < cols:
        raise ValueError(f"underdetermined system: {rows} rows < {cols} columns")
    sol, _, rank, _ = sla.lstsq(
        psi, phi, cond=RANK_RTOL * max(psi.shape), lapack_driver="gelsy"
    )
    if rank < cols:
        raise RankDeficiencyError(
            f"rank-deficient least squares: achieved {rank} < required {cols}",
            achieved=int(rank),
            required=int(cols),
        )
    return sol


def rank_tol(a):
    """Numerical rank and acceptance gap of a matrix.

    rank = number of singular values above RANK_RTOL * max(shape) * sigma_max;
    gap = smallest accepted / largest rejected singular value (inf when
    nothing is rejected, 0 when nothing is accepted).
    """
    a = np.atleast_2d(np.asarray(a))
    if a.size == 0:
        return 0, 0.0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0, 0.0
    tol = RANK_RTOL * max(a.shape) * sv[0]
    rank = int(np.sum(sv > tol))
    if rank == 0:
        return 0, 0.0
    if rank == sv.size:
        return rank, np.inf
    rejected = sv[rank]
    gap = np.inf if rejected == 0.0 else float(sv[rank - 1] / rejected)
    return rank, gap
