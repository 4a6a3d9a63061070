"""Plant/exosystem scenario, assumption checks, and internal-model construction."""

from dataclasses import dataclass, field

import numpy as np

from corp_lab.errors import AssumptionError
from corp_lab.graph import Digraph
from corp_lab.matlib import eig, kron, rank_tol, vec

# Eigenvalues with real part above -PBH_TOL count as closed-right-half-plane.
PBH_TOL = 1e-9
MINPOLY_TOL = 1e-8


@dataclass(frozen=True)
class Scenario:
    """Full truth model: follower dynamics, exosystem, and communication graph.

    Learners never see a, b, c, e, or f; they operate on collected regressors
    only. The names listed in truth_visibility (the exosystem matrix and the
    graph) are the design-time knowledge the controller builder may use.
    """

    a: np.ndarray  # n x n
    b: np.ndarray  # n x m
    c: np.ndarray  # p x n
    f: np.ndarray  # p x q
    s: np.ndarray  # q x q
    e: tuple  # N matrices, each n x q
    graph: Digraph
    truth_visibility: frozenset = frozenset({"s", "graph"})

    def __post_init__(self):
        arrays = {
            "a": np.atleast_2d(np.asarray(self.a, dtype=float)),
            "b": np.atleast_2d(np.asarray(self.b, dtype=float)),
            "c": np.atleast_2d(np.asarray(self.c, dtype=float)),
            "f": np.atleast_2d(np.asarray(self.f, dtype=float)),
            "s": np.atleast_2d(np.asarray(self.s, dtype=float)),
        }
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"matrix {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError("A must be square")
        m, p, q = self.b.shape[1], self.c.shape[0], self.s.shape[0]
        if self.b.shape != (n, m):
            raise ValueError("B must be n x m")
        if self.c.shape != (p, n):
            raise ValueError("C must be p x n")
        if self.s.shape != (q, q):
            raise ValueError("S must be square")
        if self.f.shape != (p, q):
            raise ValueError("F must be p x q")
        e = tuple(np.atleast_2d(np.asarray(ei, dtype=float)) for ei in self.e)
        if len(e) != self.graph.n_followers:
            raise ValueError("need exactly one E_i per follower")
        for i, ei in enumerate(e):
            if ei.shape != (n, q):
                raise ValueError(f"E_{i + 1} must be n x q, got {ei.shape}")
        object.__setattr__(self, "e", e)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]

    @property
    def q(self):
        return self.s.shape[0]

    @property
    def n_followers(self):
        return self.graph.n_followers


def scenario_d1() -> Scenario:
    """Canonical three-follower desk scenario on a cyclic graph.

    Double-integrator followers, harmonic exosystem, and a follower cycle
    1 -> 2 -> 3 -> 1 fed by the leader through node 1.
    """
    graph = Digraph(
        n_followers=3,
        edges=((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)),
    )
    return Scenario(
        a=[[0.0, 1.0], [0.0, 0.0]],
        b=[[0.0], [1.0]],
        c=[[1.0, 0.0]],
        f=[[-1.0, 0.0]],
        s=[[0.0, 1.0], [-1.0, 0.0]],
        e=(
            [[0.0, 0.0], [1.0, 0.0]],
            [[0.0, 0.0], [0.0, 1.0]],
            [[0.0, 0.0], [1.0, 1.0]],
        ),
        graph=graph,
    )


@dataclass(frozen=True)
class AssumptionReport:
    a1: bool  # (A, B) stabilizable
    a2: bool  # every follower has an in-neighbor (normalization defined)
    a3: bool  # exosystem has no decaying modes
    a4: bool  # transmission pencil has full rank on the exosystem spectrum
    details: dict = field(default_factory=dict)

    @property
    def all_ok(self):
        return self.a1 and self.a2 and self.a3 and self.a4


def _dedupe_eigs(values, tol=1e-8):
    out = []
    for lam in values:
        if not any(abs(lam - known) <= tol * max(1.0, abs(known)) for known in out):
            out.append(lam)
    return out


def _pbh_stabilizable(a, b):
    """PBH test: rank [A - lambda I, B] = n at every closed-RHP eigenvalue."""
    n = a.shape[0]
    failures = []
    for lam in _dedupe_eigs(eig(a)):
        if lam.real < -PBH_TOL:
            continue
        pencil = np.hstack([a - lam * np.eye(n), b])
        rank, _ = rank_tol(pencil)
        if rank < n:
            failures.append((complex(lam), int(rank)))
    return failures


def check_assumptions(scn: Scenario) -> AssumptionReport:
    """Verify the scenario-level solvability conditions; report-valued."""
    details = {}

    pbh_failures = _pbh_stabilizable(scn.a, scn.b)
    a1 = not pbh_failures
    details["stabilizability_failures"] = pbh_failures

    no_inputs = [
        i
        for i in range(1, scn.n_followers + 1)
        if scn.graph.in_weight(i) <= 0.0
    ]
    a2 = not no_inputs
    details["followers_without_in_neighbors"] = no_inputs

    s_eigs = eig(scn.s)
    a3 = bool(np.all(s_eigs.real >= -PBH_TOL))
    details["exosystem_eigenvalues"] = [complex(lam) for lam in s_eigs]

    n, m, p = scn.n, scn.m, scn.p
    pencil_failures = []
    for lam in _dedupe_eigs(s_eigs):
        pencil = np.block(
            [
                [scn.a - lam * np.eye(n), scn.b.astype(complex)],
                [scn.c.astype(complex), np.zeros((p, m))],
            ]
        )
        rank, _ = rank_tol(pencil)
        if rank < n + p:
            pencil_failures.append((complex(lam), int(rank)))
    a4 = not pencil_failures
    details["pencil_failures"] = pencil_failures

    return AssumptionReport(a1=a1, a2=a2, a3=a3, a4=a4, details=details)


def minimal_polynomial(s, hint=None):
    """Monic coefficients (descending powers) of the minimal polynomial of S.

    Computed by scanning for the smallest d with {vec(I), vec(S), ..., vec(S^d)}
    linearly dependent, then solving the dependence by least squares. When a
    hint is supplied it is verified instead: it must annihilate S and have the
    minimal degree found by the scan.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    if s.shape[0] != s.shape[1]:
        raise ValueError("S must be square")
    k = s.shape[0]

    powers = [np.eye(k)]
    for _ in range(k):
        powers.append(powers[-1] @ s)

    def annihilation_residual(coeffs):
        deg = len(coeffs) - 1
        acc = np.zeros((k, k))
        for j, cj in enumerate(coeffs):
            acc = acc + cj * powers[deg - j]
        scale = max(1.0, np.linalg.norm(s)) ** deg
        return np.linalg.norm(acc) / scale

    min_deg = None
    for d in range(1, k + 1):
        cols = np.column_stack([vec(powers[j]) for j in range(d + 1)])
        norms = np.linalg.norm(cols, axis=0)
        norms[norms == 0.0] = 1.0
        rank, _ = rank_tol(cols / norms)
        if rank <= d:
            min_deg = d
            break
    if min_deg is None:  # pragma: no cover - Cayley-Hamilton guarantees d <= k
        min_deg = k

    if hint is not None:
        hint = np.asarray(hint, dtype=float).ravel()
        if hint.size < 2 or abs(hint[0] - 1.0) > 1e-12:
            raise ValueError("minimal-polynomial hint must be monic")
        if hint.size - 1 != min_deg:
            raise ValueError(
                f"hint degree {hint.size - 1} is not the minimal degree {min_deg}"
            )
        if annihilation_residual(hint) > MINPOLY_TOL:
            raise ValueError("hint does not annihilate S")
        return hint.copy()

    d = min_deg
    basis = np.column_stack([vec(powers[j]) for j in range(d)])
    target = vec(powers[d])
    x, *_ = np.linalg.lstsq(basis, target, rcond=None)
    coeffs = np.empty(d + 1)
    coeffs[0] = 1.0
    coeffs[1:] = -x[::-1]  # x[j] multiplies S^j; store descending powers
    residual = annihilation_residual(coeffs)
    if residual > MINPOLY_TOL:
        raise AssumptionError(
            f"minimal-polynomial residual {residual:.3e} exceeds tolerance"
        )
    return coeffs


@dataclass(frozen=True)
class InternalModel:
    """p-copy servo-compensator blocks built from the minimal polynomial."""

    minpoly: np.ndarray
    beta: np.ndarray  # d x d companion block
    sigma: np.ndarray  # d x 1 input column
    g1: np.ndarray  # n_z x n_z
    g2: np.ndarray  # n_z x p
    copies: int

    @property
    def degree(self):
        return self.beta.shape[0]

    @property
    def n_z(self):
        return self.g1.shape[0]


def build_internal_model(minpoly, p) -> InternalModel:
    """Assemble (G1, G2) as p copies of the companion pair of the polynomial."""
    minpoly = np.asarray(minpoly, dtype=float).ravel()
    d = minpoly.size - 1
    if d < 1:
        raise ValueError("minimal polynomial must have degree >= 1")
    if abs(minpoly[0] - 1.0) > 1e-12:
        raise ValueError("minimal polynomial must be monic")
    if p < 1:
        raise ValueError("need at least one output channel")

    beta = np.zeros((d, d))
    for i in range(d - 1):
        beta[i, i + 1] = 1.0
    for j in range(d):
        beta[d - 1, j] = -minpoly[d - j]

    charpoly = np.poly(beta)
    if np.max(np.abs(charpoly - minpoly)) > 1e-10 * max(1.0, np.abs(minpoly).max()):
        raise AssumptionError("companion block does not reproduce the polynomial")

    sigma = np.zeros((d, 1))
    sigma[d - 1, 0] = 1.0
    ctrb = np.column_stack(
        [np.linalg.matrix_power(beta, j) @ sigma for j in range(d)]
    )
    rank, _ = rank_tol(ctrb)
    if rank < d:  # pragma: no cover - companion + e_d is always controllable
        raise AssumptionError("companion pair lost controllability")

    g1 = kron(np.eye(p), beta)
    g2 = kron(np.eye(p), sigma)
    return InternalModel(
        minpoly=minpoly.copy(), beta=beta, sigma=sigma, g1=g1, g2=g2, copies=int(p)
    )


def internal_model_for(scn: Scenario, hint=None) -> InternalModel:
    """Internal model of the scenario's exosystem, one copy per output."""
    return build_internal_model(minimal_polynomial(scn.s, hint=hint), scn.p)


@dataclass(frozen=True)
class AugmentedPlant:
    """Follower stacked with its servo-compensator state."""

    y: np.ndarray  # (n + n_z) x (n + n_z)
    j: np.ndarray  # (n + n_z) x m
    n: int
    n_z: int


def build_augmented(scn: Scenario, im: InternalModel) -> AugmentedPlant:
    """Y = [[A, 0], [G2 C, G1]], J = [[B], [0]]; stabilizability verified by PBH."""
    n, m, nz = scn.n, scn.m, im.n_z
    if im.g2.shape[1] != scn.p:
        raise ValueError("internal model copies do not match the output count")
    y = np.block(
        [
            [scn.a, np.zeros((n, nz))],
            [im.g2 @ scn.c, im.g1],
        ]
    )
    j = np.vstack([scn.b, np.zeros((nz, m))])
    failures = _pbh_stabilizable(y, j)
    if failures:
        raise AssumptionError(
            "augmented pair is not stabilizable; plant assumptions and the "
            f"internal model are inconsistent (PBH failures at {failures})"
        )
    return AugmentedPlant(y=y, j=j, n=n, n_z=nz)
