"""Tetrablock contractions: joint spectrum, certification and fundamental operators."""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from tetra.calculus import (
    Poly3,
    commutation_residual,
    monomial_table,
    monomials,
    psi_polynomial,
    stack_coefficients,
    sup_norms_bE,
)
from tetra.domain import TetraPoint, boundary_samples, member, polydisk_inside
from tetra.errors import (
    IncompatibleTripleError,
    InvalidInputError,
    InvalidTripleError,
    NumericalDegeneracyError,
    PreconditionError,
)
from tetra.linalg import adjoint, as_matrix, defect_operator, operator_norm, range_basis, restricted_inverse

COMMUTE_TOL = 1e-10
SOLVE_TOL = 1e-10
SAMPLING_SLACK = 5e-2
SCHUR_RETRIES = 5


@dataclass(frozen=True, eq=False)
class CommutingTriple:
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    commutation_residual: float

    @classmethod
    def from_matrices(cls, t1, t2, t3, tol: float = COMMUTE_TOL) -> "CommutingTriple":
        mats = [as_matrix(M, square=True, name=f"T{j + 1}") for j, M in enumerate((t1, t2, t3))]
        if len({M.shape for M in mats}) != 1:
            raise InvalidInputError("T1, T2, T3 must have the same size")
        res = commutation_residual(*mats)
        if res > tol:
            raise InvalidTripleError(f"triple does not commute (residual {res:.3e})")
        for M in mats:
            M.setflags(write=False)
        return cls(*mats, res)

    @property
    def dim(self) -> int:
        return self.t1.shape[0]

    @property
    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.t1, self.t2, self.t3)


def nilpotent_family(l1: complex, l2: complex, l3: complex) -> CommutingTriple:
    """The triple ``T_j = [[0, l_j], [0, 0]]``."""
    mats = [np.array([[0.0, lam], [0.0, 0.0]], dtype=np.complex128) for lam in (l1, l2, l3)]
    return CommutingTriple.from_matrices(*mats)


def joint_spectrum(T: CommutingTriple, tol: float = 1e-9, seed: int = 0) -> list[TetraPoint]:
    """Joint eigenvalues of a commuting triple.

    A Schur basis of a random combination ``a1 T1 + a2 T2 + a3 T3``
    triangularises all three matrices; matched diagonal entries give the joint
    eigenvalues.  Duplicates (within ``tol``) are merged.
    """
    rng = np.random.default_rng(seed)
    scale = max(1.0, *(operator_norm(M) for M in T.matrices))
    for _ in range(SCHUR_RETRIES):
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        C = a[0] * T.t1 + a[1] * T.t2 + a[2] * T.t3
        _, Q = scipy.linalg.schur(C, output="complex")
        tri = [adjoint(Q) @ M @ Q for M in T.matrices]
        lower = max(float(np.max(np.abs(np.tril(M, -1)), initial=0.0)) for M in tri)
        if lower <= tol * scale:
            break
    else:
        raise NumericalDegeneracyError("could not triangularise the triple simultaneously")
    diag = np.stack([np.diag(M) for M in tri], axis=1)
    points: list[np.ndarray] = []
    for row in diag:
        if not any(np.max(np.abs(row - q)) <= tol * scale for q in points):
            points.append(row)
    return [TetraPoint(*row) for row in points]


class Verdict(str, enum.Enum):
    CERTIFIED = "certified"
    NOT_CERTIFIED = "not-certified"
    STATISTICAL_PASS = "statistical-pass"
    STATISTICAL_FAIL = "statistical-fail"


class Method(str, enum.Enum):
    SCHWARZ = "schwarz-path"
    SAMPLING = "sampling"


@dataclass(frozen=True)
class CertificationReport:
    verdict: Verdict
    method: Method
    details: dict = field(default_factory=dict)
    seed: int = 0
    witness: Poly3 | None = None

    @property
    def passed(self) -> bool:
        return self.verdict in (Verdict.CERTIFIED, Verdict.STATISTICAL_PASS)


@functools.lru_cache(maxsize=256)
def _polydisk_fits(r: float) -> bool:
    return polydisk_inside(r)


def certify_nilpotent_family(l1: complex, l2: complex, l3: complex, r: float) -> CertificationReport:
    """Deterministic certificate that ``T_j = [[0, l_j], [0, 0]]`` is a tetrablock contraction.

    The argument: the joint spectrum is ``{0}``, which lies in E.  For ``f``
    bounded by 1 on the closed tetrablock with ``f(0) = 0``, the function
    ``f(r z)`` is a contractive holomorphic map on the tridisk as long as the
    closed ``r``-polydisk sits in E, and the polydisk Schwarz inequality gives
    ``r * sum|df/dz_j(0)| <= 1``.  Then ``||f(T)|| = |sum l_j df/dz_j(0)| <=
    max|l_j| / r < 1``.  Composing with a Blaschke factor removes the
    ``f(0) = 0`` restriction, and von Neumann's inequality for a single
    contraction undoes the composition.
    """
    lams = [complex(v) for v in (l1, l2, l3)]
    mods = [abs(v) for v in lams]
    r = float(r)
    positive = all(m > 0 for m in mods)
    below_r = all(m < r for m in mods)
    fits = 0.0 < r < 1.0 and _polydisk_fits(r)
    spectrum = joint_spectrum(nilpotent_family(*lams))
    spectrum_in_e = all(member(p).status.value == "interior" for p in spectrum)
    ok = positive and below_r and fits and spectrum_in_e
    details = {
        "abs_lambda1": mods[0],
        "abs_lambda2": mods[1],
        "abs_lambda3": mods[2],
        "r": r,
        "lambdas_nonzero": positive,
        "lambdas_below_r": below_r,
        "polydisk_in_E": fits,
        "spectrum_in_E": spectrum_in_e,
        # bound on ||f(T)|| for f(0) = 0, ||f|| <= 1
        "schwarz_factor": max(mods) / r if r > 0 else float("inf"),
    }
    return CertificationReport(Verdict.CERTIFIED if ok else Verdict.NOT_CERTIFIED, Method.SCHWARZ, details)


def monomial_matrices(mats, exps: np.ndarray) -> np.ndarray:
    """Stack of ``T1^i T2^j T3^k`` for each exponent row ``(i, j, k)``."""
    n = mats[0].shape[0]
    top = exps.max(axis=0) + 1
    powers = []
    for M, m in zip(mats, top):
        pw = [np.eye(n, dtype=np.complex128)]
        for _ in range(int(m) - 1):
            pw.append(pw[-1] @ M)
        powers.append(pw)
    return np.stack([powers[0][i] @ powers[1][j] @ powers[2][k] for i, j, k in exps])


def norms_on_triple(polys, mats) -> np.ndarray:
    """``||f(T)||`` for every polynomial, assuming the matrices commute."""
    exps, C = stack_coefficients(polys)
    values = np.einsum("mij,mp->pij", monomial_matrices(mats, exps), C)
    return np.linalg.norm(values, 2, axis=(1, 2))


@functools.lru_cache(maxsize=128)
def random_battery(npolys: int, degree: int, nsamples: int, seed: int) -> tuple[tuple[Poly3, ...], np.ndarray]:
    """``npolys`` random polynomials of degree <= ``degree`` and their sampled sup norms on bE."""
    rng = np.random.default_rng([seed, 1])
    polys = tuple(Poly3.random(rng, degree) for _ in range(npolys))
    sups = sup_norms_bE(polys, nsamples, seed)
    sups.setflags(write=False)
    return polys, sups


def adversarial_polynomial(
    T: CommutingTriple,
    degree: int,
    nsamples: int = 1500,
    seed: int = 0,
    u: np.ndarray | None = None,
    v: np.ndarray | None = None,
    sides: int = 16,
) -> Poly3:
    """Polynomial that maximises ``Re <f(T) v, u>`` subject to ``|f| <= 1`` on sampled bE points.

    The modulus constraint uses a ``sides``-gon inscribed in the unit disk, so
    the problem is a linear program.  By default ``u, v`` are the leading
    singular vectors of ``T1 + T2 + T3``.
    """
    mats = T.matrices
    if u is None or v is None:
        U, _, Vh = np.linalg.svd(sum(mats))
        u, v = U[:, 0], Vh[0].conj()
    exps = np.array(monomials(degree), dtype=np.intp)
    gains = np.einsum("i,mij,j->m", u.conj(), monomial_matrices(mats, exps), v)
    pts = boundary_samples(nsamples, seed)
    A = monomial_table(exps, pts[:, 0], pts[:, 1], pts[:, 2])
    # Re(e^{-i th} f) <= cos(pi / sides) for every direction th
    th = 2.0 * np.pi * np.arange(sides) / sides
    rot = np.exp(-1j * th)[:, None, None] * A[None, :, :]
    rows = np.concatenate([rot.real, -rot.imag], axis=2).reshape(-1, 2 * len(exps))
    rhs = np.full(rows.shape[0], np.cos(np.pi / sides))
    cost = -np.concatenate([gains.real, -gains.imag])
    res = linprog(cost, A_ub=rows, b_ub=rhs, bounds=(None, None), method="highs")
    if res.status != 0:
        raise NumericalDegeneracyError(f"adversarial LP failed: {res.message}")
    coef = res.x[: len(exps)] + 1j * res.x[len(exps):]
    return Poly3({tuple(e): c for e, c in zip(exps, coef)})


def psi_probes(T: CommutingTriple, rho: float = 0.95, order: int = 200, phases: int = 32) -> tuple[Poly3, Poly3]:
    """The two truncated Psi-polynomials with ``|omega| = rho`` whose value at ``T`` has the largest norm.

    Both are bounded by about 1 on the tetrablock, so they probe the
    directions where random polynomials are weak.
    """
    out = []
    for first in (True, False):
        cands = [psi_polynomial(rho * np.exp(2j * np.pi * k / phases), order, first) for k in range(phases)]
        vals = norms_on_triple(cands, T.matrices)
        out.append(cands[int(np.argmax(vals))])
    return tuple(out)


def certify_sampling(
    T: CommutingTriple,
    npolys: int = 200,
    degree: int = 4,
    nsamples: int = 4000,
    seed: int = 0,
    slack: float = SAMPLING_SLACK,
    probes=(),
    adversarial: bool = False,
) -> CertificationReport:
    """Statistical spot-check of ``||f(T)|| <= sup |f|`` over random polynomials.

    Each polynomial is normalised by its sampled sup over the distinguished
    boundary; the triple fails when some normalised ``||f(T)||`` exceeds
    ``1 + slack``.  Extra ``probes`` and, with ``adversarial=True``, an
    LP-optimised polynomial are checked as well.  Not a proof in either
    direction.
    """
    for p in joint_spectrum(T):
        if not member(p).in_closure:
            raise PreconditionError(f"joint eigenvalue {p.as_tuple()} lies outside the closed tetrablock")
    polys, sups = random_battery(npolys, degree, nsamples, seed)
    extra = list(probes)
    if adversarial:
        extra.append(adversarial_polynomial(T, degree, min(nsamples, 1500), seed))
    if extra:
        polys = polys + tuple(extra)
        sups = np.concatenate([sups, sup_norms_bE(extra, nsamples, seed)])

    vals = norms_on_triple(polys, T.matrices)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sups > 0, vals / np.where(sups > 0, sups, 1.0), np.where(vals == 0, 0.0, np.inf))
    worst = int(np.argmax(ratios))
    failed = ratios[worst] > 1.0 + slack
    details = {
        "max_ratio": float(ratios[worst]),
        "worst_index": worst,
        "npolys": len(polys),
        "degree": degree,
        "nsamples": nsamples,
        "slack": slack,
        "adversarial": adversarial,
    }
    if adversarial:
        details["adversarial_ratio"] = float(ratios[-1])
    verdict = Verdict.STATISTICAL_FAIL if failed else Verdict.STATISTICAL_PASS
    return CertificationReport(verdict, Method.SAMPLING, details, seed, polys[worst] if failed else None)


@dataclass(frozen=True, eq=False)
class FundamentalPair:
    """``F1, F2`` as full-size matrices that vanish off the defect space of ``T3``.

    ``defect_basis`` has orthonormal columns spanning that space;
    :meth:`compressed` gives the operators in those coordinates.
    """

    f1: np.ndarray
    f2: np.ndarray
    defect: np.ndarray
    defect_projector: np.ndarray
    defect_basis: np.ndarray
    solve_residual: float

    @property
    def defect_dim(self) -> int:
        return self.defect_basis.shape[1]

    def compressed(self) -> tuple[np.ndarray, np.ndarray]:
        W = self.defect_basis
        return adjoint(W) @ self.f1 @ W, adjoint(W) @ self.f2 @ W


def fundamental_operators(T: CommutingTriple, tol: float = SOLVE_TOL) -> FundamentalPair:
    """Solve ``T1 - T2* T3 = D F1 D`` and ``T2 - T1* T3 = D F2 D`` with ``D = (I - T3* T3)^{1/2}``."""
    t1, t2, t3 = T.matrices
    D = defect_operator(t3)
    Dp = restricted_inverse(D)
    G1 = t1 - adjoint(t2) @ t3
    G2 = t2 - adjoint(t1) @ t3
    F1 = Dp @ G1 @ Dp
    F2 = Dp @ G2 @ Dp
    residual = max(operator_norm(D @ F1 @ D - G1), operator_norm(D @ F2 @ D - G2))
    if residual > tol:
        raise IncompatibleTripleError(
            f"defect equations have no solution (residual {residual:.3e}); not a tetrablock contraction"
        )
    return FundamentalPair(F1, F2, D, Dp @ D, range_basis(D), residual)


@dataclass(frozen=True, eq=False)
class Commutator:
    matrix: np.ndarray
    norm: float


def commutator(P: FundamentalPair) -> Commutator:
    C = P.f1 @ P.f2 - P.f2 @ P.f1
    return Commutator(C, operator_norm(C))


def family_commutator_norm(l1: complex, l2: complex, l3: complex) -> float:
    """Closed form ``| |l1|^2 - |l2|^2 | |l3| / (1 - |l3|^2)^{3/2}`` for the nilpotent family."""
    return abs(abs(l1) ** 2 - abs(l2) ** 2) * abs(l3) / (1.0 - abs(l3) ** 2) ** 1.5
