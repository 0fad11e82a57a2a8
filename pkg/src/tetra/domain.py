"""Geometry of the tetrablock.

A point ``(x1, x2, x3)`` lies in the tetrablock E when it equals
``(a11, a22, det A)`` for some 2x2 matrix ``A`` with ``||A|| < 1``.  Membership
is decided twice: by the scalar criterion

    |x1 - conj(x2) x3| + |x2 - conj(x1) x3| < 1 - |x3|^2

and by a direct search for the smallest-norm matrix ``A`` with the prescribed
diagonal and determinant.  The two must agree away from the boundary band.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from tetra.errors import InternalInconsistencyError, InvalidInputError
from tetra.linalg import haar_unitaries, operator_norm

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# log(t) bracket for the witness search; covers |x1 x2 - x3| in [e^-60, e^60]
LOG_T_BRACKET = (-30.0, 30.0)
GOLDEN_ITERS = 80
SAMPLE_BLOCK = 1024
TORUS_GRID = 48


@dataclass(frozen=True)
class TetraPoint:
    x1: complex
    x2: complex
    x3: complex

    def __post_init__(self):
        for name in ("x1", "x2", "x3"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise InvalidInputError(f"{name} is not finite")
            object.__setattr__(self, name, v)

    def swapped(self) -> "TetraPoint":
        return TetraPoint(self.x2, self.x1, self.x3)

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.x1, self.x2, self.x3)


class Status(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "closure-boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class MembershipVerdict:
    status: Status
    margin: float
    witness: np.ndarray | None
    criterion_slack: float

    @property
    def in_closure(self) -> bool:
        return self.status is not Status.OUTSIDE


def criterion_slack(x1, x2, x3):
    """``1 - |x3|^2 - |x1 - conj(x2) x3| - |x2 - conj(x1) x3|``; positive exactly on E."""
    x1, x2, x3 = np.asarray(x1), np.asarray(x2), np.asarray(x3)
    return 1.0 - np.abs(x3) ** 2 - np.abs(x1 - np.conj(x2) * x3) - np.abs(x2 - np.conj(x1) * x3)


def _norm2x2(a, b, c, d):
    """Largest singular value of [[a, b], [c, d]], elementwise over arrays.

    The discriminant is taken from the entries of A*A as a sum of squares, which
    stays accurate when the two singular values nearly coincide.
    """
    col1 = np.abs(a) ** 2 + np.abs(c) ** 2
    col2 = np.abs(b) ** 2 + np.abs(d) ** 2
    cross = np.conj(a) * b + np.conj(c) * d
    disc = np.sqrt((col1 - col2) ** 2 + 4.0 * np.abs(cross) ** 2)
    return np.sqrt(0.5 * (col1 + col2 + disc))


def witness_search(x1, x2, x3):
    """Minimise ``||[[x1, t], [p/t, x2]]||`` over ``t > 0`` where ``p = x1 x2 - x3``.

    Golden-section search on ``log t``, vectorised over the inputs.  Returns the
    minimal norm found and the optimal ``t`` (``t = 0`` when ``p = 0``).
    """
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=np.complex128) for v in (x1, x2, x3)))
    p = x1 * x2 - x3
    lo = np.full(x1.shape, LOG_T_BRACKET[0])
    hi = np.full(x1.shape, LOG_T_BRACKET[1])

    def f(u):
        t = np.exp(u)
        return _norm2x2(x1, t, p / t, x2)

    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(GOLDEN_ITERS):
        left = fa <= fb
        hi, lo = np.where(left, b, hi), np.where(left, lo, a)
        a, b = (
            np.where(left, hi - GOLDEN * (hi - lo), b),
            np.where(left, a, lo + GOLDEN * (hi - lo)),
        )
        fresh = f(np.where(left, a, b))
        fa, fb = np.where(left, fresh, fb), np.where(left, fa, fresh)
    u = 0.5 * (lo + hi)
    t = np.exp(u)
    norms = f(u)
    zero_p = p == 0
    if np.any(zero_p):
        t = np.where(zero_p, 0.0, t)
        norms = np.where(zero_p, np.maximum(np.abs(x1), np.abs(x2)), norms)
    return norms, t


def _witness_matrix(x1: complex, x2: complex, x3: complex, t: float) -> np.ndarray:
    p = x1 * x2 - x3
    off = 0.0 if t == 0.0 else p / t
    return np.array([[x1, t], [off, x2]], dtype=np.complex128)


def member(p: TetraPoint, tol: float = 1e-9) -> MembershipVerdict:
    """Classify ``p`` as interior to E, on the boundary of its closure, or outside.

    The margin is ``1 - (smallest norm of a matrix realising p)``.  Points with
    ``|margin| <= tol`` are reported as boundary points; elsewhere the scalar
    criterion must agree with the witness search or InternalInconsistencyError
    is raised.
    """
    x1, x2, x3 = p.as_tuple()
    norms, t = witness_search(x1, x2, x3)
    min_norm, t = float(norms), float(t)
    margin = 1.0 - min_norm
    slack = float(criterion_slack(x1, x2, x3))

    if margin > tol:
        status = Status.INTERIOR
    elif margin < -tol:
        status = Status.OUTSIDE
    else:
        status = Status.BOUNDARY

    if status is not Status.BOUNDARY and (slack > 0) != (status is Status.INTERIOR):
        raise InternalInconsistencyError(
            f"membership methods disagree at {p}: witness margin {margin:.3e}, criterion slack {slack:.3e}"
        )

    witness = None
    if status is not Status.OUTSIDE:
        witness = _witness_matrix(x1, x2, x3, t)
        if status is Status.INTERIOR and operator_norm(witness) >= 1.0:
            raise InternalInconsistencyError(f"interior witness at {p} has norm >= 1")
    return MembershipVerdict(status, margin, witness, slack)


def on_distinguished_boundary(p: TetraPoint, tol: float = 1e-9) -> bool:
    if abs(abs(p.x3) - 1.0) > tol:
        return False
    return member(p, tol).in_closure


@functools.lru_cache(maxsize=64)
def _boundary_block(seed: int, block: int) -> np.ndarray:
    rng = np.random.default_rng([seed, block])
    U = haar_unitaries(rng, SAMPLE_BLOCK, 2)
    pts = np.stack([U[:, 0, 0], U[:, 1, 1], U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]], axis=1)
    pts.setflags(write=False)
    return pts


def boundary_samples(n: int, seed: int) -> np.ndarray:
    """``(n, 3)`` array of points ``(u11, u22, det U)`` for Haar-random 2x2 unitaries ``U``.

    Samples are generated in fixed-size blocks, each from its own generator
    keyed by ``(seed, block index)``, so ``boundary_samples(m, s)`` is a prefix
    of ``boundary_samples(n, s)`` for ``m <= n``.
    """
    if n < 1:
        raise InvalidInputError("n must be positive")
    nblocks = -(-n // SAMPLE_BLOCK)
    pts = np.concatenate([_boundary_block(int(seed), b) for b in range(nblocks)])
    return pts[:n]


def sample_distinguished_boundary(n: int, seed: int) -> list[TetraPoint]:
    return [TetraPoint(*row) for row in boundary_samples(n, seed).tolist()]


def _torus_violation(r: float, phases: np.ndarray) -> np.ndarray:
    z = r * np.exp(1j * phases)
    return -criterion_slack(z[..., 0], z[..., 1], z[..., 2])


def worst_torus_point(r: float, grid: int = TORUS_GRID) -> tuple[float, np.ndarray]:
    """Largest criterion violation over the torus of radius ``r`` and where it occurs.

    A ``grid``^3 phase grid locates the worst point, which Nelder-Mead then
    refines.  Positive return value means the torus leaves E.
    """
    theta = 2.0 * np.pi * np.arange(grid) / grid
    mesh = np.stack(np.meshgrid(theta, theta, theta, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = _torus_violation(r, mesh)
    k = int(np.argmax(vals))
    res = minimize(
        lambda ph: -float(_torus_violation(r, np.asarray(ph))),
        mesh[k],
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 2000},
    )
    if -res.fun > vals[k]:
        return float(-res.fun), np.asarray(res.x)
    return float(vals[k]), mesh[k]


def polydisk_inside(r: float, grid: int = TORUS_GRID) -> bool:
    """Whether the closed polydisk of radius ``r`` lies in E.

    The criterion's left side grows with each modulus, so the distinguished
    torus is where the polydisk first leaves E.
    """
    return worst_torus_point(r, grid)[0] < 0.0


def polydisk_spot_check(r: float, npoints: int = 100_000, seed: int = 0) -> int:
    """Number of points of the closed ``r``-polydisk that fail to be in E.

    Half the points sit on a regular torus grid, the rest are uniform in the
    polydisk.
    """
    side = max(2, round((npoints / 2) ** (1.0 / 3.0)))
    theta = 2.0 * np.pi * np.arange(side) / side
    mesh = np.stack(np.meshgrid(theta, theta, theta, indexing="ij"), axis=-1).reshape(-1, 3)
    torus = r * np.exp(1j * mesh)
    rng = np.random.default_rng(seed)
    m = max(npoints - torus.shape[0], 0)
    inner = r * np.sqrt(rng.uniform(size=(m, 3))) * np.exp(2j * np.pi * rng.uniform(size=(m, 3)))
    pts = np.concatenate([torus, inner])
    return int(np.count_nonzero(criterion_slack(pts[:, 0], pts[:, 1], pts[:, 2]) <= 0.0))


@functools.lru_cache(maxsize=16)
def inscribed_polydisk_radius(tol: float = 1e-6) -> float:
    """Supremum of the radii ``r`` with the closed polydisk ``r D^3`` inside E, to within ``tol``.

    Bisection on ``r``; the returned value is the largest radius verified to
    fit, so it never overshoots.
    """
    if not 0.0 < tol < 1e-2:
        raise InvalidInputError("tol must lie in (0, 1e-2)")
    lo, hi = 0.0, 1.0
    while hi - lo > 0.25 * tol:
        mid = 0.5 * (lo + hi)
        if polydisk_inside(mid):
            lo = mid
        else:
            hi = mid
    return lo
