"""Trivariate polynomial calculus on points and on commuting matrix triples.

Also holds the scalar tools used to certify the nilpotent family: Blaschke
factors, sampled sup norms over the distinguished boundary and the tridisk,
and the polydisk Schwarz-type inequality checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from tetra.domain import TetraPoint, boundary_samples
from tetra.errors import InvalidInputError, InvalidParameterError, InvalidTripleError
from tetra.linalg import as_matrix, operator_norm

COMMUTE_TOL = 1e-10
KNESE_FLAG = 1e-9
TRIDISK_GRID = 64
TRIDISK_SAFETY = 1e-3
STEP_FLOOR = 1e-6


class Poly3:
    """Polynomial in ``z1, z2, z3`` stored as ``{(i, j, k): coefficient}``.

    Calling it evaluates elementwise on arrays: each variable's powers are
    tabulated once and the monomials gathered from the tables.
    """

    __slots__ = ("_coeffs", "_dense", "_exps", "_vals", "_grad")

    def __init__(self, coeffs: dict[tuple[int, int, int], complex]):
        clean = {}
        for key, c in coeffs.items():
            if len(key) != 3 or any(int(e) != e or e < 0 for e in key):
                raise InvalidInputError(f"bad multi-index {key!r}")
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise InvalidInputError(f"non-finite coefficient at {key!r}")
            if c != 0:
                key = tuple(int(e) for e in key)
                clean[key] = clean.get(key, 0) + c
        self._coeffs = dict(sorted(clean.items()))
        shape = tuple(max((k[a] for k in self._coeffs), default=0) + 1 for a in range(3))
        dense = np.zeros(shape, dtype=np.complex128)
        for (i, j, k), c in self._coeffs.items():
            dense[i, j, k] = c
        self._dense = dense
        self._exps = np.array(list(self._coeffs) or [(0, 0, 0)], dtype=np.intp).reshape(-1, 3)
        self._vals = np.array(list(self._coeffs.values()) or [0j], dtype=np.complex128)
        self._grad = None

    @classmethod
    def constant(cls, c: complex) -> "Poly3":
        return cls({(0, 0, 0): c})

    @classmethod
    def coordinate(cls, j: int) -> "Poly3":
        key = [0, 0, 0]
        key[j] = 1
        return cls({tuple(key): 1.0})

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int) -> "Poly3":
        """Complex Gaussian coefficients on every monomial of total degree <= degree, scaled by 1/(1 + degree)."""
        coeffs = {}
        for key in monomials(degree):
            g = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
            coeffs[key] = g / (1 + sum(key))
        return cls(coeffs)

    @property
    def coeffs(self) -> dict[tuple[int, int, int], complex]:
        return dict(self._coeffs)

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self._coeffs), default=0)

    def __call__(self, x1, x2, x3):
        x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=np.complex128) for v in (x1, x2, x3)))
        out = monomial_table(self._exps, x1.reshape(-1), x2.reshape(-1), x3.reshape(-1)) @ self._vals
        return out.reshape(x1.shape) if x1.shape else out[0]

    def derivative(self, axis: int) -> "Poly3":
        out = {}
        for key, c in self._coeffs.items():
            if key[axis]:
                k = list(key)
                k[axis] -= 1
                out[tuple(k)] = c * key[axis]
        return Poly3(out)

    def grad(self, x1, x2, x3):
        if self._grad is None:
            self._grad = [self.derivative(a) for a in range(3)]
        return tuple(d(x1, x2, x3) for d in self._grad)

    def __add__(self, other: "Poly3") -> "Poly3":
        out = dict(self._coeffs)
        for k, c in other._coeffs.items():
            out[k] = out.get(k, 0) + c
        return Poly3(out)

    def __mul__(self, other):
        if isinstance(other, Poly3):
            out: dict = {}
            for (a, b, c), u in self._coeffs.items():
                for (d, e, f), v in other._coeffs.items():
                    key = (a + d, b + e, c + f)
                    out[key] = out.get(key, 0) + u * v
            return Poly3(out)
        s = complex(other)
        return Poly3({k: s * c for k, c in self._coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly3) and self._coeffs == other._coeffs

    def __hash__(self):
        return hash(tuple(self._coeffs.items()))

    def __repr__(self):
        terms = " + ".join(f"({c:.6g})*z1^{i} z2^{j} z3^{k}" for (i, j, k), c in self._coeffs.items())
        return f"Poly3({terms or '0'})"


def monomial_table(exps: np.ndarray, x1, x2, x3) -> np.ndarray:
    """``(N, m)`` array of the monomials ``exps`` (rows of exponents) at N points."""
    prod = np.ones((len(x1), len(exps)), dtype=np.complex128)
    for a, x in enumerate((x1, x2, x3)):
        top = int(exps[:, a].max()) + 1
        if top > 1:
            table = np.empty((len(x), top), dtype=np.complex128)
            table[:, 0] = 1.0
            for k in range(1, top):
                table[:, k] = table[:, k - 1] * x
            prod *= table[:, exps[:, a]]
    return prod


def monomials(degree: int) -> list[tuple[int, int, int]]:
    return [(i, j, d - i - j) for d in range(degree + 1) for i in range(d, -1, -1) for j in range(d - i, -1, -1)]


def eval_point(f: Poly3, p: TetraPoint) -> complex:
    return complex(f(*p.as_tuple()))


def _triple_matrices(T):
    mats = (T.t1, T.t2, T.t3) if hasattr(T, "t1") else tuple(T)
    if len(mats) != 3:
        raise InvalidInputError("a triple needs exactly three matrices")
    mats = tuple(as_matrix(M, square=True) for M in mats)
    if len({M.shape for M in mats}) != 1:
        raise InvalidInputError("triple matrices differ in size")
    return mats


def commutation_residual(t1, t2, t3) -> float:
    return max(
        operator_norm(a @ b - b @ a) for a, b in ((t1, t2), (t1, t3), (t2, t3))
    )


def eval_triple(f: Poly3, T) -> np.ndarray:
    """Substitute a commuting triple of matrices into ``f``."""
    t1, t2, t3 = _triple_matrices(T)
    res = commutation_residual(t1, t2, t3)
    if res > COMMUTE_TOL:
        raise InvalidTripleError(f"matrices do not commute (residual {res:.3e})")
    n = t1.shape[0]
    powers = []
    for M, top in zip((t1, t2, t3), f._dense.shape):
        pw = [np.eye(n, dtype=np.complex128)]
        for _ in range(top - 1):
            pw.append(pw[-1] @ M)
        powers.append(pw)
    out = np.zeros((n, n), dtype=np.complex128)
    for (i, j, k), c in f.coeffs.items():
        out += c * (powers[0][i] @ powers[1][j] @ powers[2][k])
    return out


def gradient(f: Poly3, p: TetraPoint) -> tuple[complex, complex, complex]:
    return tuple(complex(g) for g in f.grad(*p.as_tuple()))


def _boundary_params(pts: np.ndarray) -> np.ndarray:
    # x1 = sin(beta) e^{i alpha}, x3 = e^{i gamma}, x2 = conj(x1) x3
    x1, x3 = pts[:, 0], pts[:, 2]
    beta = np.arcsin(np.clip(np.abs(x1), 0.0, 1.0))
    return np.stack([beta, np.angle(x1), np.angle(x3)], axis=1)


def _boundary_points(params: np.ndarray):
    x1 = np.sin(params[..., 0]) * np.exp(1j * params[..., 1])
    x3 = np.exp(1j * params[..., 2])
    return x1, np.conj(x1) * x3, x3


def stack_coefficients(fs) -> tuple[np.ndarray, np.ndarray]:
    exps = sorted({k for f in fs for k in f._coeffs} or {(0, 0, 0)})
    index = {k: i for i, k in enumerate(exps)}
    C = np.zeros((len(exps), len(fs)), dtype=np.complex128)
    for col, f in enumerate(fs):
        for k, c in f._coeffs.items():
            C[index[k], col] = c
    return np.array(exps, dtype=np.intp), C


def _refine_on_boundary(exps, C, starts, owner, step: float = 0.2, iters: int = 50) -> np.ndarray:
    """Compass search over the boundary parametrisation, all starts at once.

    ``owner[s]`` is the column of ``C`` (the polynomial) that start ``s``
    climbs.  Returns the value reached by each start.
    """
    moves = np.concatenate([np.eye(3), -np.eye(3)])
    nmov = len(moves)

    def absval(params, cols):
        x1, x2, x3 = _boundary_points(params)
        return np.abs(np.einsum("nm,mn->n", monomial_table(exps, x1, x2, x3), C[:, cols]))

    cur = starts.copy()
    val = absval(cur, owner)
    steps = np.full(len(cur), step)
    for _ in range(iters):
        act = np.flatnonzero(steps >= STEP_FLOOR)
        if not len(act):
            break
        cand = cur[act, None, :] + steps[act, None, None] * moves[None, :, :]
        cval = absval(cand.reshape(-1, 3), np.repeat(owner[act], nmov)).reshape(len(act), nmov)
        best = np.argmax(cval, axis=1)
        bval = cval[np.arange(len(act)), best]
        up = bval > val[act]
        cur[act[up]] = cand[np.arange(len(act)), best][up]
        val[act[up]] = bval[up]
        steps[act[~up]] *= 0.5
    return val


def sup_norms_bE(fs, nsamples: int, seed: int) -> np.ndarray:
    """Lower estimates of ``sup |f|`` over the closed tetrablock for each ``f`` in ``fs``.

    Polynomials peak on the distinguished boundary, which is sampled through
    Haar unitaries (one shared sample set).  For each polynomial, every
    running record of the sample sequence is polished by a local search; the
    estimate is the best value seen, so it can only grow when more samples of
    the same seed are used.
    """
    if nsamples < 1:
        raise InvalidInputError("nsamples must be positive")
    fs = list(fs)
    pts = boundary_samples(nsamples, seed)
    exps, C = stack_coefficients(fs)
    vals = np.abs(monomial_table(exps, pts[:, 0], pts[:, 1], pts[:, 2]) @ C)
    best = vals.max(axis=0)
    running = np.maximum.accumulate(vals, axis=0)
    is_record = np.vstack([np.ones((1, len(fs)), dtype=bool), running[1:] > running[:-1]])
    is_record[:, [f.degree == 0 for f in fs]] = False
    sample_idx, owner = np.nonzero(is_record)
    if len(owner):
        # each record is also restarted on the torus part |x1| = 1, where Haar samples are sparse
        starts = _boundary_params(pts[sample_idx])
        rim = starts.copy()
        rim[:, 0] = 0.5 * np.pi
        owner = np.concatenate([owner, owner])
        refined = _refine_on_boundary(exps, C, np.concatenate([starts, rim]), owner)
        np.maximum.at(best, owner, refined)
    return best


def sup_norm_bE(f: Poly3, nsamples: int, seed: int) -> float:
    """Lower estimate of ``sup |f|`` over the closed tetrablock; see :func:`sup_norms_bE`."""
    return float(sup_norms_bE([f], nsamples, seed)[0])


def _tridisk_torus_sup(g, grid: int) -> tuple[float, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(grid) / grid
    z = np.exp(1j * theta)
    vals = np.abs(g(z[:, None, None], z[None, :, None], z[None, None, :]))
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return float(vals[idx]), theta[list(idx)]


def tridisk_sup(g, grid: int = TRIDISK_GRID) -> float:
    """Estimate of ``sup |g|`` over the closed tridisk.

    ``grid``^3 points of the torus (where holomorphic polynomials peak) followed
    by a Nelder-Mead polish of the best one.
    """
    best, phases = _tridisk_torus_sup(g, grid)
    res = minimize(
        lambda ph: -float(np.abs(g(*np.exp(1j * ph)))),
        phases,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
    )
    return max(best, -float(res.fun))


def tridisk_normalize(g: Poly3, grid: int = TRIDISK_GRID, safety: float = TRIDISK_SAFETY) -> tuple[Poly3, float]:
    """Scale ``g`` so that its estimated tridisk sup becomes ``1 / (1 + safety)``.

    Returns the scaled polynomial and the certified bound it satisfies.
    """
    s = tridisk_sup(g, grid)
    if s == 0:
        return g, 0.0
    scaled = g * (1.0 / (s * (1.0 + safety)))
    return scaled, 1.0 / (1.0 + safety)


def blaschke(alpha: complex, w):
    """Disk automorphism ``(alpha - w) / (1 - conj(alpha) w)``; it is its own inverse."""
    alpha = complex(alpha)
    if abs(alpha) >= 1.0:
        raise InvalidParameterError(f"|alpha| = {abs(alpha)} must be < 1")
    return (alpha - w) / (1.0 - np.conj(alpha) * w)


def blaschke_matrix(alpha: complex, X) -> np.ndarray:
    """Apply the Blaschke factor to a matrix with spectrum in the closed disk."""
    alpha = complex(alpha)
    if abs(alpha) >= 1.0:
        raise InvalidParameterError(f"|alpha| = {abs(alpha)} must be < 1")
    X = as_matrix(X, square=True)
    eye = np.eye(X.shape[0])
    return np.linalg.solve(eye - np.conj(alpha) * X, alpha * eye - X)


@dataclass(frozen=True)
class BlaschkeProduct3:
    """``g(z) = B_{a1}(z1) B_{a2}(z2) B_{a3}(z3)``, a holomorphic self-map of the tridisk onto the disk."""

    alphas: tuple[complex, complex, complex]

    def __call__(self, x1, x2, x3):
        out = 1.0
        for a, z in zip(self.alphas, (x1, x2, x3)):
            out = out * blaschke(a, np.asarray(z))
        return out

    def grad(self, x1, x2, x3):
        zs = [np.asarray(z) for z in (x1, x2, x3)]
        factors = [blaschke(a, z) for a, z in zip(self.alphas, zs)]
        derivs = [(abs(a) ** 2 - 1.0) / (1.0 - np.conj(a) * z) ** 2 for a, z in zip(self.alphas, zs)]
        return tuple(
            derivs[j] * np.prod([factors[k] for k in range(3) if k != j], axis=0) for j in range(3)
        )


def psi_polynomial(omega: complex, order: int, first: bool = True) -> Poly3:
    """Truncated series of ``(x3 w - x1) / (x2 w - 1)`` (``first``) or ``(x3 w - x2) / (x1 w - 1)``.

    For ``|w| < 1`` the rational function has modulus at most 1 on the closed
    tetrablock, and the dropped tail is at most ``2 |w|^order / (1 - |w|)``.
    """
    omega = complex(omega)
    if not abs(omega) < 1.0:
        raise InvalidParameterError("|omega| must be < 1")
    if order < 1:
        raise InvalidInputError("order must be positive")
    a, b = (0, 1) if first else (1, 0)
    coeffs: dict = {}
    for k in range(order):
        w = omega**k
        lin = [0, 0, 0]
        lin[a] = 1
        den = [0, 0, 0]
        den[b] = k
        coeffs[(den[0] + lin[0], den[1] + lin[1], den[2])] = w
        coeffs[(den[0], den[1], 1)] = -omega * w
    return Poly3(coeffs)


@dataclass(frozen=True)
class KneseReport:
    max_violation: float
    worst_point: tuple[complex, complex, complex]
    bound: float
    nsamples: int

    @property
    def violated(self) -> bool:
        return self.max_violation > KNESE_FLAG


def tridisk_samples(n: int, seed: int) -> np.ndarray:
    """``(n, 3)`` points uniform in the open tridisk."""
    rng = np.random.default_rng([seed, 0x7D])
    rad = np.sqrt(rng.uniform(size=(n, 3)))
    return rad * np.exp(2j * np.pi * rng.uniform(size=(n, 3)))


def knese_check(g, bound: float = 1.0, nsamples: int = 10_000, seed: int = 0) -> KneseReport:
    """Largest value of ``sum_j (1 - |z_j|^2)|dg/dz_j| - (1 - |g|^2)`` over sampled tridisk points.

    ``g`` must already be known to map the tridisk into a disk of radius
    ``bound <= 1``.
    """
    if not 0.0 <= bound <= 1.0:
        raise InvalidParameterError("bound must lie in [0, 1]")
    z = tridisk_samples(nsamples, seed)
    x1, x2, x3 = z[:, 0], z[:, 1], z[:, 2]
    grads = g.grad(x1, x2, x3)
    lhs = sum((1.0 - np.abs(zj) ** 2) * np.abs(np.broadcast_to(dj, zj.shape)) for zj, dj in zip((x1, x2, x3), grads))
    rhs = 1.0 - np.abs(np.broadcast_to(g(x1, x2, x3), x1.shape)) ** 2
    gap = lhs - rhs
    k = int(np.argmax(gap))
    return KneseReport(float(gap[k]), tuple(complex(v) for v in z[k]), bound, nsamples)


class SchwarzBound(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def schwarz_bound(grad, r: float, f0: complex) -> SchwarzBound:
    """Compare ``r * sum|grad_j|`` with ``1 - |f(0)|^2``."""
    if not 0.0 < r < 1.0:
        raise InvalidParameterError("r must lie in (0, 1)")
    lhs = r * sum(abs(complex(g)) for g in grad)
    rhs = 1.0 - abs(complex(f0)) ** 2
    return SchwarzBound(lhs, rhs, lhs <= rhs + 1e-12)
