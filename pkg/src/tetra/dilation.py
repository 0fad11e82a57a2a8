"""Truncated Toeplitz-block dilations of tetrablock contractions.

The dilation space ``H + l2(D)`` (``D`` the defect space of ``T3``) is cut
down to ``H + D^N``.  Each ``V_j = [[T_j, 0], [C_j, T_phi_j]]`` is block lower
triangular, with the analytic Toeplitz matrix of ``phi_j`` carrying the
coefficient of ``z^k`` on the k-th block subdiagonal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from tetra.errors import InvalidInputError, InvalidSymbolError
from tetra.linalg import adjoint, operator_norm
from tetra.structure import CommutingTriple, FundamentalPair

ENDPOINT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ToeplitzSymbol:
    """Operator polynomial ``sum_k coefficients[k] z^k``."""

    coefficients: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.coefficients:
            raise InvalidInputError("symbol needs at least one coefficient")
        shapes = {np.shape(c) for c in self.coefficients}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2 or len(set(next(iter(shapes)))) != 1:
            raise InvalidInputError("symbol coefficients must be square and of equal size")
        object.__setattr__(self, "coefficients", tuple(np.asarray(c, dtype=np.complex128) for c in self.coefficients))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def dim(self) -> int:
        return self.coefficients[0].shape[0]

    def __call__(self, z: complex) -> np.ndarray:
        return sum(c * z**k for k, c in enumerate(self.coefficients))

    def toeplitz(self, depth: int) -> np.ndarray:
        k = self.dim
        out = np.zeros((depth * k, depth * k), dtype=np.complex128)
        for row in range(depth):
            for lag, c in enumerate(self.coefficients):
                col = row - lag
                if col < 0:
                    break
                out[row * k:(row + 1) * k, col * k:(col + 1) * k] = c
        return out


@dataclass(frozen=True, eq=False)
class TruncatedDilation:
    depth: int
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    h_dim: int
    slot: int
    defect_dim: int
    symbols: tuple[ToeplitzSymbol, ToeplitzSymbol, ToeplitzSymbol] | None = None
    notes: dict = field(default_factory=dict)

    @property
    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.v1, self.v2, self.v3)

    def interior(self, M: np.ndarray, blocks: int) -> np.ndarray:
        """Compression of ``M`` to ``H`` plus the first ``blocks`` defect blocks."""
        m = self.h_dim + blocks * self.defect_dim
        return M[:m, :m]


@dataclass(frozen=True)
class ResidualReport:
    coinvariance: float
    compression_maxdeg: float
    isometry_interior: float
    commutation_interior: float
    v1_eq_v2star_v3_interior: float
    v2_norm: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def _column(blocks: dict[int, np.ndarray], depth: int, k: int, n: int) -> np.ndarray:
    """Stack ``depth`` blocks of size ``k x n``; ``blocks`` maps 1-based positions to entries."""
    C = np.zeros((depth * k, n), dtype=np.complex128)
    for pos, B in blocks.items():
        C[(pos - 1) * k:pos * k, :] = B
    return C


def _assemble(T: CommutingTriple, cols, symbols, depth: int, slot: int, k: int, notes=None) -> TruncatedDilation:
    n = T.dim
    Vs = []
    for Tj, Cj, phi in zip(T.matrices, cols, symbols):
        V = np.zeros((n + depth * k, n + depth * k), dtype=np.complex128)
        V[:n, :n] = Tj
        if k:
            V[n:, :n] = Cj
            V[n:, n:] = phi.toeplitz(depth)
        Vs.append(V)
    return TruncatedDilation(depth, *Vs, n, slot, k, tuple(symbols), notes or {})


def _defect_map(P: FundamentalPair) -> np.ndarray:
    # D_T3 viewed as a map from H onto the defect space, in the basis of P.defect_basis
    return adjoint(P.defect_basis) @ P.defect


def build_theoremB(T: CommutingTriple, P: FundamentalPair, depth: int, slot: int = 1) -> TruncatedDilation:
    """Depth-``depth`` section of the dilation with symbols ``F1 + F2* z``, ``F2 + F1* z`` and ``z``.

    ``C1 = (F2* D, 0, ...)``, ``C2 = (F1* D, 0, ...)`` and ``C3`` carries ``D``
    at block position ``slot``.  Only ``slot = 1`` makes ``V1 = V2* V3``
    reproduce the defect equations in the ``H`` corner.
    """
    if depth < 2 or not 1 <= slot <= depth:
        raise InvalidInputError("need depth >= 2 and 1 <= slot <= depth")
    if P.defect.shape[0] != T.dim:
        raise InvalidInputError("fundamental pair does not belong to this triple")
    k = P.defect_dim
    F1, F2 = P.compressed()
    D = _defect_map(P)
    eye = np.eye(k, dtype=np.complex128)
    symbols = (
        ToeplitzSymbol((F1, adjoint(F2))),
        ToeplitzSymbol((F2, adjoint(F1))),
        ToeplitzSymbol((np.zeros((k, k), dtype=np.complex128), eye)),
    )
    cols = (
        _column({1: adjoint(F2) @ D}, depth, k, T.dim),
        _column({1: adjoint(F1) @ D}, depth, k, T.dim),
        _column({slot: D}, depth, k, T.dim),
    )
    return _assemble(T, cols, symbols, depth, slot, k)


def extended_symbols(P: FundamentalPair, Xi=None, n: int = 2, phi2_middle=None):
    """Symbols with ``phi3 = z^n``.

    ``phi1 = F1 + Xi_1 z + ... + Xi_{n-1} z^{n-1} + F2* z^n``.  ``Xi`` is one
    matrix (``n = 2``) or a list of ``n - 1``.  Unless ``phi2_middle`` is
    given, ``phi2`` takes the reflected adjoints ``z^n phi1(1/conj z)*``, i.e.
    ``F2 + Xi_{n-1}* z + ... + F1* z^n``.
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    F1, F2 = P.compressed()
    k = P.defect_dim
    zero = np.zeros((k, k), dtype=np.complex128)
    if Xi is None:
        middle = [zero] * (n - 1)
    elif isinstance(Xi, np.ndarray) and Xi.ndim == 2:
        middle = [Xi]
    else:
        middle = [np.asarray(x, dtype=np.complex128) for x in Xi]
    if len(middle) != n - 1 or any(x.shape != (k, k) for x in middle):
        raise InvalidInputError(f"expected {n - 1} middle coefficients of size {k}x{k}")
    if phi2_middle is None:
        phi2_middle = [adjoint(x) for x in reversed(middle)]
    phi1 = ToeplitzSymbol((F1, *middle, adjoint(F2)))
    phi2 = ToeplitzSymbol((F2, *phi2_middle, adjoint(F1)))
    phi3 = ToeplitzSymbol((*([zero] * n), np.eye(k, dtype=np.complex128)))
    return phi1, phi2, phi3


def check_endpoint_conditions(phi1: ToeplitzSymbol, phi2: ToeplitzSymbol, P: FundamentalPair) -> float:
    """Require ``phi1(0) = F1 = (top coefficient of phi2)*`` and ``phi2(0) = F2 = (top coefficient of phi1)*``.

    Returns the largest mismatch, raising InvalidSymbolError beyond 1e-12.
    The conditions on the middle coefficients are not checked.
    """
    F1, F2 = P.compressed()
    if phi1.dim != F1.shape[0] or phi2.dim != F1.shape[0]:
        raise InvalidSymbolError("symbol size does not match the defect space")
    if phi1.degree != phi2.degree:
        raise InvalidSymbolError("phi1 and phi2 must have the same degree")
    mismatch = max(
        operator_norm(phi1.coefficients[0] - F1),
        operator_norm(adjoint(phi2.coefficients[-1]) - F1),
        operator_norm(phi2.coefficients[0] - F2),
        operator_norm(adjoint(phi1.coefficients[-1]) - F2),
    )
    if mismatch > ENDPOINT_TOL:
        raise InvalidSymbolError(f"endpoint conditions violated (mismatch {mismatch:.3e})")
    return mismatch


def build_extended(
    T: CommutingTriple,
    P: FundamentalPair,
    Xi=None,
    depth: int = 8,
    n: int = 2,
    slot: int = 1,
    symbols=None,
) -> TruncatedDilation:
    """Section of the dilation with ``phi3 = z^n`` and ``D`` at position ``slot`` of ``C3``.

    ``C1`` and ``C2`` are chosen as ``T_phi2* C3`` and ``T_phi1* C3``, the
    columns forced by ``V1 = V2* V3`` and ``V2 = V1* V3``; with ``n = 1`` and
    ``slot = 1`` this is :func:`build_theoremB`.
    """
    if depth < n + 2 or not 1 <= slot <= depth:
        raise InvalidInputError("need depth >= n + 2 and 1 <= slot <= depth")
    phi1, phi2, phi3 = symbols if symbols is not None else extended_symbols(P, Xi, n)
    if phi3.degree != n:
        raise InvalidSymbolError("phi3 must be z^n")
    mismatch = check_endpoint_conditions(phi1, phi2, P)
    k = P.defect_dim
    D = _defect_map(P)
    C3 = _column({slot: D}, depth, k, T.dim)
    C1 = adjoint(phi2.toeplitz(depth)) @ C3
    C2 = adjoint(phi1.toeplitz(depth)) @ C3
    notes = {"endpoint_mismatch": mismatch, "middle_coefficient_relations": "unchecked", "n": n}
    return _assemble(T, (C1, C2, C3), (phi1, phi2, phi3), depth, slot, k, notes)


def verify_coinvariance(d: TruncatedDilation, T: CommutingTriple) -> float:
    """``max_j || V_j* restricted to H  -  T_j* ||``, with ``H`` embedded in the dilation space."""
    n = d.h_dim
    worst = 0.0
    for V, Tj in zip(d.matrices, T.matrices):
        target = np.zeros((V.shape[0], n), dtype=np.complex128)
        target[:n] = adjoint(Tj)
        worst = max(worst, operator_norm(adjoint(V)[:, :n] - target))
    return worst


def _monomial_products(mats, maxdeg: int):
    """Yield ``(exponent, M1^i M2^j M3^k)`` for every monomial of total degree 1..maxdeg."""
    cache = {(0, 0, 0): np.eye(mats[0].shape[0], dtype=np.complex128)}
    for deg in range(1, maxdeg + 1):
        for e in itertools.product(range(deg + 1), repeat=3):
            if sum(e) != deg:
                continue
            # build from a cached lower-degree monomial
            j = next(a for a in range(3) if e[a])
            prev = tuple(x - (a == j) for a, x in enumerate(e))
            cache[e] = mats[j] @ cache[prev]
            yield e, cache[e]


def verify_compression(d: TruncatedDilation, T: CommutingTriple, maxdeg: int = 3) -> float:
    """Largest ``||P_H p(V) |_H - p(T)||`` over monomials ``p`` of degree ``1..maxdeg``."""
    if maxdeg < 1:
        raise InvalidInputError("maxdeg must be at least 1")
    n = d.h_dim
    Vs = dict(_monomial_products(d.matrices, maxdeg))
    Ts = dict(_monomial_products(T.matrices, maxdeg))
    return max(operator_norm(Vs[e][:n, :n] - Ts[e]) for e in Vs)


def verify_isometry_conditions(
    d: TruncatedDilation, interior_depth: int, T: CommutingTriple | None = None, maxdeg: int = 3
) -> ResidualReport:
    """Residuals of the tetrablock-isometry identities on an interior compression.

    ``V3* V3 = I``, pairwise commutation and ``V1 = V2* V3`` are measured on
    ``H`` plus the first ``interior_depth`` defect blocks; ``||V2||`` on the
    whole section.  Co-invariance and compression are measured against ``T``
    (by default the ``H`` corner of the dilation).
    """
    if not 1 <= interior_depth <= d.depth - 2:
        raise InvalidInputError("interior_depth must lie in [1, depth - 2]")
    if T is None:
        n = d.h_dim
        T = CommutingTriple.from_matrices(*(V[:n, :n] for V in d.matrices))
    v1, v2, v3 = d.matrices

    def inner(M):
        return d.interior(M, interior_depth)

    eye = np.eye(inner(v3).shape[0])
    iso = operator_norm(inner(adjoint(v3) @ v3) - eye)
    comm = max(operator_norm(inner(a @ b - b @ a)) for a, b in ((v1, v2), (v1, v3), (v2, v3)))
    v1eq = operator_norm(inner(v1 - adjoint(v2) @ v3))
    return ResidualReport(
        coinvariance=verify_coinvariance(d, T),
        compression_maxdeg=verify_compression(d, T, maxdeg),
        isometry_interior=iso,
        commutation_interior=comm,
        v1_eq_v2star_v3_interior=v1eq,
        v2_norm=operator_norm(v2),
    )
