"""The nilpotent family ``T_j = [[0, l_j], [0, 0]]`` as a counterexample.

For ``0 < |l_j| < r`` (``r`` the inscribed polydisk radius) and
``|l1| != |l2|``, the triple is a tetrablock contraction whose fundamental
operators do not commute, although every 2x2 tetrablock contraction has a
tetrablock unitary dilation.  The records built here collect the evidence.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from tetra.dilation import build_theoremB, verify_isometry_conditions
from tetra.domain import inscribed_polydisk_radius
from tetra.errors import ConstraintViolationError, InternalInconsistencyError, InvariantViolationError
from tetra.structure import (
    CertificationReport,
    FundamentalPair,
    Verdict,
    certify_nilpotent_family,
    certify_sampling,
    commutator,
    family_commutator_norm,
    fundamental_operators,
    nilpotent_family,
)

DEFAULT_MARGIN = 1e-3
MIN_MODULUS_GAP = 1e-6
CLOSED_FORM_TOL = 1e-12
DILATION_DEPTH = 6

NO_EXPLICIT_DILATION = (
    "A tetrablock unitary dilation exists because every 2x2 tetrablock contraction has one; "
    "no explicit dilation tuple is constructed, and the Toeplitz-form tuple fails because F1, F2 do not commute."
)


@dataclass(frozen=True, eq=False)
class CounterexampleRecord:
    lambdas: tuple[complex, complex, complex]
    r_used: float
    certification: CertificationReport
    fundamental: FundamentalPair
    commutator_norm: float
    closed_form_norm: float
    theoremB_commutation_interior: float
    sampling: CertificationReport | None = None


def check_admissible(lambdas, bound: float) -> None:
    """Raise ConstraintViolationError naming the first violated hypothesis."""
    mods = [abs(complex(v)) for v in lambdas]
    for j, m in enumerate(mods, start=1):
        if not m > 0:
            raise ConstraintViolationError(f"lambda{j} must be nonzero (0 < |lambda{j}|)")
        if not m < bound:
            raise ConstraintViolationError(f"|lambda{j}| = {m} is not below r = {bound}")
    if math.isclose(mods[0], mods[1], rel_tol=0.0, abs_tol=1e-15):
        raise ConstraintViolationError("|lambda1| must differ from |lambda2|")


def sample_lambdas(seed, bound: float) -> tuple[complex, complex, complex]:
    """Uniform draw from the admissible region, rejecting near-equal |lambda1|, |lambda2|."""
    rng = np.random.default_rng(seed)
    while True:
        rad = bound * np.sqrt(rng.uniform(size=3))
        lam = rad * np.exp(2j * np.pi * rng.uniform(size=3))
        if np.all(rad > 0) and abs(rad[0] - rad[1]) >= MIN_MODULUS_GAP:
            return tuple(complex(v) for v in lam)


def admissible_bound(margin: float = DEFAULT_MARGIN, radius_tol: float = 1e-6) -> float:
    return inscribed_polydisk_radius(radius_tol) - margin


def generate(
    lambdas=None,
    seed=None,
    margin: float = DEFAULT_MARGIN,
    radius_tol: float = 1e-6,
    depth: int = DILATION_DEPTH,
    sampling: dict | None = None,
) -> CounterexampleRecord:
    """Build the full record for explicit ``lambdas`` or for a seeded draw.

    ``sampling``, if given, holds keyword arguments for an additional
    :func:`certify_sampling` run stored on the record.
    """
    bound = admissible_bound(margin, radius_tol)
    if lambdas is None:
        if seed is None:
            raise ConstraintViolationError("give either lambdas or a seed")
        lambdas = sample_lambdas(seed, bound)
    lambdas = tuple(complex(v) for v in lambdas)
    check_admissible(lambdas, bound)

    T = nilpotent_family(*lambdas)
    cert = certify_nilpotent_family(*lambdas, bound)
    if cert.verdict is not Verdict.CERTIFIED:
        raise InternalInconsistencyError(f"admissible lambdas were not certified: {cert.details}")
    P = fundamental_operators(T)
    norm = commutator(P).norm
    closed = family_commutator_norm(*lambdas)
    if abs(norm - closed) > CLOSED_FORM_TOL:
        raise InternalInconsistencyError(f"commutator norm {norm!r} differs from closed form {closed!r}")
    dil = build_theoremB(T, P, depth)
    comm = verify_isometry_conditions(dil, depth - 2, T).commutation_interior
    samp = certify_sampling(T, **sampling) if sampling is not None else None
    return CounterexampleRecord(lambdas, bound, cert, P, norm, closed, comm, samp)


def generate_batch(count: int, seed: int, workers: int = 1, **kwargs) -> list[CounterexampleRecord]:
    """``count`` seeded records; record ``i`` uses the seed ``[seed, i]`` regardless of scheduling."""
    seeds = [[seed, i] for i in range(count)]
    if workers <= 1:
        return [generate(seed=s, **kwargs) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: generate(seed=s, **kwargs), seeds))


def certify_report(rec: CounterexampleRecord) -> dict:
    """Summary of a record: hypotheses, certificate, fundamental operators, commutator, dilation status.

    Raises InvariantViolationError if the record has been altered into an
    inconsistent state.
    """
    mods = [abs(v) for v in rec.lambdas]
    if rec.certification.verdict is not Verdict.CERTIFIED:
        raise InvariantViolationError("record is not certified")
    if not rec.commutator_norm > 0:
        raise InvariantViolationError("record has a vanishing commutator")
    if abs(rec.commutator_norm - family_commutator_norm(*rec.lambdas)) > CLOSED_FORM_TOL:
        raise InvariantViolationError("commutator norm does not match the closed form")

    hypotheses = {
        "lambdas_nonzero": all(m > 0 for m in mods),
        "lambdas_below_r": all(m < rec.r_used for m in mods),
        "moduli_distinct": mods[0] != mods[1],
        "lambda3_nonzero": mods[2] > 0,
    }
    P = rec.fundamental
    C = commutator(P)
    report = {
        "lambdas": list(rec.lambdas),
        "r_used": rec.r_used,
        "hypotheses": hypotheses,
        "certificate": {
            "verdict": rec.certification.verdict.value,
            "method": rec.certification.method.value,
            "details": rec.certification.details,
        },
        "F1": P.f1,
        "F2": P.f2,
        "solve_residual": P.solve_residual,
        "commutator": C.matrix,
        "commutator_norm": rec.commutator_norm,
        "commutator_closed_form": rec.closed_form_norm,
        "theoremB_commutation_interior": rec.theoremB_commutation_interior,
        "dilation": NO_EXPLICIT_DILATION,
    }
    if rec.sampling is not None:
        report["sampling"] = {"verdict": rec.sampling.verdict.value, "details": rec.sampling.details}
    report["text"] = format_report(report)
    return report


def format_report(report: dict) -> str:
    l1, l2, l3 = report["lambdas"]
    lines = [
        f"lambda = ({l1:.6g}, {l2:.6g}, {l3:.6g}), r = {report['r_used']:.9f}",
        "hypotheses: " + ", ".join(f"{k}={v}" for k, v in report["hypotheses"].items()),
        f"Schwarz-path certificate: {report['certificate']['verdict']}"
        f" (schwarz factor {report['certificate']['details']['schwarz_factor']:.6f})",
        f"||[F1, F2]|| = {report['commutator_norm']:.12g} (closed form {report['commutator_closed_form']:.12g})",
        f"Toeplitz-form tuple commutation residual: {report['theoremB_commutation_interior']:.6g}",
        report["dilation"],
    ]
    return "\n".join(lines)
