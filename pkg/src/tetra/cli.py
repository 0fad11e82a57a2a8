"""``tetra`` command-line frontend.

Every subcommand writes one JSON report (schema ``tetra/1``) to ``--out`` or
stdout.  Complex scalars are serialized as ``[re, im]`` and matrices as
row-major nested lists of such pairs.  Exit codes: 0 success or certified,
1 not certified or statistical failure, 2 usage or input error, 3 internal
inconsistency.
"""

from __future__ import annotations

import argparse
import datetime
import enum
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from tetra import __version__
from tetra.calculus import Poly3, eval_point, eval_triple, knese_check, sup_norm_bE, tridisk_normalize
from tetra.counterexample import certify_report, generate, generate_batch
from tetra.dilation import build_extended, build_theoremB, verify_isometry_conditions
from tetra.domain import (
    TetraPoint,
    boundary_samples,
    criterion_slack,
    inscribed_polydisk_radius,
    member,
    polydisk_spot_check,
    worst_torus_point,
)
from tetra.errors import (
    InternalInconsistencyError,
    InvalidInputError,
    InvariantViolationError,
    NumericalDegeneracyError,
    TetraError,
)
from tetra.structure import (
    CommutingTriple,
    Verdict,
    certify_nilpotent_family,
    certify_sampling,
    commutator,
    family_commutator_norm,
    fundamental_operators,
    nilpotent_family,
    psi_probes,
)

SCHEMA = "tetra/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
SEED_ENV = "TETRA_SEED"
DEFAULT_TOLERANCES = {"membership": 1e-9, "residual": 1e-10, "slack": 5e-2}
COMMANDS = (
    "member",
    "boundary-sample",
    "radius",
    "eval",
    "supnorm",
    "knese",
    "certify",
    "fundamental",
    "commutator",
    "dilate",
    "verify-dilation",
    "counterexample",
    "batch",
)
_GLOBAL_KEYS = {"command", "seed", "out", "no_timestamp", "membership_tol", "residual_tol", "slack"}


class UsageError(Exception):
    pass


# --- encoding ---------------------------------------------------------------


def to_json(obj):
    """Convert reports to plain JSON types: complex -> [re, im], arrays -> nested lists."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return np.stack([obj.real, obj.imag], axis=-1).tolist()
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Poly3):
        return [[list(k), to_json(c)] for k, c in obj.coeffs.items()]
    return obj


def decode_matrix(rows) -> np.ndarray:
    """Inverse of the matrix encoding; also accepts plain real entries."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(np.complex128)
    raise InvalidInputError("matrix must be a nested list of [re, im] pairs")


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_path: str | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
            "output_path": self.output_path,
            "params": to_json(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if d.get("command") not in COMMANDS:
            raise InvalidInputError(f"unknown command {d.get('command')!r}")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(d.get("tolerances", {}))
        return cls(d["command"], int(d.get("seed", 0)), tol, d.get("output_path"), to_json(d.get("params", {})))


# --- argument parsing ---------------------------------------------------------

_IMAG = re.compile(r"^(.*?)([ij])$")


def parse_complex(text: str) -> complex:
    """Parse ``"re+imi"`` style scalars: ``0.2``, ``-0.1i``, ``0.3-0.4i``, ``1e-3+2j``."""
    s = text.strip().replace(" ", "")
    m = _IMAG.match(s)
    if m:
        head = m.group(1)
        s = head + ("1j" if head in ("", "+", "-") or head[-1] in "+-" else "j")
    try:
        z = complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return z


def parse_term(text: str) -> tuple[tuple[int, int, int], complex]:
    """``"i,j,k:coef"`` for the monomial ``coef * z1^i z2^j z3^k``."""
    try:
        exps, coef = text.split(":")
        key = tuple(int(e) for e in exps.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"term must look like 'i,j,k:coef', got {text!r}") from None
    if len(key) != 3 or min(key) < 0:
        raise argparse.ArgumentTypeError(f"bad exponents in {text!r}")
    return key, parse_complex(coef)


def seed_value(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def positive_float(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common")
    g.add_argument("--seed", type=seed_value, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")
    g.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    g.add_argument("--no-timestamp", action="store_true", help="omit the generation time from the report")
    g.add_argument("--membership-tol", type=positive_float, default=DEFAULT_TOLERANCES["membership"])
    g.add_argument("--residual-tol", type=positive_float, default=DEFAULT_TOLERANCES["residual"])
    g.add_argument("--slack", type=positive_float, default=DEFAULT_TOLERANCES["slack"])
    return p


def _lambdas(p, required=True, default=None):
    for j in (1, 2, 3):
        p.add_argument(f"--l{j}", type=parse_complex, required=required, default=default,
                       help=f"entry of T{j} = [[0, l{j}], [0, 0]]")


def _triple_source(p):
    _lambdas(p, required=False)
    p.add_argument("--triple", default=None,
                   help="JSON file with keys t1, t2, t3 (matrices of [re, im] pairs); overrides --l1..--l3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetra", description="Tetrablock contractions: membership, certificates, dilations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = [_common()]

    p = sub.add_parser("member", parents=common, help="classify a point of C^3")
    for j in (1, 2, 3):
        p.add_argument(f"--x{j}", type=parse_complex, required=True)

    p = sub.add_parser("boundary-sample", parents=common, help="Haar samples of the distinguished boundary")
    p.add_argument("--n", type=positive_int, default=10)

    p = sub.add_parser("radius", parents=common, help="radius of the largest polydisk inside E")
    p.add_argument("--tol", type=positive_float, default=1e-6)
    p.add_argument("--spot-points", type=int, default=10_000, help="spot-check points (0 to skip)")

    p = sub.add_parser("eval", parents=common, help="evaluate a polynomial at a point or on a triple")
    p.add_argument("--term", type=parse_term, action="append", required=True, help="monomial 'i,j,k:coef' (repeatable)")
    for j in (1, 2, 3):
        p.add_argument(f"--x{j}", type=parse_complex, default=None)
    _triple_source(p)

    p = sub.add_parser("supnorm", parents=common, help="sup of |f| over the distinguished boundary (lower estimate)")
    p.add_argument("--term", type=parse_term, action="append", required=True)
    p.add_argument("--samples", type=positive_int, default=4000)

    p = sub.add_parser("knese", parents=common, help="random tridisk polynomials against the tridisk bound")
    p.add_argument("--count", type=positive_int, default=10)
    p.add_argument("--degree", type=positive_int, default=3)
    p.add_argument("--samples", type=positive_int, default=10_000)

    p = sub.add_parser("certify", parents=common, help="certify a triple as a tetrablock contraction")
    _triple_source(p)
    p.add_argument("--method", choices=("schwarz", "sampling", "both"), default="both")
    p.add_argument("--radius-tol", type=positive_float, default=1e-6)
    p.add_argument("--margin", type=float, default=1e-3, help="subtracted from the inscribed radius")
    p.add_argument("--npolys", type=positive_int, default=200)
    p.add_argument("--degree", type=positive_int, default=4)
    p.add_argument("--samples", type=positive_int, default=4000)
    p.add_argument("--adversarial", action="store_true", help="add an LP-optimised probe polynomial")
    p.add_argument("--psi-probes", action="store_true", help="add truncated Psi-function probes")

    for name, text in (("fundamental", "fundamental operators F1, F2"), ("commutator", "commutator [F1, F2]")):
        p = sub.add_parser(name, parents=common, help=text)
        _triple_source(p)

    for name, text in (("dilate", "truncated dilation tuple"), ("verify-dilation", "residuals of the truncated dilation")):
        p = sub.add_parser(name, parents=common, help=text)
        _triple_source(p)
        p.add_argument("--depth", type=positive_int, default=8)
        p.add_argument("--slot", type=positive_int, default=1, help="block position of D in C3")
        p.add_argument("--power", type=positive_int, default=1, help="n in phi3 = z^n (1 gives the basic tuple)")
        if name == "verify-dilation":
            p.add_argument("--interior", type=positive_int, default=None, help="interior blocks (default depth - 2)")
            p.add_argument("--maxdeg", type=positive_int, default=3)

    p = sub.add_parser("counterexample", parents=common, help="non-commuting fundamental operators example")
    _lambdas(p, required=False)
    p.add_argument("--margin", type=float, default=1e-3)
    p.add_argument("--sampling", action="store_true", help="also run the sampling check")

    p = sub.add_parser("batch", parents=common, help="seeded batch of counterexamples")
    p.add_argument("--count", type=positive_int, default=10)
    p.add_argument("--workers", type=positive_int, default=1)
    p.add_argument("--margin", type=float, default=1e-3)
    p.add_argument("--sampling", action="store_true")
    return parser


# --- helpers ------------------------------------------------------------------


def _load_triple(args) -> CommutingTriple:
    if args.triple is not None:
        try:
            with open(args.triple, encoding="utf-8") as fh:
                data = json.load(fh)
            mats = [decode_matrix(data[k]) for k in ("t1", "t2", "t3")]
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise InvalidInputError(f"cannot read triple from {args.triple}: {exc}") from None
        return CommutingTriple.from_matrices(*mats, tol=args.residual_tol)
    lams = (args.l1, args.l2, args.l3)
    if any(v is None for v in lams):
        raise UsageError("give --l1, --l2, --l3 or --triple")
    return nilpotent_family(*lams)


def _nilpotent_lambdas(args):
    if getattr(args, "triple", None) is not None:
        return None
    lams = (args.l1, args.l2, args.l3)
    return None if any(v is None for v in lams) else lams


def _poly(args) -> Poly3:
    coeffs: dict = {}
    for key, c in args.term:
        coeffs[key] = coeffs.get(key, 0) + c
    return Poly3(coeffs)


def _dilation(args, T):
    P = fundamental_operators(T, tol=args.residual_tol)
    if args.power == 1:
        return P, build_theoremB(T, P, args.depth, args.slot)
    return P, build_extended(T, P, depth=args.depth, n=args.power, slot=args.slot)


# --- commands -----------------------------------------------------------------
# each returns (report body, exit code)


def cmd_member(args, cfg):
    p = TetraPoint(args.x1, args.x2, args.x3)
    v = member(p, cfg.tolerances["membership"])
    body = {
        "point": p.as_tuple(),
        "status": v.status,
        "margin": v.margin,
        "criterion_slack": v.criterion_slack,
        "witness": v.witness,
    }
    return body, EXIT_OK


def cmd_boundary_sample(args, cfg):
    pts = boundary_samples(args.n, cfg.seed)
    slack = criterion_slack(pts[:, 0], pts[:, 1], pts[:, 2])
    body = {
        "points": pts,
        "max_abs_x3_defect": float(np.max(np.abs(np.abs(pts[:, 2]) - 1.0))),
        "max_x2_defect": float(np.max(np.abs(pts[:, 1] - np.conj(pts[:, 0]) * pts[:, 2]))),
        "min_criterion_slack": float(np.min(slack)),
    }
    return body, EXIT_OK


def cmd_radius(args, cfg):
    r = inscribed_polydisk_radius(args.tol)
    viol, phases = worst_torus_point(r + 2 * args.tol)
    body = {"radius": r, "tol": args.tol, "violation_just_outside": viol, "worst_phases": phases}
    code = EXIT_OK
    if args.spot_points > 0:
        fails = polydisk_spot_check(r, args.spot_points, cfg.seed)
        body["spot_check"] = {"points": args.spot_points, "failures": fails}
        code = EXIT_OK if fails == 0 else EXIT_FAIL
    return body, code


def cmd_eval(args, cfg):
    f = _poly(args)
    body = {"polynomial": f, "degree": f.degree}
    xs = (args.x1, args.x2, args.x3)
    if all(x is not None for x in xs):
        body["point"] = xs
        body["value"] = eval_point(f, TetraPoint(*xs))
    elif any(x is not None for x in xs):
        raise UsageError("give all of --x1, --x2, --x3")
    if args.triple is not None or _nilpotent_lambdas(args) is not None:
        body["matrix"] = eval_triple(f, _load_triple(args))
    if len(body) == 2:
        raise UsageError("give a point (--x1..--x3) or a triple (--l1..--l3 or --triple)")
    return body, EXIT_OK


def cmd_supnorm(args, cfg):
    f = _poly(args)
    s = sup_norm_bE(f, args.samples, cfg.seed)
    return {"polynomial": f, "samples": args.samples, "sup_estimate": s, "lower_bound": True}, EXIT_OK


def cmd_knese(args, cfg):
    rng = np.random.default_rng([cfg.seed, 2])
    rows = []
    for i in range(args.count):
        g, bound = tridisk_normalize(Poly3.random(rng, args.degree))
        rep = knese_check(g, bound, args.samples, seed=cfg.seed + i)
        rows.append({"index": i, "bound": bound, "max_violation": rep.max_violation, "worst_point": rep.worst_point})
    worst = max(r["max_violation"] for r in rows)
    body = {"count": args.count, "degree": args.degree, "samples": args.samples, "max_violation": worst, "polys": rows}
    return body, EXIT_FAIL if worst > 1e-9 else EXIT_OK


def cmd_certify(args, cfg):
    T = _load_triple(args)
    lams = _nilpotent_lambdas(args)
    body: dict = {}
    ok = True
    if args.method in ("schwarz", "both"):
        if lams is None:
            raise UsageError("the Schwarz-path certificate needs the nilpotent family (--l1..--l3)")
        r = inscribed_polydisk_radius(args.radius_tol) - args.margin
        rep = certify_nilpotent_family(*lams, r)
        body["schwarz"] = {"verdict": rep.verdict, "method": rep.method, "details": rep.details}
        ok &= rep.passed
    if args.method in ("sampling", "both"):
        probes = psi_probes(T) if args.psi_probes else ()
        rep = certify_sampling(
            T, args.npolys, args.degree, args.samples, cfg.seed, cfg.tolerances["slack"],
            probes=probes, adversarial=args.adversarial,
        )
        body["sampling"] = {"verdict": rep.verdict, "method": rep.method, "details": rep.details}
        if rep.witness is not None:
            body["sampling"]["witness"] = rep.witness
        ok &= rep.passed
    body["verdict"] = "certified" if ok else "not-certified"
    return body, EXIT_OK if ok else EXIT_FAIL


def cmd_fundamental(args, cfg):
    P = fundamental_operators(_load_triple(args), tol=cfg.tolerances["residual"])
    body = {"F1": P.f1, "F2": P.f2, "defect": P.defect, "defect_dim": P.defect_dim, "solve_residual": P.solve_residual}
    return body, EXIT_OK


def cmd_commutator(args, cfg):
    P = fundamental_operators(_load_triple(args), tol=cfg.tolerances["residual"])
    C = commutator(P)
    body = {"commutator": C.matrix, "commutator_norm": C.norm, "commuting": C.norm <= cfg.tolerances["residual"]}
    lams = _nilpotent_lambdas(args)
    if lams is not None:
        body["closed_form_norm"] = family_commutator_norm(*lams)
    return body, EXIT_OK


def cmd_dilate(args, cfg):
    T = _load_triple(args)
    _, d = _dilation(args, T)
    body = {
        "depth": d.depth,
        "slot": d.slot,
        "power": args.power,
        "h_dim": d.h_dim,
        "defect_dim": d.defect_dim,
        "V1": d.v1,
        "V2": d.v2,
        "V3": d.v3,
        "symbols": [s.coefficients for s in d.symbols],
        "notes": d.notes,
    }
    return body, EXIT_OK


def cmd_verify_dilation(args, cfg):
    T = _load_triple(args)
    P, d = _dilation(args, T)
    interior = args.interior if args.interior is not None else args.depth - 2
    rep = verify_isometry_conditions(d, interior, T, args.maxdeg).as_dict()
    tol = cfg.tolerances["residual"]
    checks = {k: rep[k] <= tol for k in rep if k != "v2_norm"}
    checks["v2_contractive"] = rep["v2_norm"] <= 1.0 + tol
    body = {
        "depth": args.depth,
        "slot": args.slot,
        "power": args.power,
        "interior_blocks": interior,
        "residuals": rep,
        "checks": checks,
        "fundamental_commutator_norm": commutator(P).norm,
        "passed": all(checks.values()),
    }
    return body, EXIT_OK if body["passed"] else EXIT_FAIL


def _sampling_kwargs(args, cfg):
    return {"seed": cfg.seed, "slack": cfg.tolerances["slack"]} if args.sampling else None


def _record_summary(rec) -> dict:
    rep = certify_report(rec)
    rep.pop("text")
    return rep


def cmd_counterexample(args, cfg):
    lams = _nilpotent_lambdas(args)
    if lams is None and any(v is not None for v in (args.l1, args.l2, args.l3)):
        raise UsageError("give all of --l1, --l2, --l3, or none to draw them from --seed")
    rec = generate(lambdas=lams, seed=None if lams else [cfg.seed], margin=args.margin,
                   sampling=_sampling_kwargs(args, cfg))
    body = certify_report(rec)
    ok = rec.sampling is None or rec.sampling.passed
    return body, EXIT_OK if ok else EXIT_FAIL


def cmd_batch(args, cfg):
    recs = generate_batch(args.count, cfg.seed, workers=args.workers, margin=args.margin,
                          sampling=_sampling_kwargs(args, cfg))
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_record_summary, recs))
    else:
        rows = [_record_summary(r) for r in recs]
    fails = sum(1 for r in recs if r.sampling is not None and not r.sampling.passed)
    norms = [r.commutator_norm for r in recs]
    body = {
        "count": args.count,
        "min_commutator_norm": min(norms),
        "max_commutator_norm": max(norms),
        "sampling_failures": fails,
        "records": rows,
    }
    return body, EXIT_OK if fails == 0 else EXIT_FAIL


HANDLERS = {
    "member": cmd_member,
    "boundary-sample": cmd_boundary_sample,
    "radius": cmd_radius,
    "eval": cmd_eval,
    "supnorm": cmd_supnorm,
    "knese": cmd_knese,
    "certify": cmd_certify,
    "fundamental": cmd_fundamental,
    "commutator": cmd_commutator,
    "dilate": cmd_dilate,
    "verify-dilation": cmd_verify_dilation,
    "counterexample": cmd_counterexample,
    "batch": cmd_batch,
}


def _config(args) -> RunConfig:
    seed = args.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = seed_value(env) if env else 0
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{SEED_ENV}: {exc}") from None
    tol = {"membership": args.membership_tol, "residual": args.residual_tol, "slack": args.slack}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _GLOBAL_KEYS}
    return RunConfig(args.command, seed, tol, args.out, params)


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(to_json(report), indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = _config(args)
        body, code = HANDLERS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tetra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InternalInconsistencyError, InvariantViolationError, NumericalDegeneracyError) as exc:
        print(f"tetra: internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (TetraError, ValueError) as exc:
        print(f"tetra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report = {"schema": SCHEMA, "tetra_version": __version__, "config": cfg.to_dict()}
    if not args.no_timestamp:
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    report["exit_code"] = code
    report.update(body)
    try:
        _emit(report, cfg.output_path)
    except OSError as exc:
        print(f"tetra: error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
