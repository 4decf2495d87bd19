"""Critical shooting parameter, (p, q) verdicts, curve tracing and theorem scans.

For fixed ``xi`` the regular shot with a large ``eta`` loses ``u`` first and
one with a small ``eta`` loses ``v`` first. The boundary value ``eta*`` is
found by bisection; its shot is either a ball solution (both components
vanish on the same sphere, verdict ``C``) or a positive entire solution
(verdict ``G``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ProblemParams, Side, hyperbola_side, rd_threshold, region_flags
from .radial import OutcomeTag, ShootOptions, ShootOutcome, exterior_shoot, shoot

SCAN_CSV_HEADER = ["p", "q", "verdict", "eta_star", "slope_c", "R_or_decay",
                   "n_u", "n_v"]
CURVE_CSV_HEADER = ["p", "q_star", "bracket_lo", "bracket_hi"]


class Verdict(str, Enum):
    C = "C"
    G = "G"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassifyOptions:
    """Controls for :func:`critical_eta`.

    Attributes
    ----------
    shoot : ShootOptions
        Options of the final (recorded) shots.
    bracket_k : tuple of int
        Exponent range of the ``2**k`` grid used to bracket ``eta*``.
    bisect_rtol : float
        Stop bisecting once the bracket is this narrow relative to ``eta*``;
        zero means continue to floating-point resolution.
    bisect_rmax : float
        Outer radius of bisection shots. It is far beyond ``shoot.r_max`` so
        that near-critical shots still reveal which component vanishes first.
    retry : bool
        Re-run an ambiguous boundary shot once with ``10 * r_max``.
    """

    shoot: ShootOptions = field(default_factory=ShootOptions)
    bracket_k: tuple[int, int] = (-20, 20)
    bisect_rtol: float = 0.0
    bisect_rmax: float = 1e16
    retry: bool = True


@dataclass
class CriticalShot:
    """Outcome of the search for ``eta*`` at fixed ``xi``.

    Attributes
    ----------
    eta_star : float
        Best estimate of the critical central value of ``v``.
    bracket : tuple of float
        Final bisection bracket ``(lo, hi)``; ``lo`` loses ``v`` first.
    slope_c : float
        ``eta* / xi**((q+1)/(p+1))``, constant along the scaling orbit.
    outcome : ShootOutcome or None
        Recorded shot at ``eta*``.
    verdict : Verdict
        ``C`` for a ball witness, ``G`` for an entire-solution witness.
    n_shots : int
        Number of shots spent.
    """

    xi: float
    eta_star: float
    bracket: tuple[float, float]
    slope_c: float
    outcome: ShootOutcome | None
    verdict: Verdict
    n_shots: int
    double_witness: bool = False
    note: str = ""

    @property
    def R_or_decay(self):
        o = self.outcome
        if o is None:
            return ""
        if self.verdict is Verdict.C:
            return o.radius
        if o.tag is OutcomeTag.FAST:
            return "fast"
        if o.tag is OutcomeTag.SLOW:
            return "slow"
        return ""


def _side(o: ShootOutcome) -> int:
    """+1 when u vanishes first, -1 when v does, 0 for survivors and ties."""
    if not o.vanished:
        return 0
    if o.r_u < o.r_v:
        return 1
    if o.r_v < o.r_u:
        return -1
    return 0


def _witness(o: ShootOutcome) -> Verdict | None:
    if o.tag is OutcomeTag.BALL:
        return Verdict.C
    if o.tag in (OutcomeTag.FAST, OutcomeTag.SLOW):
        return Verdict.G
    return None


def critical_eta(xi: float, params: ProblemParams,
                 opts: ClassifyOptions | None = None) -> CriticalShot:
    """Locate ``eta*`` for the central value ``xi`` and classify its shot.

    The bracket is searched on ``eta = c0 * 2**k`` with
    ``c0 = xi**((q+1)/(p+1))`` (the scaling orbit of ``eta = 1`` at ``xi = 1``).
    """
    opts = opts or ClassifyOptions()
    p, q = params.p, params.q
    bis_opts = opts.shoot.with_(r_max=opts.bisect_rmax, floor=0.0, dense=False)
    c0 = xi ** ((q + 1) / (p + 1))
    shots = 0
    cache: dict[float, ShootOutcome] = {}

    def run(eta: float) -> ShootOutcome:
        nonlocal shots
        if eta not in cache:
            shots += 1
            cache[eta] = shoot(xi, eta, params, bis_opts, keep=0)
        return cache[eta]

    k_lo, k_hi = opts.bracket_k
    lo = hi = None
    exact = None
    k = 0
    s = _side(run(c0))
    if s == 0:
        exact = c0
    elif s > 0:
        hi = c0
        for k in range(-1, k_lo - 1, -1):
            e = c0 * 2.0 ** k
            s = _side(run(e))
            if s <= 0:
                if s == 0:
                    exact = e
                lo = e
                break
            hi = e
    else:
        lo = c0
        for k in range(1, k_hi + 1):
            e = c0 * 2.0 ** k
            s = _side(run(e))
            if s >= 0:
                if s == 0:
                    exact = e
                hi = e
                break
            lo = e
    if exact is None and (lo is None or hi is None):
        return CriticalShot(xi, np.nan, (np.nan, np.nan), np.nan, None,
                            Verdict.INCONCLUSIVE, shots,
                            note="no bracket on the default eta grid")
    if exact is None:
        while True:
            if opts.bisect_rtol > 0 and hi - lo <= opts.bisect_rtol * hi:
                break
            m = 0.5 * (lo + hi)
            if not (lo < m < hi):
                break
            s = _side(run(m))
            if s > 0:
                hi = m
            elif s < 0:
                lo = m
            else:
                exact = m
                break
    candidates = [exact] if exact is not None else [lo, hi]
    bracket = (exact, exact) if exact is not None else (lo, hi)
    outcomes = []
    for e in candidates:
        o = shoot(xi, e, params, opts.shoot, keep=max(1, 2 if opts.shoot.dense else 1))
        shots += 1
        if (opts.retry and _witness(o) is None and
                (o.survived or o.radius > 0.5 * opts.shoot.r_max)):
            o = shoot(xi, e, params, opts.shoot.with_(r_max=10 * opts.shoot.r_max),
                      keep=1)
            shots += 1
            o.info["retried"] = True
        outcomes.append((e, o))
    witnesses = {_witness(o) for _, o in outcomes} - {None}
    double = len(witnesses) > 1
    best = None
    for e, o in outcomes:
        w = _witness(o)
        if w is Verdict.C and (best is None or o.info.get("gap", 1) <
                               best[1].info.get("gap", 1)):
            best = (e, o)
    if best is None:
        for e, o in outcomes:
            if _witness(o) is Verdict.G:
                best = (e, o)
                break
    if best is None:
        e, o = max(outcomes, key=lambda eo: eo[1].radius)
        verdict = Verdict.INCONCLUSIVE
        note = "boundary shot gave no witness"
    else:
        e, o = best
        verdict = _witness(o)
        note = ""
    if double:
        verdict = Verdict.INCONCLUSIVE
        note = "ball and entire-solution witnesses at the same bracket"
    return CriticalShot(xi, e, bracket, float(e / c0), o, verdict, shots,
                        double_witness=double, note=note)


@dataclass
class PQVerdict:
    """Verdict for one exponent pair."""

    params: ProblemParams
    verdict: Verdict
    shot: CriticalShot

    @property
    def row(self) -> list:
        s = self.shot
        o = s.outcome
        return [self.params.p, self.params.q, self.verdict.value, s.eta_star,
                s.slope_c, s.R_or_decay, o.n_u if o else "", o.n_v if o else ""]


def classify_pq(params: ProblemParams, xi: float = 1.0,
                opts: ClassifyOptions | None = None) -> PQVerdict:
    """Classify (p, q) by the boundary shot at central value ``xi``."""
    shot = critical_eta(xi, params, opts)
    return PQVerdict(params, shot.verdict, shot)


@dataclass
class CurvePoint:
    p: float
    q_star: float
    bracket: tuple[float, float]
    n_classifications: int


def _trace_one(args) -> CurvePoint:
    p, base, q_range, tol, opts = args
    q_lo = q_range[0] if q_range[0] is not None else max(1.0 / p * 1.05,
                                                          1.0 / p + 0.05)
    q_hi = float(q_range[1])
    n = 0

    def is_c(q):
        nonlocal n
        n += 1
        v = classify_pq(base.replace(p=p, q=q), 1.0, opts)
        return v.verdict is Verdict.C

    if not is_c(q_lo) or is_c(q_hi):
        return CurvePoint(p, np.nan, (q_lo, q_hi), n)
    while q_hi - q_lo > tol:
        m = 0.5 * (q_lo + q_hi)
        if is_c(m):
            q_lo = m
        else:
            q_hi = m
    return CurvePoint(p, 0.5 * (q_lo + q_hi), (q_lo, q_hi), n)


def trace_critical_curve(p_grid, base: ProblemParams, q_range=(None, 60.0),
                         tol: float = 1e-3, opts: ClassifyOptions | None = None,
                         map_fn=map) -> list[CurvePoint]:
    """Trace the existence/nonexistence frontier ``q*(p)``.

    For each ``p`` the predicate "the boundary shot is a ball" is bisected in
    ``q`` between a lower value (default just above ``1/p``) and
    ``q_range[1]`` until the bracket is ``tol`` wide. ``q_star`` is the
    bracket midpoint; ``nan`` when the end points do not straddle the frontier
    (a wider ``q_range`` is needed there). ``map_fn`` may be a pool's ``map``;
    the output order follows ``p_grid``.
    """
    jobs = [(float(p), base, q_range, tol, opts) for p in p_grid]
    return list(map_fn(_trace_one, jobs))


# ---------------------------------------------------------------- theorem scans

EXTERIOR_GRID = tuple(10.0 ** np.linspace(-2.0, 2.0, 10))


@dataclass
class ScanRow:
    """One sample of a theorem scan.

    ``label`` is the classification verdict for shooting-based checks and a
    short outcome word for the exterior sweeps. ``passed`` is ``None`` when
    the theorem makes no prediction at the sample.
    """

    p: float
    q: float
    label: str
    passed: bool | None
    verdict: PQVerdict | None = None
    detail: dict = field(default_factory=dict)

    @property
    def row(self) -> list:
        if self.verdict is not None:
            r = self.verdict.row
            r[2] = self.label
            return r
        return [self.p, self.q, self.label, "", "", "", "", ""]


def _check_classify(expect):
    def check(params, opts):
        v = classify_pq(params, 1.0, opts)
        e = expect(params) if expect else None
        if e is None and expect is not None:
            passed = None
        elif expect is None:
            passed = v.verdict is not Verdict.INCONCLUSIVE and not v.shot.double_witness
        else:
            passed = v.verdict is e
        return ScanRow(params.p, params.q, v.verdict.value, passed, v,
                       {"expected": e.value if e else None, "note": v.shot.note})
    return check


def _expect_laplacian(params):
    if params.lam != params.Lam:
        return None
    return Verdict.C if region_flags(params).H is Side.BELOW else Verdict.G


def _expect_rd(params):
    return Verdict.C if region_flags(params).in_Rd else None


def _expect_ru(params):
    return Verdict.G if region_flags(params).in_Ru else None


def _check_concavity(params, opts):
    f = region_flags(params)
    applies = f.in_Rd or (params.lam == params.Lam and f.H is not Side.ABOVE)
    v = classify_pq(params, 1.0, opts)
    o = v.shot.outcome
    counts = (o.n_u, o.n_v) if o is not None else None
    passed = (counts == (1, 1)) if applies else None
    return ScanRow(params.p, params.q, v.verdict.value, passed, v,
                   {"counts": counts})


def _exterior_check(kind, applies):
    def check(params, opts):
        sh = (opts or ClassifyOptions()).shoot
        tags = {}
        for ku in EXTERIOR_GRID:
            for kv in EXTERIOR_GRID:
                o = exterior_shoot(1.0, ku, kv, params, sh, kind=kind, keep=1)
                tags[o.tag.value] = tags.get(o.tag.value, 0) + 1
        survivors = sum(n for t, n in tags.items()
                        if t not in (OutcomeTag.U_FIRST.value, OutcomeTag.V_FIRST.value,
                                     OutcomeTag.BALL.value))
        label = "NoSurvivor" if survivors == 0 else f"Survivors:{survivors}"
        passed = (survivors == 0) if applies(params) else None
        return ScanRow(params.p, params.q, label, passed, None, {"tags": tags})
    return check


def _in_closed_rd(params):
    return hyperbola_side(params.p, params.q, rd_threshold(params)) is not Side.ABOVE


def _dirichlet_applies(params):
    c = params.constants
    return params.lam == params.Lam and c.alpha + c.beta >= params.N - 2 - 1e-12


THEOREMS = {
    "exclusion": ("every pair receives exactly one witness", _check_classify(None)),
    "laplacian": ("equal ellipticity: balls below the critical hyperbola, "
                  "entire solutions on and above it", _check_classify(_expect_laplacian)),
    "nonexistence": ("pairs in R_d admit balls and no entire solution",
                     _check_classify(_expect_rd)),
    "existence": ("pairs in R_u admit entire solutions", _check_classify(_expect_ru)),
    "concavity": ("the boundary shot changes concavity once per component",
                  _check_concavity),
    "exterior-neumann": ("no positive exterior Neumann solution in the closure of R_D",
                         _exterior_check("neumann", _in_closed_rd)),
    "exterior-dirichlet": ("no positive exterior Dirichlet solution when "
                           "alpha + beta >= N - 2 and lam = Lam",
                           _exterior_check("dirichlet", _dirichlet_applies)),
}


@dataclass
class ScanReport:
    theorem: str
    rows: list[ScanRow]

    @property
    def n_inconclusive(self) -> int:
        return sum(r.label == Verdict.INCONCLUSIVE.value for r in self.rows)

    @property
    def n_double(self) -> int:
        return sum(bool(r.verdict and r.verdict.shot.double_witness) for r in self.rows)

    @property
    def n_fail(self) -> int:
        return sum(r.passed is False for r in self.rows)

    @property
    def n_checked(self) -> int:
        return sum(r.passed is not None for r in self.rows)

    @property
    def inconclusive_rate(self) -> float:
        return self.n_inconclusive / max(1, len(self.rows))

    @property
    def ok(self) -> bool:
        return self.n_fail == 0


def _scan_one(args) -> ScanRow:
    theorem, p, q, base, opts = args
    return THEOREMS[theorem][1](base.replace(p=p, q=q), opts)


def theorem_scan(theorem: str, p_values, q_values, base: ProblemParams,
                 opts: ClassifyOptions | None = None, map_fn=map) -> ScanReport:
    """Run the desk-scale check of ``theorem`` at every superlinear grid pair.

    Sample failures are collected in the report and never abort the scan.
    Rows keep the grid order whatever ``map_fn`` does.
    """
    if theorem not in THEOREMS:
        raise KeyError(f"unknown theorem {theorem!r}; choose from {sorted(THEOREMS)}")
    jobs = [(theorem, float(p), float(q), base, opts)
            for p in p_values for q in q_values if p * q > 1]
    return ScanReport(theorem, list(map_fn(_scan_one, jobs)))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_scan_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(x) for x in r.row])


def write_curve_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_CSV_HEADER)
        for c in points:
            w.writerow([_fmt(c.p), _fmt(c.q_star), _fmt(c.bracket[0]),
                        _fmt(c.bracket[1])])
