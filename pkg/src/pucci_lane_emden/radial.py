"""Radial shooting for the Lane-Emden system driven by an extremal Pucci operator.

A radial solution ``(u, v)`` satisfies

    u'' = M(-(N-1) m(u')/r - |v|^(p-1) v),
    v'' = M(-(N-1) m(v')/r - |u|^(q-1) u),

with ``(m, M)`` from :func:`~pucci_lane_emden.core.pucci_scalar`. Regular
solutions start at ``u(0) = xi``, ``v(0) = eta`` with zero slopes; exterior
solutions start on a sphere ``r = R`` with Neumann or Dirichlet data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace as dc_replace
from enum import Enum

import numpy as np

from . import _dopri
from ._trajectory import CONE_NAMES, Trajectory
from .core import ProblemParams, pucci_scalar

EV_U, EV_V, EV_UP, EV_VP, EV_HU, EV_HV, EV_FLOOR = range(7)
RADIAL_CSV_HEADER = ["r", "u", "up", "v", "vp", "h1", "h2"]


class OutcomeTag(str, Enum):
    U_FIRST = "UVanishesFirst"
    V_FIRST = "VVanishesFirst"
    BALL = "BallSolution"
    FAST = "GroundStateFast"
    SLOW = "GroundStateSlow"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class RadialState:
    """Point ``(r, u, u', v, v')`` of a radial trajectory."""

    r: float
    u: float
    up: float
    v: float
    vp: float

    def __post_init__(self):
        vals = (self.r, self.u, self.up, self.v, self.vp)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite radial state {vals}")
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r}")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.u, self.up, self.v, self.vp])

    @classmethod
    def from_array(cls, r: float, y) -> "RadialState":
        return cls(float(r), float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    @property
    def cone(self) -> str:
        """Sign pattern of ``(u', v')`` named after the phase-space cone."""
        su = -1 if self.up <= 0 else 1
        sv = -1 if self.vp <= 0 else 1
        return CONE_NAMES[(su, sv)]


@dataclass(frozen=True)
class ShootOptions:
    """Numerical controls for one shot.

    Attributes
    ----------
    rtol : float
        Relative tolerance of the step controller.
    r_max : float
        Outer radius at which a surviving shot is stopped.
    r0 : float or None
        Starting radius of a regular shot (default scale-aware rule).
    eps_zero : float
        Vanishing tolerance relative to ``max(xi, eta)``.
    simultaneity : float
        Relative gap ``|r_u - r_v| / R`` below which both vanish together.
        The partner radius is a linear extrapolation from the first zero.
    partner_gap : float
        Relative gap still accepted when the partner is below ``eps_zero``.
        It separates a partner that is about to vanish (near-critical
        balls) from one that has only decayed, where ``r v / |v'|`` is of
        order one.
    decay_tol : float
        Tolerance on fitted log-log slopes.
    max_steps : int
        Step budget.
    floor : float
        Surviving shots stop once ``max(u, v)`` drops below ``floor`` times
        the data scale, where the accumulated absolute error of the
        integration would swamp the decay fit. ``0`` disables the stop.
    dense : bool
        Keep stage data for dense evaluation.
    """

    rtol: float = 1e-10
    r_max: float = 1e6
    r0: float | None = None
    eps_zero: float = 1e-10
    simultaneity: float = 1e-6
    partner_gap: float = 1e-2
    decay_tol: float = 0.02
    max_steps: int = 400_000
    floor: float = 1e-9
    dense: bool = False

    def with_(self, **kw) -> "ShootOptions":
        return dc_replace(self, **kw)


@dataclass(frozen=True)
class DecayFit:
    """Log-log slopes of ``u`` and ``v`` over the last decade of a shot."""

    slope_u: float
    slope_v: float
    kind: str | None  # "fast", "slow" or None
    window: tuple[float, float]


@dataclass
class ShootOutcome:
    """Result of a single shot.

    Attributes
    ----------
    tag : OutcomeTag
        Terminal classification.
    radius : float
        Radius of the terminating event (``r_max`` for survivors).
    r_u, r_v : float
        Vanishing radii; the partner of the first zero is a one-step
        linear extrapolation, ``inf`` when not reached.
    trajectory : Trajectory or None
        Integrated steps (absent for cheap bisection shots).
    decay : DecayFit or None
        Present for shots that reach ``r_max``.
    n_u, n_v : int
        Number of concavity changes of ``u`` and ``v``.
    """

    tag: OutcomeTag
    radius: float
    r_u: float
    r_v: float
    trajectory: Trajectory | None
    decay: DecayFit | None
    n_u: int
    n_v: int
    params: ProblemParams
    start: RadialState
    final: RadialState
    info: dict = field(default_factory=dict)

    @property
    def vanished(self) -> bool:
        return self.tag in (OutcomeTag.U_FIRST, OutcomeTag.V_FIRST,
                            OutcomeTag.BALL)

    @property
    def survived(self) -> bool:
        return self.tag in (OutcomeTag.FAST, OutcomeTag.SLOW) or (
            self.tag is OutcomeTag.INCONCLUSIVE and self.info.get("reached_rmax"))


def branch_coefficients(params: ProblemParams, up: float, arg: float):
    """Slope of ``m`` at ``up`` and divisor of ``M`` at ``arg``."""
    ms = params.lo if up <= 0 else params.hi
    md = params.lo if arg <= 0 else params.hi
    return ms, md


def rhs_radial(state: RadialState, params: ProblemParams) -> np.ndarray:
    """Derivative ``(u', u'', v', v'')`` of the radial system at ``state``.

    Examples
    --------
    >>> P = ProblemParams(1.0, 2.0, 3, 1.0, 2.0, "+")
    >>> float(rhs_radial(RadialState(1.0, 1.0, -1.0, 1.0, -1.0), P)[1])
    0.5
    """
    r, N = state.r, params.N
    lam, Lam, op = params.lam, params.Lam, params.op
    mu, _ = pucci_scalar(state.up, lam, Lam, op)
    mv, _ = pucci_scalar(state.vp, lam, Lam, op)
    _, upp = pucci_scalar(-(N - 1) * mu / r - _dopri.spow(state.v, params.p),
                          lam, Lam, op)
    _, vpp = pucci_scalar(-(N - 1) * mv / r - _dopri.spow(state.u, params.q),
                          lam, Lam, op)
    return np.array([state.up, upp, state.vp, vpp])


def concavity_signs(state: RadialState, params: ProblemParams) -> tuple[float, float]:
    """Return ``(H1, H2)``; the sign of ``u''`` is minus the sign of ``H1``."""
    mu, _ = pucci_scalar(state.up, params.lam, params.Lam, params.op)
    mv, _ = pucci_scalar(state.vp, params.lam, params.Lam, params.op)
    N, r = params.N, state.r
    h1 = (N - 1) * mu / r + _dopri.spow(state.v, params.p)
    h2 = (N - 1) * mv / r + _dopri.spow(state.u, params.q)
    return float(h1), float(h2)


def default_r0(xi: float, eta: float, params: ProblemParams) -> float:
    """Scale-aware starting radius for the series start.

    ``1e-4 * max(1, xi^((1-q)/2), eta^((1-p)/2))``, capped by the radii
    ``sqrt(eta / xi^q)`` and ``sqrt(xi / eta^p)`` over which the quadratic
    terms change ``v`` and ``u`` by order one (the two rules coincide when
    ``xi = eta``; the cap matters for unbalanced central values).
    """
    p, q = params.p, params.q
    base = max(1.0, xi ** ((1.0 - q) / 2.0), eta ** ((1.0 - p) / 2.0))
    cap = min(np.sqrt(eta / xi ** q), np.sqrt(xi / eta ** p))
    return 1e-4 * float(min(base, cap))


def series_start(xi: float, eta: float, params: ProblemParams,
                 r0: float | None = None) -> RadialState:
    """Taylor start of the regular solution with central values ``(xi, eta)``.

    Keeps terms through ``r**4``:
    ``u = xi - a r^2 + c r^4`` with ``a = eta^p / (2 N iota)`` and
    ``c = p eta^(p-1) xi^q / (8 N (N+2) iota^2)``, and symmetrically for ``v``.
    ``iota`` is ``lam`` for the maximal and ``Lam`` for the minimal operator.
    """
    if not (xi > 0 and eta > 0):
        raise ValueError("central values must be positive")
    if r0 is None:
        r0 = default_r0(xi, eta, params)
    N, p, q, io = params.N, params.p, params.q, params.iota_concave
    a_u = eta ** p / (2 * N * io)
    a_v = xi ** q / (2 * N * io)
    c_u = p * eta ** (p - 1) * xi ** q / (8 * N * (N + 2) * io ** 2)
    c_v = q * xi ** (q - 1) * eta ** p / (8 * N * (N + 2) * io ** 2)
    r2 = r0 * r0
    return RadialState(r0,
                       xi - a_u * r2 + c_u * r2 * r2,
                       -2 * a_u * r0 + 4 * c_u * r2 * r0,
                       eta - a_v * r2 + c_v * r2 * r2,
                       -2 * a_v * r0 + 4 * c_v * r2 * r0)


def _run(state: RadialState, params: ProblemParams, opts: ShootOptions,
         keep: int, scale: float) -> Trajectory:
    ev_dir = np.array([-1, -1, 0, 0, 0, 0, -1, 0], dtype=np.int64)
    ev_act = np.array([3, 3, 2, 2, 2, 2, 3, 0], dtype=np.int64)
    # a state that starts at a zero with nonpositive slope gives nothing to track
    br0 = np.array([-1.0, -1.0, -1.0, -1.0])
    out = _dopri.integrate(_dopri.KIND_RADIAL, state.r, state.array,
                           float(opts.r_max),
                           params.kernel_vector(blow=float(opts.floor) * scale), br0,
                           float(opts.rtol), 1e-300, 1.0, np.inf,
                           int(opts.max_steps), keep, ev_dir, ev_act,
                           np.zeros((0, 4)), 0.0, 0.0)
    return Trajectory.from_kernel(out, keep)


ZERO_APPROACH = 1e3


def _integrate(state: RadialState, params: ProblemParams, opts: ShootOptions,
               keep: int, scale: float) -> Trajectory:
    """Run a shot; a floor stop on the way into a zero is resumed without floor.

    Decaying tails keep ``r|u'|/u`` and ``r|v'|/v`` bounded, while both blow up
    when a component is about to vanish.
    """
    traj = _run(state, params, opts, keep, scale)
    if not (traj.status == _dopri.ST_EVENT and traj.last_event == EV_FLOOR):
        return traj
    r, (u, up, v, vp) = traj.end
    if max(-r * up / u, -r * vp / v) < ZERO_APPROACH:
        return traj
    rest = _run(RadialState.from_array(r, traj.y[-1]), params,
                opts.with_(floor=0.0), keep, scale)
    return traj.concat(rest)


def spiral_decades(params: ProblemParams) -> float:
    """Length in decades of one turn of the spiral around ``M0``, ``0`` if none.

    Slow-decay shots approach ``M0`` along a focus, so ``log u`` oscillates
    with this period in ``log r``.
    """
    from .phase import m0_spiral_real_part, stationary_coordinates, jacobian_eigen
    if np.isnan(m0_spiral_real_part(params)):
        return 0.0
    vals, _, _ = jacobian_eigen(stationary_coordinates(params)["M0"], params)
    return float(2 * np.pi / np.max(np.abs(vals.imag)) / np.log(10.0))


def _slopes(r, y, lo):
    m = r >= lo
    if m.sum() < 3 or np.any(y[m, 0] <= 0) or np.any(y[m, 2] <= 0):
        return np.nan, np.nan
    # resample on a uniform log grid so dense step clusters carry no extra weight
    lr = np.log(r[m])
    g = np.linspace(lr[0], lr[-1], 256)
    su = np.polyfit(g, np.interp(g, lr, np.log(y[m, 0])), 1)[0]
    sv = np.polyfit(g, np.interp(g, lr, np.log(y[m, 2])), 1)[0]
    return float(su), float(sv)


def _chord_slopes(r, y, lo):
    """Mean log-log slopes between ``lo`` and the end (chord, not fit)."""
    lr = np.log(r)
    a, b = np.log(lo), lr[-1]
    if a < lr[0] or b - a <= 0:
        return np.nan, np.nan
    out = []
    for k in (0, 2):
        if np.any(y[lr >= a, k] <= 0):
            return np.nan, np.nan
        lw = np.log(np.maximum(y[:, k], 1e-300))
        out.append(float((lw[-1] - np.interp(a, lr, lw)) / (b - a)))
    return tuple(out)


def fit_decay(traj: Trajectory, params: ProblemParams, tol: float = 0.02,
              decades: float = 1.0) -> DecayFit:
    """Log-log slopes of ``u`` and ``v`` near the end of ``traj``.

    ``fast`` means one least-squares slope over the last ``decades`` is within
    ``tol`` of ``-(n_tilde - 2)``. ``slow`` means the mean slopes are within
    ``tol`` of ``-alpha`` and ``-beta``; when ``M0`` is a focus they are taken
    over a whole number of spiral turns (at least ``decades`` long), which
    cancels the oscillation of ``log u`` around its trend.
    """
    r = traj.x
    r_end = r[-1]
    c = params.constants
    su, sv = _slopes(r, traj.y, r_end / 10 ** decades)
    if np.isnan(su):
        return DecayFit(np.nan, np.nan, None, (r_end / 10 ** decades, r_end))
    fast_gap = min(abs(su + c.n_tilde - 2), abs(sv + c.n_tilde - 2))
    turn = spiral_decades(params)
    slow_dec = turn * np.ceil(decades / turn) if turn > 0 else decades
    ssu, ssv = _chord_slopes(r, traj.y, r_end / 10 ** slow_dec)
    slow_gap = (max(abs(ssu + c.alpha), abs(ssv + c.beta))
                if not np.isnan(ssu) else np.inf)
    kind, win = None, decades
    if fast_gap <= tol and (slow_gap > tol or fast_gap <= slow_gap):
        kind = "fast"
    elif slow_gap <= tol:
        kind, su, sv, win = "slow", ssu, ssv, slow_dec
    return DecayFit(su, sv, kind, (float(r_end / 10 ** win), float(r_end)))


def _count_kinks(traj: Trajectory) -> tuple[int, int]:
    return (int(np.sum(traj.event_id == EV_HU)),
            int(np.sum(traj.event_id == EV_HV)))


def _finish(traj: Trajectory, params: ProblemParams, opts: ShootOptions,
            start: RadialState, scale: float, keep: int) -> ShootOutcome:
    r_end, y_end = traj.end
    final = RadialState.from_array(r_end, y_end)
    n_u, n_v = _count_kinks(traj)
    info: dict = {"status": traj.status}
    stops = [i for i in traj.event_id if i in (EV_U, EV_V)]
    if traj.status == _dopri.ST_EVENT and stops:
        u_hit = EV_U in stops
        v_hit = EV_V in stops
        u, up, v, vp = y_end
        if u_hit and v_hit:
            r_u = r_v = r_end
        elif u_hit:
            r_u = r_end
            r_v = r_end + v / -vp if vp < 0 else np.inf
        else:
            r_v = r_end
            r_u = r_end + u / -up if up < 0 else np.inf
        gap = abs(r_u - r_v)
        partner = v if not v_hit else u
        eps = opts.eps_zero * scale
        together = (u_hit and v_hit) or gap <= opts.simultaneity * r_end or (
            abs(partner) <= eps and gap <= opts.partner_gap * r_end)
        if together:
            tag = OutcomeTag.BALL
        else:
            tag = OutcomeTag.U_FIRST if u_hit else OutcomeTag.V_FIRST
        info["gap"] = gap / r_end
        return ShootOutcome(tag, r_end, r_u, r_v, traj if keep else None, None,
                            n_u, n_v, params, start, final, info)
    floored = traj.status == _dopri.ST_EVENT and traj.last_event == EV_FLOOR
    if traj.status == _dopri.ST_END or floored:
        info["reached_rmax"] = True
        info["reached_floor"] = bool(floored)
        decay = fit_decay(traj, params, opts.decay_tol) if keep else None
        if decay is None or decay.kind is None:
            tag = OutcomeTag.INCONCLUSIVE
        else:
            tag = OutcomeTag.FAST if decay.kind == "fast" else OutcomeTag.SLOW
        return ShootOutcome(tag, r_end, np.inf, np.inf, traj if keep else None,
                            decay, n_u, n_v, params, start, final, info)
    info["reason"] = {_dopri.ST_MAXSTEPS: "step budget exhausted",
                      _dopri.ST_STEPFAIL: "step size underflow"}.get(
        traj.status, "integration stopped")
    return ShootOutcome(OutcomeTag.INCONCLUSIVE, r_end, np.inf, np.inf,
                        traj if keep else None, None, n_u, n_v, params, start,
                        final, info)


def shoot(xi: float, eta: float, params: ProblemParams,
          opts: ShootOptions | None = None, keep: int = 1) -> ShootOutcome:
    """Integrate the regular solution with ``u(0) = xi``, ``v(0) = eta``.

    The shot stops at the first zero of ``u`` or ``v`` or at ``opts.r_max``.
    Survivors are tagged by the decay of the last decade.

    Parameters
    ----------
    keep : int
        0 keeps only the end state (fast bisection shots), 1 keeps the
        accepted steps, 2 adds dense-output data.
    """
    opts = opts or ShootOptions()
    if opts.dense:
        keep = 2
    start = series_start(xi, eta, params, opts.r0)
    traj = _integrate(start, params, opts, keep, max(xi, eta))
    return _finish(traj, params, opts, start, max(xi, eta), keep)


def exterior_shoot(R: float, ku: float, kv: float, params: ProblemParams,
                   opts: ShootOptions | None = None, kind: str = "neumann",
                   keep: int = 1) -> ShootOutcome:
    """Integrate an exterior solution from the sphere ``r = R`` outwards.

    ``kind='neumann'`` uses ``u(R) = ku``, ``v(R) = kv``, ``u'(R) = v'(R) = 0``;
    ``kind='dirichlet'`` uses ``u(R) = v(R) = 0``, ``u'(R) = ku``, ``v'(R) = kv``.
    The branch of the operator follows the signs of ``(u', v')`` and of the
    second-order balance; every switch is located as an event.
    """
    opts = opts or ShootOptions()
    if opts.dense:
        keep = 2
    if not R > 0:
        raise ValueError("R must be positive")
    if kind == "neumann":
        if not (ku > 0 and kv > 0):
            raise ValueError("Neumann data must be positive")
        start = RadialState(R, ku, 0.0, kv, 0.0)
        scale = max(ku, kv)
    elif kind == "dirichlet":
        if not (ku > 0 and kv > 0):
            raise ValueError("Dirichlet slopes must be positive")
        start = RadialState(R, 0.0, ku, 0.0, kv)
        scale = max(ku, kv) * R
    else:
        raise ValueError(f"unknown exterior problem {kind!r}")
    traj = _integrate(start, params, opts, keep, scale)
    out = _finish(traj, params, opts, start, scale, keep)
    out.info["kind"] = kind
    return out


def concavity_change_count(outcome_or_traj) -> tuple[int, int]:
    """Number of sign changes of ``u''`` and ``v''`` along a shot."""
    traj = getattr(outcome_or_traj, "trajectory", outcome_or_traj)
    if traj is None:
        o = outcome_or_traj
        return o.n_u, o.n_v
    return _count_kinks(traj)


def cone_tags(traj: Trajectory) -> list[str]:
    """Cone name in force at every accepted point of a radial trajectory."""
    return [CONE_NAMES[(int(b[0]), int(b[1]))] for b in traj.branch]


def trajectory_rows(traj: Trajectory, params: ProblemParams) -> np.ndarray:
    """Columns ``r, u, up, v, vp, h1, h2`` of a radial trajectory."""
    rows = np.empty((len(traj.x), 7))
    for i, (r, y) in enumerate(zip(traj.x, traj.y)):
        h1, h2 = concavity_signs(RadialState.from_array(r, y), params)
        rows[i] = (r, y[0], y[1], y[2], y[3], h1, h2)
    return rows


def write_radial_csv(path, traj: Trajectory, params: ProblemParams,
                     resample: np.ndarray | None = None) -> None:
    """Write a radial trajectory; ``resample`` evaluates dense output on a grid."""
    if resample is not None:
        ys = traj.evaluate(resample)
        tr = Trajectory(np.asarray(resample, float), ys,
                        np.zeros_like(ys), None, None, traj.event_x,
                        traj.event_y, traj.event_id, traj.status)
        rows = trajectory_rows(tr, params)
    else:
        rows = trajectory_rows(traj, params)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RADIAL_CSV_HEADER)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
