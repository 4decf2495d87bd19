"""Quadratic phase-space system, stationary points, invariant manifolds and partitions.

With ``t = ln r`` the radial system becomes autonomous in

    X = -r u'/u,  Y = -r v'/v,  Z = -r v^p/u',  W = -r u^q/v'.

In each branch both components obey

    X' = X (X - (n_u - 2) + Z/i_u),   Z' = Z (n_u - p Y - Z/i_u),
    Y' = Y (Y - (n_v - 2) + W/i_v),   W' = W (n_v - q X - W/i_v),

where ``(n_u, i_u)`` is selected by the sign of ``u'`` (the cone) and by the side
of the concavity plane ``Z = lo (N-1)`` (``lo = lam`` for the maximal operator,
``Lam`` for the minimal one).
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import _dopri
from ._trajectory import CONE_NAMES, CONE_SIGNS, Trajectory
from .core import ProblemParams
from .radial import RadialState

PHASE_CSV_HEADER = ["t", "X", "Y", "Z", "W", "cone"]
EV_PLANE_Z, EV_PLANE_W, EV_LX, EV_LY = 0, 1, 2, 3
EV_BLOW = (4, 5, 6, 7)
COMPONENTS = "XYZW"
POINT_NAMES = ("O", "N0", "M0", "A0", "I0", "J0", "K0", "L0", "P0", "G0",
               "Q0", "H0")


@dataclass(frozen=True)
class PhaseState:
    """Point of the phase system with its cone tag.

    The cone fixes the signs: ``K`` all positive, ``K0`` all negative,
    ``K1`` with ``X, Z > 0 > Y, W`` and ``K2`` the reverse. Zeros (closure of the
    cone) are allowed.
    """

    t: float
    X: float
    Y: float
    Z: float
    W: float
    cone: str = "K"

    def __post_init__(self):
        if self.cone not in CONE_SIGNS:
            raise ValueError(f"unknown cone {self.cone!r}")
        vals = (self.t, self.X, self.Y, self.Z, self.W)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite phase state {vals}")
        su, sv = CONE_SIGNS[self.cone]
        for v, s in ((self.X, su), (self.Z, su), (self.Y, sv), (self.W, sv)):
            if v * s > 0:
                raise ValueError(f"state {vals} is outside the closure of "
                                 f"cone {self.cone}")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z, self.W])

    @classmethod
    def from_array(cls, t, y, cone="K") -> "PhaseState":
        return cls(float(t), float(y[0]), float(y[1]), float(y[2]),
                   float(y[3]), cone)


def to_phase(state: RadialState, params: ProblemParams) -> PhaseState:
    """Map a radial state with ``u, v > 0`` and nonzero slopes to phase variables."""
    r, u, up, v, vp = state.r, state.u, state.up, state.v, state.vp
    if not (u > 0 and v > 0):
        raise ValueError("phase variables need u, v > 0")
    if up == 0 or vp == 0:
        raise ValueError("phase variables need u', v' != 0")
    X = -r * up / u
    Y = -r * vp / v
    Z = -r * v ** params.p / up
    W = -r * u ** params.q / vp
    cone = CONE_NAMES[(-1 if up < 0 else 1, -1 if vp < 0 else 1)]
    return PhaseState(np.log(r), X, Y, Z, W, cone)


def from_phase(ps: PhaseState, params: ProblemParams) -> RadialState:
    """Invert :func:`to_phase` with the closed-form reconstruction of ``u, v``."""
    c = params.constants
    d = params.p * params.q - 1.0
    r = np.exp(ps.t)
    xz = ps.X * ps.Z
    yw = ps.Y * ps.W
    if not (xz > 0 and yw > 0):
        raise ValueError("reconstruction needs XZ > 0 and YW > 0")
    u = r ** -c.alpha * xz ** (1.0 / d) * yw ** (params.p / d)
    v = r ** -c.beta * xz ** (params.q / d) * yw ** (1.0 / d)
    return RadialState(float(r), float(u), float(-ps.X * u / r), float(v),
                       float(-ps.Y * v / r))


def _branch_vector(y, cone: str, params: ProblemParams) -> np.ndarray:
    su, sv = CONE_SIGNS[cone]
    br = np.array([float(su), float(sv), -1.0, -1.0])
    par = params.kernel_vector()
    _dopri.refresh_branch(_dopri.KIND_PHASE, 0.0, np.asarray(y, float), par, br)
    return br


def branch_pairs(y, cone: str, params: ProblemParams):
    """Effective ``(n, iota)`` of the u- and v-equations at phase point ``y``."""
    br = _branch_vector(y, cone, params)
    par = params.kernel_vector()
    return (_dopri.branch_pair(par, br[0], br[2]),
            _dopri.branch_pair(par, br[1], br[3]))


def rhs_phase(ps: PhaseState | np.ndarray, params: ProblemParams,
              cone: str | None = None) -> np.ndarray:
    """Vector field of the phase system.

    ``ps`` may be a :class:`PhaseState` or a raw length-4 array (then ``cone``
    defaults to ``K``). Raw arrays are not sign-checked, which lets the
    catalog evaluate points that fall outside the closed cone.
    """
    if isinstance(ps, PhaseState):
        y, cone = ps.array, ps.cone
    else:
        y, cone = np.asarray(ps, float), cone or "K"
    br = _branch_vector(y, cone, params)
    out = np.empty(4)
    _dopri.rhs(_dopri.KIND_PHASE, 0.0, y, params.kernel_vector(), br, out)
    return out


# ------------------------------------------------------------------ catalog

@dataclass
class StationaryPoint:
    """Stationary point of the phase system in cone ``K``.

    Attributes
    ----------
    name : str
    coords : ndarray
    in_closure : bool
        True when all coordinates are nonnegative (the point is in the
        closed cone and therefore relevant for nonnegative solutions).
    eigenvalues : ndarray of complex
    eigenvectors : ndarray
        Columns matching ``eigenvalues``.
    dims : dict
        Counts of eigenvalues with negative, positive and (numerically)
        zero real part.
    """

    name: str
    coords: np.ndarray
    in_closure: bool
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    dims: dict = field(default_factory=dict)

    def as_json(self) -> dict:
        return {"name": self.name,
                "coords": [float(c) for c in self.coords],
                "eigenvalues": [[float(z.real), float(z.imag)]
                                for z in self.eigenvalues],
                "dims": dict(self.dims)}


def stationary_coordinates(params: ProblemParams) -> dict[str, np.ndarray]:
    """Closed-form coordinates of the twelve stationary points in ``K``."""
    c = params.constants
    p, q, N = params.p, params.q, params.N
    nt, ic, icc = c.n_tilde, params.iota_convex, params.iota_concave
    L = nt - 2.0
    a, b = c.alpha, c.beta
    zp = ic * (nt - q * L)
    zq = ic * (nt - p * L)
    pts = {
        "O": (0.0, 0.0, 0.0, 0.0),
        "N0": (0.0, 0.0, icc * N, icc * N),
        "M0": (a, b, ic * (L - a), ic * (L - b)),
        "A0": (L, L, 0.0, 0.0),
        "I0": (L, 0.0, 0.0, 0.0),
        "J0": (0.0, L, 0.0, 0.0),
        "K0": (0.0, 0.0, icc * N, 0.0),
        "L0": (0.0, 0.0, 0.0, icc * N),
        "P0": (L, q * L - 2.0, 0.0, zp),
        "G0": (L, 0.0, 0.0, zp),
        "Q0": (p * L - 2.0, L, zq, 0.0),
        "H0": (0.0, L, zq, 0.0),
    }
    return {k: np.array(v, dtype=float) for k, v in pts.items()}


def jacobian(y, params: ProblemParams, cone: str = "K") -> np.ndarray:
    """Linearization of the phase system in the branch containing ``y``."""
    (nu, iu), (nv, iv) = branch_pairs(y, cone, params)
    X, Y, Z, W = (float(v) for v in y)
    p, q = params.p, params.q
    return np.array([
        [2 * X - (nu - 2) + Z / iu, 0.0, X / iu, 0.0],
        [0.0, 2 * Y - (nv - 2) + W / iv, 0.0, Y / iv],
        [0.0, -p * Z, nu - p * Y - 2 * Z / iu, 0.0],
        [-q * W, 0.0, 0.0, nv - q * X - 2 * W / iv],
    ])


def _triangular_order(J: np.ndarray):
    for perm in itertools.permutations(range(4)):
        P = J[np.ix_(perm, perm)]
        if not np.any(np.tril(P, -1)) or not np.any(np.triu(P, 1)):
            return perm
    return None


ZERO_TOL = 1e-12


def jacobian_eigen(y, params: ProblemParams, cone: str = "K"):
    """Eigenvalues, eigenvectors and stable/unstable/center counts at ``y``.

    When a simultaneous permutation makes the Jacobian triangular its
    eigenvalues are read off the diagonal (exact); otherwise LAPACK is used.
    """
    J = jacobian(y, params, cone)
    vals_num, vecs = np.linalg.eig(J)
    if _triangular_order(J) is not None:
        vals = np.diag(J).astype(complex)
        # pair each exact value with the numerically closest eigenvector
        order = []
        free = list(range(4))
        for v in vals:
            k = min(free, key=lambda i: abs(vals_num[i] - v))
            free.remove(k)
            order.append(k)
        vecs = vecs[:, order]
    else:
        vals = vals_num.astype(complex)
    dims = {"stable": int(np.sum(vals.real < -ZERO_TOL)),
            "unstable": int(np.sum(vals.real > ZERO_TOL)),
            "center": int(np.sum(np.abs(vals.real) <= ZERO_TOL))}
    return vals, vecs, dims


def stationary_catalog(params: ProblemParams) -> list[StationaryPoint]:
    """All twelve stationary points with their linear stability data."""
    out = []
    for name, y in stationary_coordinates(params).items():
        vals, vecs, dims = jacobian_eigen(y, params)
        out.append(StationaryPoint(name, y, bool(np.all(y >= 0)), vals, vecs,
                                   dims))
    return out


def catalog_point(params: ProblemParams, name: str) -> StationaryPoint:
    for sp in stationary_catalog(params):
        if sp.name == name:
            return sp
    raise KeyError(name)


def m0_spiral_real_part(params: ProblemParams) -> float:
    """Real part of the complex eigenvalue pair at M0 (``nan`` if all real)."""
    y = stationary_coordinates(params)["M0"]
    vals, _, _ = jacobian_eigen(y, params)
    cplx = vals[np.abs(vals.imag) > 1e-12]
    return float(cplx[0].real) if cplx.size else float("nan")


# ---------------------------------------------------------------- manifolds

def chart_radius(params: ProblemParams, name: str) -> float:
    """``1e-3 * min(1, distance to the nearest other stationary point)``."""
    coords = stationary_coordinates(params)
    y0 = coords[name]
    d = min(np.linalg.norm(y - y0) for k, y in coords.items()
            if k != name and np.linalg.norm(y - y0) > 0)
    return 1e-3 * min(1.0, d)


def manifold_seed(name: str, params: ProblemParams, direction,
                  radius: float | None = None) -> PhaseState:
    """Seed on the two-dimensional invariant manifold used by partition scans.

    ``N0``: unstable manifold (eigenvalue 2, double), chart ``(x, y) = (X, Y)``
    with ``Z = iN - p iN y/(N+2)`` and ``W = iN - q iN x/(N+2)``.
    ``A0``: stable manifold, chart ``(z, w) = (Z, W)`` with
    ``X = L - L z/(i (pL - 2))`` and ``Y = L - L w/(i (qL - 2))``.
    ``P0``/``Q0``: stable manifold spanned by the numerically computed stable
    eigenvectors. ``direction`` is an angle in ``[0, pi/2]`` or a 2-vector.
    """
    if np.ndim(direction) == 0:
        cth, sth = np.cos(direction), np.sin(direction)
    else:
        d = np.asarray(direction, float)
        cth, sth = d / np.linalg.norm(d)
    rho = chart_radius(params, name) if radius is None else radius
    c = params.constants
    N, p, q = params.N, params.p, params.q
    if name == "N0":
        i0 = params.iota_concave * N
        x, y = rho * cth, rho * sth
        return PhaseState(0.0, x, y, i0 - p * i0 / (N + 2) * y,
                          i0 - q * i0 / (N + 2) * x)
    if name == "A0":
        L, ic = c.n_tilde - 2.0, params.iota_convex
        z, w = rho * cth, rho * sth
        return PhaseState(0.0, L - L * z / (ic * (p * L - 2)), L - L * w /
                          (ic * (q * L - 2)), z, w)
    if name in ("P0", "Q0"):
        y0 = stationary_coordinates(params)[name]
        vals, vecs, _ = jacobian_eigen(y0, params)
        st = [k for k in range(4) if vals[k].real < -ZERO_TOL]
        if len(st) != 2:
            raise ValueError(f"{name} has no two-dimensional stable manifold here")
        basis = []
        for k in st:
            v = np.real(vecs[:, k])
            # orient into the cone along the component that vanishes at the point
            idx = 2 if name == "P0" else 3
            j = idx if abs(v[idx]) > 1e-14 else int(np.argmax(np.abs(v)))
            basis.append(v * np.sign(v[j]) / np.linalg.norm(v))
        y = y0 + rho * (cth * basis[0] + sth * basis[1])
        return PhaseState(0.0, *y)
    raise ValueError(f"no manifold chart for {name!r}")


# ---------------------------------------------------------------- integration

@dataclass(frozen=True)
class PhaseOptions:
    """Controls for :func:`integrate_phase`."""

    rtol: float = 1e-11
    blowup: float = 1e6
    conv_tol: float = 1e-8
    conv_dt: float = 10.0
    max_steps: int = 400_000
    dense: bool = False


@dataclass
class PhaseOutcome:
    """Result of a phase integration.

    Attributes
    ----------
    status : str
        ``'blowup'``, ``'converged'``, ``'end'`` or ``'failed'``.
    component : str or None
        Component that crossed the blow-up threshold first.
    t_stop : float
    converged_to : str or None
    trajectory : Trajectory
    """

    status: str
    component: str | None
    t_stop: float
    converged_to: str | None
    trajectory: Trajectory
    cone: str
    params: ProblemParams

    def crossing_times(self, event: int) -> np.ndarray:
        tr = self.trajectory
        return tr.event_x[tr.event_id == event]


def integrate_phase(seed: PhaseState, params: ProblemParams, t_span,
                    opts: PhaseOptions | None = None,
                    stationary: bool = True) -> PhaseOutcome:
    """Integrate the phase system from ``seed`` over ``t_span = (t0, t1)``.

    ``t1 < t0`` integrates backwards. Stops at the blow-up threshold, on
    sustained convergence to a stationary point of the closed cone, or at
    ``t1``. Concavity-plane crossings switch the branch; crossings of the
    lines ``X = n_tilde - 2`` and ``Y = n_tilde - 2`` are recorded.
    """
    opts = opts or PhaseOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = seed.array
    br = _branch_vector(y0, seed.cone, params)
    par = params.kernel_vector(blow=opts.blowup)
    ev_dir = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.int64)
    ev_act = np.array([2, 2, 1, 1, 3, 3, 3, 3], dtype=np.int64)
    if stationary and seed.cone == "K":
        coords = stationary_coordinates(params)
        names = [k for k, v in coords.items() if np.all(v >= 0)]
        stat = np.array([coords[k] for k in names])
        conv_tol = opts.conv_tol
    else:
        names, stat, conv_tol = [], np.zeros((0, 4)), 0.0
    keep = 2 if opts.dense else 1
    out = _dopri.integrate(_dopri.KIND_PHASE, t0, y0, t1, par, br, float(opts.rtol), 1e-300, 0.0,
                           np.inf, int(opts.max_steps), keep, ev_dir, ev_act,
                           stat, conv_tol, float(opts.conv_dt))
    tr = Trajectory.from_kernel(out, keep)
    comp = None
    conv = None
    if tr.status == _dopri.ST_EVENT and tr.last_event in EV_BLOW:
        status = "blowup"
        comp = COMPONENTS[tr.last_event - 4]
    elif tr.status == _dopri.ST_CONVERGED:
        status = "converged"
        conv = names[tr.converged_to]
    elif tr.status == _dopri.ST_END:
        status = "end"
    else:
        status = "failed"
    return PhaseOutcome(status, comp, float(tr.x[-1]), conv, tr, seed.cone,
                        params)


def radial_to_phase_path(traj: Trajectory, params: ProblemParams):
    """Map every accepted point of a positive radial trajectory to phase form."""
    r = traj.x
    u, up, v, vp = traj.y.T
    ok = (u > 0) & (v > 0) & (up != 0) & (vp != 0)
    r, u, up, v, vp = r[ok], u[ok], up[ok], v[ok], vp[ok]
    X = -r * up / u
    Y = -r * vp / v
    Z = -r * np.sign(v) * np.abs(v) ** params.p / up
    W = -r * np.sign(u) * np.abs(u) ** params.q / vp
    return np.log(r), np.column_stack([X, Y, Z, W])


# ---------------------------------------------------------------- partitions

@dataclass
class ScanEntry:
    angle: float
    label: str
    outcome: PhaseOutcome


@dataclass
class BoundaryTrajectory:
    """Trajectory separating two labels of a partition scan."""

    label: str
    angle: float
    bracket: tuple[float, float]
    t_blowup: float | None
    outcomes: tuple


def _label(point: str, o: PhaseOutcome, params: ProblemParams,
           simultaneity: float = 1e-6) -> str:
    """Partition label of a manifold trajectory."""
    if point == "N0":
        first, second, names = "X", "Y", ("N1", "N2", "D", "G_N0")
        scale = 1.0
    else:
        first, second, names = "Z", "W", ("A1", "A2", "Sigma", "G_" + point)
        scale = params.iota_convex
    if o.status != "blowup":
        return names[3] if o.status in ("end", "converged") else "Inconclusive"
    y = o.trajectory.y[-1]
    i1, i2 = COMPONENTS.index(first), COMPONENTS.index(second)
    gap = scale * abs(1.0 / abs(y[i1]) - 1.0 / abs(y[i2]))
    if gap <= simultaneity:
        return names[2]
    if o.component == first:
        return names[0]
    if o.component == second:
        return names[1]
    return "Inconclusive"


def _scan_run(point, params, theta, t_span, opts):
    seed = manifold_seed(point, params, theta)
    return integrate_phase(seed, params, t_span, opts)


def default_t_span(point: str) -> tuple[float, float]:
    return (0.0, 200.0) if point == "N0" else (0.0, -200.0)


def partition_scan(point: str, params: ProblemParams, n_directions: int = 64,
                   t_span=None, opts: PhaseOptions | None = None) -> list[ScanEntry]:
    """Label seeds on an annulus of the manifold chart at ``point``.

    Directions are the midpoints ``theta_k = (k + 1/2) pi / (2 n)``, so
    ``k = 0`` sits next to the first chart axis. Seeds on the unstable manifold
    of ``N0`` run forward; seeds on the stable manifold of ``A0``, ``P0`` or
    ``Q0`` run backward.
    """
    t_span = t_span or default_t_span(point)
    opts = opts or PhaseOptions()
    out = []
    for k in range(n_directions):
        th = (k + 0.5) * np.pi / (2 * n_directions)
        o = _scan_run(point, params, th, t_span, opts)
        out.append(ScanEntry(th, _label(point, o, params), o))
    return out


def label_runs(entries: list[ScanEntry]) -> list[tuple[str, int, int]]:
    """Collapse consecutive equal labels into ``(label, first, last)`` runs."""
    runs = []
    for k, e in enumerate(entries):
        if runs and runs[-1][0] == e.label:
            runs[-1] = (e.label, runs[-1][1], k)
        else:
            runs.append((e.label, k, k))
    return runs


def refine_boundary(point: str, params: ProblemParams, theta_a: float,
                    theta_b: float, t_span=None, opts: PhaseOptions | None = None,
                    width: float = 1e-13) -> BoundaryTrajectory:
    """Bisect in angle between two labelled seeds and classify the separatrix.

    The result is the simultaneous blow-up label (``D`` or ``Sigma``) when the
    blow-up times on both sides converge to a common finite value, or the
    global label (``G_N0``, ``G_A0``...) when the separating trajectory
    remains in the bounded region.
    """
    t_span = t_span or default_t_span(point)
    opts = opts or PhaseOptions()
    oa = _scan_run(point, params, theta_a, t_span, opts)
    ob = _scan_run(point, params, theta_b, t_span, opts)
    la, lb = _label(point, oa, params), _label(point, ob, params)
    special = ("D", "Sigma")
    for lab, th, o in ((la, theta_a, oa), (lb, theta_b, ob)):
        if lab in special or lab.startswith("G_"):
            return BoundaryTrajectory(lab, th, (th, th),
                                      o.t_stop if o.status == "blowup" else None,
                                      (o,))
    while abs(theta_b - theta_a) > width:
        tm = 0.5 * (theta_a + theta_b)
        if tm in (theta_a, theta_b):
            break
        om = _scan_run(point, params, tm, t_span, opts)
        lm = _label(point, om, params)
        if lm in special or lm.startswith("G_"):
            return BoundaryTrajectory(lm, tm, (theta_a, theta_b),
                                      om.t_stop if om.status == "blowup" else None,
                                      (om,))
        if lm == la:
            theta_a, oa = tm, om
        elif lm == lb:
            theta_b, ob = tm, om
        else:
            break
    names = ("D", "G_N0") if point == "N0" else ("Sigma", "G_" + point)
    ta, tb = oa.t_stop, ob.t_stop
    both_blow = oa.status == ob.status == "blowup"
    if both_blow and abs(ta - tb) <= 1e-6 * max(1.0, abs(ta)):
        lab, tbl = names[0], 0.5 * (ta + tb)
    elif both_blow and _visits_global(oa, params) and _visits_global(ob, params):
        lab, tbl = names[1], None
    else:
        lab, tbl = "Inconclusive", None
    return BoundaryTrajectory(lab, 0.5 * (theta_a + theta_b),
                              (theta_a, theta_b), tbl, (oa, ob))


GLOBAL_TARGETS = ("M0", "A0", "P0", "Q0", "N0")


def _visits_global(o: PhaseOutcome, params: ProblemParams, tol: float = 1e-4) -> bool:
    """True when the trajectory passes within ``tol`` of a point with global orbits."""
    coords = stationary_coordinates(params)
    ys = o.trajectory.y
    lo = 0 if o.trajectory.x[-1] < o.trajectory.x[0] else len(ys) // 20
    for name in GLOBAL_TARGETS:
        c = coords[name]
        if not np.all(c >= 0):
            continue
        if name == "N0" and o.trajectory.x[-1] > o.trajectory.x[0]:
            continue
        if np.min(np.max(np.abs(ys[lo:] - c), axis=1)) <= tol * max(1.0, np.max(np.abs(c))):
            return True
    return False


# ---------------------------------------------------------------- export

def write_phase_csv(path, outcome_or_traj, cone: str = "K") -> None:
    tr = getattr(outcome_or_traj, "trajectory", outcome_or_traj)
    cone = getattr(outcome_or_traj, "cone", cone)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_CSV_HEADER)
        for t, y in zip(tr.x, tr.y):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in y] + [cone])


def catalog_json(params: ProblemParams) -> list[dict]:
    return [sp.as_json() for sp in stationary_catalog(params)]


def write_catalog_json(path, params: ProblemParams) -> None:
    with open(path, "w") as fh:
        json.dump(catalog_json(params), fh, indent=2)
