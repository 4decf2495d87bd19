"""Piecewise energy functionals along radial solutions and phase trajectories.

In the cone where ``u', v' < 0`` every component sits in a concave (``P``)
or convex (``M``) branch, and the energy reads

    E = r^e (u'v' + v^(p+1)/(i_u (p+1)) + u^(q+1)/(i_v (q+1))
             + n_u v u'/(r (p+1)) + n_v u v'/(r (q+1)))

with the effective pairs ``(n_c, i_c)`` of each branch. The exponent ``e`` is
the common effective dimension in the pure branches ``PP`` and ``MM`` and the
free parameter ``sigma`` in the mixed ones. The bracket is continuous across
the concavity planes while the prefactor is not, so ``E`` jumps there without
changing sign.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _dopri
from ._trajectory import Trajectory
from .core import ProblemParams, Side, hyperbola_side
from .phase import PhaseState, from_phase, stationary_coordinates
from .radial import RadialState, concavity_signs, rhs_radial

ENERGY_CSV_HEADER = ["t", "branch", "sigma", "E", "dE"]
BRANCHES = ("PP", "PM", "MP", "MM")
PLANE_RTOL = 1e-12
ZERO_ENERGY_POINTS = ("O", "N0", "A0", "K0", "L0")


@dataclass(frozen=True)
class EnergyRecord:
    """Energy of one state.

    Attributes
    ----------
    t : float
        Logarithmic radius ``ln r``.
    branch : str
        ``PP``, ``PM``, ``MP`` or ``MM``; the letters give the concavity of
        ``u`` and ``v`` (``P`` concave, ``M`` convex).
    sigma : float
        Exponent used in the mixed branches.
    value : float
        Energy value.
    on_plane : bool
        The state lies on a concavity plane and both adjacent branches were
        evaluated.
    """

    t: float
    branch: str
    sigma: float
    value: float
    on_plane: bool = False

    @property
    def r(self) -> float:
        return float(np.exp(self.t))


def branch_label(au: float, av: float) -> str:
    return ("P" if au < 0 else "M") + ("P" if av < 0 else "M")


def label_signs(label: str) -> tuple[float, float]:
    if label not in BRANCHES:
        raise ValueError(f"unknown branch {label!r}")
    return (-1.0 if label[0] == "P" else 1.0, -1.0 if label[1] == "P" else 1.0)


def branch_coefficients(params: ProblemParams, au: float, av: float):
    """Effective pairs ``((n_u, i_u), (n_v, i_v))`` of a branch in the cone K."""
    par = params.kernel_vector()
    return _dopri.branch_pair(par, -1.0, au), _dopri.branch_pair(par, -1.0, av)


def exponent(params: ProblemParams, sigma: float, au: float, av: float) -> float:
    """Power of ``r`` multiplying the bracket."""
    (nu, _), _ = branch_coefficients(params, au, av)
    return nu if (au < 0) == (av < 0) else float(sigma)


def sigma_preset(params: ProblemParams, region: str) -> float:
    """Exponent under which the energy is monotone on ``region``.

    ``'Ru'`` (existence side) gives ``N`` for the maximal and ``n_minus`` for
    the minimal operator; ``'Rd'`` (nonexistence side) gives ``n_plus`` and
    ``N`` respectively.
    """
    c = params.constants
    key = region.strip().lower()
    if key in ("ru", "up", "u"):
        return float(params.N) if params.op == "+" else c.n_minus
    if key in ("rd", "down", "d"):
        return c.n_plus if params.op == "+" else float(params.N)
    raise ValueError(f"unknown region {region!r}; use 'Ru' or 'Rd'")


def expected_trend(region: str) -> int:
    """``-1`` (nonincreasing) on ``Ru`` and ``+1`` (nondecreasing) on ``Rd``."""
    return -1 if region.strip().lower() in ("ru", "up", "u") else 1


# ---------------------------------------------------------------- branches

def _check_cone_radial(s: RadialState):
    if not (s.u > 0 and s.v > 0 and s.up < 0 and s.vp < 0):
        raise ValueError("energy is defined for u, v > 0 and u', v' < 0")


def _radial_sides(s: RadialState, params: ProblemParams):
    """Branch signs of a radial state and flags for states on a plane."""
    h1, h2 = concavity_signs(s, params)
    scale_u = abs(h1 - s.v ** params.p) + s.v ** params.p
    scale_v = abs(h2 - s.u ** params.q) + s.u ** params.q
    return ((-1.0 if h1 > 0 else 1.0, -1.0 if h2 > 0 else 1.0),
            (abs(h1) <= PLANE_RTOL * scale_u, abs(h2) <= PLANE_RTOL * scale_v))


def _phase_sides(ps: PhaseState, params: ProblemParams):
    plane = params.lo * (params.N - 1)
    return ((-1.0 if ps.Z > plane else 1.0, -1.0 if ps.W > plane else 1.0),
            (abs(ps.Z - plane) <= PLANE_RTOL * plane,
             abs(ps.W - plane) <= PLANE_RTOL * plane))


def _candidates(signs, flags):
    opts_u = (-1.0, 1.0) if flags[0] else (signs[0],)
    opts_v = (-1.0, 1.0) if flags[1] else (signs[1],)
    return [(a, b) for a in opts_u for b in opts_v]


# ---------------------------------------------------------------- values

def _radial_value(s: RadialState, params, sigma, au, av) -> float:
    (nu, iu), (nv, iv) = branch_coefficients(params, au, av)
    p, q, r = params.p, params.q, s.r
    e = nu if (au < 0) == (av < 0) else sigma
    bracket = (s.up * s.vp + s.v ** (p + 1) / (iu * (p + 1))
               + s.u ** (q + 1) / (iv * (q + 1))
               + nu * s.v * s.up / (r * (p + 1)) + nv * s.u * s.vp / (r * (q + 1)))
    return float(r ** e * bracket)


def amplitude(X, Y, Z, W, params: ProblemParams):
    """Factor ``(XZ)^(beta/2) (YW)^(alpha/2)``, equal to ``r^(alpha+beta) u v``."""
    c = params.constants
    return (X * Z) ** (c.beta / 2.0) * (Y * W) ** (c.alpha / 2.0)


def phase_bracket(X, Y, Z, W, params: ProblemParams, au: float, av: float):
    (nu, iu), (nv, iv) = branch_coefficients(params, au, av)
    p, q = params.p, params.q
    return (X * Y + X * Z / (iu * (p + 1)) + Y * W / (iv * (q + 1))
            - nu * X / (p + 1) - nv * Y / (q + 1))


def _phase_value(ps: PhaseState, params, sigma, au, av) -> float:
    c = params.constants
    e = exponent(params, sigma, au, av)
    amp = amplitude(ps.X, ps.Y, ps.Z, ps.W, params)
    if amp == 0.0:
        return 0.0
    return float(np.exp(ps.t * (e - 2.0 - c.alpha - c.beta)) * amp
                 * phase_bracket(ps.X, ps.Y, ps.Z, ps.W, params, au, av))


def _resolve(state, params, branch):
    if isinstance(state, PhaseState):
        if state.cone != "K":
            raise ValueError("energy is defined in the cone K")
        signs, flags = _phase_sides(state, params)
    else:
        _check_cone_radial(state)
        signs, flags = _radial_sides(state, params)
    if branch is not None:
        if isinstance(branch, str):
            signs = label_signs(branch)
        else:
            signs = (float(branch[0]), float(branch[1]))
        return [signs], False
    cands = _candidates(signs, flags)
    return cands, len(cands) > 1


def energy(state, sigma: float, params: ProblemParams, branch=None) -> EnergyRecord:
    """Evaluate the energy of a radial or phase state in the cone K.

    Parameters
    ----------
    state : RadialState or PhaseState
    sigma : float
        Exponent used in the mixed branches.
    params : ProblemParams
    branch : str or pair, optional
        Force a branch (label or ``(au, av)`` signs, negative meaning
        concave). By default the branch is read from the state; a state on a
        concavity plane is evaluated on both sides, the sides must agree in
        sign and their mean is returned.
    """
    cands, on_plane = _resolve(state, params, branch)
    if isinstance(state, PhaseState):
        vals = [_phase_value(state, params, sigma, a, b) for a, b in cands]
        t = state.t
    else:
        vals = [_radial_value(state, params, sigma, a, b) for a, b in cands]
        t = float(np.log(state.r))
    if on_plane:
        signs = {np.sign(v) for v in vals}
        if len(signs) > 1 and not (signs <= {0.0, 1.0} or signs <= {0.0, -1.0}):
            raise ArithmeticError(f"energy changes sign across a plane: {vals}")
    return EnergyRecord(t=float(t), branch=branch_label(*cands[0]),
                        sigma=float(sigma), value=float(np.mean(vals)),
                        on_plane=on_plane)


# ---------------------------------------------------------------- derivative

def _as_radial(state, params) -> RadialState:
    return from_phase(state, params) if isinstance(state, PhaseState) else state


def energy_terms(state, sigma: float, params: ProblemParams, branch=None):
    """Split ``E'(r)`` into its ``u'v'`` part and the remainder.

    Returns
    -------
    tuple
        ``(main, remainder)`` with ``E'(r) = main + remainder``. The remainder
        carries the factors ``sigma - n_u`` and ``sigma - n_v`` and vanishes
        in the pure branches.
    """
    s = _as_radial(state, params)
    cands, _ = _resolve(state, params, branch)
    au, av = cands[0]
    (nu, iu), (nv, iv) = branch_coefficients(params, au, av)
    p, q, r = params.p, params.q, s.r
    e = nu if (au < 0) == (av < 0) else float(sigma)
    k = e + 2.0 - nu - nv + nu / (p + 1) + nv / (q + 1)
    main = r ** (e - 1) * s.up * s.vp * k
    rem_u = (s.v ** (p + 1) / (iu * (p + 1)) + nu * s.v * s.up / (r * (p + 1))) * (e - nu)
    rem_v = (s.u ** (q + 1) / (iv * (q + 1)) + nv * s.u * s.vp / (r * (q + 1))) * (e - nv)
    return float(main), float(r ** (e - 1) * (rem_u + rem_v))


def energy_derivative(state, sigma: float, params: ProblemParams, branch=None) -> float:
    """Derivative ``dE/dr`` from the branch formulas (main part plus remainder)."""
    main, rem = energy_terms(state, sigma, params, branch)
    return main + rem


def energy_rate(state, sigma: float, params: ProblemParams, branch=None) -> float:
    """Derivative ``dE/dt = r dE/dr`` in the logarithmic variable."""
    s = _as_radial(state, params)
    return s.r * energy_derivative(state, sigma, params, branch)


# ---------------------------------------------------------------- stationary points

def stationary_energy(point: str, t: float, params: ProblemParams) -> float:
    """Closed-form energy attached to a stationary point at time ``t``.

    ``O``, ``N0``, ``A0``, ``K0`` and ``L0`` carry zero energy. For ``M0``,
    ``P0`` and ``Q0`` the value is ``exp(t (n - 2 - alpha - beta))`` times the
    bracket at the point, which is the energy with the amplitude factor
    ``(XZ)^(beta/2) (YW)^(alpha/2)`` normalised to one. Use
    :func:`stationary_amplitude` to recover the unnormalised value.
    """
    c = params.constants
    nt = c.n_tilde
    L = nt - 2.0
    p, q = params.p, params.q
    growth = np.exp(t * (nt - 2.0 - c.alpha - c.beta))
    if point in ZERO_ENERGY_POINTS:
        return 0.0
    if point == "M0":
        return float(-4.0 / (p * q - 1.0) * growth)
    if point == "P0":
        return float(-L * growth * (nt / (p + 1) - (q * L - 2.0) / (q + 1)))
    if point == "Q0":
        return float(-L * growth * (nt / (q + 1) - (p * L - 2.0) / (p + 1)))
    raise ValueError(f"no closed-form energy for {point!r}")


def stationary_amplitude(point: str, params: ProblemParams) -> float:
    """Amplitude factor ``(XZ)^(beta/2) (YW)^(alpha/2)`` at a stationary point."""
    X, Y, Z, W = stationary_coordinates(params)[point]
    return float(amplitude(X, Y, Z, W, params))


def stationary_limit(point: str, params: ProblemParams) -> float:
    """Limit of :func:`stationary_energy` as ``t -> +inf``.

    Zero below the hyperbola attached to ``n_tilde``, the finite value at
    ``t = 0`` on it and ``-inf`` or ``+inf`` above it, following the sign.
    """
    if point in ZERO_ENERGY_POINTS:
        return 0.0
    c = params.constants
    side = hyperbola_side(params.p, params.q, (c.n_tilde - 2.0) / c.n_tilde)
    e0 = stationary_energy(point, 0.0, params)
    if side is Side.BELOW or e0 == 0.0:
        return 0.0
    if side is Side.ON:
        return e0
    return float(np.copysign(np.inf, e0))


# ---------------------------------------------------------------- trajectories

@dataclass
class EnergyPath:
    """Energy sampled at the accepted steps of a trajectory."""

    t: np.ndarray
    branch: list
    sigma: float
    E: np.ndarray
    dE: np.ndarray

    def __len__(self):
        return len(self.t)


def _states_of(traj: Trajectory, params: ProblemParams, kind: str):
    for x, y in zip(traj.x, traj.y):
        if kind == "radial":
            yield RadialState.from_array(x, y)
        else:
            yield PhaseState(float(x), *map(float, y), cone="K")


def energy_along(traj: Trajectory, sigma: float, params: ProblemParams,
                 kind: str = "radial") -> EnergyPath:
    """Energy and ``dE/dt`` at every accepted point inside the cone K.

    Each point is evaluated on the branch of the step that reaches it, so
    points located on a concavity plane take the limit from the side of
    approach. Points outside the cone (the last point of a crossing, the
    degenerate start) are skipped.
    """
    ts, labels, Es, dEs = [], [], [], []
    for i, s in enumerate(_states_of(traj, params, kind)):
        br = traj.branch[max(i - 1, 0)]
        sides = (br[2], br[3])
        try:
            if kind == "radial":
                _check_cone_radial(s)
            else:
                rs = from_phase(s, params)
                _check_cone_radial(rs)
            rec = energy(s, sigma, params, branch=sides)
            d = energy_rate(s, sigma, params, branch=sides)
        except ValueError:
            continue
        ts.append(rec.t)
        labels.append(rec.branch)
        Es.append(rec.value)
        dEs.append(d)
    return EnergyPath(np.array(ts), labels, float(sigma), np.array(Es), np.array(dEs))


@dataclass(frozen=True)
class TrendReport:
    """Outcome of a monotonicity check along one energy path."""

    n_points: int
    n_rate_violations: int
    n_step_violations: int
    n_sign_flips: int
    worst: float

    @property
    def ok(self) -> bool:
        return not (self.n_rate_violations or self.n_step_violations or self.n_sign_flips)


def check_trend(path: EnergyPath, trend: int, rtol: float = 1e-8) -> TrendReport:
    """Check that ``E`` moves in direction ``trend`` along ``path``.

    The analytic rate must have the sign of ``trend`` at every point, and
    consecutive points in the same branch must not move against it beyond
    ``rtol`` relative. At a branch change the prefactor jumps, so only the
    sign of ``E`` is compared there.
    """
    E, dE = path.E, path.dE
    scale = np.maximum(np.abs(E), 1e-300)
    bad_rate = trend * dE < -rtol * np.maximum(np.abs(dE).max(initial=0.0), 1e-300)
    n_step = n_flip = 0
    worst = 0.0
    for i in range(1, len(E)):
        if path.branch[i] == path.branch[i - 1]:
            err = -trend * (E[i] - E[i - 1]) / max(scale[i], scale[i - 1])
            worst = max(worst, err)
            n_step += err > rtol
        else:
            n_flip += np.sign(E[i]) * np.sign(E[i - 1]) < 0
    return TrendReport(len(E), int(bad_rate.sum()), int(n_step), int(n_flip), float(worst))


def write_energy_csv(path, energy_path: EnergyPath) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENERGY_CSV_HEADER)
        for t, b, e, d in zip(energy_path.t, energy_path.branch, energy_path.E,
                              energy_path.dE):
            w.writerow([repr(float(t)), b, repr(energy_path.sigma), repr(float(e)),
                        repr(float(d))])


# ---------------------------------------------------------------- exterior energy

@dataclass(frozen=True)
class NeumannEnergyParams:
    """Coefficients of the exterior energy.

    Attributes
    ----------
    A_frak, B_frak : float
        Weights of ``v u'/r`` and ``u v'/r``.
    delta : float
        Margin of the exponent pair inside the nonexistence region; negative
        outside its closure, where the monotonicity guarantee is lost.
    power : float
        Power of ``r`` in front of the bracket.
    divisor : float
        Divisor of the potential terms.
    """

    A_frak: float
    B_frak: float
    delta: float
    power: float
    divisor: float

    @property
    def flagged(self) -> bool:
        return self.delta < 0


def neumann_coefficients(params: ProblemParams) -> NeumannEnergyParams:
    """Coefficients making the exterior energy nondecreasing when ``delta >= 0``.

    With ``n`` the power of ``r`` (``n_plus`` for the maximal operator, ``N``
    for the minimal one), ``A = (lam/Lam) n/(p+1) - delta/2`` and
    ``B = (lam/Lam) n/(q+1) - delta/2``, and ``delta`` is fixed by requiring
    ``A + B`` to equal ``2N - n_plus - 2`` (maximal) or ``2 n_minus - N - 2``
    (minimal). For ``lam = Lam`` this is ``N/(p+1) + N/(q+1) = N - 2 + delta``.
    """
    c = params.constants
    ratio = params.lam / params.Lam
    a, b = 1.0 / (params.p + 1), 1.0 / (params.q + 1)
    if params.op == "+":
        n, target = c.n_plus, 2.0 * params.N - c.n_plus - 2.0
    else:
        n, target = float(params.N), 2.0 * c.n_minus - params.N - 2.0
    delta = ratio * n * (a + b) - target
    return NeumannEnergyParams(A_frak=ratio * n * a - delta / 2.0,
                               B_frak=ratio * n * b - delta / 2.0,
                               delta=float(delta), power=float(n),
                               divisor=float(params.Lam))


def _neumann_bracket(s: RadialState, params, co: NeumannEnergyParams) -> float:
    p, q, r, D = params.p, params.q, s.r, co.divisor
    return (s.up * s.vp + s.v ** (p + 1) / (D * (p + 1)) + s.u ** (q + 1) / (D * (q + 1))
            + co.A_frak * s.v * s.up / r + co.B_frak * s.u * s.vp / r)


def neumann_energy(state: RadialState, params: ProblemParams,
                   coeffs: NeumannEnergyParams | None = None) -> float:
    """Exterior energy of a radial state with ``u, v > 0``."""
    co = coeffs or neumann_coefficients(params)
    return float(state.r ** co.power * _neumann_bracket(state, params, co))


def neumann_energy_derivative(state: RadialState, params: ProblemParams,
                              coeffs: NeumannEnergyParams | None = None) -> float:
    """``d/dr`` of :func:`neumann_energy` along the radial flow."""
    co = coeffs or neumann_coefficients(params)
    s = state
    p, q, r, D, A, B = params.p, params.q, s.r, co.divisor, co.A_frak, co.B_frak
    _, upp, _, vpp = rhs_radial(s, params)
    d_bracket = (upp * s.vp + s.up * vpp + s.v ** p * s.vp / D + s.u ** q * s.up / D
                 + A * (s.vp * s.up + s.v * upp) / r - A * s.v * s.up / r ** 2
                 + B * (s.up * s.vp + s.u * vpp) / r - B * s.u * s.vp / r ** 2)
    k = co.power
    return float(k * r ** (k - 1) * _neumann_bracket(s, params, co) + r ** k * d_bracket)


__all__ = [
    "BRANCHES", "ENERGY_CSV_HEADER", "EnergyPath", "EnergyRecord",
    "NeumannEnergyParams", "TrendReport", "amplitude", "branch_coefficients",
    "branch_label", "check_trend", "energy", "energy_along", "energy_derivative",
    "energy_rate", "energy_terms", "expected_trend", "exponent",
    "neumann_coefficients", "neumann_energy", "neumann_energy_derivative",
    "phase_bracket", "sigma_preset",
    "stationary_amplitude", "stationary_energy", "stationary_limit",
    "write_energy_csv",
]
