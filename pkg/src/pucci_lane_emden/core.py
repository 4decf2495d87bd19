"""Problem parameters, derived constants, extremal operators and the (p, q) region atlas."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

HYPERBOLA_RTOL = 1e-12


class Side(str, Enum):
    """Position of (p, q) relative to a hyperbola ``1/(p+1) + 1/(q+1) = c``.

    ``ABOVE`` is the side of large exponents (left-hand side below ``c``).
    """

    BELOW = "below"
    ON = "on"
    ABOVE = "above"


def _normalise_op(op) -> str:
    key = str(op).strip().lower()
    if key in ("+", "plus", "p", "m+", "1", "+1"):
        return "+"
    if key in ("-", "minus", "m", "m-", "-1"):
        return "-"
    raise ValueError(f"unknown operator sign {op!r}; use '+' or '-'")


@dataclass(frozen=True)
class DerivedConstants:
    """Scaling exponents and critical dimensions attached to a parameter set.

    Attributes
    ----------
    alpha, beta : float
        Scaling exponents ``2(p+1)/(pq-1)`` and ``2(q+1)/(pq-1)``.
    n_plus, n_minus : float
        Dimension-like parameters ``(lam/Lam)(N-1)+1`` and ``(Lam/lam)(N-1)+1``.
    n_tilde : float
        The one attached to the chosen operator.
    p_serrin_plus, p_serrin_minus, p_laplace : float
        Serrin-type exponents ``n/(n-2)`` (``inf`` when ``n <= 2``) and
        the Sobolev exponent ``(N+2)/(N-2)``.
    """

    alpha: float
    beta: float
    n_plus: float
    n_minus: float
    n_tilde: float
    p_serrin_plus: float
    p_serrin_minus: float
    p_laplace: float


@dataclass(frozen=True)
class ProblemParams:
    """Ellipticity constants, dimension, exponents and operator sign.

    Parameters
    ----------
    lam, Lam : float
        Ellipticity constants with ``0 < lam <= Lam``.
    N : int
        Space dimension, ``N >= 3``.
    p, q : float
        Positive exponents with ``p q > 1``.
    op : str
        ``'+'`` for the maximal Pucci operator, ``'-'`` for the minimal one.
    """

    lam: float
    Lam: float
    N: int
    p: float
    q: float
    op: str = "+"
    constants: DerivedConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "op", _normalise_op(self.op))
        lam, Lam, N, p, q = (float(self.lam), float(self.Lam), self.N,
                             float(self.p), float(self.q))
        if not (np.isfinite(lam) and np.isfinite(Lam) and 0 < lam <= Lam):
            raise ValueError(f"need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
        if int(N) != N or N < 3:
            raise ValueError(f"need an integer dimension N >= 3, got {N}")
        object.__setattr__(self, "N", int(N))
        if not (p > 0 and q > 0 and np.isfinite(p) and np.isfinite(q)):
            raise ValueError(f"need p, q > 0, got p={p}, q={q}")
        if p * q <= 1:
            raise ValueError(f"need p*q > 1, got p*q={p * q}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "Lam", Lam)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "constants", derive_constants(self))

    # operator-dependent slopes: m(s) = lo*s (s<=0), hi*s (s>0); M(s) = s/lo, s/hi
    @property
    def lo(self) -> float:
        return self.lam if self.op == "+" else self.Lam

    @property
    def hi(self) -> float:
        return self.Lam if self.op == "+" else self.lam

    @property
    def iota_concave(self) -> float:
        """Divisor in the concave branch (also the series coefficient at r = 0)."""
        return self.lo

    @property
    def iota_convex(self) -> float:
        """Divisor in the convex branch of a decreasing component."""
        return self.hi

    def replace(self, **kw) -> "ProblemParams":
        d = dict(lam=self.lam, Lam=self.Lam, N=self.N, p=self.p, q=self.q,
                 op=self.op)
        d.update(kw)
        return ProblemParams(**d)

    def kernel_vector(self, line: float | None = None,
                      blow: float = 1e6) -> np.ndarray:
        """Parameter vector consumed by the compiled integrator."""
        c = self.constants
        if line is None:
            line = c.n_tilde - 2.0
        return np.array([self.lam, self.Lam, float(self.N), self.p, self.q,
                         self.lo, self.hi, line, blow])


def _serrin(n: float) -> float:
    return n / (n - 2.0) if n > 2.0 else np.inf


def derive_constants(params: ProblemParams) -> DerivedConstants:
    """Compute the scaling exponents and critical dimensions of ``params``."""
    lam, Lam, N, p, q = params.lam, params.Lam, params.N, params.p, params.q
    d = p * q - 1.0
    n_plus = (lam / Lam) * (N - 1) + 1.0
    n_minus = (Lam / lam) * (N - 1) + 1.0
    return DerivedConstants(
        alpha=2.0 * (p + 1.0) / d,
        beta=2.0 * (q + 1.0) / d,
        n_plus=n_plus,
        n_minus=n_minus,
        n_tilde=n_plus if params.op == "+" else n_minus,
        p_serrin_plus=_serrin(n_plus),
        p_serrin_minus=_serrin(n_minus),
        p_laplace=(N + 2.0) / (N - 2.0),
    )


def pucci_scalar(s, lam: float, Lam: float, op: str = "+"):
    """Return ``(m(s), M(s))`` for the chosen extremal operator.

    ``m`` is the piecewise-linear weight applied to the first derivative and
    ``M`` its inverse applied to the second-order balance. Works on scalars
    and arrays.

    Examples
    --------
    >>> pucci_scalar(-1.0, 1.0, 2.0, "+")
    (-1.0, -1.0)
    >>> pucci_scalar(-1.0, 1.0, 2.0, "-")
    (-2.0, -0.5)
    """
    op = _normalise_op(op)
    lo, hi = (lam, Lam) if op == "+" else (Lam, lam)
    s_arr = np.asarray(s, dtype=float)
    m = np.where(s_arr <= 0, lo * s_arr, hi * s_arr)
    M = np.where(s_arr <= 0, s_arr / lo, s_arr / hi)
    if np.ndim(s) == 0:
        return float(m), float(M)
    return m, M


@dataclass(frozen=True)
class RegionFlags:
    """Location of (p, q) in the region atlas for the chosen operator.

    Attributes
    ----------
    H : Side
        Relative to the Laplacian hyperbola ``1/(p+1)+1/(q+1) = (N-2)/N``.
    H_tilde : Side
        Relative to the same hyperbola with ``N`` replaced by ``n_tilde``.
    H_upper, H_lower : Side
        Relative to the two auxiliary hyperbolas bounding the gap between
        ``in_Ru`` and ``in_Rd`` (``H_upper`` is the one nearer the large
        exponents).
    in_Rd, in_Ru : bool
        Sufficient-condition regions for nonexistence and existence.
    in_Rs : bool
        Some scaling exponent reaches ``n_tilde - 2`` (singular regime).
    in_RD : bool
        Region where the exterior Neumann problem has no positive solution.
    """

    H: Side
    H_tilde: Side
    H_upper: Side
    H_lower: Side
    in_Rd: bool
    in_Ru: bool
    in_Rs: bool
    in_RD: bool

    @property
    def satisfies_A(self) -> bool:
        """Both scaling exponents lie strictly below ``n_tilde - 2``."""
        return not self.in_Rs

    def as_dict(self) -> dict:
        return {k: (v.value if isinstance(v, Side) else v)
                for k, v in self.__dict__.items()}


def hyperbola_side(p: float, q: float, rhs: float) -> Side:
    """Compare ``1/(p+1) + 1/(q+1)`` with ``rhs`` using a relative tolerance."""
    lhs = 1.0 / (p + 1.0) + 1.0 / (q + 1.0)
    if abs(lhs - rhs) <= HYPERBOLA_RTOL * max(1.0, abs(rhs)):
        return Side.ON
    return Side.ABOVE if lhs < rhs else Side.BELOW


def hyperbola_q(p: float, rhs: float) -> float:
    """Solve ``1/(p+1) + 1/(q+1) = rhs`` for q; ``inf`` when there is no root."""
    rest = rhs - 1.0 / (p + 1.0)
    if rest <= 0:
        return np.inf
    return 1.0 / rest - 1.0


def rd_threshold(params: ProblemParams) -> float:
    """Value of ``1/(p+1) + 1/(q+1)`` above which the pair lies in ``R_D``."""
    c = params.constants
    N, ratio = params.N, params.Lam / params.lam
    if params.op == "+":
        return ratio * (2 * N - c.n_plus - 2) / c.n_plus
    return ratio * (2 * c.n_minus - N - 2) / c.n_minus


def region_flags(params: ProblemParams) -> RegionFlags:
    """Classify (p, q) of ``params`` against every hyperbola and region."""
    c = params.constants
    N, p, q = params.N, params.p, params.q
    a, b = 1.0 / (p + 1.0), 1.0 / (q + 1.0)
    if params.op == "+":
        nt = c.n_plus
        upper, lower = (nt - 2.0) / N, (N - 2.0) / nt
        in_rd = N * a + nt * b > N - 2 and nt * a + N * b > N - 2
        in_ru = N * a + nt * b < nt - 2 and nt * a + N * b < nt - 2
    else:
        nt = c.n_minus
        upper, lower = (N - 2.0) / nt, (nt - 2.0) / N
        in_rd = N * a + nt * b > nt - 2 and nt * a + N * b > nt - 2
        in_ru = N * a + nt * b < N - 2 and nt * a + N * b < N - 2
    in_rs = c.alpha >= nt - 2 or c.beta >= nt - 2
    return RegionFlags(
        H=hyperbola_side(p, q, (N - 2.0) / N),
        H_tilde=hyperbola_side(p, q, (nt - 2.0) / nt),
        H_upper=hyperbola_side(p, q, upper),
        H_lower=hyperbola_side(p, q, lower),
        in_Rd=bool(in_rd),
        in_Ru=bool(in_ru),
        in_Rs=bool(in_rs),
        in_RD=bool(a + b > rd_threshold(params)),
    )


def rescale(u_val, v_val, r, gamma: float, constants: DerivedConstants):
    """Map a sample of a solution to the matching sample of its rescaling.

    If ``(u, v)`` solves the radial system, so does
    ``u_g(s) = g**alpha u(g s)``, ``v_g(s) = g**beta v(g s)``. A sample
    ``(u(r), v(r))`` at radius ``r`` becomes the sample of ``(u_g, v_g)`` at
    radius ``r / g``. The map composes: rescaling by ``g1`` then ``g2`` equals
    rescaling by ``g1 * g2``.

    Returns
    -------
    tuple
        ``(u_g, v_g, r_g)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return (gamma ** constants.alpha * np.asarray(u_val),
            gamma ** constants.beta * np.asarray(v_val),
            np.asarray(r) / gamma)


def scaled_center(xi: float, eta: float, gamma: float,
                  constants: DerivedConstants) -> tuple[float, float]:
    """Central values of the rescaled regular solution."""
    return gamma ** constants.alpha * xi, gamma ** constants.beta * eta
