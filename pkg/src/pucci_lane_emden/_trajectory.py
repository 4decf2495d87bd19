"""Container for integrator output with dense evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _dopri

CONE_NAMES = {(-1, -1): "K", (1, 1): "K0", (-1, 1): "K1", (1, -1): "K2"}
CONE_SIGNS = {v: k for k, v in CONE_NAMES.items()}


@dataclass
class Trajectory:
    """Accepted steps of one integration.

    Attributes
    ----------
    x : ndarray, shape (n,)
        Independent variable at accepted points (r or t).
    y : ndarray, shape (n, 4)
        State at accepted points.
    branch : ndarray, shape (n, 4)
        Branch vector in force on the step that starts at each point.
    h, K : ndarray or None
        Step sizes and stage derivatives for dense output.
    event_x, event_y, event_id : ndarray
        Located events in order of occurrence.
    status : int
        Kernel status code.
    """

    x: np.ndarray
    y: np.ndarray
    branch: np.ndarray
    h: np.ndarray | None
    K: np.ndarray | None
    event_x: np.ndarray
    event_y: np.ndarray
    event_id: np.ndarray
    status: int
    last_event: int = -1
    converged_to: int = -1
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_kernel(cls, out, keep: int) -> "Trajectory":
        (status, n, xs, ys, brs, hs, Ks, n_ev, ev_x, ev_y, ev_id, last_event,
         conv_idx, x_end, y_end, br_end) = out
        if keep >= 1:
            x = xs[:n + 1].copy()
            y = ys[:n + 1].copy()
            br = brs[:n + 1].copy()
            h = hs[:n].copy()
        else:
            x = np.array([x_end])
            y = np.array([y_end])
            br = np.array([br_end])
            h = None
        K = Ks[:n].copy() if keep >= 2 else None
        return cls(x=x, y=y, branch=br, h=h, K=K, event_x=ev_x[:n_ev].copy(),
                   event_y=ev_y[:n_ev].copy(), event_id=ev_id[:n_ev].copy(),
                   status=int(status), last_event=int(last_event),
                   converged_to=int(conv_idx))

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Join a continuation that starts at the last point of ``self``."""
        cat = np.concatenate
        h = cat([self.h, other.h]) if self.h is not None and other.h is not None else None
        K = cat([self.K, other.K]) if self.K is not None and other.K is not None else None
        if self.h is None:
            x, y, br = other.x, other.y, other.branch
        else:
            x = cat([self.x, other.x[1:]])
            y = cat([self.y, other.y[1:]])
            br = cat([self.branch[:-1], other.branch])
        return Trajectory(x=x, y=y, branch=br, h=h, K=K,
                          event_x=cat([self.event_x, other.event_x]),
                          event_y=cat([self.event_y, other.event_y]),
                          event_id=cat([self.event_id, other.event_id]),
                          status=other.status, last_event=other.last_event,
                          converged_to=other.converged_to, meta=dict(self.meta))

    @property
    def end(self) -> tuple[float, np.ndarray]:
        return float(self.x[-1]), self.y[-1]

    def events_of(self, ids) -> np.ndarray:
        ids = np.atleast_1d(ids)
        return np.isin(self.event_id, ids)

    def evaluate(self, xq) -> np.ndarray:
        """Dense-output evaluation at the points ``xq`` (inside the span)."""
        if self.K is None:
            raise ValueError("trajectory was integrated without dense output")
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        out = np.empty((xq.size, 4))
        fwd = self.x[-1] >= self.x[0]
        xs = self.x if fwd else -self.x
        key = xq if fwd else -xq
        idx = np.clip(np.searchsorted(xs, key, side="right") - 1, 0,
                      len(self.h) - 1)
        tmp = np.empty(4)
        for k, (i, s) in enumerate(zip(idx, xq)):
            theta = (s - self.x[i]) / self.h[i]
            _dopri.dense_eval(self.y[i], self.h[i], self.K[i], theta, tmp)
            out[k] = tmp
        return out
