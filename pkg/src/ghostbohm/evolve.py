"""Gaussian packet evolution: centre equations plus the complex width Riccati flow.

The packet is

    psi ~ exp[-(q-q_c)^T (A + iB) (q-q_c) / (2 hbar) + i p_c.(q-q_c) / hbar]

and K = A + iB obeys Kdot = -i (K G K - C). K is carried as the real pair
(A, B) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BlowUpError, GridMismatchError, SingularityError, StepSizeError

DEFAULT_STEP = 1e-2
DEFAULT_T_END = 115.0
OVERFLOW_GUARD = 1e12


def sym(x):
    return 0.5 * (x + np.swapaxes(x, -1, -2))


@dataclass(frozen=True, eq=False)
class PacketState:
    t: float
    q_c: np.ndarray
    p_c: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @classmethod
    def make(cls, q_c, p_c, A, B=None, t=0.0):
        A = sym(np.asarray(A, dtype=float))
        B = np.zeros((2, 2)) if B is None else sym(np.asarray(B, dtype=float))
        return cls(float(t), np.asarray(q_c, dtype=float), np.asarray(p_c, dtype=float), A, B)

    @property
    def K(self):
        return self.A + 1j * self.B

    @property
    def normalisable(self):
        return normalisability_margin(self) > 0


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    ``step`` is the largest internal step; each grid interval is split into
    ``ceil(interval / step)`` equal substeps.
    """

    step: float = DEFAULT_STEP
    overflow_guard: float = OVERFLOW_GUARD
    on_blowup: str = "truncate"  # or "raise"


def make_grid(t_start=0.0, t_end=DEFAULT_T_END, step=DEFAULT_STEP):
    if not step > 0:
        raise StepSizeError(f"grid step must be positive, got {step!r}")
    if t_end < t_start:
        raise StepSizeError(f"t_end {t_end!r} precedes t_start {t_start!r}")
    n = int(round((t_end - t_start) / step))
    return t_start + step * np.arange(n + 1)


def check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise StepSizeError("time grid must be a non-empty 1-d sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise StepSizeError("time grid must be strictly increasing (step > 0)")
    return grid


def substeps(dt, step):
    return max(1, math.ceil(dt / step - 1e-9))


@dataclass(frozen=True, eq=False)
class PacketSeries:
    model: object
    grid: np.ndarray
    q_c: np.ndarray  # (N, 2)
    p_c: np.ndarray  # (N, 2)
    A: np.ndarray  # (N, 2, 2)
    B: np.ndarray  # (N, 2, 2)
    normalisable: np.ndarray  # (N,) bool
    truncated: bool = False

    def __len__(self):
        return len(self.grid)

    def __getitem__(self, i):
        return PacketState(float(self.grid[i]), self.q_c[i], self.p_c[i], self.A[i], self.B[i])

    @property
    def states(self):
        return [self[i] for i in range(len(self))]

    @property
    def K(self):
        return self.A + 1j * self.B

    @property
    def dA(self):
        """Riccati time derivatives at every sample."""
        G = self.model.G
        return self.A @ G @ self.B + self.B @ G @ self.A

    @property
    def dB(self):
        G = self.model.G
        return self.model.C + self.B @ G @ self.B - self.A @ G @ self.A


def riccati_rhs(state, model):
    """Time derivatives (dq_c, dp_c, dA, dB) of a packet state."""
    return _rhs(state.q_c, state.p_c, state.A, state.B, model.G, model.C)


def _rhs(q, p, A, B, G, C):
    AG, BG = A @ G, B @ G
    return G @ p, -C @ q, AG @ B + BG @ A, C + BG @ B - AG @ A


def _pack(q, p, A, B):
    return (q[0], q[1], p[0], p[1], A[0, 0], 0.5 * (A[0, 1] + A[1, 0]), A[1, 1],
            B[0, 0], 0.5 * (B[0, 1] + B[1, 0]), B[1, 1])


def _packet_rhs(y, g, c):
    """Scalar form of riccati_rhs on (q, p, A, B) with A, B stored as upper triangles.

    Off-diagonal entries of AGA and BGB are averaged over both triangles,
    which is the per-step symmetrisation.
    """
    qx, qy, px, py, a0, a1, a2, b0, b1, b2 = y
    g0, g1, g2 = g
    c0, c1, c2 = c
    ag00, ag01 = a0 * g0 + a1 * g1, a0 * g1 + a1 * g2
    ag10, ag11 = a1 * g0 + a2 * g1, a1 * g1 + a2 * g2
    bg00, bg01 = b0 * g0 + b1 * g1, b0 * g1 + b1 * g2
    bg10, bg11 = b1 * g0 + b2 * g1, b1 * g1 + b2 * g2
    # X = A G B, dA = X + X^T
    x00, x01 = ag00 * b0 + ag01 * b1, ag00 * b1 + ag01 * b2
    x10, x11 = ag10 * b0 + ag11 * b1, ag10 * b1 + ag11 * b2
    aga00, aga11 = ag00 * a0 + ag01 * a1, ag10 * a1 + ag11 * a2
    aga01 = 0.5 * ((ag00 * a1 + ag01 * a2) + (ag10 * a0 + ag11 * a1))
    bgb00, bgb11 = bg00 * b0 + bg01 * b1, bg10 * b1 + bg11 * b2
    bgb01 = 0.5 * ((bg00 * b1 + bg01 * b2) + (bg10 * b0 + bg11 * b1))
    return (
        g0 * px + g1 * py, g1 * px + g2 * py,
        -(c0 * qx + c1 * qy), -(c1 * qx + c2 * qy),
        2.0 * x00, x01 + x10, 2.0 * x11,
        c0 + bgb00 - aga00, c1 + bgb01 - aga01, c2 + bgb11 - aga11,
    )


def _rk4(y, h, g, c):
    k1 = _packet_rhs(y, g, c)
    k2 = _packet_rhs([a + 0.5 * h * b for a, b in zip(y, k1)], g, c)
    k3 = _packet_rhs([a + 0.5 * h * b for a, b in zip(y, k2)], g, c)
    k4 = _packet_rhs([a + h * b for a, b in zip(y, k3)], g, c)
    h6 = h / 6.0
    return tuple(a + h6 * (b + 2.0 * c_ + 2.0 * d + e) for a, b, c_, d, e in zip(y, k1, k2, k3, k4))


def evolve_packet(initial, model, grid, config=None):
    """Integrate centre and width of the packet over ``grid`` with fixed-step RK4.

    A and B are re-symmetrised after every step. If any component leaves the
    overflow guard the series is cut at the last finite sample and flagged
    ``truncated`` (or BlowUpError is raised when ``config.on_blowup == "raise"``).
    """
    config = config or IntegratorConfig()
    if not config.step > 0:
        raise StepSizeError(f"integrator step must be positive, got {config.step!r}")
    grid = check_grid(grid)
    if abs(grid[0] - initial.t) > 1e-12 * max(1.0, abs(grid[0])):
        raise GridMismatchError(f"grid starts at {grid[0]!r} but the initial state is at t={initial.t!r}")
    g = tuple(float(v) for v in (model.G[0, 0], model.G[0, 1], model.G[1, 1]))
    c = tuple(float(v) for v in (model.C[0, 0], model.C[0, 1], model.C[1, 1]))
    n = len(grid)
    rows = np.empty((n, 10))
    y = _pack(initial.q_c, initial.p_c, sym(initial.A), sym(initial.B))
    rows[0] = y
    guard = config.overflow_guard
    last = 0
    truncated = False
    for i in range(1, n):
        dt = grid[i] - grid[i - 1]
        m = substeps(dt, config.step)
        h = dt / m
        for _ in range(m):
            y = _rk4(y, h, g, c)
        if not all(abs(v) < guard for v in y):
            if config.on_blowup == "raise":
                raise BlowUpError(f"packet state exceeded {guard:g} at t={grid[i]:g}")
            truncated = True
            break
        rows[i] = y
        last = i
    r = rows[: last + 1]
    qs, ps = r[:, 0:2].copy(), r[:, 2:4].copy()
    As = np.stack([r[:, 4], r[:, 5], r[:, 5], r[:, 6]], axis=1).reshape(-1, 2, 2)
    Bs = np.stack([r[:, 7], r[:, 8], r[:, 8], r[:, 9]], axis=1).reshape(-1, 2, 2)
    margins = np.linalg.eigvalsh(As)[:, 0]
    return PacketSeries(model, grid[: last + 1].copy(), qs, ps, As, Bs, margins > 0, truncated)


def riccati_linear_oracle(K0, model, t, det_tol=1e-12):
    """K(t) from the linear system Xdot = iGY, Ydot = iCX, X(0)=I, Y(0)=K0, as Y X^-1.

    Independent of the RK4 path: a single matrix exponential of the constant
    4x4 block generator.
    """
    z = np.zeros((2, 2))
    gen = 1j * np.block([[z, model.G], [model.C, z]])
    XY = scipy.linalg.expm(gen * float(t)) @ np.vstack([np.eye(2), np.asarray(K0, dtype=complex)])
    X, Y = XY[:2], XY[2:]
    if abs(np.linalg.det(X)) < det_tol:
        raise SingularityError(f"|det X({t})| below {det_tol:g}: caustic of the Riccati flow")
    K = np.linalg.solve(X.T, Y.T).T
    return 0.5 * (K + K.T)


def normalisability_margin(state):
    """Smallest eigenvalue of A; the packet is square-integrable iff this is positive."""
    return float(np.linalg.eigvalsh(np.asarray(state.A, dtype=float))[0])
