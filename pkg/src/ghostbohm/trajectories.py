"""Classical and Bohmian trajectory ensembles guided by an evolved Gaussian packet."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, GridMismatchError, NonNormalisableError
from .evolve import OVERFLOW_GUARD, check_grid, normalisability_margin, substeps, DEFAULT_STEP

DENSITY = "density"
FIXED_OFFSETS = "fixed-offsets"

CLASSICAL = "classical"
BOHMIAN = "bohmian"
CENTRE = "centre"


@dataclass(frozen=True)
class EnsembleSpec:
    size: int = 20
    seed: int = 0
    sampling: str = DENSITY
    offsets: tuple | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValueError(f"ensemble size must be >= 1, got {self.size!r}")
        if self.sampling not in (DENSITY, FIXED_OFFSETS):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == FIXED_OFFSETS:
            if self.offsets is None or len(self.offsets) != self.size:
                raise ValueError("fixed-offsets sampling needs exactly `size` offsets")


@dataclass(frozen=True, eq=False)
class TrajectorySeries:
    member_id: int
    kind: str
    grid: np.ndarray
    positions: np.ndarray  # (N, 2)
    momenta: np.ndarray | None = None  # (N, 2), classical and centre only
    truncated: bool = False


def member_rng(seed, member_id):
    """Counter-based stream for one member, independent of evaluation order."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(member_id),))
    return np.random.Generator(np.random.Philox(ss))


def _gaussian_draws(cov, size, seed):
    L = np.linalg.cholesky(cov)
    z = np.array([member_rng(seed, k).standard_normal(2) for k in range(size)])
    return _mv(L, z)


def sample_ensemble(packet0, spec, hbar=1.0):
    """Initial positions for ``spec.size`` members, shape (size, 2).

    Density mode draws from |psi(q, 0)|^2, i.e. a Gaussian with mean q_c and
    covariance (hbar/2) A^-1.
    """
    q_c = np.asarray(packet0.q_c, dtype=float)
    if spec.sampling == FIXED_OFFSETS:
        return q_c + np.asarray(spec.offsets, dtype=float).reshape(spec.size, 2)
    margin = normalisability_margin(packet0)
    if margin <= 0:
        raise NonNormalisableError(
            f"A(0) has minimum eigenvalue {margin:.6g}; |psi|^2 is not a density, use fixed offsets"
        )
    cov = 0.5 * hbar * np.linalg.inv(packet0.A)
    return q_c + _gaussian_draws(0.5 * (cov + cov.T), spec.size, spec.seed)


def reference_offsets(A0, size, seed, hbar=1.0):
    """Offsets drawn from a Gaussian built on |eigenvalues| of A0.

    Used as probe positions when A0 is not positive definite.
    """
    w, V = np.linalg.eigh(np.asarray(A0, dtype=float))
    cov = 0.5 * hbar * (V / np.abs(w)) @ V.T
    return _gaussian_draws(0.5 * (cov + cov.T), size, seed)


def initial_momenta(q0, packet0):
    """Phase gradient p(0) = p_c - B (q - q_c) at the initial positions."""
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    return packet0.p_c - _mv(np.asarray(packet0.B), q0 - packet0.q_c)


def _mv(M, v):
    """Rows of v mapped by M, written elementwise.

    Each output row depends only on its input row, so results are bitwise
    independent of how members are batched across workers.
    """
    if M.shape == (2, 2):
        x, y = v[:, 0], v[:, 1]
        return np.column_stack((M[0, 0] * x + M[0, 1] * y, M[1, 0] * x + M[1, 1] * y))
    d = M.shape[0]
    cols = [v[:, j] for j in range(M.shape[1])]
    out = np.empty((v.shape[0], d))
    for i in range(d):
        acc = M[i, 0] * cols[0]
        for j in range(1, len(cols)):
            acc = acc + M[i, j] * cols[j]
        out[:, i] = acc
    return out


def _guard(arrs, guard):
    return all(np.all(np.abs(a) < guard) for a in arrs)


def integrate_linear_flow(z0, F, grid, step=DEFAULT_STEP, overflow_guard=OVERFLOW_GUARD, on_blowup="truncate"):
    """RK4 for zdot = F z, vectorised over rows of z0 (shape (n, d)).

    Returns (array (N, n, d), truncated flag). For a truncated run only the
    finite prefix is returned.
    """
    grid = check_grid(grid)
    z = np.array(z0, dtype=float, ndmin=2)
    out = np.empty((len(grid),) + z.shape)
    out[0] = z
    F = np.asarray(F, dtype=float)
    for i in range(1, len(grid)):
        dt = grid[i] - grid[i - 1]
        m = substeps(dt, step)
        h = dt / m
        for _ in range(m):
            k1 = _mv(F, z)
            k2 = _mv(F, z + 0.5 * h * k1)
            k3 = _mv(F, z + 0.5 * h * k2)
            k4 = _mv(F, z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not _guard([z], overflow_guard):
            if on_blowup == "raise":
                raise BlowUpError(f"trajectory exceeded {overflow_guard:g} at t={grid[i]:g}")
            return out[:i], True
        out[i] = z
    return out, False


def _classical_step(z, h, g, c):
    """One RK4 step of qdot = G p, pdot = -C q on component arrays z = (qx, qy, px, py)."""
    g0, g1, g2 = g
    c0, c1, c2 = c

    def f(qx, qy, px, py):
        return g0 * px + g1 * py, g1 * px + g2 * py, -(c0 * qx + c1 * qy), -(c1 * qx + c2 * qy)

    k1 = f(*z)
    k2 = f(*[a + 0.5 * h * b for a, b in zip(z, k1)])
    k3 = f(*[a + 0.5 * h * b for a, b in zip(z, k2)])
    k4 = f(*[a + h * b for a, b in zip(z, k3)])
    h6 = h / 6.0
    return [a + h6 * (b + 2.0 * c_ + 2.0 * d + e) for a, b, c_, d, e in zip(z, k1, k2, k3, k4)]


def evolve_classical_ensemble(q0, p0, model, grid, step=DEFAULT_STEP, overflow_guard=OVERFLOW_GUARD,
                              on_blowup="truncate", kind=CLASSICAL, first_id=0):
    """Hamilton's equations qdot = G p, pdot = -C q for every row of (q0, p0)."""
    grid = check_grid(grid)
    q = np.array(q0, dtype=float, ndmin=2)
    p = np.array(p0, dtype=float, ndmin=2)
    g = (float(model.G[0, 0]), float(model.G[0, 1]), float(model.G[1, 1]))
    c = (float(model.C[0, 0]), float(model.C[0, 1]), float(model.C[1, 1]))
    n = len(grid)
    Z = np.empty((n, 4, q.shape[0]))
    z = [q[:, 0].copy(), q[:, 1].copy(), p[:, 0].copy(), p[:, 1].copy()]
    Z[0] = z
    k, truncated = n, False
    for i in range(1, n):
        dt = grid[i] - grid[i - 1]
        m = substeps(dt, step)
        h = dt / m
        for _ in range(m):
            z = _classical_step(z, h, g, c)
        if not _guard(z, overflow_guard):
            if on_blowup == "raise":
                raise BlowUpError(f"classical trajectory exceeded {overflow_guard:g} at t={grid[i]:g}")
            k, truncated = i, True
            break
        Z[i] = z
    Q = np.moveaxis(Z[:, :2], 2, 1)
    P = np.moveaxis(Z[:, 2:], 2, 1)
    return [
        TrajectorySeries(first_id + j, kind, grid[:k], Q[:k, j], P[:k, j], truncated)
        for j in range(q.shape[0])
    ]


def evolve_classical(q0, p0, model, grid, **kw):
    return evolve_classical_ensemble(q0, p0, model, grid, **kw)[0]


def bohmian_velocity(q, state, model):
    """Guidance velocity G (p_c - B (q - q_c)); accepts a single point or rows of points."""
    q = np.asarray(q, dtype=float)
    rows = np.atleast_2d(q)
    v = _mv(model.G, state.p_c - _mv(np.asarray(state.B), rows - state.q_c))
    return v[0] if q.ndim == 1 else v


@dataclass(frozen=True, eq=False)
class BohmianEnsemble:
    members: list
    U: np.ndarray  # (N, 2, 2) internal-flow propagator, U(0) = I
    u0: np.ndarray  # (n, 2) initial deviations from the packet centre

    def reconstruct(self, packet):
        """q_c(t) + U(t) u(0) for every member, shape (N, n, 2)."""
        k = len(self.U)
        return packet.q_c[:k, None, :] + np.einsum("tij,nj->tni", self.U, self.u0)


class _Midpoint:
    """Packet quantities between two grid samples."""

    def __init__(self, packet, interpolation):
        self.packet = packet
        self.hermite = interpolation == "hermite"
        if self.hermite:
            G = packet.model.G
            self.dq = packet.p_c @ G.T
            self.dp = -(packet.q_c @ packet.model.C.T)
            self.dB = packet.dB

    def all(self):
        """Half-step (q_c, p_c, B) for every grid interval."""
        pk = self.packet
        dt = np.diff(pk.grid)
        q = 0.5 * (pk.q_c[:-1] + pk.q_c[1:])
        p = 0.5 * (pk.p_c[:-1] + pk.p_c[1:])
        B = 0.5 * (pk.B[:-1] + pk.B[1:])
        if self.hermite:
            q = q + dt[:, None] / 8.0 * (self.dq[:-1] - self.dq[1:])
            p = p + dt[:, None] / 8.0 * (self.dp[:-1] - self.dp[1:])
            B = B + dt[:, None, None] / 8.0 * (self.dB[:-1] - self.dB[1:])
        return q, p, B


def evolve_bohmian_ensemble(q0, packet, grid=None, interpolation="hermite", first_id=0):
    """Integrate qdot = G grad S along ``packet`` for every initial position in ``q0``.

    RK4 on the packet grid. Half-step packet states come from cubic Hermite
    interpolation using the exact Riccati derivatives ("hermite", the
    default) or from the plain average of the neighbours ("linear", O(h^2)). The internal-flow
    propagator U (Udot = -G B U, U(0) = I) is integrated with the same stages.
    """
    if grid is not None:
        grid = check_grid(grid)
        n = len(packet.grid)
        if len(grid) > n and not packet.truncated:
            raise GridMismatchError("packet series does not span the requested grid")
        if len(grid) < n or not np.allclose(grid[:n], packet.grid, rtol=0, atol=1e-9):
            raise GridMismatchError("requested grid does not match the packet samples")
    G = packet.model.G
    q = np.array(q0, dtype=float, ndmin=2)
    u0 = q - packet.q_c[0]
    n = len(packet.grid)
    # guidance field is affine in q: v = a(t) + L(t) q with L = -G B
    qc_m, pc_m, B_m = _Midpoint(packet, interpolation).all()
    L_n = -G @ packet.B
    a_n = packet.p_c @ G.T - np.einsum("tij,tj->ti", L_n, packet.q_c)
    L_m = -G @ B_m
    a_m = pc_m @ G.T - np.einsum("tij,tj->ti", L_m, qc_m)
    Ln, an, Lm, am = L_n.tolist(), a_n.tolist(), L_m.tolist(), a_m.tolist()

    def vel(x, y, L, a):
        return L[0][0] * x + L[0][1] * y + a[0], L[1][0] * x + L[1][1] * y + a[1]

    def mul(L, u):
        u0, u1, u2, u3 = u
        return (L[0][0] * u0 + L[0][1] * u2, L[0][0] * u1 + L[0][1] * u3,
                L[1][0] * u0 + L[1][1] * u2, L[1][0] * u1 + L[1][1] * u3)

    Q = np.empty((n,) + q.shape)
    Us = np.empty((n, 4))
    U = (1.0, 0.0, 0.0, 1.0)
    Q[0], Us[0] = q, U
    x, y = q[:, 0].copy(), q[:, 1].copy()
    grid = packet.grid
    for i in range(n - 1):
        h = grid[i + 1] - grid[i]
        L0, a0, L1, a1, Lh, ah = Ln[i], an[i], Ln[i + 1], an[i + 1], Lm[i], am[i]
        k1x, k1y = vel(x, y, L0, a0)
        k2x, k2y = vel(x + 0.5 * h * k1x, y + 0.5 * h * k1y, Lh, ah)
        k3x, k3y = vel(x + 0.5 * h * k2x, y + 0.5 * h * k2y, Lh, ah)
        k4x, k4y = vel(x + h * k3x, y + h * k3y, L1, a1)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        l1 = mul(L0, U)
        l2 = mul(Lh, [u + 0.5 * h * d for u, d in zip(U, l1)])
        l3 = mul(Lh, [u + 0.5 * h * d for u, d in zip(U, l2)])
        l4 = mul(L1, [u + h * d for u, d in zip(U, l3)])
        U = tuple(u + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for u, a, b, c, d in zip(U, l1, l2, l3, l4))
        Q[i + 1, :, 0], Q[i + 1, :, 1], Us[i + 1] = x, y, U
    Us = Us.reshape(n, 2, 2)
    members = [
        TrajectorySeries(first_id + j, BOHMIAN, packet.grid, Q[:, j], None, packet.truncated)
        for j in range(q.shape[0])
    ]
    return BohmianEnsemble(members, Us, u0)


def evolve_bohmian(q0, packet, grid=None, interpolation="hermite"):
    """Single-member Bohmian trajectory; returns (TrajectorySeries, U series)."""
    ens = evolve_bohmian_ensemble(q0, packet, grid, interpolation)
    return ens.members[0], ens.U


def centre_series(packet, member_id=-1):
    return TrajectorySeries(member_id, CENTRE, packet.grid, packet.q_c, packet.p_c, packet.truncated)
