"""Trajectory diagnostics, the Gaussian quantum potential, regime labels, bi-Hamiltonian comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmplitudeUnderflowError, GridMismatchError, InconclusiveRegimeError
from .evolve import IntegratorConfig, PacketState, evolve_packet, check_grid, sym
from .model import DET_C_ATOL, SPIRAL, flow_spectrum
from .trajectories import (
    CLASSICAL,
    TrajectorySeries,
    evolve_bohmian_ensemble,
    initial_momenta,
    integrate_linear_flow,
)

RIGID = "rigid-transport"
QUASI = "quasi-semiclassical"
SPIRAL_INSTABILITY = "spiral-instability"
CRITICAL_RUNAWAY = "critical-runaway"
NON_NORMALISABLE = "non-normalisable-sector"
REGIMES = (RIGID, QUASI, SPIRAL_INSTABILITY, CRITICAL_RUNAWAY, NON_NORMALISABLE)


def curvature_mismatch(A, model):
    """Lambda = C - A G A (symmetrised). Broadcasts over leading axes of A."""
    A = np.asarray(A, dtype=float)
    return sym(model.C - A @ model.G @ A)


@dataclass(frozen=True)
class ObstructionCheck:
    lambda_norm: float
    det_C: float
    cancelled: bool
    consistent: bool


def lambda_obstruction(A, model, tol=1e-8):
    """Exact cancellation C = A G A forces det C < 0 when det G < 0.

    ``consistent`` is False only if Lambda vanishes while det C >= 0.
    """
    lam = float(np.abs(curvature_mismatch(A, model)).max())
    det_c = float(np.linalg.det(model.C))
    cancelled = lam < tol
    indefinite_metric = np.linalg.det(model.G) < 0
    consistent = not (cancelled and indefinite_metric and det_c >= 0)
    return ObstructionCheck(lam, det_c, cancelled, consistent)


def quantum_potential(q, state, model):
    """Closed-form Q = -1/2 d^T A G A d + hbar/2 Tr(G A) with d = q - q_c.

    ``q`` may be one point or an array of points (..., 2).
    """
    d = np.asarray(q, dtype=float) - state.q_c
    AGA = state.A @ model.G @ state.A
    quad = np.einsum("...i,ij,...j->...", d, AGA, d)
    return -0.5 * quad + 0.5 * model.hbar * np.trace(model.G @ state.A)


def amplitude(q, state, hbar):
    d = np.asarray(q, dtype=float) - state.q_c
    return np.exp(-0.5 / hbar * (d @ state.A @ d))


def quantum_potential_fd(q, state, model, h=1e-3):
    """Q = -(hbar^2/2) (1/R) d_i (G^ij d_j R) by finite differences of R.

    Diagonal second derivatives use the five-point fourth-order stencil,
    the mixed one the four-corner centred stencil.
    """
    if not h > 0:
        raise ValueError(f"stencil step must be positive, got {h!r}")
    hbar = model.hbar
    q = np.asarray(q, dtype=float)
    d = q - state.q_c
    log_r = -0.5 / hbar * float(d @ state.A @ d)
    # stencil points sit within 2h of q; keep R well inside (1e-300, 1e300)
    if not abs(log_r) < math.log(1e300) - 1.0:
        raise AmplitudeUnderflowError(f"amplitude log R={log_r:.4g} at q={q.tolist()} is outside the representable range")
    R0 = amplitude(q, state, hbar)
    e = np.eye(2) * h

    def R(x):
        return amplitude(x, state, hbar)

    H = np.empty((2, 2))
    for i in range(2):
        H[i, i] = (-R(q + 2 * e[i]) + 16 * R(q + e[i]) - 30 * R0 + 16 * R(q - e[i]) - R(q - 2 * e[i])) / (12 * h * h)
    H[0, 1] = H[1, 0] = (R(q + e[0] + e[1]) - R(q + e[0] - e[1]) - R(q - e[0] + e[1]) + R(q - e[0] - e[1])) / (
        4 * h * h
    )
    return float(-0.5 * hbar**2 * np.sum(model.G * H) / R0)


@dataclass(frozen=True)
class DiagnosticsSample:
    t: float
    u: np.ndarray
    delta: np.ndarray
    lam: np.ndarray
    det_lambda: float
    s_m_eigs: np.ndarray
    q_b: float


@dataclass(frozen=True, eq=False)
class DiagnosticsSeries:
    """Per-member diagnostics over a grid; indexing yields DiagnosticsSample."""

    member_id: int
    grid: np.ndarray
    u: np.ndarray  # (N, 2)
    delta: np.ndarray  # (N, 2)
    lam: np.ndarray  # (N, 2, 2)
    det_lambda: np.ndarray  # (N,)
    s_m_eigs: np.ndarray  # (N, 2) ascending
    q_b: np.ndarray  # (N,), NaN marks a gap

    def __len__(self):
        return len(self.grid)

    def __getitem__(self, i):
        return DiagnosticsSample(
            float(self.grid[i]), self.u[i], self.delta[i], self.lam[i],
            float(self.det_lambda[i]), self.s_m_eigs[i], float(self.q_b[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def internal_flow_symmetric_part(B, model):
    M = -model.G @ np.asarray(B)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def diagnostics_series(bohmian, classical, packet):
    """u, Delta, Lambda, det Lambda, spec S_M and Q_B along one Bohmian member."""
    n = min(len(bohmian.grid), len(classical.grid), len(packet.grid))
    for name, g in (("bohmian", bohmian.grid), ("classical", classical.grid)):
        if not np.array_equal(g[:n], packet.grid[:n]):
            raise GridMismatchError(f"{name} series grid differs from the packet grid")
    model = packet.model
    qb = bohmian.positions[:n]
    A, B, qc = packet.A[:n], packet.B[:n], packet.q_c[:n]
    lam = curvature_mismatch(A, model)
    s_m = np.linalg.eigvalsh(internal_flow_symmetric_part(B, model))
    d = qb - qc
    AGA = A @ model.G @ A
    q_b = -0.5 * np.einsum("ti,tij,tj->t", d, AGA, d) + 0.5 * model.hbar * np.trace(model.G @ A, axis1=1, axis2=2)
    q_b = np.where(np.isfinite(q_b), q_b, np.nan)
    return DiagnosticsSeries(
        bohmian.member_id, packet.grid[:n].copy(), d, qb - classical.positions[:n], lam,
        np.linalg.det(lam), s_m, q_b,
    )


@dataclass(frozen=True)
class EnsembleSummary:
    grid: np.ndarray
    mean_u: np.ndarray
    mean_delta: np.ndarray
    mean_q_b: np.ndarray


def ensemble_mean(diags):
    """Member-averaged |u|, |Delta| and Q_B; summation runs in fixed member order."""
    diags = sorted(diags, key=lambda d: d.member_id)
    n = min(len(d) for d in diags)
    nu = np.stack([np.linalg.norm(d.u[:n], axis=1) for d in diags])
    nd = np.stack([np.linalg.norm(d.delta[:n], axis=1) for d in diags])
    qb = np.stack([d.q_b[:n] for d in diags])
    return EnsembleSummary(diags[0].grid[:n], np.mean(nu, axis=0), np.mean(nd, axis=0), np.mean(qb, axis=0))


@dataclass(frozen=True)
class RegimeThresholds:
    rigid_rel: float = 1e-3  # eps_Lambda = rigid_rel * max|C_ij|
    growth_min: float = 3.0
    det_c_atol: float = DET_C_ATOL
    bounded_floor: float = 1e-6


@dataclass(frozen=True)
class RegimeLabel:
    label: str
    evidence: dict = field(default_factory=dict)


def _late_growth(x, reference):
    """max over the second half of the horizon relative to ``reference``."""
    half = len(x) // 2
    return float(np.max(x[half:]) / reference)


def classify_regime(model, packet, diag, thresholds=None):
    """Table-style regime label from model, packet series and ensemble diagnostics.

    Branches are tried in order: non-normalisable, critical, spiral, rigid,
    quasi-semiclassical. Raises InconclusiveRegimeError when none applies.
    """
    th = thresholds or RegimeThresholds()
    summary = diag if isinstance(diag, EnsembleSummary) else ensemble_mean(diag)
    margins = np.linalg.eigvalsh(packet.A)[:, 0]
    lam = curvature_mismatch(packet.A, model)
    sup_lam = float(np.abs(lam).max())
    c_scale = float(np.abs(model.C).max())
    eps_lam = th.rigid_rel * c_scale if c_scale > 0 else th.rigid_rel
    det_c = float(np.linalg.det(model.C))
    spectrum = flow_spectrum(model, det_atol=th.det_c_atol)
    u0 = max(float(summary.mean_u[0]), th.bounded_floor)
    half = len(summary.grid) // 2
    d_ref = max(float(np.max(summary.mean_delta[: max(half, 1)])), th.bounded_floor)
    u_growth = _late_growth(summary.mean_u, u0)
    delta_growth = _late_growth(summary.mean_delta, d_ref)
    evidence = {
        "min_normalisability_margin": float(margins.min()),
        "sup_lambda_inf": sup_lam,
        "eps_lambda": eps_lam,
        "det_C": det_c,
        "flow_class": spectrum.stability_class,
        "max_flow_real_part": float(spectrum.eigenvalues.real.max()),
        "u_growth": u_growth,
        "delta_growth": delta_growth,
        "growth_min": th.growth_min,
        "truncated": bool(packet.truncated),
    }
    if margins.min() <= 0:
        return RegimeLabel(NON_NORMALISABLE, evidence)
    if abs(det_c) <= th.det_c_atol and sup_lam > eps_lam:
        return RegimeLabel(CRITICAL_RUNAWAY, evidence)
    if spectrum.stability_class == SPIRAL and u_growth > th.growth_min:
        return RegimeLabel(SPIRAL_INSTABILITY, evidence)
    if sup_lam < eps_lam:
        return RegimeLabel(RIGID, evidence)
    if u_growth <= th.growth_min and delta_growth <= th.growth_min:
        return RegimeLabel(QUASI, evidence)
    raise InconclusiveRegimeError("no regime criterion applies", evidence)


@dataclass(frozen=True, eq=False)
class RepresentationRun:
    alpha: str
    model: object
    packet: object
    bohmian: object  # BohmianEnsemble
    classical: list  # TrajectorySeries from this representation's J grad H flow
    delta: np.ndarray  # (n, N, 2) q_B - shared classical
    q_b: np.ndarray  # (n, N)


@dataclass(frozen=True, eq=False)
class BihamComparison:
    pair: object
    grid: np.ndarray
    reference: list  # shared classical trajectories
    runs: dict  # alpha -> RepresentationRun
    gap: np.ndarray  # (n, N) |q_Bg - q_B2|

    @property
    def classical_mismatch(self):
        """Max pointwise gap between the classical ensembles of the two representations."""
        a = np.stack([s.positions for s in self.runs["g"].classical])
        b = np.stack([s.positions for s in self.runs["2"].classical])
        n = min(a.shape[1], b.shape[1])
        return float(np.abs(a[:, :n] - b[:, :n]).max())


def _classical_from_flow(F, q0, p0, grid, cfg):
    z0 = np.hstack([q0, p0])
    Z, truncated = integrate_linear_flow(z0, F, grid, cfg.step, cfg.overflow_guard, cfg.on_blowup)
    k = Z.shape[0]
    return [
        TrajectorySeries(j, CLASSICAL, grid[:k], Z[:, j, :2], Z[:, j, 2:], truncated) for j in range(Z.shape[1])
    ]


def biham_compare(pair, packet0, offsets, grid, config=None):
    """Evolve one packet and one Bohmian ensemble per representation from identical data.

    Each representation uses its own kinetic tensor in both the width flow
    and the guidance law; the classical reference is the common J grad H flow.
    """
    cfg = config or IntegratorConfig()
    grid = check_grid(grid)
    packet0 = PacketState.make(packet0.q_c, packet0.p_c, packet0.A, packet0.B, t=grid[0])
    q0 = packet0.q_c + np.asarray(offsets, dtype=float).reshape(-1, 2)
    p0 = initial_momenta(q0, packet0)
    reference = _classical_from_flow(pair.classical_flow("g"), q0, p0, grid, cfg)
    ref_pos = np.stack([s.positions for s in reference])
    runs = {}
    for alpha in ("g", "2"):
        model = pair.model(alpha)
        packet = evolve_packet(packet0, model, grid, cfg)
        ens = evolve_bohmian_ensemble(q0, packet)
        classical = _classical_from_flow(pair.classical_flow(alpha), q0, p0, grid, cfg)
        qb = np.stack([m.positions for m in ens.members])
        n = min(qb.shape[1], ref_pos.shape[1])
        qbs = np.stack([quantum_potential(qb[:, i], packet[i], model) for i in range(n)], axis=1)
        runs[alpha] = RepresentationRun(alpha, model, packet, ens, classical, qb[:, :n] - ref_pos[:, :n], qbs)
    a = np.stack([m.positions for m in runs["g"].bohmian.members])
    b = np.stack([m.positions for m in runs["2"].bohmian.members])
    n = min(a.shape[1], b.shape[1])
    gap = np.linalg.norm(a[:, :n] - b[:, :n], axis=2)
    return BihamComparison(pair, grid, reference, runs, gap)


def fd_first(x, h):
    """Fourth-order centred first derivative along axis 0; drops two samples at each end."""
    return (-x[4:] + 8.0 * x[3:-1] - 8.0 * x[1:-3] + x[:-4]) / (12.0 * h)


def fd_second(x, h):
    return (-x[4:] + 16.0 * x[3:-1] - 30.0 * x[2:-2] + 16.0 * x[1:-3] - x[:-4]) / (12.0 * h * h)


def _relative(err, exact, quantity):
    scale = float(np.abs(exact).max())
    # exact side vanishes identically on rigid presets; measure against the signal itself
    if scale <= 1e-10 * float(np.abs(quantity).max()):
        scale = float(np.abs(quantity).max())
    return float(np.abs(err).max() / scale) if scale > 0 else float(np.abs(err).max())


def _step(grid):
    h = np.diff(grid)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise GridMismatchError("identity checks need a uniform grid")
    return float(h[0])


def norm_growth_residual(diag, packet):
    """Relative gap between d|u|^2/dt (finite differences) and 2 u^T S_M u."""
    n = len(diag)
    h = _step(diag.grid)
    u = diag.u
    n2 = np.einsum("ti,ti->t", u, u)
    s_m = internal_flow_symmetric_part(packet.B[:n], packet.model)
    exact = 2.0 * np.einsum("ti,tij,tj->t", u, s_m, u)[2:-2]
    return _relative(fd_first(n2, h) - exact, exact, n2)


def second_order_residual(diag, packet):
    """Relative gap between u'' (finite differences) and -G Lambda u."""
    h = _step(diag.grid)
    u = diag.u
    exact = -np.einsum("ij,tjk,tk->ti", packet.model.G, diag.lam, u)[2:-2]
    return _relative(fd_second(u, h) - exact, exact, u)
