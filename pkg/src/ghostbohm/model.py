"""Quadratic ghost models, their classical flow, and the degenerate bi-Hamiltonian pair.

Every model is stored in the form

    H = 1/2 p^T G p + 1/2 q^T C q

so that the classical flow is ``qdot = G p, pdot = -C q`` and the Bohmian
guidance law is ``qdot = G grad S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ModelError

SPECTRAL_RTOL = 1e-8
DET_C_ATOL = 1e-9
DEGENERACY_TOL = 1e-12

BOUNDED = "bounded-oscillatory"
SPIRAL = "spiral-unstable"
CRITICAL = "critical"
HYPERBOLIC = "hyperbolic-unstable"

CANONICAL = "canonical"
HALVED = "halved"
CONVENTIONS = (CANONICAL, HALVED)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetric(name, m):
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ModelError(f"{name} must be 2x2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ModelError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(m).max()))
    if abs(m[0, 1] - m[1, 0]) > 1e-9 * scale:
        raise ModelError(f"{name} is not symmetric: {m[0, 1]!r} != {m[1, 0]!r}")
    return _frozen(0.5 * (m + m.T))


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    G: np.ndarray
    C: np.ndarray
    hbar: float = 1.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "G", _symmetric("G", self.G))
        object.__setattr__(self, "C", _symmetric("C", self.C))
        hbar = float(self.hbar)
        if not np.isfinite(hbar) or hbar <= 0:
            raise ModelError(f"hbar must be positive and finite, got {self.hbar!r}")
        object.__setattr__(self, "hbar", hbar)
        if abs(np.linalg.det(self.G)) <= 1e-14:
            raise ModelError("kinetic tensor G is singular")

    @property
    def flow_matrix(self):
        """4x4 generator F of ``d/dt (q, p) = F (q, p)``."""
        z = np.zeros((2, 2))
        return np.block([[z, self.G], [-self.C, z]])

    def replace(self, **changes):
        kw = dict(G=self.G, C=self.C, hbar=self.hbar, label=self.label)
        kw.update(changes)
        return QuadraticModel(**kw)

    def __eq__(self, other):
        if not isinstance(other, QuadraticModel):
            return NotImplemented
        return (
            np.array_equal(self.G, other.G)
            and np.array_equal(self.C, other.C)
            and self.hbar == other.hbar
            and self.label == other.label
        )

    __hash__ = None


def _check_finite(**values):
    for k, v in values.items():
        if not np.isfinite(v):
            raise ModelError(f"{k} must be finite, got {v!r}")


def ghost_curvature(nu, Omega, g):
    return np.array([[2.0 * nu**2, g], [g, 2.0 * Omega]])


def build_ghost_model(nu, Omega, g, hbar=1.0, label="ghost"):
    """Lorentzian-kinetic ghost oscillator, G = diag(1, -1), C = [[2 nu^2, g], [g, 2 Omega]]."""
    _check_finite(nu=nu, Omega=Omega, g=g, hbar=hbar)
    return QuadraticModel(np.diag([1.0, -1.0]), ghost_curvature(nu, Omega, g), hbar, label)


@dataclass(frozen=True)
class FlowSpectrum:
    F: np.ndarray
    eigenvalues: np.ndarray
    stability_class: str


def flow_spectrum(model, rtol=SPECTRAL_RTOL, det_atol=DET_C_ATOL):
    F = model.flow_matrix
    lam = np.linalg.eigvals(F)
    lam = lam[np.lexsort((lam.imag, lam.real))]
    scale = float(np.abs(lam).max())
    tol = rtol * scale if scale > 0 else rtol
    re, im = lam.real, lam.imag
    if np.any((re > tol) & (np.abs(im) > tol)):
        cls = SPIRAL
    elif abs(np.linalg.det(model.C)) <= det_atol:
        cls = CRITICAL
    elif np.all(np.abs(re) <= tol):
        cls = BOUNDED
    else:
        cls = HYPERBOLIC
    return FlowSpectrum(_frozen(F), lam, cls)


@dataclass(frozen=True, eq=False)
class BiHamiltonianPair:
    """The pair (H_g, J_g), (H_2, J_2) with ``H = p^T G p + q^T C q``.

    ``kinetic``/``potential`` hold the matrices exactly as they appear in the
    two Hamiltonians. ``model_g``/``model_2`` are the same Hamiltonians in the
    package-wide ``1/2 p^T G p + 1/2 q^T C q`` normalisation (``canonical``),
    or with the factor 1/2 dropped a second time (``halved``), in which
    case the guidance law uses the printed kinetic tensor and every flow runs
    at half speed.
    """

    nu: float
    Omega: float
    model_g: QuadraticModel
    model_2: QuadraticModel
    J_g: np.ndarray
    J_2: np.ndarray
    kinetic: dict = field(repr=False)
    potential: dict = field(repr=False)
    convention: str = CANONICAL

    @property
    def time_scale(self):
        return 1.0 if self.convention == CANONICAL else 0.5

    def hessian(self, alpha):
        z = np.zeros((2, 2))
        return 2.0 * np.block([[self.potential[alpha], z], [z, self.kinetic[alpha]]])

    def poisson(self, alpha):
        return {"g": self.J_g, "2": self.J_2}[alpha]

    def vector_field(self, alpha, z):
        """J_alpha grad H_alpha at phase-space point z = (x, y, px, py)."""
        return self.poisson(alpha) @ (self.hessian(alpha) @ np.asarray(z, dtype=float))

    def classical_flow(self, alpha):
        """Flow matrix used for classical trajectories, consistent with the stored models."""
        return self.time_scale * (self.poisson(alpha) @ self.hessian(alpha))

    def model(self, alpha):
        return {"g": self.model_g, "2": self.model_2}[alpha]


def biham_tensors(nu, Omega):
    """Kinetic and potential matrices of H_g and H_2 plus both Poisson tensors."""
    n2 = nu**2
    d = n2 - Omega
    s2 = np.sqrt(2.0)
    G_g = np.diag([1.0, -1.0])
    C_g = np.array([[n2, -0.5 * (n2 + Omega)], [-0.5 * (n2 + Omega), Omega]])
    G_2 = np.array([[n2 - 3 * Omega, -(n2 + Omega)], [-(n2 + Omega), Omega - 3 * n2]]) / (2 * s2 * d)
    C_2 = np.array(
        [[0.5 * (3 * n2 - Omega), -0.5 * (n2 + Omega)], [-0.5 * (n2 + Omega), 0.5 * (3 * Omega - n2)]]
    ) / (2 * s2)
    z, eye = np.zeros((2, 2)), np.eye(2)
    J_g = np.block([[z, eye], [-eye, z]])
    J_2 = np.array(
        [
            [0, 0, 3 * n2 - Omega, -n2 - Omega],
            [0, 0, n2 + Omega, n2 - 3 * Omega],
            [Omega - 3 * n2, -n2 - Omega, 0, 0],
            [n2 + Omega, 3 * Omega - n2, 0, 0],
        ]
    ) / (s2 * d)
    return G_g, C_g, G_2, C_2, J_g, J_2


def build_biham_pair(nu, Omega, hbar=1.0, convention=CANONICAL, tol=DEGENERACY_TOL):
    _check_finite(nu=nu, Omega=Omega, hbar=hbar)
    if convention not in CONVENTIONS:
        raise ModelError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    if abs(nu**2 - Omega) <= tol:
        raise DegeneracyError(f"nu**2 - Omega = {nu**2 - Omega!r} vanishes; H_2 and J_2 are undefined")
    G_g, C_g, G_2, C_2, J_g, J_2 = biham_tensors(nu, Omega)
    k = 2.0 if convention == CANONICAL else 1.0
    return BiHamiltonianPair(
        nu=float(nu),
        Omega=float(Omega),
        model_g=QuadraticModel(k * G_g, k * C_g, hbar, "H_g"),
        model_2=QuadraticModel(k * G_2, k * C_2, hbar, "H_2"),
        J_g=_frozen(J_g),
        J_2=_frozen(J_2),
        kinetic={"g": _frozen(G_g), "2": _frozen(G_2)},
        potential={"g": _frozen(C_g), "2": _frozen(C_2)},
        convention=convention,
    )


def classical_equivalence_residual(pair, z):
    """Max-norm gap between the two Hamiltonian vector fields at z."""
    return float(np.max(np.abs(pair.vector_field("g", z) - pair.vector_field("2", z))))
