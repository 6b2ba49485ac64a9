import numpy as np
import pytest

from ghostbohm.errors import DegeneracyError, ModelError
from ghostbohm.model import (
    BOUNDED,
    CANONICAL,
    CRITICAL,
    HALVED,
    SPIRAL,
    QuadraticModel,
    build_biham_pair,
    build_ghost_model,
    classical_equivalence_residual,
    flow_spectrum,
)
from ghostbohm.scenario import CAPTION

NU, OMEGA, G = CAPTION["nu"], CAPTION["Omega"], CAPTION["g"]


def test_ghost_curvature_from_caption_values():
    m = build_ghost_model(NU, OMEGA, G)
    np.testing.assert_allclose(m.C, [[0.0805634, -0.0305556], [-0.0305556, -0.21]], atol=5e-8)
    np.testing.assert_array_equal(m.G, np.diag([1.0, -1.0]))
    assert np.linalg.det(m.G) == -1.0
    np.testing.assert_array_equal(m.G.T @ m.G, np.eye(2))


def test_free_ghost_is_critical():
    m = build_ghost_model(0.0, 0.0, 0.0)
    assert not m.C.any()
    spec = flow_spectrum(m)
    assert spec.stability_class == CRITICAL
    assert np.all(spec.eigenvalues == 0)


def test_critical_det_c_from_printed_values():
    # printed digits carry ~2e-9 of rounding into det C; the exact root gives 0
    m = build_ghost_model(NU, CAPTION["Omega_critical"], G)
    assert abs(np.linalg.det(m.C)) < 5e-9
    exact = build_ghost_model(NU, G**2 / (4 * NU**2), G)
    assert abs(np.linalg.det(exact.C)) < 1e-15


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_inputs_rejected(bad):
    with pytest.raises(ModelError):
        build_ghost_model(bad, OMEGA, G)


def test_model_invariants_enforced():
    with pytest.raises(ModelError):
        QuadraticModel(np.eye(2), [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ModelError):
        QuadraticModel(np.eye(2), np.eye(2), hbar=0.0)
    with pytest.raises(ModelError):
        QuadraticModel(np.zeros((2, 2)), np.eye(2))
    m = QuadraticModel(np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        m.C[0, 0] = 3.0


def test_fig1_spectrum_bounded(run):
    spec = flow_spectrum(run("fig1").model)
    assert spec.stability_class == BOUNDED
    assert np.abs(spec.eigenvalues.real).max() < 1e-8
    np.testing.assert_allclose(spec.F, np.block([[np.zeros((2, 2)), np.diag([1.0, -1.0])], [-run("fig1").model.C, np.zeros((2, 2))]]))


@pytest.mark.parametrize("name,cls", [("fig3", BOUNDED), ("fig4", SPIRAL), ("fig5", CRITICAL)])
def test_preset_spectra(run, name, cls):
    assert flow_spectrum(run(name).model).stability_class == cls


@pytest.mark.parametrize("name", ["fig1", "fig3", "fig4", "fig5"])
def test_hamiltonian_spectrum_symmetry(run, name):
    lam = flow_spectrum(run(name).model).eigenvalues

    def same(a, b):
        # every element of a has a partner in b (multiset match by nearest distance)
        return all(np.abs(b - x).min() < 1e-10 for x in a) and all(np.abs(a - x).min() < 1e-10 for x in b)

    assert same(lam, -lam)
    assert same(lam, lam.conj())


def test_biham_g2_before_rescaling():
    pair = build_biham_pair(NU, OMEGA)
    np.testing.assert_allclose(pair.kinetic["2"], [[0.864603, 0.157496], [0.157496, -0.549610]], atol=1e-6)
    assert np.sign(np.linalg.det(pair.kinetic["2"])) == -1
    # canonical storage doubles the printed matrices
    np.testing.assert_allclose(pair.model_2.G, 2 * pair.kinetic["2"])
    np.testing.assert_allclose(pair.model_g.C, 2 * pair.potential["g"])
    assert pair.model_g.C[0, 1] == pytest.approx(-(NU**2 + OMEGA))


def test_biham_structure():
    pair = build_biham_pair(NU, OMEGA)
    for J in (pair.J_g, pair.J_2):
        np.testing.assert_array_equal(J, -J.T)
    np.testing.assert_allclose(pair.classical_flow("g"), pair.classical_flow("2"), atol=1e-12)


def test_biham_degenerate():
    with pytest.raises(DegeneracyError):
        build_biham_pair(0.5, 0.25)


def test_biham_unknown_convention():
    with pytest.raises(ModelError):
        build_biham_pair(NU, OMEGA, convention="other")


def test_equivalence_hand_value():
    pair = build_biham_pair(NU, OMEGA)
    z = np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(pair.vector_field("g", z), [0, 0, -0.0805634, -0.0647183], atol=5e-7)
    assert classical_equivalence_residual(pair, z) < 1e-12
    assert classical_equivalence_residual(pair, np.zeros(4)) == 0.0


@pytest.mark.parametrize("convention", [CANONICAL, HALVED])
def test_equivalence_sweep(convention):
    pair = build_biham_pair(NU, OMEGA, convention=convention)
    pts = np.random.default_rng(3).uniform(-5, 5, (100, 4))
    assert max(classical_equivalence_residual(pair, z) for z in pts) < 1e-12


def test_literal_convention_runs_half_speed():
    canon = build_biham_pair(NU, OMEGA)
    lit = build_biham_pair(NU, OMEGA, convention=HALVED)
    np.testing.assert_allclose(lit.classical_flow("g"), 0.5 * canon.classical_flow("g"), atol=1e-15)
    np.testing.assert_allclose(lit.model_g.flow_matrix, lit.classical_flow("g"), atol=1e-15)
    np.testing.assert_allclose(canon.model_g.flow_matrix, canon.classical_flow("g"), atol=1e-15)
