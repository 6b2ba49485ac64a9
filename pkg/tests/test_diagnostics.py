import numpy as np
import pytest

from ghostbohm.diagnostics import (
    CRITICAL_RUNAWAY,
    NON_NORMALISABLE,
    QUASI,
    RIGID,
    SPIRAL_INSTABILITY,
    RegimeThresholds,
    biham_compare,
    classify_regime,
    curvature_mismatch,
    diagnostics_series,
    ensemble_mean,
    lambda_obstruction,
    norm_growth_residual,
    quantum_potential,
    quantum_potential_fd,
    second_order_residual,
)
from ghostbohm.errors import AmplitudeUnderflowError, GridMismatchError, InconclusiveRegimeError
from ghostbohm.evolve import PacketState, evolve_packet, make_grid
from ghostbohm.model import BiHamiltonianPair, QuadraticModel, build_ghost_model
from ghostbohm.scenario import A_FLIPPED, CAPTION, P_C0, Q_C0
from ghostbohm.trajectories import evolve_bohmian_ensemble, evolve_classical_ensemble, initial_momenta

CAPTION_MODEL = build_ghost_model(CAPTION["nu"], CAPTION["Omega"], CAPTION["g"])


def test_lambda_examples(fig1_state):
    assert np.abs(curvature_mismatch(fig1_state.A, CAPTION_MODEL)).max() < 1e-4
    np.testing.assert_array_equal(curvature_mismatch(np.zeros((2, 2)), CAPTION_MODEL), CAPTION_MODEL.C)
    flipped = build_ghost_model(CAPTION["nu"], CAPTION["Omega"], -CAPTION["g"])
    assert np.abs(curvature_mismatch(A_FLIPPED, flipped)).max() < 1e-4


def test_lambda_symmetric_and_broadcasts(run):
    p = run("fig3").packet
    lam = curvature_mismatch(p.A, p.model)
    np.testing.assert_array_equal(lam, np.swapaxes(lam, 1, 2))
    np.testing.assert_array_equal(lam[17], curvature_mismatch(p.A[17], p.model))


def test_obstruction(run, fig1_state):
    ok = lambda_obstruction(fig1_state.A, run("fig1").model)
    assert ok.cancelled and ok.consistent and ok.det_C < 0
    # Lambda = 0 with det C >= 0 cannot happen for a Lorentzian metric: a forced
    # cancellation against a positive-determinant C is flagged
    fake = QuadraticModel(np.diag([1.0, -1.0]), np.eye(2))
    chk = lambda_obstruction(np.eye(2), fake, tol=10.0)
    assert chk.cancelled and not chk.consistent


def test_q_examples(run, fig1_state):
    m = run("fig1").model
    assert quantum_potential(fig1_state.q_c, fig1_state, m) == pytest.approx(-0.0763889, abs=5e-8)
    q = fig1_state.q_c + [1.0, 0.0]
    assert quantum_potential(q, fig1_state, m) == pytest.approx(-0.1166706, abs=1e-6)
    flat = PacketState.make(Q_C0, P_C0, np.zeros((2, 2)))
    assert quantum_potential([4.0, -1.0], flat, m) == 0.0


def test_q_fd_examples(run, fig1_state):
    m = run("fig1").model
    assert abs(quantum_potential_fd(fig1_state.q_c, fig1_state, m) - quantum_potential(fig1_state.q_c, fig1_state, m)) < 1e-6
    q = fig1_state.q_c + [1.0, 0.0]
    assert quantum_potential_fd(q, fig1_state, m) == pytest.approx(-0.1166706, abs=1e-4)
    flat = PacketState.make(Q_C0, P_C0, np.zeros((2, 2)))
    assert quantum_potential_fd([4.0, -1.0], flat, m) == 0.0


def test_q_fd_underflow(run):
    s = PacketState.make(Q_C0, P_C0, A_FLIPPED)
    with pytest.raises(AmplitudeUnderflowError):
        quantum_potential_fd(np.array(Q_C0) + [100.0, 0.0], s, run("fig6").model)
    with pytest.raises(AmplitudeUnderflowError):
        quantum_potential_fd(np.array(Q_C0) + [100.0, 0.0], run("fig1").packet[0], run("fig1").model)


def test_q_vectorised(run, fig1_state):
    m = run("fig1").model
    pts = fig1_state.q_c + np.random.default_rng(0).normal(size=(7, 2))
    np.testing.assert_allclose(quantum_potential(pts, fig1_state, m), [quantum_potential(p, fig1_state, m) for p in pts])


def test_rigid_series(run):
    s = run("fig1")
    d = s.diagnostics[0]
    nu = np.linalg.norm(d.u, axis=1)
    assert np.abs(nu - nu[0]).max() < 1e-6
    nd = np.linalg.norm(d.delta, axis=1)
    assert np.isfinite(nd).all() and nd.max() < 20 * (nd[: len(nd) // 4].max() + 1e-12)


def test_quasi_det_lambda_changes_sign(run):
    s = run("fig3")
    det = s.diagnostics[0].det_lambda
    assert det.min() < 0 < det.max()
    assert s.summary.mean_u.max() < 3 * s.summary.mean_u[0]


def test_centre_member_zero_deviation(run):
    p = run("fig1").packet
    q0 = p.q_c[:1]
    b = evolve_bohmian_ensemble(q0, p).members[0]
    c = evolve_classical_ensemble(q0, initial_momenta(q0, p[0]), p.model, p.grid)[0]
    d = diagnostics_series(b, c, p)
    assert np.abs(d.u).max() < 1e-8 and np.abs(d.delta).max() < 1e-8
    assert np.abs(d.q_b - 0.5 * np.trace(p.model.G @ p.A[0])).max() < 1e-8


def test_sample_access(run):
    d = run("fig3").diagnostics[2]
    smp = d[100]
    assert smp.t == pytest.approx(1.0)
    assert smp.s_m_eigs[0] <= smp.s_m_eigs[1]
    np.testing.assert_array_equal(smp.lam, smp.lam.T)
    assert smp.det_lambda == pytest.approx(np.linalg.det(smp.lam))
    assert len(list(d)) == len(d)


def test_series_grid_mismatch(run):
    s = run("fig1")
    other = run("fig3")
    shifted = type(s.classical[0])(0, "classical", s.packet.grid + 1.0, s.classical[0].positions)
    with pytest.raises(GridMismatchError):
        diagnostics_series(s.bohmian.members[0], shifted, other.packet)


@pytest.mark.parametrize("name", ["fig1", "fig3", "fig4", "fig5", "fig6"])
def test_identities(run, name):
    s = run(name)
    for d in s.diagnostics[:4]:
        assert norm_growth_residual(d, s.packet) < 1e-5
        assert second_order_residual(d, s.packet) < 1e-4


def test_ensemble_mean_order_independent(run):
    diags = run("fig3").diagnostics
    a = ensemble_mean(diags)
    b = ensemble_mean(list(reversed(diags)))
    np.testing.assert_array_equal(a.mean_u, b.mean_u)


@pytest.mark.parametrize("name,label", [
    ("fig1", RIGID), ("fig2", RIGID), ("fig3", QUASI), ("fig4", SPIRAL_INSTABILITY),
    ("fig5", CRITICAL_RUNAWAY), ("fig5-chirp", CRITICAL_RUNAWAY), ("fig6", NON_NORMALISABLE),
])
def test_regime_table(run, name, label):
    s = run(name)
    lab = classify_regime(s.model, s.packet, s.diagnostics)
    assert lab.label == label
    assert lab.evidence and "sup_lambda_inf" in lab.evidence


def test_inconclusive_hyperbolic():
    m = QuadraticModel(np.eye(2), -0.04 * np.eye(2))
    s = PacketState.make([0.5, 0.0], [0.0, 0.1], [[1.0, 0.1], [0.1, 0.8]])
    grid = make_grid(0, 60, 0.05)
    p = evolve_packet(s, m, grid)
    q0 = s.q_c + np.array([[0.3, 0.1], [-0.2, 0.4]])
    ens = evolve_bohmian_ensemble(q0, p)
    cl = evolve_classical_ensemble(q0, initial_momenta(q0, s), m, grid)
    diags = [diagnostics_series(b, c, p) for b, c in zip(ens.members, cl)]
    with pytest.raises(InconclusiveRegimeError) as err:
        classify_regime(m, p, diags, RegimeThresholds())
    assert err.value.evidence["flow_class"] == "hyperbolic-unstable"


def test_biham_fig7(biham):
    assert biham.classical_mismatch < 1e-10
    assert np.nanmax(biham.gap) > 1e-2
    dg = np.linalg.norm(biham.runs["g"].delta[:, -1], axis=1).mean()
    d2 = np.linalg.norm(biham.runs["2"].delta[:, -1], axis=1).mean()
    assert d2 >= dg


def test_biham_reference_representation_independent(biham):
    ref = np.stack([s.positions for s in biham.reference])
    for r in biham.runs.values():
        own = np.stack([s.positions for s in r.classical])
        assert np.abs(own - ref).max() < 1e-10


def test_biham_identical_representations_no_gap(run):
    m = run("fig1").model
    z = np.zeros((2, 2))
    J = np.block([[z, np.eye(2)], [-np.eye(2), z]])
    half = {"g": m.G / 2, "2": m.G / 2}
    pair = BiHamiltonianPair(0.0, 0.0, m, m, J, J, half, {"g": m.C / 2, "2": m.C / 2})
    p0 = run("fig1").packet[0]
    offs = np.array([[0.3, -0.2], [1.0, 0.5]])
    comp = biham_compare(pair, p0, offs, make_grid(0, 20, 0.01))
    assert np.abs(comp.gap).max() < 1e-12
    assert comp.classical_mismatch == 0.0
