import numpy as np
import pytest

from ghostbohm.errors import BlowUpError, GridMismatchError, SingularityError, StepSizeError
from ghostbohm.evolve import (
    IntegratorConfig,
    PacketState,
    evolve_packet,
    make_grid,
    normalisability_margin,
    riccati_linear_oracle,
    riccati_rhs,
)
from ghostbohm.model import QuadraticModel, build_ghost_model
from ghostbohm.scenario import A_FLIPPED, CAPTION


def test_rhs_rigid_initial_state(run, fig1_state):
    dq, dp, dA, dB = riccati_rhs(fig1_state, run("fig1").model)
    np.testing.assert_allclose(dq, [1.0, 0.75])
    assert np.abs(dA).max() == 0.0
    assert np.abs(dB).max() < 1e-15


def test_rhs_printed_caption_rounding(fig1_state):
    m = build_ghost_model(CAPTION["nu"], CAPTION["Omega"], CAPTION["g"])
    _, _, dA, dB = riccati_rhs(fig1_state, m)
    assert np.abs(dA).max() == 0.0
    assert np.abs(dB).max() < 1e-5


def test_rhs_free_ghost_kick():
    m = build_ghost_model(0, 0, 0)
    s = PacketState.make([0, 0], [0, 0], np.eye(2))
    _, _, _, dB = riccati_rhs(s, m)
    np.testing.assert_array_equal(dB, -m.G)
    grid = np.array([0.0, 1e-3])
    B = evolve_packet(s, m, grid).B[-1]
    np.testing.assert_allclose(B, -1e-3 * m.G, atol=1e-8)


def test_fig1_stationary(run):
    p = run("fig1").packet
    assert np.abs(p.A - p.A[0]).max() < 1e-6
    assert np.abs(p.B).max() < 1e-6
    assert p.normalisable.all()


def test_fig5_grows_and_stays_normalisable(run):
    p = run("fig5").packet
    r = np.linalg.norm(p.q_c, axis=1)
    assert r[-1] > 10 * r[0]
    # growth is secular: the late-time envelope keeps rising
    n = len(r)
    assert r[3 * n // 4:].max() > r[n // 2: 3 * n // 4].max() > r[: n // 4].max()
    assert p.normalisable.all()


def test_symmetry_exact(run):
    for name in ("fig3", "fig4", "fig6"):
        p = run(name).packet
        np.testing.assert_array_equal(p.A, np.swapaxes(p.A, 1, 2))
        np.testing.assert_array_equal(p.B, np.swapaxes(p.B, 1, 2))


def test_oracle_stationary_and_t0(run):
    m = run("fig1").model
    A0 = run("fig1").packet.A[0]
    np.testing.assert_allclose(riccati_linear_oracle(A0, m, 37.0), A0, atol=1e-9)
    K0 = A0 + 0.3j * np.eye(2)
    np.testing.assert_array_equal(riccati_linear_oracle(K0, m, 0.0), K0)


def test_oracle_fig3_t10(run):
    p = run("fig3").packet
    i = int(np.searchsorted(p.grid, 10.0))
    assert abs(p.grid[i] - 10.0) < 1e-12
    assert np.abs(p.K[i] - riccati_linear_oracle(p.K[0], p.model, 10.0)).max() < 1e-6


def test_oracle_caustic():
    # G = I, C = I: X(t) = cos t I - sin t K0 is singular at tan t = 1 for K0 = -i I
    m = QuadraticModel(np.eye(2), np.eye(2))
    with pytest.raises(SingularityError):
        riccati_linear_oracle(np.eye(2) * 1j, m, np.pi / 4)


def test_margin_examples(fig1_state):
    a = np.array(fig1_state.A)
    tr, det = np.trace(a), np.linalg.det(a)
    expected = 0.5 * (tr - np.sqrt(tr**2 - 4 * det))
    assert normalisability_margin(fig1_state) == pytest.approx(expected)
    assert normalisability_margin(fig1_state) == pytest.approx(0.20952, abs=1e-5)
    assert normalisability_margin(PacketState.make([0, 0], [0, 0], -np.eye(2))) == -1.0
    assert normalisability_margin(PacketState.make([0, 0], [0, 0], A_FLIPPED)) < 0


def test_grid_errors(fig1_state):
    with pytest.raises(StepSizeError):
        make_grid(0, 1, 0.0)
    m = build_ghost_model(0.2, -0.1, 0.0)
    with pytest.raises(StepSizeError):
        evolve_packet(fig1_state, m, [0.0, 1.0, 1.0])
    with pytest.raises(StepSizeError):
        evolve_packet(fig1_state, m, [0.0, 1.0], IntegratorConfig(step=0.0))
    with pytest.raises(GridMismatchError):
        evolve_packet(fig1_state, m, [1.0, 2.0])


def test_make_grid_default():
    g = make_grid()
    assert len(g) == 11501 and g[0] == 0.0 and abs(g[-1] - 115.0) < 1e-9


def hyperbolic():
    return QuadraticModel(np.eye(2), -np.eye(2))


def test_overflow_truncates():
    s = PacketState.make([1, 1], [1, 1], np.eye(2))
    p = evolve_packet(s, hyperbolic(), make_grid(0, 40, 0.05), IntegratorConfig(step=0.05, overflow_guard=1e6))
    assert p.truncated
    assert len(p) < 801
    assert np.abs(p.q_c).max() < 1e6


def test_overflow_raises_on_request():
    s = PacketState.make([1, 1], [1, 1], np.eye(2))
    with pytest.raises(BlowUpError):
        evolve_packet(s, hyperbolic(), make_grid(0, 40, 0.05),
                      IntegratorConfig(step=0.05, overflow_guard=1e6, on_blowup="raise"))


def test_deterministic(run):
    p = run("fig4").packet
    again = evolve_packet(p[0], p.model, p.grid)
    np.testing.assert_array_equal(again.A, p.A)
    np.testing.assert_array_equal(again.q_c, p.q_c)


def test_substepping_matches_fine_grid(run):
    p = run("fig3").packet
    coarse = evolve_packet(p[0], p.model, p.grid[::10], IntegratorConfig(step=1e-2))
    np.testing.assert_allclose(coarse.A, p.A[::10], atol=1e-12)
