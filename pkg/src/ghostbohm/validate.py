"""Invariant suite over the built-in presets.

Every check is registered with ``@check``; ``run_checks`` walks the registry,
so the CLI, the JSON summary and the tests all see the same list.
"""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .diagnostics import (
    RIGID,
    REGIMES,
    curvature_mismatch,
    norm_growth_residual,
    quantum_potential,
    quantum_potential_fd,
    second_order_residual,
)
from .errors import DegeneracyError, ModelError
from .evolve import evolve_packet, riccati_linear_oracle
from .export import write_csv
from .model import (
    BOUNDED,
    CRITICAL,
    SPIRAL,
    QuadraticModel,
    build_biham_pair,
    classical_equivalence_residual,
    flow_spectrum,
)
from .runner import biham_summary, bundle_from_simulation, simulate, simulate_biham
from .scenario import CAPTION, PRESETS, load_scenario, scenario_from_dict, with_overrides
from .trajectories import evolve_bohmian_ensemble, evolve_classical, evolve_classical_ensemble, initial_momenta

GHOST_PRESETS = ("fig1", "fig3", "fig4", "fig5", "fig6")
EXPECTED_LABELS = {
    "fig1": "rigid-transport",
    "fig3": "quasi-semiclassical",
    "fig4": "spiral-instability",
    "fig5": "critical-runaway",
    "fig6": "non-normalisable-sector",
}
Q_SPOT = -0.0763889


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    value: object
    tolerance: str
    detail: str = ""
    seconds: float = 0.0


REGISTRY = []


def check(module, tolerance):
    def deco(fn):
        REGISTRY.append((fn.__name__, module, tolerance, fn))
        return fn
    return deco


@lru_cache(maxsize=None)
def sim(name):
    return simulate(PRESETS[name])


@lru_cache(maxsize=None)
def biham_run(name="fig7"):
    return simulate_biham(PRESETS[name])


def _max(values):
    return max(float(v) for v in values)


# model


@check("model", "exact symmetry; asymmetric input rejected")
def symmetric_storage():
    ok = all(np.array_equal(m.C, m.C.T) and np.array_equal(m.G, m.G.T)
             for m in (sim(n).model for n in GHOST_PRESETS))
    try:
        QuadraticModel(np.eye(2), [[1.0, 0.1], [0.2, 1.0]])
        rejected = False
    except ModelError:
        rejected = True
    return ok and rejected, rejected


@check("model", "fig1, fig3 bounded; fig4 spiral; fig5 critical")
def flow_classes():
    want = {"fig1": BOUNDED, "fig3": BOUNDED, "fig4": SPIRAL, "fig5": CRITICAL}
    got = {k: flow_spectrum(sim(k).model).stability_class for k in want}
    return got == want, got


@check("model", "|Omega* - 0.00579446| < 1e-6")
def critical_root():
    root = CAPTION["g"] ** 2 / (4.0 * CAPTION["nu"] ** 2)
    err = abs(root - CAPTION["Omega_critical"])
    return err < 1e-6, err


@check("model", "max residual < 1e-12 over 100 points in [-5, 5]^4")
def biham_classical_equivalence():
    pair = build_biham_pair(CAPTION["nu"], CAPTION["Omega"])
    rng = np.random.default_rng(20240607)
    res = _max(classical_equivalence_residual(pair, z) for z in rng.uniform(-5, 5, (100, 4)))
    return res < 1e-12, res


@check("model", "DegeneracyError at nu^2 = Omega")
def biham_degeneracy():
    try:
        build_biham_pair(0.5, 0.25)
    except DegeneracyError:
        return True, "raised"
    return False, "not raised"


# evolve


@check("evolve", "|K_rk4(10) - K_lin(10)|_inf < 1e-6 on fig1-fig5")
def riccati_oracle():
    errs = {}
    for name in ("fig1", "fig3", "fig4", "fig5"):
        s = sim(name)
        i = int(np.searchsorted(s.packet.grid, 10.0))
        K0 = s.packet.K[0]
        errs[name] = float(np.abs(s.packet.K[i] - riccati_linear_oracle(K0, s.model, s.packet.grid[i])).max())
    return max(errs.values()) < 1e-6, errs


@check("evolve", "A(t), B(t) exactly symmetric")
def width_symmetry():
    ok = all(np.array_equal(p.A, np.swapaxes(p.A, 1, 2)) and np.array_equal(p.B, np.swapaxes(p.B, 1, 2))
             for p in (sim(n).packet for n in GHOST_PRESETS))
    return ok, ok


def rigid_measures(model, packet):
    lam = float(np.abs(curvature_mismatch(packet.A, model)).max())
    drift = float(np.abs(packet.A - packet.A[0]).max())
    b = float(np.abs(packet.B).max())
    return lam, drift, b


def rigid_ok(model, packet):
    lam, drift, b = rigid_measures(model, packet)
    return lam < 1e-4 and drift < 1e-6 and b < 1e-6


@check("evolve", "fig1: sup|Lambda| < 1e-4, |A - A0| < 1e-6, |B| < 1e-6")
def rigid_fixed_point():
    s = sim("fig1")
    return rigid_ok(s.model, s.packet), rigid_measures(s.model, s.packet)


@check("evolve", "G12 += 1e-3 on fig1 must break the rigid fixed point")
def rigid_negative_control():
    s = sim("fig1")
    G = s.model.G.copy()
    G[0, 1] += 1e-3
    G[1, 0] += 1e-3
    model = s.model.replace(G=G)
    packet = evolve_packet(s.packet[0], model, s.packet.grid)
    return not rigid_ok(model, packet), rigid_measures(model, packet)


@check("evolve", "|q_c - q_cl|_inf < 1e-8 on every preset")
def centre_ehrenfest():
    errs = {}
    for name in GHOST_PRESETS + ("fig5-chirp",):
        p = sim(name).packet
        c = evolve_classical(p.q_c[0], p.p_c[0], p.model, p.grid)
        n = min(len(c.grid), len(p.grid))
        errs[name] = float(np.abs(c.positions[:n] - p.q_c[:n]).max())
    r = biham_run().comparison.runs["g"]
    c = evolve_classical(r.packet.q_c[0], r.packet.p_c[0], r.model, r.packet.grid)
    errs["fig7:g"] = float(np.abs(c.positions - r.packet.q_c).max())
    return max(errs.values()) < 1e-8, errs


# trajectories


def equivariance_error(packet, U):
    A0 = packet.A[0]
    n = min(len(U), len(packet.A))
    Uinv = np.linalg.inv(U[:n])
    pred = np.swapaxes(Uinv, 1, 2) @ A0 @ Uinv
    return float(np.abs(packet.A[:n] - pred).max())


@check("trajectories", "|A - U^-T A0 U^-1|_inf < 1e-6 on non-truncated presets")
def equivariance():
    errs = {n: equivariance_error(sim(n).packet, sim(n).bohmian.U)
            for n in GHOST_PRESETS if not sim(n).packet.truncated}
    for a, r in biham_run().comparison.runs.items():
        if not r.packet.truncated:
            errs[f"fig7:{a}"] = equivariance_error(r.packet, r.bohmian.U)
    return max(errs.values()) < 1e-6, errs


@check("trajectories", "|q_B - (q_c + U u0)|_inf < 1e-6")
def internal_flow_reconstruction():
    errs = {}
    for n in GHOST_PRESETS:
        s = sim(n)
        qb = np.stack([m.positions for m in s.bohmian.members], axis=1)
        errs[n] = float(np.abs(s.bohmian.reconstruct(s.packet) - qb).max())
    return max(errs.values()) < 1e-6, errs


@check("trajectories", "member at offset 0 equals the centre within 1e-8")
def centre_member():
    errs = {}
    for n in GHOST_PRESETS:
        p = sim(n).packet
        ens = evolve_bohmian_ensemble(p.q_c[:1], p)
        errs[n] = float(np.abs(ens.members[0].positions - p.q_c).max())
    return max(errs.values()) < 1e-8, errs


@check("trajectories", "ensemble results bitwise independent of member batching")
def batch_invariance():
    s = sim("fig3")
    q0 = np.stack([m.positions[0] for m in s.bohmian.members])
    p0 = initial_momenta(q0, s.packet[0])
    whole = evolve_bohmian_ensemble(q0, s.packet)
    split = [evolve_bohmian_ensemble(q0[a:b], s.packet) for a, b in ((0, 7), (7, len(q0)))]
    pos_ok = all(np.array_equal(a.positions, b.positions)
                 for a, b in zip(whole.members, [m for e in split for m in e.members]))
    cw = evolve_classical_ensemble(q0, p0, s.model, s.packet.grid)
    cs = evolve_classical_ensemble(q0[:5], p0[:5], s.model, s.packet.grid) + \
        evolve_classical_ensemble(q0[5:], p0[5:], s.model, s.packet.grid)
    cl_ok = all(np.array_equal(a.positions, b.positions) for a, b in zip(cw, cs))
    return pos_ok and cl_ok, {"bohmian": pos_ok, "classical": cl_ok}


# diagnostics


@check("diagnostics", "|Q - Q_fd| < 1e-4 at 100 random points per preset")
def quantum_potential_oracle():
    rng = np.random.default_rng(7)
    errs = {}
    for n in GHOST_PRESETS:
        s = sim(n)
        worst = 0.0
        for _ in range(100):
            st = s.packet[int(rng.integers(len(s.packet)))]
            q = st.q_c + rng.uniform(-2.0, 2.0, 2)
            worst = max(worst, abs(quantum_potential(q, st, s.model) - quantum_potential_fd(q, st, s.model)))
        errs[n] = worst
    return max(errs.values()) < 1e-4, errs


@check("diagnostics", "fig1: |Q(q_c) - Tr(G A0)/2| < 1e-9, printed -0.0763889 to its last digit")
def quantum_potential_spot():
    s = sim("fig1")
    st = s.packet[0]
    val = float(quantum_potential(st.q_c, st, s.model))
    exact = 0.5 * float(np.trace(s.model.G @ st.A))
    return abs(val - exact) < 1e-9 and abs(val - Q_SPOT) <= 5e-8, val


def _identity(fn):
    errs = {}
    for n in GHOST_PRESETS:
        s = sim(n)
        errs[n] = max(fn(d, s.packet) for d in s.diagnostics[:5])
    return errs


@check("diagnostics", "d|u|^2/dt vs 2 u^T S_M u < 1e-5 relative")
def norm_growth_identity():
    errs = _identity(norm_growth_residual)
    return max(errs.values()) < 1e-5, errs


@check("diagnostics", "u'' vs -G Lambda u < 1e-4 relative")
def second_order_identity():
    errs = _identity(second_order_residual)
    return max(errs.values()) < 1e-4, errs


@check("diagnostics", "labels match the regime table")
def regime_labels():
    got = {n: sim(n).regime for n in EXPECTED_LABELS}
    return got == EXPECTED_LABELS and set(got.values()) <= set(REGIMES), got


@check("diagnostics", "fig5 centre exceeds 1e3 before t = 115")
def critical_runaway_amplitude():
    p = sim("fig5").packet
    amp = float(np.abs(p.q_c).max())
    return amp > 1e3, amp


@check("diagnostics", "fig1 label unchanged at hbar = 2")
def hbar_label_invariance():
    scn = PRESETS["fig1"]
    data = scn.model_dump(mode="json")
    data["model"]["hbar"] = 2.0
    label = simulate(scenario_from_dict(data)).regime
    return label == RIGID, label


@check("diagnostics", "fig7: gap > 1e-2, Delta_2 >= Delta_g, var Q_B2 > var Q_Bg, classical gap < 1e-10")
def biham_inequivalence():
    summ = biham_summary(biham_run().comparison)
    ok = (summ["max_bohmian_gap"] > 1e-2
          and summ["mean_final_delta_2"] >= summ["mean_final_delta_g"]
          and summ["q_b_variance_2"] > summ["q_b_variance_g"]
          and summ["classical_mismatch"] < 1e-10)
    return ok, summ


# cli-io


@check("cli-io", "every preset reloads equal after JSON round-trip")
def preset_round_trip():
    bad = []
    for name, scn in PRESETS.items():
        if scenario_from_dict(json.loads(scn.to_json())) != scn or load_scenario(name) != scn:
            bad.append(name)
    return not bad, bad or "all"


@check("cli-io", "byte-identical CSV for repeated runs and 1 vs 3 workers")
def csv_determinism():
    scn = with_overrides(PRESETS["fig4"], t_end=10.0)
    with tempfile.TemporaryDirectory() as tmp:
        paths = []
        for k, workers in enumerate((1, 1, 3)):
            path = Path(tmp) / f"run{k}.csv"
            write_csv(bundle_from_simulation(simulate(scn, workers)), path)
            paths.append(path.read_bytes())
    same = paths[0] == paths[1] == paths[2]
    return same, same


def run_checks(names=None):
    results = []
    for name, module, tol, fn in REGISTRY:
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            passed, value = fn()
            detail = ""
        except Exception as err:  # a crashing check is a failed check
            passed, value, detail = False, None, f"{type(err).__name__}: {err}"
        results.append(CheckResult(name, module, bool(passed), _jsonable(value), tol, detail,
                                   round(time.perf_counter() - t0, 3)))
    return results


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


def validate(summary_path=None, names=None):
    """Run the registry; write a JSON summary when ``summary_path`` is given. Returns (ok, results)."""
    results = run_checks(names)
    ok = all(r.passed for r in results)
    if summary_path is not None:
        doc = {"passed": ok, "n_checks": len(results), "n_failed": sum(not r.passed for r in results),
               "checks": [asdict(r) for r in results]}
        Path(summary_path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return ok, results
