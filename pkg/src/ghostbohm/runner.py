"""Scenario execution: simulation pipeline, report, file outputs."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    RegimeThresholds,
    biham_compare,
    classify_regime,
    curvature_mismatch,
    diagnostics_series,
    ensemble_mean,
    internal_flow_symmetric_part,
)
from .errors import InconclusiveRegimeError
from .evolve import IntegratorConfig, PacketState, evolve_packet, make_grid
from .export import SeriesBundle, Track, export_series
from .plot import emit_plot
from .trajectories import (
    BOHMIAN,
    CENTRE,
    CLASSICAL,
    EnsembleSpec,
    evolve_bohmian_ensemble,
    evolve_classical_ensemble,
    initial_momenta,
    sample_ensemble,
)

OUT_DIR_ENV = "GHOSTBOHM_OUT_DIR"


@dataclass(eq=False)
class Simulation:
    scenario: object
    model: object
    packet: object
    classical: list
    bohmian: object  # BohmianEnsemble
    diagnostics: list
    summary: object
    regime: str | None
    evidence: dict

    @property
    def truncated(self):
        return {
            "packet": bool(self.packet.truncated),
            "classical": any(s.truncated for s in self.classical),
            "bohmian": any(s.truncated for s in self.bohmian.members),
        }


@dataclass
class RunReport:
    scenario: str
    regime: str | None
    evidence: dict
    truncated: dict
    manifest: list
    wall_time: float
    config: dict
    version: str = __version__
    extra: dict = field(default_factory=dict)

    @property
    def partial(self):
        return any(self.truncated.values())

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "regime": self.regime,
            "evidence": self.evidence,
            "truncated": self.truncated,
            "partial": self.partial,
            "manifest": self.manifest,
            "wall_time_s": self.wall_time,
            "version": self.version,
            "config": self.config,
            "extra": self.extra,
        }


def _grid(scn):
    return make_grid(scn.grid.t_start, scn.grid.t_end, scn.grid.step)


def _config(scn):
    return IntegratorConfig(step=scn.grid.step, overflow_guard=scn.thresholds.overflow_guard)


def _packet0(scn):
    p = scn.packet
    return PacketState.make(p.q_c, p.p_c, p.A, p.B, t=scn.grid.t_start)


def _thresholds(scn):
    th = scn.thresholds
    return RegimeThresholds(rigid_rel=th.rigid_rel, growth_min=th.growth_min, det_c_atol=th.det_c_atol)


def initial_positions(scn, packet0):
    e = scn.ensemble
    spec = EnsembleSpec(e.size, e.seed, e.sampling, e.offsets)
    return sample_ensemble(packet0, spec, scn.model.hbar)


def _members(args):
    q0, p0, packet, model, grid, cfg, first = args
    classical = evolve_classical_ensemble(q0, p0, model, grid, cfg.step, cfg.overflow_guard, cfg.on_blowup,
                                          first_id=first)
    ens = evolve_bohmian_ensemble(q0, packet, first_id=first)
    return classical, ens


def _chunks(n, workers):
    k = max(1, min(workers, n))
    bounds = np.linspace(0, n, k + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def simulate(scn, workers=1):
    """Packet, classical and Bohmian ensembles, diagnostics and regime label for a single-model scenario.

    Members are split into ``workers`` chunks run in separate processes. Every
    member is integrated by elementwise kernels, so results do not depend on
    the split.
    """
    if scn.is_biham:
        raise ValueError("bi-Hamiltonian scenarios run through simulate_biham")
    model = scn.build_model()
    grid = _grid(scn)
    cfg = _config(scn)
    packet0 = _packet0(scn)
    packet = evolve_packet(packet0, model, grid, cfg)
    q0 = initial_positions(scn, packet0)
    p0 = initial_momenta(q0, packet0)
    jobs = [(q0[a:b], p0[a:b], packet, model, grid, cfg, a) for a, b in _chunks(len(q0), workers)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(_members, jobs))
    else:
        parts = [_members(j) for j in jobs]
    classical = [s for c, _ in parts for s in c]
    ens = parts[0][1]
    bohmian = type(ens)([m for _, e in parts for m in e.members], ens.U, q0 - packet0.q_c)
    diags = [diagnostics_series(b, c, packet) for b, c in zip(bohmian.members, classical)]
    summary = ensemble_mean(diags)
    try:
        lab = classify_regime(model, packet, summary, _thresholds(scn))
        regime, evidence = lab.label, lab.evidence
    except InconclusiveRegimeError as err:
        regime, evidence = None, dict(err.evidence, error=str(err))
    return Simulation(scn, model, packet, classical, bohmian, diags, summary, regime, evidence)


def _stride_index(n, stride):
    if n == 0:
        return np.arange(0)
    idx = np.arange(0, n, stride)
    return idx if idx[-1] == n - 1 else np.append(idx, n - 1)


def _packet_columns(packet, model, idx):
    lam = curvature_mismatch(packet.A[idx], model)
    s_m = np.linalg.eigvalsh(internal_flow_symmetric_part(packet.B[idx], model))
    q_c = 0.5 * model.hbar * np.trace(model.G @ packet.A[idx], axis1=1, axis2=2)
    return np.linalg.det(lam), s_m, q_c


def _metadata(scn, extra=None):
    meta = {
        "scenario": scn.model_dump(mode="json"),
        "tool": "ghostbohm",
        "version": __version__,
        "seed": scn.ensemble.seed,
        "projection": "(x, y) position plane",
    }
    meta.update(extra or {})
    return meta


def _centre_track(packet, model, stride):
    idx = _stride_index(len(packet.grid), stride)
    det, s_m, q_c = _packet_columns(packet, model, idx)
    return Track(-1, CENTRE, packet.grid[idx], {
        "qx": packet.q_c[idx, 0], "qy": packet.q_c[idx, 1], "px": packet.p_c[idx, 0], "py": packet.p_c[idx, 1],
        "det_lambda": det, "sm_eig1": s_m[:, 0], "sm_eig2": s_m[:, 1], "q_b": q_c,
    })


def _classical_tracks(classical, stride):
    out = []
    for s in classical:
        idx = _stride_index(len(s.grid), stride)
        out.append(Track(s.member_id, CLASSICAL, s.grid[idx], {
            "qx": s.positions[idx, 0], "qy": s.positions[idx, 1],
            "px": s.momenta[idx, 0], "py": s.momenta[idx, 1],
        }))
    return out


def bundle_from_simulation(sim, stride=None):
    scn = sim.scenario
    stride = stride or scn.grid.export_stride
    tracks = [_centre_track(sim.packet, sim.model, stride)] + _classical_tracks(sim.classical, stride)
    for d in sim.diagnostics:
        idx = _stride_index(len(d.grid), stride)
        qb = d.u[idx] + sim.packet.q_c[idx]
        tracks.append(Track(d.member_id, BOHMIAN, d.grid[idx], {
            "qx": qb[:, 0], "qy": qb[:, 1], "ux": d.u[idx, 0], "uy": d.u[idx, 1],
            "dx": d.delta[idx, 0], "dy": d.delta[idx, 1], "det_lambda": d.det_lambda[idx],
            "sm_eig1": d.s_m_eigs[idx, 0], "sm_eig2": d.s_m_eigs[idx, 1], "q_b": d.q_b[idx],
        }))
    return SeriesBundle(tracks, _metadata(scn, {"regime": sim.regime}))


@dataclass(eq=False)
class BihamSimulation:
    scenario: object
    pair: object
    comparison: object

    @property
    def truncated(self):
        runs = self.comparison.runs
        return {f"packet_{a}": bool(r.packet.truncated) for a, r in runs.items()} | {
            "classical": any(s.truncated for s in self.comparison.reference)}


def simulate_biham(scn):
    pair = scn.build_model()
    packet0 = _packet0(scn)
    offsets = initial_positions(scn, packet0) - packet0.q_c
    comp = biham_compare(pair, packet0, offsets, _grid(scn), _config(scn))
    return BihamSimulation(scn, pair, comp)


def biham_summary(comp):
    """Scalar comparison measures: classical agreement, Bohmian gap, final Delta, Q_B variance."""
    g, two = comp.runs["g"], comp.runs["2"]
    out = {
        "classical_mismatch": comp.classical_mismatch,
        "max_bohmian_gap": float(np.nanmax(comp.gap)),
    }
    for a, r in (("g", g), ("2", two)):
        out[f"mean_final_delta_{a}"] = float(np.linalg.norm(r.delta[:, -1], axis=1).mean())
        # member mean of each trajectory's variance of Q_B over the horizon
        out[f"q_b_variance_{a}"] = float(np.nanvar(r.q_b, axis=1).mean())
    return out


def bundles_from_biham(sim, stride=None):
    scn, comp = sim.scenario, sim.comparison
    stride = stride or scn.grid.export_stride
    bundles = {}
    for a, r in comp.runs.items():
        tracks = [_centre_track(r.packet, r.model, stride)] + _classical_tracks(r.classical, stride)
        n = r.delta.shape[1]
        idx = _stride_index(n, stride)
        det, s_m, _ = _packet_columns(r.packet, r.model, idx)
        for j, m in enumerate(r.bohmian.members):
            q = m.positions[idx]
            u = q - r.packet.q_c[idx]
            tracks.append(Track(m.member_id, BOHMIAN, comp.grid[idx], {
                "qx": q[:, 0], "qy": q[:, 1], "ux": u[:, 0], "uy": u[:, 1],
                "dx": r.delta[j, idx, 0], "dy": r.delta[j, idx, 1], "det_lambda": det,
                "sm_eig1": s_m[:, 0], "sm_eig2": s_m[:, 1], "q_b": r.q_b[j, idx],
            }))
        bundles[a] = SeriesBundle(tracks, _metadata(scn, {"representation": f"H_{a}"}))
    return bundles


def write_gap(comp, path, stride):
    n = comp.gap.shape[1]
    idx = _stride_index(n, stride)
    lines = ["t,member_id,gap"]
    for i in idx:
        for j in range(comp.gap.shape[0]):
            lines.append(f"{comp.grid[i]:.17g},{j},{comp.gap[j, i]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    return Path(path)


def resolve_out_dir(scn, out_dir=None):
    chosen = out_dir or scn.outputs.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(bundle, stem, formats, title):
    written = []
    for fmt in formats:
        if fmt == "svg":
            written.append(emit_plot(bundle, stem.with_suffix(".svg"), title))
        else:
            written += export_series(bundle, stem.with_suffix("." + fmt), fmt)
    return written


def run_scenario(scn, out_dir=None, workers=1, formats=None, write_report=True):
    """Run ``scn``, write its outputs and return a RunReport.

    The manifest lists the files written by this call; the report JSON itself
    (``<name>_report.json``) is written last and not listed.
    """
    t0 = time.perf_counter()
    formats = tuple(formats or scn.outputs.formats)
    out = resolve_out_dir(scn, out_dir)
    stem = out / scn.name
    stride = scn.grid.export_stride
    if scn.is_biham:
        sim = simulate_biham(scn)
        comp = sim.comparison
        manifest = []
        for a, bundle in bundles_from_biham(sim).items():
            manifest += _write(bundle, out / f"{scn.name}_{a}", formats, f"{scn.name} H_{a}")
        manifest.append(write_gap(comp, out / f"{scn.name}_gap.csv", stride))
        labels = {}
        for a, r in comp.runs.items():
            try:
                d = [diagnostics_series(b, c, r.packet) for b, c in zip(r.bohmian.members, comp.reference)]
                labels[a] = classify_regime(r.model, r.packet, d, _thresholds(scn)).label
            except InconclusiveRegimeError:
                labels[a] = None
        regime, evidence = None, {"labels": labels, **biham_summary(comp)}
    else:
        sim = simulate(scn, workers)
        manifest = _write(bundle_from_simulation(sim), stem, formats, f"{scn.name}: {sim.regime}")
        regime, evidence = sim.regime, sim.evidence
    report = RunReport(
        scenario=scn.name,
        regime=regime,
        evidence=evidence,
        truncated=sim.truncated,
        manifest=[str(p) for p in manifest],
        wall_time=time.perf_counter() - t0,
        config=scn.model_dump(mode="json"),
        extra={"workers": workers, "formats": list(formats)},
    )
    if write_report:
        (out / f"{scn.name}_report.json").write_text(
            json.dumps(report.to_dict(), indent=2, default=str) + "\n", encoding="utf-8")
    return report
