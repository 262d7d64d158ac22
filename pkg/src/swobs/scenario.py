"""Scenario files: one JSON document describing plant, network, design, and run.

Every bundled experiment is a single reviewable file; the loader validates all
cross-module dimension rules up front and reports the offending field on
failure.  Parsing then re-serializing a scenario is the identity on every
field (defaults are materialized, so the canonical dict form is stable).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ScenarioError, SwobsError
from .graph import SwitchingSchedule, Topology
from .plant import LtiPlant
from .simulation import DisturbanceSpec, SimConfig


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated contents of a scenario file."""

    plant: LtiPlant
    schedule: SwitchingSchedule
    T_c: float
    gains: tuple[float, ...]
    targets: tuple[tuple[complex, ...] | None, ...]
    use_transform: bool
    sim: SimConfig
    analysis_window: float
    fit_window: tuple[float, float]


_SENTINEL = object()


def _expect(mapping, key, kind, path, default=_SENTINEL):
    if key not in mapping:
        if default is not _SENTINEL:
            return default
        raise ScenarioError("missing required field", field=f"{path}.{key}")
    value = mapping[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, kind):
        raise ScenarioError(
            f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}",
            field=f"{path}.{key}",
        )
    return value


def _parse_schedule(graph: dict, topologies: tuple[Topology, ...], dwell: float) -> SwitchingSchedule:
    raw = _expect(graph, "schedule", dict, "graph")
    try:
        if "pieces" in raw:
            pieces = []
            for k, piece in enumerate(_expect(raw, "pieces", list, "graph.schedule")):
                if not isinstance(piece, dict):
                    raise ScenarioError("each piece must be an object", field=f"graph.schedule.pieces[{k}]")
                pieces.append(
                    (
                        _expect(piece, "duration", float, f"graph.schedule.pieces[{k}]"),
                        _expect(piece, "topology", int, f"graph.schedule.pieces[{k}]"),
                    )
                )
            schedule = SwitchingSchedule.periodic(topologies, pieces, dwell=dwell)
            declared = _expect(raw, "period", float, "graph.schedule", default=schedule.period)
            if abs(declared - schedule.period) > 1e-9 * max(1.0, schedule.period):
                raise ScenarioError(
                    f"declared period {declared:g} does not match the pieces "
                    f"(sum {schedule.period:g})",
                    field="graph.schedule.period",
                )
            return schedule
        instants = [float(t) for t in _expect(raw, "instants", list, "graph.schedule")]
        indices = [int(p) for p in _expect(raw, "indices", list, "graph.schedule")]
        period = _expect(raw, "period", float, "graph.schedule", default=None)
        return SwitchingSchedule(
            topologies=topologies,
            instants=tuple(instants),
            indices=tuple(indices),
            dwell=dwell,
            period=period,
        )
    except SwobsError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), field="graph.schedule") from exc


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a scenario from its dict form."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")

    plant_raw = _expect(data, "plant", dict, "scenario")
    A = _expect(plant_raw, "A", list, "plant")
    C_blocks = _expect(plant_raw, "C_blocks", list, "plant")
    if not C_blocks:
        raise ScenarioError("at least one output block is required", field="plant.C_blocks")
    try:
        blocks = [np.asarray(b, dtype=float) for b in C_blocks]
        if any(b.ndim != 2 for b in blocks):
            raise ScenarioError("each output block must be a matrix (list of rows)", field="plant.C_blocks")
        plant = LtiPlant(
            A=np.asarray(A, dtype=float),
            C=np.vstack(blocks),
            partition=tuple(b.shape[0] for b in blocks),
        )
    except ScenarioError:
        raise
    except (SwobsError, ValueError) as exc:
        raise ScenarioError(str(exc), field="plant") from exc

    graph_raw = _expect(data, "graph", dict, "scenario")
    N = _expect(graph_raw, "N", int, "graph")
    if N != plant.N:
        raise ScenarioError(f"graph.N = {N} but the plant has {plant.N} output blocks", field="graph.N")
    dwell = _expect(graph_raw, "dwell", float, "graph")
    T_c = _expect(graph_raw, "T_c", float, "graph")
    topologies = []
    for k, top_raw in enumerate(_expect(graph_raw, "topologies", list, "graph")):
        if not isinstance(top_raw, dict):
            raise ScenarioError("each topology must be an object", field=f"graph.topologies[{k}]")
        try:
            topologies.append(Topology.from_edges(N, _expect(top_raw, "edges", list, f"graph.topologies[{k}]")))
        except (SwobsError, ValueError) as exc:
            raise ScenarioError(str(exc), field=f"graph.topologies[{k}]") from exc
    schedule = _parse_schedule(graph_raw, tuple(topologies), dwell)
    if T_c < dwell:
        raise ScenarioError(f"T_c = {T_c:g} is below the dwell time {dwell:g}", field="graph.T_c")

    design_raw = _expect(data, "design", dict, "scenario", default={})
    gains = _expect(design_raw, "gains", list, "design", default=[1.0] * plant.N)
    gains = tuple(float(g) for g in gains)
    if len(gains) != plant.N:
        raise ScenarioError(f"expected {plant.N} gains, got {len(gains)}", field="design.gains")
    if any(g <= 0 for g in gains):
        raise ScenarioError("all coupling gains must be positive", field="design.gains")
    targets_raw = _expect(design_raw, "targets", (list, type(None)), "design", default=None)
    if targets_raw is None:
        targets: tuple = (None,) * plant.N
    else:
        if len(targets_raw) != plant.N:
            raise ScenarioError(
                f"expected {plant.N} target lists, got {len(targets_raw)}", field="design.targets"
            )
        parsed = []
        for i, entry in enumerate(targets_raw):
            if entry is None:
                parsed.append(None)
                continue
            try:
                parsed.append(tuple(complex(float(re), float(im)) for re, im in entry))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(
                    "targets must be [real, imag] pairs", field=f"design.targets[{i}]"
                ) from exc
        targets = tuple(parsed)
    use_transform = bool(_expect(design_raw, "use_P", bool, "design", default=True))

    sim_raw = _expect(data, "sim", dict, "scenario")
    dt = _expect(sim_raw, "dt", float, "sim")
    T_end = _expect(sim_raw, "T_end", float, "sim")
    seed = _expect(sim_raw, "seed", int, "sim", default=0)
    stride = _expect(sim_raw, "csv_stride", int, "sim", default=1)
    dist_raw = _expect(sim_raw, "disturbance", (dict, type(None)), "sim", default=None)
    disturbance = None
    if dist_raw is not None:
        agents = _expect(dist_raw, "agents", (list, type(None)), "sim.disturbance", default=None)
        disturbance = DisturbanceSpec(
            amplitude=_expect(dist_raw, "amplitude", float, "sim.disturbance"),
            agents=None if agents is None else tuple(int(a) for a in agents),
        )
        if disturbance.agents is not None and any(not 0 <= a < plant.N for a in disturbance.agents):
            raise ScenarioError("disturbed agent index out of range", field="sim.disturbance.agents")
    x0_raw = _expect(sim_raw, "x0", (list, type(None)), "sim", default=None)
    xhat0_raw = sim_raw.get("xhat0")
    match_initial = xhat0_raw == "x0"
    try:
        sim = SimConfig(
            dt=dt,
            T_end=T_end,
            seed=seed,
            disturbance=disturbance,
            x0=None if x0_raw is None else np.asarray(x0_raw, dtype=float).reshape(plant.n),
            xhat0=None
            if (xhat0_raw is None or match_initial)
            else np.asarray(xhat0_raw, dtype=float).reshape(plant.N, plant.n),
            match_initial=match_initial,
            csv_stride=stride,
        )
    except (SwobsError, ValueError) as exc:
        raise ScenarioError(str(exc), field="sim") from exc
    if dt > dwell / 2 + 1e-12:
        raise ScenarioError(
            f"dt = {dt:g} exceeds half the dwell time {dwell:g}", field="sim.dt"
        )

    analysis_raw = _expect(data, "analysis", dict, "scenario", default={})
    analysis_window = _expect(analysis_raw, "T_o", float, "analysis", default=2.0 * T_c)
    fit_raw = _expect(analysis_raw, "fit_window", (list, type(None)), "analysis", default=None)
    if fit_raw is None:
        fit_window = (min(T_c, T_end / 2.0), T_end)
    else:
        if len(fit_raw) != 2:
            raise ScenarioError("fit_window must be [start, end]", field="analysis.fit_window")
        fit_window = (float(fit_raw[0]), float(fit_raw[1]))
    if not fit_window[0] < fit_window[1] <= T_end + 1e-12:
        raise ScenarioError("fit_window must be increasing and inside the horizon", field="analysis.fit_window")
    if analysis_window <= 0:
        raise ScenarioError("T_o must be positive", field="analysis.T_o")

    return Scenario(
        plant=plant,
        schedule=schedule,
        T_c=T_c,
        gains=gains,
        targets=targets,
        use_transform=use_transform,
        sim=sim,
        analysis_window=analysis_window,
        fit_window=fit_window,
    )


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical dict form; parsing it back reproduces the scenario exactly."""
    schedule_dict: dict
    if s.schedule.period is not None:
        bounds = list(s.schedule.instants) + [s.schedule.period]
        schedule_dict = {
            "period": s.schedule.period,
            "pieces": [
                {"duration": bounds[j + 1] - bounds[j], "topology": p}
                for j, p in enumerate(s.schedule.indices)
            ],
        }
    else:
        schedule_dict = {
            "instants": list(s.schedule.instants),
            "indices": list(s.schedule.indices),
        }
    if s.sim.match_initial:
        xhat0 = "x0"
    elif s.sim.xhat0 is not None:
        xhat0 = s.sim.xhat0.tolist()
    else:
        xhat0 = None
    sim_dict = {
        "dt": s.sim.dt,
        "T_end": s.sim.T_end,
        "seed": s.sim.seed,
        "csv_stride": s.sim.csv_stride,
        "disturbance": None
        if s.sim.disturbance is None
        else {
            "amplitude": s.sim.disturbance.amplitude,
            "agents": None if s.sim.disturbance.agents is None else list(s.sim.disturbance.agents),
        },
        "x0": None if s.sim.x0 is None else s.sim.x0.tolist(),
        "xhat0": xhat0,
    }
    return {
        "plant": {
            "A": s.plant.A.tolist(),
            "C_blocks": [s.plant.C_block(i).tolist() for i in range(s.plant.N)],
        },
        "graph": {
            "N": s.plant.N,
            "topologies": [{"edges": [[i, j, w] for i, j, w in t.edges]} for t in s.schedule.topologies],
            "schedule": schedule_dict,
            "dwell": s.schedule.dwell,
            "T_c": s.T_c,
        },
        "design": {
            "gains": list(s.gains),
            "targets": None
            if all(t is None for t in s.targets)
            else [None if t is None else [[z.real, z.imag] for z in t] for t in s.targets],
            "use_P": s.use_transform,
        },
        "sim": sim_dict,
        "analysis": {"T_o": s.analysis_window, "fit_window": list(s.fit_window)},
    }


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises :class:`ScenarioError` with a dotted field path for both malformed
    JSON and semantic violations.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n", encoding="utf-8")
