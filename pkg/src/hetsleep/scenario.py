"""Scenario documents: schema, validation and realization.

A scenario JSON pins down the radio constants, the cells (explicit or
generated), the test points (explicit or generated, with demands given
directly or via a queueing target), the candidate pattern strategy and the
solver knobs. Realizing a scenario for a seed yields the concrete
(topology, points, gains) triple; everything is deterministic in
(document, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ScenarioError
from .energymin import EnergyConfig
from .netmodel import (Cell, CellKind, ChannelGains, LayoutParams,
                       NetworkTopology, RadioConfig, TestPoint, TrafficModel,
                       demand_from_queue, draw_channel_gains,
                       generate_scenario, place_test_points)
from .patterns import ClusterMap, PatternSet, cluster_patterns, enumerate_all, feature_patterns, reuse1

_KIND_PROPS = {
    "type": "object",
    "properties": {"macro": {"type": "number"}, "pico": {"type": "number"}},
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["id", "cells", "test_points"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "radio": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bandwidth_hz": {"type": "number", "exclusiveMinimum": 0},
                "noise_density_dbm_hz": {"type": "number"},
                "noise_figure_db": {"type": "number"},
                "penetration_loss_db": {"type": "number"},
                "shadowing_std_db": _KIND_PROPS,
                "shadowing_corr": _KIND_PROPS,
                "fading_samples": {"type": "integer", "minimum": 0},
            },
        },
        "cells": {
            "type": "object",
            "minProperties": 1, "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "generate": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_macro": {"type": "integer", "minimum": 1},
                        "picos_per_macro": {"type": "integer", "minimum": 0},
                        "macro_spacing_m": {"type": "number", "exclusiveMinimum": 0},
                        "pico_drop_radius_m": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "explicit": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id", "kind", "position"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "integer", "minimum": 0},
                            "kind": {"enum": ["macro", "pico"]},
                            "position": {"type": "array", "items": {"type": "number"},
                                         "minItems": 2, "maxItems": 2},
                            "tx_power_dbm": {"type": "number"},
                            "antenna_gain_db": {"type": "number"},
                            "op_power_max_w": {"type": "number", "exclusiveMinimum": 0},
                            "fixed_fraction": {"type": "number",
                                               "exclusiveMinimum": 0, "maximum": 1},
                        },
                    },
                },
            },
        },
        "test_points": {
            "type": "object",
            "minProperties": 1, "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "generate": {
                    "type": "object",
                    "required": ["count"],
                    "additionalProperties": False,
                    "properties": {
                        "count": {"type": "integer", "minimum": 1},
                        "demand_bps": {"type": "number", "minimum": 0},
                        "traffic": {
                            "type": "object",
                            "required": ["arrival_rate_hz", "mean_file_size_bit",
                                         "sojourn_target_s"],
                            "additionalProperties": False,
                            "properties": {
                                "arrival_rate_hz": {"type": "number", "minimum": 0},
                                "mean_file_size_bit": {"type": "number", "minimum": 0},
                                "sojourn_target_s": {"type": "number", "exclusiveMinimum": 0},
                            },
                        },
                        "point_margin_m": {"type": "number", "minimum": 0},
                    },
                },
                "explicit": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id", "position"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "integer", "minimum": 0},
                            "position": {"type": "array", "items": {"type": "number"},
                                         "minItems": 2, "maxItems": 2},
                            "demand_bps": {"type": "number", "minimum": 0},
                        },
                    },
                },
            },
        },
        "patterns": {
            "oneOf": [
                {"enum": ["all", "reuse1", "feature"]},
                {
                    "type": "object",
                    "minProperties": 1, "maxProperties": 1,
                    "additionalProperties": False,
                    "properties": {
                        "clusters": {"type": "object",
                                     "additionalProperties": {"type": "integer", "minimum": 0}},
                        "explicit": {"type": "array", "minItems": 1,
                                     "items": {"type": "array",
                                               "items": {"enum": [0, 1]}, "minItems": 1}},
                    },
                },
            ],
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "max_outer_iters": {"type": "integer", "minimum": 1},
                "inner_gap_rtol": {"type": "number", "exclusiveMinimum": 0},
                "outer_rel_change": {"type": "number", "exclusiveMinimum": 0},
                "activity_threshold": {"type": "number", "exclusiveMinimum": 0},
                "mu_box_factor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


@dataclass
class Scenario:
    doc: dict
    path: str = "<memory>"

    @property
    def id(self) -> str:
        return self.doc["id"]

    @property
    def base_seed(self) -> int:
        return int(self.doc.get("seed", 0))

    def radio(self) -> RadioConfig:
        r = self.doc.get("radio", {})
        kwargs = {}
        for key in ("bandwidth_hz", "noise_density_dbm_hz", "noise_figure_db",
                    "penetration_loss_db", "fading_samples"):
            if key in r:
                kwargs[key] = r[key]
        if "shadowing_std_db" in r:
            kwargs["shadowing_std_db"] = {CellKind(k): v for k, v in r["shadowing_std_db"].items()}
        if "shadowing_corr" in r:
            kwargs["intercell_shadowing_corr"] = {CellKind(k): v
                                                  for k, v in r["shadowing_corr"].items()}
        return RadioConfig(**kwargs)

    def solver_config(self) -> EnergyConfig:
        return EnergyConfig(**self.doc.get("solver", {}))

    def _layout(self, n_points: int, demand: float) -> LayoutParams:
        gen_c = self.doc["cells"].get("generate", {})
        gen_p = self.doc["test_points"].get("generate", {})
        kwargs = dict(n_points=n_points, demand_bps=demand)
        for src_key, dst_key in (("n_macro", "n_macro"),
                                 ("picos_per_macro", "picos_per_macro"),
                                 ("macro_spacing_m", "macro_spacing_m"),
                                 ("pico_drop_radius_m", "pico_drop_radius_m")):
            if src_key in gen_c:
                kwargs[dst_key] = gen_c[src_key]
        if "point_margin_m" in gen_p:
            kwargs["point_margin_m"] = gen_p["point_margin_m"]
        return LayoutParams(**kwargs)

    def _point_demand(self) -> float:
        gen_p = self.doc["test_points"].get("generate", {})
        if "traffic" in gen_p:
            t = gen_p["traffic"]
            return demand_from_queue(TrafficModel(t["arrival_rate_hz"],
                                                  t["mean_file_size_bit"],
                                                  t["sojourn_target_s"]))
        return float(gen_p.get("demand_bps", 0.0))

    def realize(self, seed: int) -> tuple[NetworkTopology, list[TestPoint], ChannelGains]:
        """Build the concrete network for one seed."""
        radio = self.radio()
        gen_cells = "generate" in self.doc["cells"]
        gen_points = "generate" in self.doc["test_points"]

        if gen_cells and gen_points:
            layout = self._layout(self.doc["test_points"]["generate"]["count"],
                                  self._point_demand())
            return generate_scenario(seed, layout, radio)

        if gen_cells:
            layout = self._layout(0, 0.0)
            topo, _, _ = generate_scenario(seed, layout, radio)
        else:
            topo = self._explicit_topology()

        if gen_points:
            gen_p = self.doc["test_points"]["generate"]
            layout = self._layout(gen_p["count"], self._point_demand())
            points = place_test_points(topo, gen_p["count"], seed + 1, layout)
        else:
            points = [TestPoint(p["id"], tuple(p["position"]), p.get("demand_bps", 0.0))
                      for p in self.doc["test_points"]["explicit"]]
        gains = draw_channel_gains(topo, points, radio, seed + 2)
        return topo, points, gains

    def _explicit_topology(self) -> NetworkTopology:
        from .netmodel import make_macro, make_pico
        cells = []
        for spec in self.doc["cells"]["explicit"]:
            maker = make_macro if spec["kind"] == "macro" else make_pico
            cell = maker(spec["id"], tuple(spec["position"]),
                         **{k: spec[k] for k in ("tx_power_dbm", "antenna_gain_db")
                            if k in spec})
            overrides = {}
            if "op_power_max_w" in spec:
                overrides["op_power_max"] = spec["op_power_max_w"]
            if "fixed_fraction" in spec:
                overrides["fixed_fraction"] = spec["fixed_fraction"]
            if overrides:
                cell = Cell(cell.id, cell.kind, cell.position, cell.tx_power_dbm,
                            cell.antenna_gain_db,
                            overrides.get("op_power_max", cell.op_power_max),
                            overrides.get("fixed_fraction", cell.fixed_fraction))
            cells.append(cell)
        return NetworkTopology(tuple(cells))

    def build_patterns(self, topo: NetworkTopology, strategy_override: str | None = None) -> PatternSet:
        """Candidate pattern set; a strategy may force its own choice."""
        spec = strategy_override if strategy_override is not None else self.doc.get("patterns", "all")
        if spec == "all":
            return enumerate_all(topo.n_cells)
        if spec == "reuse1":
            return reuse1(topo.n_cells)
        if spec == "feature":
            return feature_patterns(topo)
        if isinstance(spec, dict) and "clusters" in spec:
            assignment = {int(k): int(v) for k, v in spec["clusters"].items()}
            if sorted(assignment) != list(range(topo.n_cells)):
                raise ScenarioError("cluster map must cover every cell id exactly once")
            return cluster_patterns(ClusterMap(assignment))
        if isinstance(spec, dict) and "explicit" in spec:
            return PatternSet(np.array(spec["explicit"], dtype=np.int8))
        raise ScenarioError(f"unsupported pattern spec {spec!r}")


def validate_scenario(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: e.json_path)
    if errors:
        lines = [f"at {e.json_path}: {e.message}" for e in errors]
        raise ScenarioError("invalid scenario document:\n  " + "\n  ".join(lines))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON (line {exc.lineno}: {exc.msg})") from exc
    validate_scenario(doc)
    return Scenario(doc, str(path))
