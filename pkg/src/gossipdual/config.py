"""TOML run configuration: parsing, schema validation, and echo.

Example::

    [grid]
    width = 10
    height = 10
    slip_prob = 0.0

    [agents]
    count = 3
    starts = [[0, 0], [5, 5], [9, 9]]

    [[zones]]
    id = 1
    rect = [1, 1, 2, 2]      # x0, y0, x1, y1, inclusive
    c = 0.45

    [graph]
    kind = "path"            # path | ring | star | complete | proximity | edges

    [links]
    kind = "static"          # static | bernoulli

    [dual]
    eta = 0.05
    t_zero = 100
    rollouts = 2000

    [policy]
    kind = "lagrangian_greedy"

    [run]
    seed = 0
"""

from __future__ import annotations

import copy
import importlib
import sys
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from gossipdual.env import GridSpec, ZoneSpec
from gossipdual.errors import ConfigError
from gossipdual.executor import MODES, RunConfig
from gossipdual.graph import (LinkModel, Topology, complete_graph, path_graph, proximity_graph,
                              ring_graph, star_graph)
from gossipdual.policy import EXTERNAL, POLICY_KINDS, PolicyParams

SCHEMA: dict[str, set[str]] = {
    "grid": {"width", "height", "slip_prob"},
    "agents": {"count", "starts"},
    "zones": {"id", "cells", "rect", "c"},
    "graph": {"kind", "edges", "radius"},
    "links": {"kind", "p_up"},
    "dual": {"eta", "t_zero", "d", "rollouts", "mode"},
    "policy": {"kind", "callable"},
    "run": {"seed", "output_dir"},
    "theorem": {"beta", "epsilon"},
}
REQUIRED = ("grid", "agents", "zones", "graph", "dual")
GENERATORS = {"path": path_graph, "ring": ring_graph, "star": star_graph, "complete": complete_graph}


def load_document(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _check_keys(doc: dict[str, Any]) -> None:
    for section in doc:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section in REQUIRED:
        if section not in doc:
            raise ConfigError(f"missing section [{section}]")
    for section, body in doc.items():
        entries = body if section == "zones" else [body]
        if section == "zones" and not isinstance(body, list):
            raise ConfigError("zones must be an array of tables ([[zones]])")
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise ConfigError(f"[{section}] must be a table")
            where = f"zones[{i}]" if section == "zones" else section
            for key in entry:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{where}.{key}: unknown key")


def _get(table: dict, key: str, where: str, kind, default: Any = ...):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _cell(value, where: str) -> tuple[int, int]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{where}: expected [x, y], got {value!r}")
    return (value[0], value[1])


def _zone(entry: dict, i: int) -> ZoneSpec:
    where = f"zones[{i}]"
    zone_id = _get(entry, "id", where, int)
    c = _get(entry, "c", where, float)
    if not c < 1.0:
        raise ConfigError(f"{where}.c: threshold must be < 1, got {c}")
    if not c >= 0.0:
        raise ConfigError(f"{where}.c: threshold must be >= 0, got {c}")
    if ("cells" in entry) == ("rect" in entry):
        raise ConfigError(f"{where}: give exactly one of cells or rect")
    if "rect" in entry:
        rect = entry["rect"]
        if (not isinstance(rect, list) or len(rect) != 4
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in rect)):
            raise ConfigError(f"{where}.rect: expected [x0, y0, x1, y1]")
        return ZoneSpec.rect(zone_id, *rect, threshold=c)
    cells = entry["cells"]
    if not isinstance(cells, list) or not cells:
        raise ConfigError(f"{where}.cells: expected a non-empty list of [x, y]")
    return ZoneSpec(zone_id, frozenset(_cell(v, f"{where}.cells[{j}]") for j, v in enumerate(cells)), c)


def _topology(graph: dict, n: int, starts) -> Topology:
    kind = _get(graph, "kind", "graph", str)
    if kind in GENERATORS:
        return GENERATORS[kind](n)
    if kind == "proximity":
        return proximity_graph(starts, _get(graph, "radius", "graph", float))
    if kind == "edges":
        edges = _get(graph, "edges", "graph", list)
        return Topology.from_edges(n, [_cell(e, f"graph.edges[{j}]") for j, e in enumerate(edges)])
    raise ConfigError(f"graph.kind: unknown generator {kind!r}")


def _resolve_callable(spec: str):
    module, _, attr = spec.partition(":")
    if not module or not attr:
        raise ConfigError(f"policy.callable: expected 'module:function', got {spec!r}")
    try:
        return getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"policy.callable: cannot import {spec!r}: {exc}") from exc


def build_config(doc: dict[str, Any]) -> RunConfig:
    """Validate a parsed document and turn it into a :class:`RunConfig`."""
    _check_keys(doc)
    g = doc["grid"]
    grid_w = _get(g, "width", "grid", int)
    grid_h = _get(g, "height", "grid", int)
    slip = _get(g, "slip_prob", "grid", float, 0.0)
    if grid_w < 1 or grid_h < 1:
        raise ConfigError(f"grid: size must be positive, got {grid_w}x{grid_h}")
    if not 0.0 <= slip < 1.0:
        raise ConfigError(f"grid.slip_prob: must be in [0, 1), got {slip}")
    grid = GridSpec(grid_w, grid_h, slip)

    a = doc["agents"]
    n = _get(a, "count", "agents", int)
    if n < 1:
        raise ConfigError("agents.count: must be >= 1")
    if "starts" in a:
        starts = [_cell(v, f"agents.starts[{j}]") for j, v in enumerate(_get(a, "starts", "agents", list))]
    else:
        starts = [(j % grid_w, (j // grid_w) % grid_h) for j in range(n)]
    if len(starts) != n:
        raise ConfigError(f"agents.starts: {len(starts)} cells for {n} agents")

    zones = [_zone(entry, i) for i, entry in enumerate(doc["zones"])]
    topology = _topology(doc["graph"], n, starts)

    links_doc = doc.get("links", {})
    links = LinkModel(_get(links_doc, "kind", "links", str, "static"),
                      _get(links_doc, "p_up", "links", float, 1.0))

    du = doc["dual"]
    eta = _get(du, "eta", "dual", float)
    if not eta > 0:
        raise ConfigError(f"dual.eta: must be > 0, got {eta}")
    mode = _get(du, "mode", "dual", str, "distributed")
    if mode not in MODES:
        raise ConfigError(f"dual.mode: must be one of {MODES}")

    pol = doc.get("policy", {})
    kind = _get(pol, "kind", "policy", str, "lagrangian_greedy")
    if kind not in POLICY_KINDS:
        raise ConfigError(f"policy.kind: unknown policy {kind!r}")
    external = _resolve_callable(_get(pol, "callable", "policy", str)) if kind == EXTERNAL else None

    run_doc = doc.get("run", {})
    th = doc.get("theorem", {})
    config = RunConfig(
        grid=grid,
        zones=tuple(zones),
        topology=topology,
        starts=tuple(starts),
        links=links,
        policy=PolicyParams(kind, external),
        eta=eta,
        t_zero=_get(du, "t_zero", "dual", int),
        d=_get(du, "d", "dual", int, None),
        rollouts=_get(du, "rollouts", "dual", int),
        seed=_get(run_doc, "seed", "run", int, 0),
        beta=_get(th, "beta", "theorem", float, 0.0),
        epsilon=_get(th, "epsilon", "theorem", float, 0.0),
        mode=mode,
    )
    config.validate()
    return config


def load_config(path: str | Path) -> tuple[RunConfig, dict[str, Any]]:
    doc = load_document(path)
    return build_config(doc), doc


def effective_document(doc: dict[str, Any], config: RunConfig) -> dict[str, Any]:
    """The document with every default made explicit, for echoing next to artifacts."""
    out = copy.deepcopy(doc)
    out.setdefault("grid", {})["slip_prob"] = config.grid.slip_prob
    out["agents"]["starts"] = [list(s) for s in config.starts]
    out.setdefault("links", {}).update(kind=config.links.kind, p_up=config.links.p_up)
    out["dual"].update(eta=config.eta, t_zero=config.t_zero, d=config.d,
                       rollouts=config.rollouts, mode=config.mode)
    out.setdefault("policy", {})["kind"] = config.policy.kind
    out.setdefault("run", {})["seed"] = config.seed
    out.setdefault("theorem", {}).update(beta=config.beta, epsilon=config.epsilon)
    return out


def dump_document(doc: dict[str, Any]) -> str:
    return tomli_w.dumps(doc)


def override(doc: dict[str, Any], key: str, value) -> dict[str, Any]:
    """Copy of ``doc`` with one sweepable numeric key replaced."""
    out = copy.deepcopy(doc)
    if key == "eta":
        out["dual"]["eta"] = float(value)
    elif key == "t_zero":
        if float(value) != int(float(value)):
            raise ConfigError(f"t_zero must be an integer, got {value}")
        out["dual"]["t_zero"] = int(float(value))
    elif key == "p_up":
        out.setdefault("links", {}).update(kind="bernoulli", p_up=float(value))
    else:
        raise ConfigError(f"cannot sweep {key!r}; sweepable keys are eta, t_zero, p_up")
    return out
