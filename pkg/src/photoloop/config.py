"""Engine configuration: TOML or JSON, every field optional, validated as a whole.

Example::

    seed = 7

    [loop]
    max_iterations = 3
    patience = 2

    [planner]
    budget = 20
    sim_scale = "half"

    [endpoints.kontext]
    url = "http://localhost:8100/edit"
    kind = "editor"

    [routing]
    parallel_candidates = 2
    [routing.routes]
    SemanticEdit = ["kontext", "procedural"]

Endpoint URLs can be overridden with ``PHOTOLOOP_ENDPOINT_<NAME>_URL``.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import LoopConfig
from .core import Category, Scale
from .evaluator import BUILTIN_SCORERS, UGC_DECODING, ScorerConfig, ScorerEntry, default_scorer_config
from .executor import PROCEDURAL, Executor, RoutingTable
from .planner import PlannerConfig
from .remote import Endpoint

ENV_PREFIX = "PHOTOLOOP_ENDPOINT_"
ENDPOINT_KINDS = ("editor", "scorer", "perceiver")


class ConfigError(ValueError):
    """Rejected configuration; ``path`` names the offending field, e.g. ``planner.budget``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass
class EndpointSpec:
    name: str
    kind: str
    endpoint: Endpoint


@dataclass
class EngineConfig:
    loop: LoopConfig = field(default_factory=LoopConfig)
    endpoints: dict[str, EndpointSpec] = field(default_factory=dict)
    perceiver_endpoint: Optional[str] = None
    input: Optional[str] = None
    output: Optional[str] = None
    seed: int = 0

    @property
    def planner(self) -> PlannerConfig:
        return self.loop.planner

    @property
    def scorers(self) -> ScorerConfig:
        return self.loop.scorer

    @property
    def routing(self) -> RoutingTable:
        return self.loop.routing

    def editors(self) -> dict[str, Endpoint]:
        return {n: s.endpoint for n, s in self.endpoints.items() if s.kind == "editor"}

    def perceiver_url(self) -> Optional[Endpoint]:
        return self.endpoints[self.perceiver_endpoint].endpoint if self.perceiver_endpoint else None

    def with_seed(self, seed: int) -> "EngineConfig":
        loop = replace(self.loop, planner=replace(self.loop.planner, rng_seed=seed))
        return replace(self, loop=loop, seed=seed)

    def build(self):
        """Perceiver, executor and evaluator wired from this configuration."""
        from .evaluator import Evaluator
        from .perceiver import Perceiver

        evaluator = Evaluator(self.scorers)
        executor = Executor(self.routing, self.editors(), evaluator=evaluator.score)
        return Perceiver(self.perceiver_url()), executor, evaluator


# -- parsing helpers -------------------------------------------------------------------

def _table(raw: Mapping[str, Any], key: str, path: str) -> Mapping[str, Any]:
    v = raw.get(key, {})
    if not isinstance(v, Mapping):
        raise ConfigError(_join(path, key), "expected a table")
    return v


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _unknown(section: Mapping[str, Any], allowed, path: str) -> None:
    for k in section:
        if k not in allowed:
            raise ConfigError(_join(path, k), "unknown field")


def _num(section: Mapping[str, Any], key: str, path: str, kind=float, default=None, lo=None, hi=None, lo_open=False):
    p = _join(path, key)
    if key not in section:
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(p, f"expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(p, f"expected an integer, got {v!r}")
        v = int(v)
    v = kind(v)
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigError(p, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(p, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(p, f"must be <= {hi}, got {v}")
    return v


def _str(section: Mapping[str, Any], key: str, path: str, default=None):
    if key not in section:
        return default
    v = section[key]
    if not isinstance(v, str):
        raise ConfigError(_join(path, key), f"expected a string, got {v!r}")
    return v


def _planner(raw: Mapping[str, Any]) -> PlannerConfig:
    s = _table(raw, "planner", "")
    _unknown(s, {"budget", "depth", "top_k", "uct_c", "sim_scale", "seed"}, "planner")
    d = PlannerConfig()
    budget = _num(s, "budget", "planner", int, d.budget, lo=1)
    top_k = _num(s, "top_k", "planner", int, d.top_k, lo=1)
    if top_k > budget:
        raise ConfigError("planner.top_k", f"must be <= planner.budget ({budget})")
    scale = s.get("sim_scale", d.sim_scale)
    try:
        scale = Scale.parse(scale)
    except (KeyError, ValueError):
        raise ConfigError("planner.sim_scale", f"expected full, half or quarter, got {scale!r}") from None
    return PlannerConfig(
        budget=budget,
        depth=_num(s, "depth", "planner", int, d.depth, lo=1),
        top_k=top_k,
        uct_c=_num(s, "uct_c", "planner", float, d.uct_c, lo=0, lo_open=True),
        sim_scale=scale,
        rng_seed=_num(s, "seed", "planner", int, d.rng_seed),
    )


def _endpoints(raw: Mapping[str, Any], env: Mapping[str, str]) -> dict[str, EndpointSpec]:
    s = _table(raw, "endpoints", "")
    out = {}
    for name, spec in s.items():
        path = f"endpoints.{name}"
        if not isinstance(spec, Mapping):
            raise ConfigError(path, "expected a table")
        _unknown(spec, {"url", "kind", "timeout", "retries", "max_in_flight"}, path)
        url = env.get(f"{ENV_PREFIX}{name.upper()}_URL") or _str(spec, "url", path)
        if not url:
            raise ConfigError(_join(path, "url"), "missing")
        kind = _str(spec, "kind", path, "editor")
        if kind not in ENDPOINT_KINDS:
            raise ConfigError(_join(path, "kind"), f"expected one of {ENDPOINT_KINDS}, got {kind!r}")
        ep = Endpoint(
            url,
            timeout=_num(spec, "timeout", path, float, 30.0, lo=0, lo_open=True),
            retries=_num(spec, "retries", path, int, 1, lo=0),
            max_in_flight=_num(spec, "max_in_flight", path, int, 4, lo=1),
        )
        out[name] = EndpointSpec(name, kind, ep)
    return out


def _scorers(raw: Mapping[str, Any], endpoints: Mapping[str, EndpointSpec]) -> ScorerConfig:
    if "scorers" not in raw:
        return default_scorer_config()
    items = raw["scorers"]
    if not isinstance(items, list) or not items:
        raise ConfigError("scorers", "expected a non-empty array of tables")
    entries, seen = [], set()
    for i, s in enumerate(items):
        path = f"scorers[{i}]"
        if not isinstance(s, Mapping):
            raise ConfigError(path, "expected a table")
        _unknown(s, {"id", "weight", "builtin", "endpoint", "range", "higher_is_better", "reference_text"}, path)
        sid = _str(s, "id", path)
        if not sid:
            raise ConfigError(_join(path, "id"), "missing")
        if sid in seen:
            raise ConfigError(_join(path, "id"), f"duplicate scorer id {sid!r}")
        seen.add(sid)
        weight = _num(s, "weight", path, float, None, lo=0, lo_open=True)
        if weight is None:
            raise ConfigError(_join(path, "weight"), "missing")
        builtin, ep_name = _str(s, "builtin", path), _str(s, "endpoint", path)
        if (builtin is None) == (ep_name is None):
            raise ConfigError(path, "set exactly one of builtin or endpoint")
        if builtin is not None and builtin not in BUILTIN_SCORERS:
            raise ConfigError(_join(path, "builtin"), f"unknown builtin {builtin!r}; known: {sorted(BUILTIN_SCORERS)}")
        endpoint = None
        if ep_name is not None:
            spec = endpoints.get(ep_name)
            if spec is None or spec.kind != "scorer":
                raise ConfigError(_join(path, "endpoint"), f"no scorer endpoint named {ep_name!r}")
            endpoint = spec.endpoint
        rng = s.get("range", [0.0, 1.0])
        if (not isinstance(rng, list) or len(rng) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in rng) or not rng[1] > rng[0]):
            raise ConfigError(_join(path, "range"), f"expected [lo, hi] with hi > lo, got {rng!r}")
        hib = s.get("higher_is_better", True)
        if not isinstance(hib, bool):
            raise ConfigError(_join(path, "higher_is_better"), "expected a boolean")
        entries.append(ScorerEntry(
            sid, weight, builtin=builtin, endpoint=endpoint, native_range=(float(rng[0]), float(rng[1])),
            higher_is_better=hib, reference_text=_str(s, "reference_text", path),
            decoding=dict(UGC_DECODING) if sid == "ugc" and endpoint is not None else None,
        ))
    return ScorerConfig(tuple(entries))


def _routing(raw: Mapping[str, Any], endpoints: Mapping[str, EndpointSpec]) -> RoutingTable:
    s = _table(raw, "routing", "")
    _unknown(s, {"parallel_candidates", "routes"}, "routing")
    par = _num(s, "parallel_candidates", "routing", int, 1)
    if par not in (1, 2):
        raise ConfigError("routing.parallel_candidates", f"must be 1 or 2, got {par}")
    routes = {c: (PROCEDURAL,) for c in Category}
    for key, tools in _table(s, "routes", "routing").items():
        path = f"routing.routes.{key}"
        try:
            cat = Category.parse(key)
        except (KeyError, ValueError):
            raise ConfigError(path, "unknown category") from None
        if isinstance(tools, str):
            tools = [tools]
        if not isinstance(tools, list) or not tools or not all(isinstance(t, str) for t in tools):
            raise ConfigError(path, "expected a non-empty list of tool names")
        for t in tools:
            if t != PROCEDURAL and (t not in endpoints or endpoints[t].kind != "editor"):
                raise ConfigError(path, f"unknown tool {t!r}; use 'procedural' or an editor endpoint name")
        routes[cat] = tuple(tools)
    return RoutingTable(routes, par)


def parse_config(raw: Mapping[str, Any], env: Optional[Mapping[str, str]] = None) -> EngineConfig:
    """Validate a parsed document; any violation raises :class:`ConfigError` and nothing is returned."""
    env = os.environ if env is None else env
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "expected a table")
    _unknown(raw, {"seed", "loop", "planner", "scorers", "routing", "endpoints", "perceiver", "io"}, "")
    seed = _num(raw, "seed", "", int, 0)
    endpoints = _endpoints(raw, env)
    planner = _planner(raw)
    if "seed" not in _table(raw, "planner", ""):
        planner.rng_seed = seed
    loop_s = _table(raw, "loop", "")
    _unknown(loop_s, {"max_iterations", "patience", "epsilon", "num_proposals", "quality_ceiling"}, "loop")
    d = LoopConfig.__dataclass_fields__
    max_it = _num(loop_s, "max_iterations", "loop", int, d["max_iterations"].default, lo=1)
    patience = _num(loop_s, "patience", "loop", int, min(d["patience"].default, max_it), lo=1)
    if patience > max_it:
        raise ConfigError("loop.patience", f"must be <= loop.max_iterations ({max_it})")
    loop = LoopConfig(
        max_iterations=max_it,
        patience=patience,
        epsilon=_num(loop_s, "epsilon", "loop", float, d["epsilon"].default, lo=0),
        planner=planner,
        scorer=_scorers(raw, endpoints),
        routing=_routing(raw, endpoints),
        num_proposals=_num(loop_s, "num_proposals", "loop", int, d["num_proposals"].default, lo=1),
        quality_ceiling=_num(loop_s, "quality_ceiling", "loop", float, d["quality_ceiling"].default),
    )
    perc = _table(raw, "perceiver", "")
    _unknown(perc, {"endpoint"}, "perceiver")
    perc_ep = _str(perc, "endpoint", "perceiver")
    if perc_ep is not None and (perc_ep not in endpoints or endpoints[perc_ep].kind != "perceiver"):
        raise ConfigError("perceiver.endpoint", f"no perceiver endpoint named {perc_ep!r}")
    io = _table(raw, "io", "")
    _unknown(io, {"input", "output"}, "io")
    return EngineConfig(loop, endpoints, perc_ep, _str(io, "input", "io"), _str(io, "output", "io"), seed)


def load_config(path: Optional[str | Path] = None, env: Optional[Mapping[str, str]] = None) -> EngineConfig:
    """Read TOML (or JSON, by ``.json`` suffix or leading ``{``); ``None`` gives the defaults."""
    if path is None:
        return parse_config({}, env)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"parse error: {exc}") from exc
    return parse_config(raw, env)
