"""Run configuration: an INI document (``key = value`` sections) or the same structure as JSON.

An empty configuration reproduces the default protocol at the chosen chain length::

    [chain]
    n_sites = 8
    defect_strength = 0.3

    [run]
    thetas = 0, pi/16, pi/8, 3*pi/16, pi/4
    observables = x y z xx yy zz
    dt = 0.02
    t_final = 40.02
    mode = exact          ; or timeavg
    targets = internal    ; or analytic
    fit_points = 0, 2, 4

    [scan]
    K_values = 0, 0.1, 1
    eps_values = 0, 0.3
"""
from __future__ import annotations

import ast
import configparser
import json
import math
import operator
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .model import AXES, ChainSpec, CoarseObservable, build_pauli_observable
from .scanner import SweepGrid

DEFAULT_THETAS = tuple(k * math.pi / 16 for k in range(5))
DEFAULT_OBSERVABLES = ("x", "y", "z", "xx", "yy", "zz")

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """A float literal or arithmetic on literals and ``pi`` (e.g. ``3*pi/16``)."""

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval").body)
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _list(text, conv=parse_number) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(conv(str(x)) if conv is parse_number else conv(x) for x in text)
    items = [s for s in re.split(r"[,\s]+", str(text).strip()) if s]
    return tuple(conv(s) for s in items)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def observable_from_code(spec: ChainSpec, code: str) -> CoarseObservable:
    """``x``/``yy`` on the central site(s), or with an explicit site: ``z@3``."""
    m = re.fullmatch(r"([xyz])([xyz]?)(?:@(\d+))?", code.strip().lower())
    if not m or (m.group(2) and m.group(2) != m.group(1)):
        raise ValueError(f"unknown observable code {code!r}")
    axis, two, site = m.group(1), bool(m.group(2)), m.group(3)
    i = int(site) if site else spec.n_sites // 2
    return build_pauli_observable(spec, axis, (i, i + 1) if two else i)


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSpec = field(default_factory=lambda: ChainSpec(6))
    thetas: tuple[float, ...] = DEFAULT_THETAS
    observables: tuple[str, ...] = DEFAULT_OBSERVABLES
    dt: float = 0.02
    t_final: float = 40.02
    mode: str = "exact"
    targets: str = "internal"
    time_series: bool = True
    fit_points: tuple[int, ...] = (0, 2, 4)
    workers: int = 1
    out: str | None = None
    cache_dir: str | None = None
    scan: SweepGrid = field(default_factory=SweepGrid)

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("run.dt must be > 0")
        if self.t_final < self.dt:
            raise ConfigError("run.t_final must be >= run.dt")
        if self.mode not in ("exact", "timeavg"):
            raise ConfigError(f"run.mode must be exact or timeavg, got {self.mode!r}")
        if self.targets not in ("internal", "analytic"):
            raise ConfigError(f"run.targets must be internal or analytic, got {self.targets!r}")
        if any(not math.isfinite(t) for t in self.thetas):
            raise ConfigError("run.thetas must be finite")
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        for code in self.observables:
            try:
                observable_from_code(self.chain, code)
            except ValueError as exc:
                raise ConfigError(f"run.observables: {exc}") from None

    def observable_list(self) -> list[CoarseObservable]:
        return [observable_from_code(self.chain, c) for c in self.observables]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["chain"] = self.chain.to_dict()
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        chain_kw = {}
        if "n_sites" in kw:
            chain_kw["n_sites"] = kw.pop("n_sites")
        chain = replace(self.chain, **chain_kw) if chain_kw else self.chain
        return replace(self, chain=chain, **kw)


_CHAIN_KEYS = {"n_sites": int, "nn_coupling": parse_number, "nnn_coupling": parse_number,
               "defect_strength": parse_number, "defect_site": int, "max_sites": int}
_RUN_KEYS = {"thetas": _list, "observables": lambda s: _list(s, str), "dt": parse_number,
             "t_final": parse_number, "mode": str, "targets": str, "time_series": _bool,
             "fit_points": lambda s: _list(s, int), "workers": int, "out": str, "cache_dir": str}
_SCAN_KEYS = {"K_values": _list, "eps_values": _list, "n_sites": int, "nn_coupling": parse_number,
              "defect_site": int, "obs_site": int, "im_threshold": parse_number,
              "re_threshold": parse_number, "p_floor": parse_number,
              "alpha_steps": lambda s: _list(s, int), "beta_steps": lambda s: _list(s, int),
              "gamma_steps": lambda s: _list(s, int), "kinds": lambda s: _list(s, str)}
_SECTIONS = {"chain": _CHAIN_KEYS, "run": _RUN_KEYS, "scan": _SCAN_KEYS}


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip().lower()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, flags=re.I):
            return n
    return None


def _convert(sections: dict, text: str = "") -> RunConfig:
    parsed = {}
    for sec, items in sections.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        keys = {k.lower(): (k, conv) for k, conv in _SECTIONS[sec].items()}
        out = {}
        for key, raw in items.items():
            if key.lower() not in keys:
                raise ConfigError(_where(text, sec, key) + f"unknown key {key!r}")
            name, conv = keys[key.lower()]
            try:
                if isinstance(raw, (int, float)) and not isinstance(raw, bool):
                    raw = str(raw)
                out[name] = conv(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(_where(text, sec, key) + str(exc)) from None
        parsed[sec] = out
    try:
        chain = ChainSpec(**{"n_sites": 6, **parsed.get("chain", {})})
        scan = SweepGrid(**parsed.get("scan", {}))
        return RunConfig(chain=chain, scan=scan, **parsed.get("run", {}))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def _where(text: str, sec: str, key: str) -> str:
    line = _line_of(text, sec, key) if text else None
    return f"[{sec}] {key} (line {line}): " if line else f"[{sec}] {key}: "


def loads(text: str, fmt: str = "ini") -> RunConfig:
    if fmt == "json":
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON config, line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError("JSON config must map section names to objects")
        return _convert(data)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    return _convert({s: dict(cp.items(s)) for s in cp.sections()}, text)


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text, "json" if path.suffix.lower() == ".json" else "ini")
