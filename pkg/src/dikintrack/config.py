"""YAML configuration for barriers, potentials and runs.

Every mapping loaded here remembers the line of each key, so that errors
can point at the offending field (``line 7, field 'b': ...``).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Any, Iterator, TextIO

import numpy as np
import yaml

from .barriers import Barrier, PolytopeBarrier, QuadraticBarrier, SumBarrier, ball, box
from .errors import ConfigError
from .potentials import LinearPotential, Potential, QuadraticPotential, zero_potential

__all__ = [
    "LineDict",
    "load_yaml",
    "parse_barrier",
    "load_barrier",
    "parse_potential",
    "load_run_config",
    "read_csv_stream",
]


class LineDict(dict):
    """Dict that records the 1-based source line of each key."""

    def __init__(self, *args, line: int | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.line = line
        self.key_lines: dict[str, int] = {}

    def where(self, key: str | None = None) -> str:
        line = self.key_lines.get(key, self.line) if key is not None else self.line
        loc = f"line {line}" if line is not None else "config"
        return f"{loc}, field '{key}'" if key is not None else loc


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    out = LineDict(line=node.start_mark.line + 1)
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(text_or_path) -> LineDict:
    if isinstance(text_or_path, Path) or (isinstance(text_or_path, str) and "\n" not in text_or_path and Path(text_or_path).exists()):
        path = Path(text_or_path)
        text = path.read_text()
    else:
        text = str(text_or_path)
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{line}invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    return data


def _get(cfg: LineDict, key: str, default: Any = ..., required: bool = True):
    if key in cfg:
        return cfg[key]
    if default is not ... or not required:
        return None if default is ... else default
    raise ConfigError(f"{cfg.where()}: missing required field '{key}'")


def _array(cfg: LineDict, key: str, ndim: int, default: Any = ...) -> np.ndarray | None:
    raw = _get(cfg, key, default)
    if raw is None:
        return None
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{cfg.where(key)}: expected numbers") from None
    if ndim == 0:
        if arr.ndim != 0:
            raise ConfigError(f"{cfg.where(key)}: expected a number")
        return arr
    arr = np.atleast_1d(arr) if ndim == 1 else arr
    if arr.ndim != ndim:
        raise ConfigError(f"{cfg.where(key)}: expected a {'vector' if ndim == 1 else 'matrix'}")
    return arr


def _number(cfg: LineDict, key: str, default: Any = ...) -> float | None:
    arr = _array(cfg, key, 0, default)
    return None if arr is None else float(arr)


def _check_dim(cfg: LineDict, key: str, arr: np.ndarray, dim: int | None, axis: int = -1):
    if dim is not None and arr.shape[axis] != dim:
        raise ConfigError(f"{cfg.where(key)}: expected length {dim}, got {arr.shape[axis]}")


def parse_barrier(cfg: LineDict, base_dir: Path | None = None) -> Barrier:
    """Build a barrier from a ``type``-tagged mapping (see README for the schema)."""
    if not isinstance(cfg, dict):
        raise ConfigError("barrier block must be a mapping")
    if not isinstance(cfg, LineDict):
        cfg = LineDict(cfg)
    kind = _get(cfg, "type")
    dim = _get(cfg, "dimension", None)
    if dim is not None and (not isinstance(dim, int) or dim < 1):
        raise ConfigError(f"{cfg.where('dimension')}: must be a positive integer")
    radius = _number(cfg, "enclosing_radius", None)
    try:
        if kind == "polytope":
            A = _array(cfg, "A", 2)
            b = _array(cfg, "b", 1)
            _check_dim(cfg, "A", A, dim)
            if A.shape[0] != b.shape[0]:
                raise ConfigError(f"{cfg.where('b')}: A has {A.shape[0]} rows but b has {b.shape[0]} entries")
            if radius is None:
                raise ConfigError(f"{cfg.where()}: missing required field 'enclosing_radius'")
            return PolytopeBarrier(A, b, radius)
        if kind == "box":
            lower = _array(cfg, "lower", 1)
            upper = _array(cfg, "upper", 1)
            _check_dim(cfg, "lower", lower, dim)
            _check_dim(cfg, "upper", upper, dim)
            out = box(lower, upper)
            if radius is not None:
                out.enclosing_radius = radius
            return out
        if kind == "ball":
            if dim is None:
                raise ConfigError(f"{cfg.where()}: missing required field 'dimension'")
            center = _array(cfg, "center", 1, None)
            if center is not None:
                _check_dim(cfg, "center", center, dim)
            out = ball(dim, _number(cfg, "radius", 1.0), center)
            if radius is not None:
                out.enclosing_radius = radius
            return out
        if kind == "quadratic":
            cons = _get(cfg, "constraints")
            if not isinstance(cons, list) or not cons:
                raise ConfigError(f"{cfg.where('constraints')}: expected a non-empty list")
            parsed = []
            for item in cons:
                if not isinstance(item, LineDict):
                    raise ConfigError(f"{cfg.where('constraints')}: each constraint must be a mapping with Q, q, c")
                Q = _array(item, "Q", 2)
                _check_dim(item, "Q", Q, dim)
                q = _array(item, "q", 1, None)
                q = np.zeros(Q.shape[0]) if q is None else q
                parsed.append((Q, q, _number(item, "c")))
            if radius is None:
                raise ConfigError(f"{cfg.where()}: missing required field 'enclosing_radius'")
            return QuadraticBarrier(parsed, radius)
        if kind == "sum":
            comps = _get(cfg, "components")
            if not isinstance(comps, list) or not comps:
                raise ConfigError(f"{cfg.where('components')}: expected a non-empty list")
            return SumBarrier([parse_barrier(c, base_dir) for c in comps], radius)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{cfg.where()}: {exc}") from None
    raise ConfigError(f"{cfg.where('type')}: unknown barrier type {kind!r} (polytope, quadratic, sum, box, ball)")


def load_barrier(path) -> Barrier:
    path = Path(path)
    return parse_barrier(load_yaml(path), path.parent)


def parse_potential(cfg: LineDict | None, dim: int, enclosing_radius: float | None = None) -> Potential:
    """Potential block: ``kind`` in ``zero``, ``linear`` (b, c) or ``quadratic`` (center, precision)."""
    if cfg is None:
        return zero_potential(dim)
    if not isinstance(cfg, LineDict):
        cfg = LineDict(cfg)
    kind = _get(cfg, "kind", "zero")
    if kind == "zero":
        pot = zero_potential(dim)
    elif kind == "linear":
        b = _array(cfg, "b", 1)
        _check_dim(cfg, "b", b, dim)
        pot = LinearPotential(b, _number(cfg, "c", 0.0))
    elif kind == "quadratic":
        center = _array(cfg, "center", 1)
        _check_dim(cfg, "center", center, dim)
        prec = _get(cfg, "precision", 1.0)
        try:
            prec = np.asarray(prec, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{cfg.where('precision')}: expected a number or matrix") from None
        pot = QuadraticPotential(center, prec, enclosing_radius=enclosing_radius)
    else:
        raise ConfigError(f"{cfg.where('kind')}: unsupported potential kind {kind!r} (zero, linear, quadratic)")
    for key, attr in (("lipschitz_L", "lipschitz_L"), ("smooth_sigma", "smooth_sigma"), ("custom_r_star", "r_star")):
        if key in cfg:
            setattr(pot, attr, _number(cfg, key))
    return pot


def load_run_config(path) -> tuple[LineDict, Barrier]:
    """Read a run config; the barrier comes inline (``barrier``) or from ``barrier_file``."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cfg = load_yaml(path)
    if "barrier" in cfg:
        barrier = parse_barrier(cfg["barrier"], path.parent)
    elif "barrier_file" in cfg:
        bpath = Path(cfg["barrier_file"])
        if not bpath.is_absolute():
            bpath = path.parent / bpath
        if not bpath.exists():
            raise ConfigError(f"{cfg.where('barrier_file')}: file {bpath} does not exist")
        barrier = load_barrier(bpath)
    else:
        raise ConfigError(f"{path}: needs a 'barrier' block or a 'barrier_file'")
    return cfg, barrier


def read_csv_stream(handle: TextIO, width: int | tuple[int, ...]) -> Iterator[np.ndarray]:
    """Yield numeric rows; blank lines and ``#`` comments are skipped.

    ``width`` is the allowed number of columns (an int or a tuple of ints).
    """
    widths = (width,) if isinstance(width, int) else tuple(width)
    for lineno, line in enumerate(handle, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        row = next(csv.reader(io.StringIO(text)))
        try:
            vals = np.array([float(v) for v in row])
        except ValueError:
            raise ConfigError(f"stream line {lineno}: non-numeric value in {text!r}") from None
        if len(vals) not in widths:
            raise ConfigError(f"stream line {lineno}: expected {' or '.join(map(str, widths))} columns, got {len(vals)}")
        yield vals
