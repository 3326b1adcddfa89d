"""YAML loading that remembers source lines, so validation errors can point
at the offending line."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml

from .errors import ConfigError


def _construct(node: yaml.Node, path: str, lines: dict[str, int]) -> Any:
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k_node, v_node in node.value:
            key = str(k_node.value)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k_node.start_mark.line + 1)
            sub = f"{path}.{key}" if path else key
            out[key] = _construct(v_node, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return yaml.SafeLoader.construct_object(yaml.SafeLoader(""), node)


@dataclass
class Document:
    """Parsed mapping plus a dotted-path -> line table."""

    data: dict
    lines: dict[str, int] = field(default_factory=dict)
    path: str | None = None

    def line(self, key: str) -> int | None:
        while key:
            if key in self.lines:
                return self.lines[key]
            key = key.rpartition(".")[0]
        return None

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{key}: {message}", self.line(key), self.path)


def load_text(text: str, path: str | None = None) -> Document:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, path) from exc
    if node is None:
        raise ConfigError("empty configuration", 1, path)
    lines: dict[str, int] = {}
    data = _construct(node, "", lines)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, path)
    return Document(data, lines, path)


def load_file(path: str) -> Document:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, path) from exc
    return load_text(text, path)


class Section:
    """Typed accessors over one mapping of a :class:`Document`."""

    def __init__(self, doc: Document, data: dict, prefix: str = ""):
        self.doc = doc
        self.data = data if data is not None else {}
        self.prefix = prefix
        if not isinstance(self.data, dict):
            raise doc.error(prefix or "<root>", "expected a mapping")

    def _key(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def error(self, name: str, message: str) -> ConfigError:
        return self.doc.error(self._key(name), message)

    def has(self, name: str) -> bool:
        return name in self.data

    def section(self, name: str, required: bool = False) -> "Section":
        if name not in self.data:
            if required:
                raise self.error(name, "missing required section")
            return Section(self.doc, {}, self._key(name))
        return Section(self.doc, self.data[name], self._key(name))

    def check_keys(self, allowed: set[str]) -> None:
        for k in self.data:
            if k not in allowed:
                raise self.error(k, f"unknown key (allowed: {', '.join(sorted(allowed))})")

    def get(self, name: str, kind, default=None, required: bool = False, lo=None, hi=None, choices=None):
        if name not in self.data:
            if required:
                raise self.error(name, "missing required key")
            return default
        v = self.data[name]
        if kind is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if kind is int and isinstance(v, bool) or not isinstance(v, kind):
            raise self.error(name, f"expected {getattr(kind, '__name__', kind)}, got {v!r}")
        if choices is not None and v not in choices:
            raise self.error(name, f"must be one of {sorted(choices)}, got {v!r}")
        if lo is not None and v < lo:
            raise self.error(name, f"must be >= {lo}, got {v!r}")
        if hi is not None and v > hi:
            raise self.error(name, f"must be <= {hi}, got {v!r}")
        return v
