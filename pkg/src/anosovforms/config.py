"""Run configuration: a flat INI file with section headers.

Every value has a default, so an empty file (or no file) is a valid
configuration.  Errors carry the line and column of the offending text.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

SCHEMA_VERSION = 1

# section -> key -> (type, default)
DEFAULTS: dict[str, dict[str, tuple[type, object]]] = {
    "model": {
        "matrix": (str, "0 1 0; 0 0 1; 1 1 0"),
        "roof": (float, 1.0),
    },
    "run": {
        "seed": (int, 0),
        "tol": (float, 1e-6),
    },
    "rates": {
        "samples": (int, 100),
        "t_max": (float, 40.0),
        "t_points": (int, 81),
    },
    "solve": {
        "degree": (int, 2),
        "form": (str, ""),
        "sites": (int, 50),
        "horizon_cap": (float, 0.0),
        "convergence_times": (str, "2 4 6 8 10 12 14 16 18 20"),
    },
    "quadrature": {
        "rule": (str, "lattice"),
        "n": (int, 2**16),
        "shifts": (int, 8),
    },
    "l2": {
        "pairs": (int, 20),
    },
    "obstruction": {
        "max_period": (int, 4),
    },
    "output": {
        "dir": (str, "out"),
    },
}


class ConfigError(ValueError):
    """Malformed configuration; ``line`` and ``column`` are 1-based (0 if unknown)."""

    def __init__(self, message: str, line: int = 0, column: int = 0, path: str = "<config>"):
        where = f"{path}:{line}:{column}: " if line else f"{path}: "
        super().__init__(where + message)
        self.line, self.column = line, column


def _locate(text: str, section: str, key: str) -> tuple[int, int]:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        head = re.fullmatch(r"\[([^\]]+)\]", stripped)
        if head:
            current = head.group(1).strip().lower()
            continue
        m = re.match(r"\s*([^=:\s]+)\s*[=:]\s*", raw)
        if m and current == section and m.group(1).lower() == key:
            return i, m.end() + 1
    return 0, 0


def parse_matrix(text: str) -> list[list[int]]:
    """Rows separated by ';', entries by spaces or commas."""
    rows = [r for r in text.split(";") if r.strip()]
    return [[int(v) for v in r.replace(",", " ").split()] for r in rows]


@dataclass(frozen=True)
class RunConfig:
    values: dict
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def matrix(self) -> list[list[int]]:
        return parse_matrix(self.values["model"]["matrix"])

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def tol(self) -> float:
        return self.values["run"]["tol"]

    def with_overrides(self, **pairs) -> "RunConfig":
        """Override ``section__key`` entries (None values are ignored)."""
        vals = {s: dict(v) for s, v in self.values.items()}
        for name, value in pairs.items():
            if value is None:
                continue
            section, key = name.split("__")
            kind = DEFAULTS[section][key][0]
            vals[section][key] = kind(value)
        return RunConfig(vals, self.source)

    def resolved(self) -> dict:
        return {s: dict(sorted(v.items())) for s, v in sorted(self.values.items())}

    @property
    def content_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def default_config() -> RunConfig:
    return RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in DEFAULTS.items()})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return default_config()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno, 1, source) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else 0
        raise ConfigError("expected 'key = value'", line, 1, source) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.lineno or 0, 1, source) from None
    values = default_config().values
    for section in parser.sections():
        sec = section.lower()
        if sec not in DEFAULTS:
            line = next((i for i, r in enumerate(text.splitlines(), 1) if r.strip().lower() == f"[{sec}]"), 0)
            raise ConfigError(f"unknown section [{section}]", line, 1, source)
        for key, raw in parser.items(section):
            line, col = _locate(text, sec, key)
            if key not in DEFAULTS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line, 1, source)
            kind = DEFAULTS[sec][key][0]
            try:
                values[sec][key] = kind(raw) if kind is not str else raw.strip()
            except ValueError:
                raise ConfigError(f"{key} expects {kind.__name__}, got {raw!r}", line, col, source) from None
    try:
        parse_matrix(values["model"]["matrix"])
    except ValueError:
        line, col = _locate(text, "model", "matrix")
        raise ConfigError("matrix entries must be integers", line, col, source) from None
    return RunConfig(values, source)
