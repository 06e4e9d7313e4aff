"""``section.key = value`` run configuration with line-numbered errors."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError


@dataclass
class Entry:
    value: str
    line: Optional[int]


@dataclass
class RunConfig:
    """Parsed key/value document. Keys are ``section.key``."""

    entries: Dict[str, Entry] = field(default_factory=dict)
    source: Optional[Path] = None
    digest: str = ""

    # -- parsing ------------------------------------------------------------
    @classmethod
    def parse(cls, text: str, source: Optional[Path] = None) -> "RunConfig":
        entries: Dict[str, Entry] = {}
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", n)
            key, value = (s.strip() for s in line.split("=", 1))
            if key.count(".") != 1 or not all(key.split(".")):
                raise ConfigError(f"key {key!r} must look like section.key", n)
            if key in entries:
                raise ConfigError(f"duplicate key {key!r} (first on line {entries[key].line})", n)
            entries[key] = Entry(value, n)
        digest = hashlib.sha256(text.encode()).hexdigest()
        return cls(entries, source, digest)

    @classmethod
    def load(cls, path, overrides: Sequence[str] = ()) -> "RunConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        cfg = cls.parse(text, p)
        for ov in overrides:
            if "=" not in ov:
                raise ConfigError(f"override {ov!r} must be section.key=value")
            k, v = (s.strip() for s in ov.split("=", 1))
            if k.count(".") != 1:
                raise ConfigError(f"override key {k!r} must look like section.key")
            cfg.entries[k] = Entry(v, None)
        if overrides:
            cfg.digest = hashlib.sha256((text + "\n" + "\n".join(overrides)).encode()).hexdigest()
        return cfg

    # -- access --------------------------------------------------------------
    def has(self, key: str) -> bool:
        return key in self.entries

    def has_section(self, section: str) -> bool:
        return any(k.startswith(section + ".") for k in self.entries)

    def _err(self, key: str, msg: str):
        e = self.entries.get(key)
        return ConfigError(f"{key}: {msg}", e.line if e else None)

    def get(self, key: str, default=None, required: bool = False) -> Optional[str]:
        if key in self.entries:
            return self.entries[key].value
        if required:
            raise ConfigError(f"missing required key {key}")
        return default

    def get_int(self, key: str, default=None, required=False, minimum=None) -> Optional[int]:
        v = self.get(key, None, required)
        if v is None:
            return default
        try:
            out = int(v)
        except ValueError:
            raise self._err(key, f"expected an integer, got {v!r}") from None
        if minimum is not None and out < minimum:
            raise self._err(key, f"must be >= {minimum}, got {out}")
        return out

    def get_float(self, key: str, default=None, required=False) -> Optional[float]:
        v = self.get(key, None, required)
        if v is None:
            return default
        if v.lower() in ("auto", "none"):
            return None
        try:
            return float(v)
        except ValueError:
            raise self._err(key, f"expected a number, got {v!r}") from None

    def get_bool(self, key: str, default: bool = False) -> bool:
        v = self.get(key)
        if v is None:
            return default
        if v.lower() in ("true", "yes", "1", "on"):
            return True
        if v.lower() in ("false", "no", "0", "off"):
            return False
        raise self._err(key, f"expected true/false, got {v!r}")

    def get_choice(self, key: str, choices: Sequence[str], default=None, required=False) -> Optional[str]:
        v = self.get(key, default, required)
        if v is not None and v not in choices:
            raise self._err(key, f"must be one of {', '.join(choices)}; got {v!r}")
        return v

    def get_list(self, key: str, default=None, required=False) -> Optional[List[str]]:
        v = self.get(key, None, required)
        if v is None:
            return default
        return [s.strip() for s in v.split(",") if s.strip()]

    def get_float_list(self, key: str, default=None, required=False) -> Optional[List[float]]:
        items = self.get_list(key, None, required)
        if items is None:
            return default
        try:
            return [float(s) for s in items]
        except ValueError:
            raise self._err(key, "expected a comma-separated list of numbers") from None

    def get_int_list(self, key: str, default=None, required=False) -> Optional[List[int]]:
        items = self.get_list(key, None, required)
        if items is None:
            return default
        try:
            return [int(s) for s in items]
        except ValueError:
            raise self._err(key, "expected a comma-separated list of integers") from None

    def seed(self) -> int:
        """The mandatory ``run.seed``."""
        return self.get_int("run.seed", required=True)

    def path(self, key: str, required=False) -> Optional[Path]:
        v = self.get(key, None, required)
        if v is None:
            return None
        p = Path(v)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        if not p.exists():
            raise self._err(key, f"file {p} does not exist")
        return p
