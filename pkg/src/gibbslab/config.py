"""Line-oriented config files for maps and potentials.

Map file::

    [partition]
    endpoints = 0, 1/2, 1
    [branch.0]
    slope = 2
    intercept = 0
    images = 0, 1
    [branch.1]
    slope = 2
    intercept = -1
    images = 0, 1

Potential file::

    [potential]
    depth = 1
    value.0 = log:7/10
    value.1 = log:3/10

or ``builtin = neg-log-deriv``.  Rationals are written ``p/q`` or as integers;
``log:p/q`` stores the natural log of an exact rational.  Multi-symbol words
in value keys are joined with ``-`` (``value.0-1``).  Unknown sections or keys
are rejected.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .maps import BranchSpec, MarkovMap, PartitionSpec, build_map
from .thermo import Potential


def _parse_sections(text: str) -> list[tuple[str, dict[str, str]]]:
    sections: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = {}
            sections.append((name, current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[key] = value.strip()
    return sections


def _rational(text: str, where: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: invalid rational {text!r}") from exc


def _rational_list(text: str, where: str) -> list[Fraction]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"{where}: empty list")
    return [_rational(t, where) for t in items]


def parse_map(text: str) -> MarkovMap:
    sections = _parse_sections(text)
    partition = None
    branch_data: dict[int, dict[str, str]] = {}
    for name, body in sections:
        if name == "partition":
            if set(body) != {"endpoints"}:
                raise ConfigError(f"[partition]: expected only 'endpoints', got {sorted(body)}")
            partition = _rational_list(body["endpoints"], "[partition] endpoints")
        elif name.startswith("branch."):
            try:
                k = int(name.split(".", 1)[1])
            except ValueError:
                raise ConfigError(f"bad branch section name [{name}]") from None
            if k in branch_data:
                raise ConfigError(f"duplicate section [branch.{k}]")
            unknown = set(body) - {"slope", "intercept", "images"}
            if unknown:
                raise ConfigError(f"[branch.{k}]: unknown keys {sorted(unknown)}")
            missing = {"slope", "intercept", "images"} - set(body)
            if missing:
                raise ConfigError(f"[branch.{k}]: missing keys {sorted(missing)}")
            branch_data[k] = body
        else:
            raise ConfigError(f"unknown section [{name}]")
    if partition is None:
        raise ConfigError("missing [partition] section")
    q = len(partition) - 1
    if sorted(branch_data) != list(range(q)):
        raise ConfigError(f"expected sections [branch.0]..[branch.{q-1}], "
                          f"got {sorted(branch_data)}")
    try:
        spec = PartitionSpec(tuple(partition))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    branches = []
    for k in range(q):
        body = branch_data[k]
        images = _rational_list(body["images"], f"[branch.{k}] images")
        if any(s.denominator != 1 for s in images):
            raise ConfigError(f"[branch.{k}]: images must be integers")
        branches.append(BranchSpec(
            slope=_rational(body["slope"], f"[branch.{k}] slope"),
            intercept=_rational(body["intercept"], f"[branch.{k}] intercept"),
            image_symbols=frozenset(int(s) for s in images),
        ))
    return build_map(spec, branches)


def _potential_value(text: str, where: str) -> float:
    if text.startswith("log:"):
        r = _rational(text[4:], where)
        if r <= 0:
            raise ConfigError(f"{where}: log of non-positive rational")
        return math.log(r.numerator) - math.log(r.denominator)
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: invalid float {text!r}") from exc


def _parse_word_key(key: str, where: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in key.split("-"))
    except ValueError as exc:
        raise ConfigError(f"{where}: bad word key {key!r}") from exc


def parse_potential(text: str, markov_map: MarkovMap) -> Potential:
    sections = _parse_sections(text)
    if len(sections) != 1 or sections[0][0] != "potential":
        raise ConfigError("potential file must contain exactly one [potential] section")
    body = dict(sections[0][1])
    if body.get("builtin") == "neg-log-deriv":
        extra = set(body) - {"builtin"}
        if extra:
            raise ConfigError(f"[potential]: unexpected keys with builtin: {sorted(extra)}")
        return Potential.neg_log_deriv(markov_map)
    if "builtin" in body:
        raise ConfigError(f"unknown builtin {body['builtin']!r}")
    if "depth" not in body:
        raise ConfigError("[potential]: missing 'depth'")
    try:
        depth = int(body.pop("depth"))
    except ValueError:
        raise ConfigError("[potential]: depth must be an integer") from None
    values = {}
    for key, text_value in body.items():
        if not key.startswith("value."):
            raise ConfigError(f"[potential]: unknown key {key!r}")
        word = _parse_word_key(key[len("value."):], "[potential]")
        if len(word) != depth:
            raise ConfigError(f"[potential]: key {key!r} has length {len(word)}, "
                              f"expected depth {depth}")
        values[word] = _potential_value(text_value, f"[potential] {key}")
    try:
        return Potential(depth, values).validate(markov_map)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def load_map(path: str | Path) -> MarkovMap:
    return parse_map(Path(path).read_text())


def load_potential(path: str | Path, markov_map: MarkovMap) -> Potential:
    return parse_potential(Path(path).read_text(), markov_map)
