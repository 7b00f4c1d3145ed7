"""Group model inputs and the default-state lattice.

A group of ``n`` subsidiaries is described by per-line drift and volatility,
a correlation matrix for the driving Brownian motions, a discount rate,
dividend weights, and a default-intensity map on the lattice {0,1}^n.
Subsidiaries are numbered 1..n; in a state bitstring the leftmost character
is subsidiary 1 and '1' means defaulted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

WEIGHT_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12
PSD_JITTER = 1e-10

CONFIG_KEYS = ("n", "drift", "vol", "corr", "discount", "weights", "intensity")


class ConfigError(ValueError):
    """Malformed configuration document (bad key, shape, or encoding)."""


@dataclass(frozen=True)
class DefaultState:
    """Point of the default lattice: bit i-1 of ``mask`` set = subsidiary i defaulted."""

    mask: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.n:
            raise ValueError("n must be positive")
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask} out of range for n={self.n}")

    @classmethod
    def all_alive(cls, n: int) -> "DefaultState":
        return cls(0, n)

    @classmethod
    def all_defaulted(cls, n: int) -> "DefaultState":
        return cls((1 << n) - 1, n)

    @classmethod
    def from_bitstring(cls, bits: str, n: int | None = None) -> "DefaultState":
        if n is None:
            n = len(bits)
        if len(bits) != n or any(c not in "01" for c in bits):
            raise ValueError(f"bad state bitstring {bits!r} for n={n}")
        mask = 0
        for i, c in enumerate(bits):  # leftmost char = subsidiary 1
            if c == "1":
                mask |= 1 << i
        return cls(mask, n)

    @property
    def bitstring(self) -> str:
        return "".join("1" if self.is_defaulted(i) else "0" for i in range(1, self.n + 1))

    def is_defaulted(self, i: int) -> bool:
        return bool(self.mask >> (i - 1) & 1)

    @property
    def defaulted_count(self) -> int:
        return bin(self.mask).count("1")

    @property
    def surviving(self) -> tuple[int, ...]:
        """Ascending subsidiary numbers still alive in this state."""
        return tuple(i for i in range(1, self.n + 1) if not self.is_defaulted(i))

    def with_default(self, i: int) -> "DefaultState":
        """Neighbour state after subsidiary i defaults."""
        if self.is_defaulted(i):
            raise ValueError(f"subsidiary {i} already defaulted in {self.bitstring}")
        return DefaultState(self.mask | 1 << (i - 1), self.n)

    def __str__(self) -> str:
        return self.bitstring


def surviving(state: DefaultState) -> list[int]:
    return list(state.surviving)


def states_by_defaults(n: int) -> list[list[DefaultState]]:
    """All 2^n states grouped by defaulted count, most-defaulted group first.

    The first group is the single all-defaulted state, the last the all-alive
    state; within a group states are ordered by ascending mask.  This is the
    order in which the backward induction can be run directly.
    """
    groups: list[list[DefaultState]] = [[] for _ in range(n + 1)]
    for mask in range(1 << n):
        state = DefaultState(mask, n)
        groups[state.defaulted_count].append(state)
    return [groups[count] for count in range(n, -1, -1)]


@dataclass(frozen=True)
class ModelParams:
    """Immutable group parameters.

    ``intensity`` is a dense per-state table: ``intensity[mask][i-1]`` is the
    default intensity of subsidiary i while the group is in the state with
    that mask.  Entries for already-defaulted subsidiaries are a 0.0 sentinel
    and are never read.
    """

    n: int
    drift: tuple[float, ...]
    vol: tuple[float, ...]
    corr: tuple[tuple[float, ...], ...]
    discount: float
    weights: tuple[float, ...]
    intensity: tuple[tuple[float, ...], ...]

    def intensity_of(self, i: int, state: DefaultState) -> float:
        if state.is_defaulted(i):
            raise ValueError(f"subsidiary {i} is defaulted in state {state}")
        return self.intensity[state.mask][i - 1]

    def corr_matrix(self) -> np.ndarray:
        return np.asarray(self.corr, dtype=float)

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of corr, with a tiny jitter retry for PSD edge cases."""
        c = self.corr_matrix()
        try:
            return np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            return np.linalg.cholesky(c + PSD_JITTER * np.eye(self.n))

    def states(self) -> list[DefaultState]:
        return [DefaultState(mask, self.n) for mask in range(1 << self.n)]


def _as_float_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def expand_intensity_rule(base: Sequence[float], factor: float, n: int) -> tuple[tuple[float, ...], ...]:
    """Dense intensity table for the scaling rule lambda_i(z) = base_i * factor^defaults(z)."""
    if len(base) != n:
        raise ConfigError(f"intensity rule base must have {n} entries, got {len(base)}")
    table = []
    for mask in range(1 << n):
        state = DefaultState(mask, n)
        boost = float(factor) ** state.defaulted_count
        row = [0.0 if state.is_defaulted(i) else float(base[i - 1]) * boost for i in range(1, n + 1)]
        table.append(tuple(row))
    return tuple(table)


def _intensity_from_table(doc: Mapping[str, Sequence[float]], n: int) -> tuple[tuple[float, ...], ...]:
    rows: list[tuple[float, ...]] = []
    by_mask: dict[int, Sequence[float]] = {}
    for bits, values in doc.items():
        try:
            state = DefaultState.from_bitstring(str(bits), n)
        except ValueError as exc:
            raise ConfigError(f"intensity.table: {exc}") from exc
        if len(values) != n:
            raise ConfigError(f"intensity.table[{bits!r}] must have {n} entries, got {len(values)}")
        by_mask[state.mask] = values
    for mask in range(1 << n):
        state = DefaultState(mask, n)
        if not state.surviving:
            rows.append(tuple(0.0 for _ in range(n)))
            continue
        if mask not in by_mask:
            raise ConfigError(f"intensity.table missing state {state.bitstring!r}")
        values = by_mask[mask]
        # defaulted positions are normalized to the 0.0 sentinel regardless of input
        rows.append(tuple(0.0 if state.is_defaulted(i) else float(values[i - 1]) for i in range(1, n + 1)))
    return tuple(rows)


def params_from_config(doc: Mapping[str, object]) -> ModelParams:
    """Build ModelParams from a config mapping, rejecting unknown keys with their location."""
    unknown = sorted(set(doc) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(repr(k) for k in unknown)}")
    missing = [k for k in CONFIG_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(repr(k) for k in missing)}")
    try:
        n = int(doc["n"])  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"n: {exc}") from exc
    if n < 1:
        raise ConfigError("n must be >= 1")

    def seq(key: str) -> tuple[float, ...]:
        values = doc[key]
        if not isinstance(values, Sequence) or isinstance(values, (str, bytes)):
            raise ConfigError(f"{key} must be a list of {n} numbers")
        if len(values) != n:
            raise ConfigError(f"{key} must have {n} entries, got {len(values)}")
        return _as_float_tuple(values)  # type: ignore[arg-type]

    corr_doc = doc["corr"]
    if not isinstance(corr_doc, Sequence) or len(corr_doc) != n:
        raise ConfigError(f"corr must be an {n}x{n} matrix")
    corr_rows = []
    for r, row in enumerate(corr_doc):
        if not isinstance(row, Sequence) or len(row) != n:
            raise ConfigError(f"corr[{r}] must have {n} entries")
        corr_rows.append(_as_float_tuple(row))

    intensity_doc = doc["intensity"]
    if not isinstance(intensity_doc, Mapping):
        raise ConfigError('intensity must be {"table": {...}} or {"rule": {...}}')
    ikeys = set(intensity_doc)
    if ikeys == {"table"}:
        table = _intensity_from_table(intensity_doc["table"], n)  # type: ignore[arg-type]
    elif ikeys == {"rule"}:
        rule = intensity_doc["rule"]
        if not isinstance(rule, Mapping) or set(rule) != {"base", "factor"}:
            raise ConfigError('intensity.rule must have exactly the keys "base" and "factor"')
        table = expand_intensity_rule(rule["base"], float(rule["factor"]), n)  # type: ignore[arg-type]
    else:
        raise ConfigError(f"intensity: expected exactly one of 'table'/'rule', got {sorted(ikeys)}")

    return ModelParams(
        n=n,
        drift=seq("drift"),
        vol=seq("vol"),
        corr=tuple(corr_rows),
        discount=float(doc["discount"]),  # type: ignore[arg-type]
        weights=seq("weights"),
        intensity=table,
    )


def load_config(path: str) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return params_from_config(doc)


def validate(params: ModelParams) -> list[str]:
    """Every violated invariant as a message; an empty list means valid.

    Violations are reported, not raised, so callers can surface all of them at
    once.  Solvers require an empty list before running.
    """
    out: list[str] = []
    n = params.n
    if n < 1:
        return [f"n must be >= 1, got {n}"]
    if n > 16:
        out.append(f"n={n} exceeds the supported cap of 16 (2^n states)")

    for name, values in (("drift", params.drift), ("vol", params.vol), ("weights", params.weights)):
        if len(values) != n:
            out.append(f"{name} must have {n} entries, got {len(values)}")
    for i, a in enumerate(params.drift, start=1):
        if not a > 0:
            out.append(f"drift[{i}] must be > 0, got {a}")
    for i, b in enumerate(params.vol, start=1):
        if not b > 0:
            out.append(f"vol[{i}] must be > 0, got {b}")
    for i, w in enumerate(params.weights, start=1):
        if not w > 0:
            out.append(f"weights[{i}] must be > 0, got {w}")
    if len(params.weights) == n and abs(sum(params.weights) - 1.0) > WEIGHT_SUM_TOL:
        out.append(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {sum(params.weights)!r}")
    if not params.discount > 0:
        out.append(f"discount must be > 0, got {params.discount}")

    corr = params.corr
    if len(corr) != n or any(len(row) != n for row in corr):
        out.append(f"corr must be {n}x{n}")
    else:
        c = params.corr_matrix()
        if np.max(np.abs(c - c.T)) > SYMMETRY_TOL:
            out.append("corr must be symmetric")
        if np.max(np.abs(np.diag(c) - 1.0)) > SYMMETRY_TOL:
            out.append("corr must have a unit diagonal")
        if np.max(np.abs(c)) > 1.0 + SYMMETRY_TOL:
            out.append("corr entries must lie in [-1, 1]")
        try:
            np.linalg.cholesky(c + PSD_JITTER * np.eye(n))
        except np.linalg.LinAlgError:
            out.append(f"corr must be positive semidefinite (jitter {PSD_JITTER} allowed)")

    table = params.intensity
    if len(table) != (1 << n) or any(len(row) != n for row in table):
        out.append(f"intensity table must be dense: {1 << n} states x {n} entries")
        return out

    for mask in range(1 << n):
        state = DefaultState(mask, n)
        for i in state.surviving:
            if not table[mask][i - 1] > 0:
                out.append(f"intensity of subsidiary {i} in state {state.bitstring} must be > 0")
    # contagion monotonicity: one more default never lowers a survivor's intensity
    for mask in range(1 << n):
        state = DefaultState(mask, n)
        for i in state.surviving:
            lam = table[mask][i - 1]
            for l in state.surviving:
                if l == i:
                    continue
                worse = state.with_default(l)
                if table[worse.mask][i - 1] < lam:
                    out.append(
                        f"intensity of subsidiary {i} must not decrease from state "
                        f"{state.bitstring} to {worse.bitstring}"
                    )
    return out
