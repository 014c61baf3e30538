"""Variable declarations, mixed points, encodings, sample history and pilots."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.stats import qmc


class SpecError(ValueError):
    """Raised for malformed variable or problem declarations."""


class Direction(str, enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class EffectiveKind(str, enum.Enum):
    CATEGORICAL = "categorical"
    CONTINUOUS = "continuous"
    # continuous relaxation, evaluated at the nearest integer
    ROUNDED = "rounded"


DEFAULT_INTEGER_THRESHOLD = 10


@dataclass(frozen=True)
class VariableSpec:
    """A single declared variable.

    ``kind`` is one of ``"categorical"``, ``"continuous"`` or ``"integer"``.
    Categorical variables carry ``labels``; the numeric kinds carry ``lo`` and
    ``hi`` (inclusive).
    """

    name: str
    kind: str
    labels: tuple[str, ...] = ()
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind == "categorical":
            if len(self.labels) < 2:
                raise SpecError(f"{self.name}: categorical needs at least 2 labels")
            if len(set(self.labels)) != len(self.labels):
                raise SpecError(f"{self.name}: categorical labels must be distinct")
        elif self.kind in ("continuous", "integer"):
            if self.lo is None or self.hi is None:
                raise SpecError(f"{self.name}: bounds required")
            if not self.lo < self.hi:
                raise SpecError(f"{self.name}: need lo < hi, got [{self.lo}, {self.hi}]")
            if self.kind == "integer" and (
                int(self.lo) != self.lo or int(self.hi) != self.hi
            ):
                raise SpecError(f"{self.name}: integer bounds must be integral")
        else:
            raise SpecError(f"{self.name}: unknown variable type {self.kind!r}")

    @classmethod
    def categorical(cls, name: str, labels: Sequence[Any]) -> "VariableSpec":
        return cls(name, "categorical", labels=tuple(str(v) for v in labels))

    @classmethod
    def continuous(cls, name: str, lo: float, hi: float) -> "VariableSpec":
        return cls(name, "continuous", lo=float(lo), hi=float(hi))

    @classmethod
    def integer(cls, name: str, lo: int, hi: int) -> "VariableSpec":
        return cls(name, "integer", lo=int(lo), hi=int(hi))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "type": self.kind}
        if self.kind == "categorical":
            d["labels"] = list(self.labels)
        else:
            d["lo"] = self.lo
            d["hi"] = self.hi
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSpec":
        try:
            kind = d["type"]
            name = d["name"]
        except KeyError as exc:
            raise SpecError(f"variable entry missing field {exc}") from None
        if kind == "categorical":
            return cls.categorical(name, d.get("labels", ()))
        if kind == "continuous":
            return cls.continuous(name, d["lo"], d["hi"])
        if kind == "integer":
            return cls.integer(name, d["lo"], d["hi"])
        raise SpecError(f"{name}: unknown variable type {kind!r}")


def classify_integer_variable(spec: VariableSpec, threshold: int) -> EffectiveKind:
    """Decide how an integer variable is modelled.

    Variables with at most ``threshold`` distinct values become categorical,
    wider ranges become a continuous relaxation rounded at evaluation time.
    """
    if spec.kind != "integer":
        raise SpecError(f"{spec.name}: classify_integer_variable needs an integer variable")
    if threshold < 2:
        raise SpecError("integer threshold must be >= 2")
    count = int(spec.hi) - int(spec.lo) + 1
    if count <= threshold:
        return EffectiveKind.CATEGORICAL
    return EffectiveKind.ROUNDED


@dataclass(frozen=True)
class _Effective:
    var: VariableSpec
    kind: EffectiveKind
    labels: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 1.0


@dataclass(frozen=True)
class MixedPoint:
    """Category indices plus continuous coordinates in declared units."""

    cat: tuple[int, ...]
    con: tuple[float, ...]

    @classmethod
    def make(cls, cat: Sequence[int], con: Sequence[float]) -> "MixedPoint":
        return cls(tuple(int(c) for c in cat), tuple(float(v) for v in con))


class ProblemSpec:
    """Ordered variable declarations with an optimization direction.

    After construction every variable is effectively categorical or
    continuous; integer variables are normalized through
    :func:`classify_integer_variable`.
    """

    def __init__(
        self,
        variables: Sequence[VariableSpec],
        direction: Direction | str = Direction.MAXIMIZE,
        integer_threshold: int = DEFAULT_INTEGER_THRESHOLD,
    ):
        if not variables:
            raise SpecError("problem needs at least one variable")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise SpecError("variable names must be unique")
        if integer_threshold < 1:
            raise SpecError("integer_threshold must be positive")
        self.variables = tuple(variables)
        self.direction = Direction(direction)
        self.integer_threshold = int(integer_threshold)

        eff = []
        for v in self.variables:
            if v.kind == "categorical":
                eff.append(_Effective(v, EffectiveKind.CATEGORICAL, labels=v.labels))
            elif v.kind == "continuous":
                eff.append(_Effective(v, EffectiveKind.CONTINUOUS, lo=v.lo, hi=v.hi))
            else:
                kind = classify_integer_variable(v, max(2, self.integer_threshold))
                if kind is EffectiveKind.CATEGORICAL:
                    labels = tuple(str(i) for i in range(int(v.lo), int(v.hi) + 1))
                    eff.append(_Effective(v, kind, labels=labels))
                else:
                    eff.append(_Effective(v, kind, lo=v.lo, hi=v.hi))
        self._effective = tuple(eff)
        self.cat_vars = tuple(e for e in eff if e.kind is EffectiveKind.CATEGORICAL)
        self.con_vars = tuple(e for e in eff if e.kind is not EffectiveKind.CATEGORICAL)
        self.cat_sizes = tuple(len(e.labels) for e in self.cat_vars)
        self.lower = np.array([e.lo for e in self.con_vars], dtype=float)
        self.upper = np.array([e.hi for e in self.con_vars], dtype=float)
        self._rounded = np.array(
            [e.kind is EffectiveKind.ROUNDED for e in self.con_vars], dtype=bool
        )

    def __repr__(self):
        return (
            f"ProblemSpec(n_cat={self.n_cat}, n_con={self.n_con}, "
            f"direction={self.direction.value})"
        )

    @property
    def n_cat(self) -> int:
        return len(self.cat_vars)

    @property
    def n_con(self) -> int:
        return len(self.con_vars)

    @property
    def n_leaves(self) -> int:
        """Number of categorical combinations, the product of category counts."""
        return int(np.prod(self.cat_sizes, dtype=object)) if self.cat_sizes else 1

    @property
    def sign(self) -> float:
        return 1.0 if self.direction is Direction.MAXIMIZE else -1.0

    # -- conversions -------------------------------------------------------

    def normalize(self, con: np.ndarray) -> np.ndarray:
        con = np.asarray(con, dtype=float)
        return (con - self.lower) / (self.upper - self.lower)

    def denormalize(self, unit: np.ndarray) -> np.ndarray:
        unit = np.asarray(unit, dtype=float)
        return self.snap(self.lower + unit * (self.upper - self.lower))

    def snap(self, con: np.ndarray) -> np.ndarray:
        """Clip to bounds and round the integer-relaxed coordinates."""
        con = np.clip(np.asarray(con, dtype=float), self.lower, self.upper)
        if self._rounded.any():
            con = con.copy()
            con[..., self._rounded] = np.round(con[..., self._rounded])
        return con

    def validate(self, point: MixedPoint) -> None:
        if len(point.cat) != self.n_cat or len(point.con) != self.n_con:
            raise SpecError(
                f"point has shape ({len(point.cat)}, {len(point.con)}), "
                f"expected ({self.n_cat}, {self.n_con})"
            )
        for idx, size, e in zip(point.cat, self.cat_sizes, self.cat_vars):
            if not 0 <= idx < size:
                raise SpecError(f"{e.var.name}: category index {idx} outside [0, {size})")
        con = np.asarray(point.con, dtype=float)
        if np.any(con < self.lower) or np.any(con > self.upper):
            raise SpecError(f"continuous coordinates {point.con} outside bounds")
        if self._rounded.any() and np.any(con[self._rounded] != np.round(con[self._rounded])):
            raise SpecError("integer coordinates must be integral")

    def decode(self, point: MixedPoint) -> dict[str, Any]:
        """Map a point to ``{name: value}`` in declaration order."""
        out: dict[str, Any] = {}
        ci = iter(point.cat)
        ni = iter(point.con)
        for e in self._effective:
            if e.kind is EffectiveKind.CATEGORICAL:
                label = e.labels[next(ci)]
                out[e.var.name] = int(label) if e.var.kind == "integer" else label
            elif e.kind is EffectiveKind.ROUNDED:
                out[e.var.name] = int(round(next(ni)))
            else:
                out[e.var.name] = float(next(ni))
        return out

    def point_from_values(self, values: dict[str, Any]) -> MixedPoint:
        """Inverse of :meth:`decode`."""
        cat, con = [], []
        for e in self._effective:
            raw = values[e.var.name]
            if e.kind is EffectiveKind.CATEGORICAL:
                try:
                    cat.append(e.labels.index(str(raw)))
                except ValueError:
                    raise SpecError(f"{e.var.name}: unknown label {raw!r}") from None
            else:
                con.append(float(raw))
        return MixedPoint.make(cat, con)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "variables": [v.to_dict() for v in self.variables],
            "direction": self.direction.value,
            "integer_threshold": self.integer_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        if "variables" not in d:
            raise SpecError("problem document needs a 'variables' list")
        try:
            direction = Direction(d.get("direction", "maximize"))
        except ValueError:
            raise SpecError(f"unknown direction {d.get('direction')!r}") from None
        return cls(
            [VariableSpec.from_dict(v) for v in d["variables"]],
            direction=direction,
            integer_threshold=d.get("integer_threshold", DEFAULT_INTEGER_THRESHOLD),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ProblemSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class Encoding(str, enum.Enum):
    INTEGER = "integer"
    ONEHOT = "onehot"


def encode_categorical(
    point: MixedPoint, problem: ProblemSpec, scheme: Encoding | str = Encoding.INTEGER
) -> np.ndarray:
    """Flatten ``point`` into a real vector: categorical block then unit-scaled continuous block."""
    problem.validate(point)
    cat, con = encode_points([point], problem, scheme)
    return np.concatenate([cat[0], con[0]])


def encode_points(
    points: Sequence[MixedPoint],
    problem: ProblemSpec,
    scheme: Encoding | str = Encoding.INTEGER,
) -> tuple[np.ndarray, np.ndarray]:
    """Encode many points as ``(cat_block, con_block)`` arrays."""
    scheme = Encoding(scheme)
    n = len(points)
    idx = np.array([p.cat for p in points], dtype=int).reshape(n, problem.n_cat)
    if scheme is Encoding.INTEGER:
        cat = idx.astype(float)
    else:
        cat = np.zeros((n, sum(problem.cat_sizes)))
        offset = 0
        for j, size in enumerate(problem.cat_sizes):
            cat[np.arange(n), offset + idx[:, j]] = 1.0
            offset += size
    con = np.array([p.con for p in points], dtype=float).reshape(n, problem.n_con)
    return cat, problem.normalize(con)


def encode_cat_indices(
    idx: np.ndarray, problem: ProblemSpec, scheme: Encoding | str = Encoding.INTEGER
) -> np.ndarray:
    """Encode an ``(n, n_cat)`` array of category indices."""
    idx = np.atleast_2d(np.asarray(idx, dtype=int))
    if Encoding(scheme) is Encoding.INTEGER:
        return idx.astype(float)
    out = np.zeros((idx.shape[0], sum(problem.cat_sizes)))
    offset = 0
    for j, size in enumerate(problem.cat_sizes):
        out[np.arange(idx.shape[0]), offset + idx[:, j]] = 1.0
        offset += size
    return out


def decode_integer(vec: np.ndarray, problem: ProblemSpec) -> MixedPoint:
    """Inverse of integer-code :func:`encode_categorical`."""
    vec = np.asarray(vec, dtype=float)
    cat = np.rint(vec[: problem.n_cat]).astype(int)
    con = problem.lower + vec[problem.n_cat :] * (problem.upper - problem.lower)
    return MixedPoint.make(cat, con)


@dataclass
class SampleHistory:
    """Append-only record of evaluated points.

    ``Y`` holds values under the maximization convention.
    """

    X: list[MixedPoint] = field(default_factory=list)
    Y: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.Y)

    def append(self, x: MixedPoint, y: float) -> None:
        self.X.append(x)
        self.Y.append(float(y))

    def best_so_far(self) -> np.ndarray:
        return np.maximum.accumulate(np.asarray(self.Y, dtype=float))

    def best(self) -> tuple[MixedPoint, float]:
        i = int(np.argmax(self.Y))
        return self.X[i], self.Y[i]


def generate_pilots(problem: ProblemSpec, n0: int, seed: int) -> list[MixedPoint]:
    """Latin-hypercube continuous coordinates with uniform categorical indices."""
    if n0 < 1:
        raise SpecError("need at least one pilot sample")
    rng = np.random.default_rng(seed)
    if problem.n_con:
        unit = qmc.LatinHypercube(d=problem.n_con, seed=rng).random(n0)
        con = problem.denormalize(unit)
    else:
        con = np.zeros((n0, 0))
    cat = np.column_stack(
        [rng.integers(0, k, size=n0) for k in problem.cat_sizes]
    ) if problem.n_cat else np.zeros((n0, 0), dtype=int)
    return [MixedPoint.make(cat[i], con[i]) for i in range(n0)]


def uniform_points(problem: ProblemSpec, n: int, rng: np.random.Generator) -> list[MixedPoint]:
    """Independent uniform draws over the full mixed domain."""
    con = problem.denormalize(rng.random((n, problem.n_con)))
    cat = np.column_stack(
        [rng.integers(0, k, size=n) for k in problem.cat_sizes]
    ) if problem.n_cat else np.zeros((n, 0), dtype=int)
    return [MixedPoint.make(cat[i], con[i]) for i in range(n)]
