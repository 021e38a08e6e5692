"""Feature and weight vectors: a fixed dense block plus named sparse features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

DENSE_NAMES: tuple[str, ...] = (
    "tm_phi_fwd",
    "tm_lex_fwd",
    "tm_phi_bwd",
    "tm_lex_bwd",
    "lm",
    "class_lm",
    "osm",
    "ld",
    "del",
    "ins",
    "sub",
    "phrase_penalty",
    "word_penalty",
)
DENSE_INDEX = {name: i for i, name in enumerate(DENSE_NAMES)}
N_DENSE = len(DENSE_NAMES)

# named dense feature sets
VANILLA = frozenset(
    {"tm_phi_fwd", "tm_lex_fwd", "tm_phi_bwd", "tm_lex_bwd", "lm", "phrase_penalty", "word_penalty"}
)
WITH_LD = VANILLA | {"ld"}
WITH_EDIT_OPS = WITH_LD | {"del", "ins", "sub"}
FULL = WITH_EDIT_OPS | {"osm", "class_lm"}
FEATURE_SETS = {"vanilla": VANILLA, "ld": WITH_LD, "editops": WITH_EDIT_OPS, "full": FULL}


def _zeros() -> np.ndarray:
    return np.zeros(N_DENSE)


@dataclass
class FeatureVec:
    dense: np.ndarray = field(default_factory=_zeros)
    sparse: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.dense = np.asarray(self.dense, dtype=float)
        if self.dense.shape != (N_DENSE,):
            raise ValueError(f"dense block must have {N_DENSE} slots")

    @classmethod
    def from_dict(cls, values: Mapping[str, float]):
        dense = _zeros()
        sparse = {}
        for name, v in values.items():
            if name in DENSE_INDEX:
                dense[DENSE_INDEX[name]] = v
            else:
                sparse[name] = float(v)
        return cls(dense, sparse)

    def to_dict(self) -> dict[str, float]:
        out = {name: float(v) for name, v in zip(DENSE_NAMES, self.dense)}
        out.update(self.sparse)
        return out

    def __add__(self, other: "FeatureVec"):
        sparse = dict(self.sparse)
        for k, v in other.sparse.items():
            sparse[k] = sparse.get(k, 0.0) + v
        return type(self)(self.dense + other.dense, sparse)

    def __sub__(self, other: "FeatureVec"):
        return self + other.scale(-1.0)

    def scale(self, c: float):
        return type(self)(self.dense * c, {k: v * c for k, v in self.sparse.items()})

    def dot(self, other: "FeatureVec") -> float:
        total = float(self.dense @ other.dense)
        small, big = sorted((self.sparse, other.sparse), key=len)
        for k, v in small.items():
            total += v * big.get(k, 0.0)
        return total

    def norm2(self) -> float:
        return float(self.dense @ self.dense) + sum(v * v for v in self.sparse.values())

    def __getitem__(self, name: str) -> float:
        if name in DENSE_INDEX:
            return float(self.dense[DENSE_INDEX[name]])
        return self.sparse.get(name, 0.0)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureVec)
            and np.array_equal(self.dense, other.dense)
            and {k: v for k, v in self.sparse.items() if v} == {k: v for k, v in other.sparse.items() if v}
        )


class WeightVec(FeatureVec):
    @classmethod
    def uniform(cls, enabled: Iterable[str] = FULL, value: float = 1.0) -> "WeightVec":
        return cls.from_dict({name: value for name in enabled})

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.dense))) and all(math.isfinite(v) for v in self.sparse.values())

    def l1_normalized(self) -> "WeightVec":
        """Dense block scaled to unit L1 norm; sparse block untouched."""
        norm = float(np.abs(self.dense).sum())
        dense = self.dense / norm if norm > 0 else self.dense.copy()
        return WeightVec(dense, dict(self.sparse))


def format_weights(w: FeatureVec) -> str:
    lines = [f"{name}\t{float(v)!r}" for name, v in zip(DENSE_NAMES, w.dense)]
    lines += [f"{name}\t{float(v)!r}" for name, v in sorted(w.sparse.items())]
    return "\n".join(lines) + "\n"


def parse_weights(text: str) -> WeightVec:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name<TAB>value'")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad weight {parts[1]!r}") from None
    return WeightVec.from_dict(values)


def read_weights(path) -> WeightVec:
    with open(path, encoding="utf-8") as f:
        return parse_weights(f.read())


def write_weights(w: FeatureVec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_weights(w))
