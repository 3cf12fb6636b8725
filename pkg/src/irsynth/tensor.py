"""Element kinds, tensor types and dense values shared by both IR levels."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

MAX_RANK = 4


class ScalarKind(enum.Enum):
    F64 = "f64"
    I64 = "i64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float64) if self is ScalarKind.F64 else np.dtype(np.int64)

    @classmethod
    def parse(cls, text: str) -> "ScalarKind":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown element kind {text!r}") from None


def type_class(elem: ScalarKind, scalar: bool) -> str:
    """Name of the grammar nonterminal for a value of this kind and rank class."""
    return f"{elem.value}-{'scalar' if scalar else 'tensor'}"


_TYPE_RE = re.compile(r"tensor<(?:((?:\d+x)*\d+)x)?(f64|i64)>")


@dataclass(frozen=True)
class TensorType:
    elem: ScalarKind
    shape: tuple[int, ...] = ()

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if len(shape) > MAX_RANK:
            raise ValueError(f"rank {len(shape)} exceeds the supported maximum {MAX_RANK}")
        if any(d < 1 for d in shape):
            raise ValueError(f"dimensions must be positive, got {shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def type_class(self) -> str:
        return type_class(self.elem, self.rank == 0)

    def with_shape(self, shape) -> "TensorType":
        return TensorType(self.elem, tuple(shape))

    def __str__(self) -> str:
        if not self.shape:
            return f"tensor<{self.elem.value}>"
        return "tensor<" + "x".join(map(str, self.shape)) + f"x{self.elem.value}>"

    @classmethod
    def parse(cls, text: str) -> "TensorType":
        m = _TYPE_RE.fullmatch(text.strip())
        if not m:
            raise ValueError(f"malformed tensor type {text!r}")
        dims = tuple(int(d) for d in m.group(1).split("x")) if m.group(1) else ()
        return cls(ScalarKind(m.group(2)), dims)


@dataclass(frozen=True, eq=False)
class ValueBox:
    """A dense row-major tensor value together with its type."""

    type: TensorType
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=self.type.elem.dtype, copy=True).reshape(self.type.shape)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def same_bits(self, other: "ValueBox") -> bool:
        return self.type == other.type and self.data.tobytes() == other.data.tobytes()

    def __eq__(self, other):
        if not isinstance(other, ValueBox):
            return NotImplemented
        return self.same_bits(other)

    def __hash__(self):
        return hash((self.type, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"ValueBox({self.type}, {self.data.tolist()!r})"
