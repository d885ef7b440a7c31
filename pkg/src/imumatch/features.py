"""Feature points, descriptors and frames."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import IncompatibleDescriptorError, InvalidArgumentError


class DescriptorKind(str, enum.Enum):
    BINARY = "binary"
    REAL = "real"


@dataclass(frozen=True)
class Descriptor:
    """Binary descriptors hold ``bytes``; real descriptors hold a float tuple."""

    kind: DescriptorKind
    data: bytes | tuple

    def __post_init__(self):
        kind = self.kind
        if type(kind) is not DescriptorKind:
            kind = DescriptorKind(kind)
            object.__setattr__(self, "kind", kind)
        if kind is DescriptorKind.BINARY:
            if type(self.data) is not bytes:
                object.__setattr__(self, "data", bytes(self.data))
        else:
            object.__setattr__(self, "data", tuple(float(x) for x in self.data))

    @property
    def length(self) -> int:
        return len(self.data)

    @classmethod
    def binary(cls, data) -> "Descriptor":
        return cls(DescriptorKind.BINARY, data)

    @classmethod
    def real(cls, data) -> "Descriptor":
        return cls(DescriptorKind.REAL, tuple(data))


@dataclass(frozen=True)
class FeaturePoint:
    id: int
    u: float
    v: float
    d: float
    descriptor: Descriptor


class PackedFrame(NamedTuple):
    """Contiguous arrays consumed by the matching kernels."""

    uv: np.ndarray      # float64 (n, 2)
    ids: np.ndarray     # int64 (n,)
    desc: np.ndarray    # uint64 (n, words) for binary, float64 (n, length) for real
    kind: DescriptorKind | None
    length: int


def pack_descriptors(descriptors: Sequence[Descriptor]):
    """Stack descriptors into a kernel-friendly 2-D array.

    Binary descriptors are zero-padded to a multiple of 8 bytes and viewed as
    uint64 words; zero padding does not change Hamming distances.
    """
    if not descriptors:
        return np.zeros((0, 0), dtype=np.uint64), None, 0
    kind = descriptors[0].kind
    length = descriptors[0].length
    for i, d in enumerate(descriptors):
        if d.kind is not kind or d.length != length:
            raise IncompatibleDescriptorError(
                f"descriptor {i} is {d.kind.value}/{d.length}, expected {kind.value}/{length}")
    if kind is DescriptorKind.BINARY:
        words = (length + 7) // 8
        pad = b"\0" * (words * 8 - length)
        raw = pad.join(d.data for d in descriptors) + pad
        buf = np.frombuffer(raw, dtype=np.uint8).reshape(len(descriptors), words * 8)
        return np.ascontiguousarray(buf.view("<u8")).astype(np.uint64), kind, length
    arr = np.array([d.data for d in descriptors], dtype=np.float64).reshape(len(descriptors), length)
    return np.ascontiguousarray(arr), kind, length


@dataclass(frozen=True)
class Frame:
    timestamp: float
    width: int
    height: int
    features: tuple[FeaturePoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        seen = set()
        for f in self.features:
            if f.id in seen:
                raise InvalidArgumentError(f"duplicate feature id {f.id} in frame t={self.timestamp}")
            seen.add(f.id)

    def __len__(self):
        return len(self.features)

    @cached_property
    def packed(self) -> PackedFrame:
        fs = self.features
        uv = np.array([(f.u, f.v) for f in fs], dtype=np.float64).reshape(len(fs), 2)
        ids = np.array([f.id for f in fs], dtype=np.int64)
        desc, kind, length = pack_descriptors([f.descriptor for f in fs])
        return PackedFrame(uv, ids, desc, kind, length)

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {f.id: i for i, f in enumerate(self.features)}

    def feature(self, feature_id: int) -> FeaturePoint:
        return self.features[self.index_of[feature_id]]
