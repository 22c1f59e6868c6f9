"""Shared data vocabulary: code addresses, trace entries, preprocessed traces.

All analysis speaks in (image, offset) addresses. For source files the
32-bit offset packs the source position as (line << 16) | column, which is
injective and preserves (line, column) ordering. Addresses inside the
synthetic ``[extern]`` image (image id 0) carry a function-name digest
instead of a position, since external/built-in code has no traced source.

Entries are stored in a packed ``(n, 4)`` uint64 array per trace. The first
three columns form the comparison key used by the call-tree merge; the last
column holds per-trace data (memory access offset, allocation size) that is
recorded but never compared.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Sequence

import numpy as np

EXTERN_IMAGE_ID = 0
EXTERN_IMAGE_NAME = "[extern]"

# Packed entry tags (low byte of the first key column).
TAG_CALL = 1
TAG_RETURN = 2
TAG_JUMP = 3
TAG_ALLOC = 4
TAG_READ = 5
TAG_WRITE = 6

FLAG_TAKEN = 1 << 8

# Unresolved target of a not-taken jump.
SENTINEL_TARGET = (1 << 64) - 1

# Non-numeric property names live above the 32-bit element index range.
PROPERTY_OFFSET_BASE = 1 << 32

MAX_LINE = 1 << 16
MAX_COLUMN = 1 << 16


class TraceModelError(Exception):
    """Base for vocabulary-level contract violations."""


class AddressEncodeError(TraceModelError):
    pass


class AddressLookupError(TraceModelError):
    pass


@dataclass(frozen=True)
class ImageInfo:
    """One loaded code unit (source file, or the synthetic ``[extern]``)."""

    image_id: int
    name: str


@dataclass(frozen=True)
class CodeAddress:
    image_id: int
    offset: int

    def pack(self) -> int:
        return (self.image_id << 32) | self.offset

    @staticmethod
    def unpack(packed: int) -> "CodeAddress":
        return CodeAddress(packed >> 32, packed & 0xFFFFFFFF)

    @property
    def line(self) -> int:
        return self.offset >> 16

    @property
    def column(self) -> int:
        return self.offset & 0xFFFF


@dataclass(frozen=True)
class SourceLocation:
    """Human-readable decoding of a CodeAddress."""

    file: str
    line: int
    column: int
    symbol: str | None = None  # extern function name

    def __str__(self) -> str:
        if self.symbol is not None:
            return f"{EXTERN_IMAGE_NAME}:{self.symbol}"
        return f"{self.file}:{self.line}:{self.column}"


def name_digest(name: str) -> int:
    """Stable 32-bit digest used as the address offset of extern functions.

    Order-independent so that traces preprocessed in parallel assign the
    same address to the same function name.
    """
    return zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF


def encode_address(image_id: int, line: int, column: int) -> CodeAddress:
    if not 0 < line < MAX_LINE:
        raise AddressEncodeError(
            f"line {line} out of range at image {image_id} (must be 1..{MAX_LINE - 1})"
        )
    if not 0 <= column < MAX_COLUMN:
        raise AddressEncodeError(
            f"column {column} out of range at image {image_id}:{line}"
        )
    return CodeAddress(image_id, (line << 16) | column)


def extern_address(name: str) -> CodeAddress:
    return CodeAddress(EXTERN_IMAGE_ID, name_digest(name))


def decode_address(
    addr: CodeAddress,
    images: Sequence[ImageInfo],
    extern_names: dict[int, str] | None = None,
) -> SourceLocation:
    if addr.image_id < 0 or addr.image_id >= len(images):
        raise AddressLookupError(f"unknown image id {addr.image_id}")
    image = images[addr.image_id]
    if addr.image_id == EXTERN_IMAGE_ID:
        name = (extern_names or {}).get(addr.offset, f"?{addr.offset:08x}")
        return SourceLocation(image.name, 0, 0, symbol=name)
    return SourceLocation(image.name, addr.line, addr.column)


class BranchKind(IntEnum):
    CALL = TAG_CALL
    RETURN = TAG_RETURN
    JUMP = TAG_JUMP


class AccessKind(IntEnum):
    READ = TAG_READ
    WRITE = TAG_WRITE


@dataclass(frozen=True)
class Branch:
    kind: BranchKind
    source: CodeAddress
    target: CodeAddress | None  # None iff taken is False
    taken: bool = True


@dataclass(frozen=True)
class Allocation:
    alloc_id: int
    size: int
    name: str | None = None  # display label only; never compared


@dataclass(frozen=True)
class MemoryAccess:
    kind: AccessKind
    instruction: CodeAddress
    alloc_id: int
    offset: int


TraceEntry = Branch | Allocation | MemoryAccess


def pack_entry(entry: TraceEntry) -> tuple[int, int, int, int]:
    """Encode one entry as the four packed columns."""
    if isinstance(entry, Branch):
        tag = int(entry.kind)
        if entry.taken:
            tag |= FLAG_TAKEN
            if entry.target is None:
                raise TraceModelError("taken branch requires a target")
            target = entry.target.pack()
        else:
            if entry.target is not None:
                raise TraceModelError("not-taken branch carries a sentinel target")
            target = SENTINEL_TARGET
        return tag, entry.source.pack(), target, 0
    if isinstance(entry, Allocation):
        return TAG_ALLOC, entry.alloc_id, 0, entry.size
    if isinstance(entry, MemoryAccess):
        return int(entry.kind), entry.instruction.pack(), entry.alloc_id, entry.offset
    raise TraceModelError(f"not a trace entry: {entry!r}")


def unpack_entry(row: Sequence[int]) -> TraceEntry:
    key0, a, b, data = (int(x) for x in row)
    tag = key0 & 0xFF
    if tag in (TAG_CALL, TAG_RETURN, TAG_JUMP):
        taken = bool(key0 & FLAG_TAKEN)
        target = CodeAddress.unpack(b) if taken else None
        return Branch(BranchKind(tag), CodeAddress.unpack(a), target, taken)
    if tag == TAG_ALLOC:
        return Allocation(a, data)
    if tag in (TAG_READ, TAG_WRITE):
        return MemoryAccess(AccessKind(tag), CodeAddress.unpack(a), b, data)
    raise TraceModelError(f"corrupt packed entry tag {tag}")


@dataclass
class PreprocessedTrace:
    """One testcase's preprocessed trace: packed entries plus name registries.

    Immutable after construction; safe to share across threads.
    """

    testcase: int
    packed: np.ndarray  # (n, 4) uint64
    images: list[ImageInfo]
    extern_names: dict[int, str] = field(default_factory=dict)
    alloc_names: dict[int, str] = field(default_factory=dict)
    property_names: dict[int, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.packed.shape[0]

    def __iter__(self) -> Iterator[TraceEntry]:
        for row in self.packed:
            yield unpack_entry(row)

    @property
    def keys(self) -> np.ndarray:
        """Comparison-key view (first three columns)."""
        return self.packed[:, :3]

    @property
    def data(self) -> np.ndarray:
        return self.packed[:, 3]

    @classmethod
    def from_entries(
        cls,
        testcase: int,
        entries: Sequence[TraceEntry],
        images: list[ImageInfo],
        extern_names: dict[int, str] | None = None,
        property_names: dict[int, str] | None = None,
        validate: bool = True,
    ) -> "PreprocessedTrace":
        packed = np.zeros((len(entries), 4), dtype=np.uint64)
        alloc_names: dict[int, str] = {}
        for i, entry in enumerate(entries):
            packed[i] = pack_entry(entry)
            if isinstance(entry, Allocation) and entry.name:
                alloc_names[entry.alloc_id] = entry.name
        trace = cls(
            testcase,
            packed,
            images,
            extern_names=dict(extern_names or {}),
            alloc_names=alloc_names,
            property_names=dict(property_names or {}),
        )
        if validate:
            trace.validate()
        return trace

    def validate(self) -> None:
        """Check entry-stream invariants (allocation ordering, access refs)."""
        next_alloc = 1
        for i, entry in enumerate(self):
            if isinstance(entry, Allocation):
                if entry.alloc_id != next_alloc:
                    raise TraceModelError(
                        f"entry {i}: allocation id {entry.alloc_id}, expected {next_alloc}"
                    )
                next_alloc += 1
            elif isinstance(entry, MemoryAccess):
                if not 1 <= entry.alloc_id < next_alloc:
                    raise TraceModelError(
                        f"entry {i}: access to unknown allocation {entry.alloc_id}"
                    )

    def balance(self) -> tuple[int, int]:
        """(call count, return count) over the whole trace."""
        tags = self.packed[:, 0] & np.uint64(0xFF)
        return int((tags == TAG_CALL).sum()), int((tags == TAG_RETURN).sum())
