"""Diagonal parity codec: encode, incremental update, syndrome, diagnosis.

Each m x m block carries 2m check-bits: one parity bit per leading and per
counter wrap-around diagonal. Because a row/column-parallel op writes at
most one cell per diagonal of any block, parity can be maintained
incrementally with the XOR of old and new data. A single flipped bit
(data or check) leaves a syndrome signature that identifies it uniquely.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Bank, GeometryError, cell_from_diags, counter_diag, leading_diag


class CodecError(ValueError):
    """Misuse of the codec API (size mismatch, bad diagnosis argument)."""


class DiagonalConflictError(RuntimeError):
    """Two updates hit one diagonal in a single parity update.

    The execution model guarantees at most one written cell per (bank,
    diagonal) per op, so this indicates a scheduler bug, not a data error.
    """


@dataclass(frozen=True)
class BlockParity:
    """Per-block check-bits: bit d is the XOR of the data-bits on diagonal d."""

    leading: tuple[int, ...]
    counter: tuple[int, ...]

    def __post_init__(self):
        if len(self.leading) != len(self.counter):
            raise CodecError("leading/counter check-bit vectors differ in length")

    @property
    def m(self) -> int:
        return len(self.leading)

    def bits(self, bank: Bank) -> tuple[int, ...]:
        return self.leading if bank is Bank.LEADING else self.counter


@dataclass(frozen=True)
class Syndrome:
    """Computed parity XOR stored parity; all-zero means consistent."""

    leading: tuple[int, ...]
    counter: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.leading)

    def is_zero(self) -> bool:
        return not any(self.leading) and not any(self.counter)


class DiagnosisKind(Enum):
    CLEAN = "clean"
    DATA_ERROR = "data_error"
    CHECK_BIT_ERROR = "check_bit_error"
    UNCORRECTABLE = "uncorrectable"


@dataclass(frozen=True)
class Diagnosis:
    """Decoded syndrome: where the single error sits, if it can be located."""

    kind: DiagnosisKind
    i: int | None = None
    j: int | None = None
    bank: Bank | None = None
    idx: int | None = None

    @classmethod
    def clean(cls) -> "Diagnosis":
        return cls(DiagnosisKind.CLEAN)

    @classmethod
    def data_error(cls, i: int, j: int) -> "Diagnosis":
        return cls(DiagnosisKind.DATA_ERROR, i=i, j=j)

    @classmethod
    def check_bit_error(cls, bank: Bank, idx: int) -> "Diagnosis":
        return cls(DiagnosisKind.CHECK_BIT_ERROR, bank=bank, idx=idx)

    @classmethod
    def uncorrectable(cls) -> "Diagnosis":
        return cls(DiagnosisKind.UNCORRECTABLE)


def _diag_sums(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = block.shape[0]
    idx = np.arange(m)
    # gather[i, d] = block[i, (d - i) mod m] so column d collects leading diagonal d
    lead = block[idx[:, None], (idx[None, :] - idx[:, None]) % m]
    # gather[i, d] = block[i, (i - d) mod m] collects counter diagonal d
    ctr = block[idx[:, None], (idx[:, None] - idx[None, :]) % m]
    return lead.sum(axis=0) & 1, ctr.sum(axis=0) & 1


def encode_block(block: np.ndarray) -> BlockParity:
    """Compute the 2m check-bits of one m x m block."""
    block = np.asarray(block)
    m = block.shape[0]
    if block.shape != (m, m):
        raise CodecError(f"block must be square, got {block.shape}")
    if m % 2 == 0:
        raise GeometryError(f"block size must be odd, got {m}")
    lead, ctr = _diag_sums(block.astype(np.int64, copy=False))
    return BlockParity(tuple(int(b) for b in lead), tuple(int(b) for b in ctr))


def update_parity(parity: BlockParity,
                  cells_old_new: list[tuple[int, int, int, int]]) -> BlockParity:
    """Fold (i, j, old_bit, new_bit) deltas into the stored check-bits.

    Requires at most one updated cell per (bank, diagonal); a violation is a
    scheduler bug and raises :class:`DiagonalConflictError`.
    """
    m = parity.m
    lead = list(parity.leading)
    ctr = list(parity.counter)
    seen_lead: set[int] = set()
    seen_ctr: set[int] = set()
    for i, j, old, new in cells_old_new:
        dl = leading_diag(i, j, m)
        dc = counter_diag(i, j, m)
        if dl in seen_lead or dc in seen_ctr:
            raise DiagonalConflictError(
                f"two updates on one diagonal (cell ({i},{j}), lead {dl}, counter {dc})")
        seen_lead.add(dl)
        seen_ctr.add(dc)
        delta = (old ^ new) & 1
        lead[dl] ^= delta
        ctr[dc] ^= delta
    return BlockParity(tuple(lead), tuple(ctr))


def compute_syndrome(block: np.ndarray, stored: BlockParity) -> Syndrome:
    """XOR of freshly computed and stored parity."""
    computed = encode_block(block)
    if computed.m != stored.m:
        raise CodecError(f"stored parity length {stored.m} != block size {computed.m}")
    return Syndrome(
        tuple(a ^ b for a, b in zip(computed.leading, stored.leading)),
        tuple(a ^ b for a, b in zip(computed.counter, stored.counter)),
    )


def decode_syndrome(s: Syndrome) -> Diagnosis:
    """Classify a syndrome; total over all inputs.

    One set bit in each bank names a unique data cell; one set bit in a
    single bank names a flipped stored check-bit. Everything else is beyond
    the single-error guarantee. Note the one blind spot: a simultaneous
    leading-check and counter-check flip is indistinguishable from a single
    data error and will be miscorrected.
    """
    n_lead = sum(s.leading)
    n_ctr = sum(s.counter)
    if n_lead == 0 and n_ctr == 0:
        return Diagnosis.clean()
    if n_lead == 1 and n_ctr == 1:
        d_lead = s.leading.index(1)
        d_ctr = s.counter.index(1)
        i, j = cell_from_diags(d_lead, d_ctr, s.m)
        return Diagnosis.data_error(i, j)
    if n_lead == 1 and n_ctr == 0:
        return Diagnosis.check_bit_error(Bank.LEADING, s.leading.index(1))
    if n_lead == 0 and n_ctr == 1:
        return Diagnosis.check_bit_error(Bank.COUNTER, s.counter.index(1))
    return Diagnosis.uncorrectable()


def apply_correction(block: np.ndarray, stored: BlockParity,
                     diag: Diagnosis) -> tuple[np.ndarray, BlockParity]:
    """Flip the diagnosed data bit or stored check-bit; returns new copies."""
    if diag.kind is DiagnosisKind.DATA_ERROR:
        fixed = np.array(block, copy=True)
        fixed[diag.i, diag.j] ^= 1
        return fixed, stored
    if diag.kind is DiagnosisKind.CHECK_BIT_ERROR:
        bits = list(stored.bits(diag.bank))
        bits[diag.idx] ^= 1
        if diag.bank is Bank.LEADING:
            return np.array(block, copy=True), BlockParity(tuple(bits), stored.counter)
        return np.array(block, copy=True), BlockParity(stored.leading, tuple(bits))
    raise CodecError(f"nothing to correct for diagnosis kind {diag.kind.value}")
