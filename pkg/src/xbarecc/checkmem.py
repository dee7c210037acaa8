"""Check Memory (CMEM) architecture model and its timed protocols.

The CMEM extends the data crossbar (MEM) with m check-bit crossbars per
bank, processing crossbars that compute XOR3 off the critical path, a
checking crossbar that compares syndromes to zero, and barrel shifters
that reroute MEM lines into per-block diagonal order.

A critical operation (one that writes ECC-covered data) runs the
cancel/perform/add protocol: copy old bits out, execute in MEM, copy new
bits out, fold old XOR new XOR stored-check inside a processing crossbar,
and write the result back. The MEM is occupied for only the three transfer
/execute cycles; the 8-cycle XOR3 is hidden in the processing crossbar.
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import (
    CrossbarState,
    EngineConfig,
    MicroOp,
    Orientation,
    apply_op_inplace,
    format_op,
    init_op,
    validate_op,
)
from .geometry import (
    Bank,
    CellAddr,
    Geometry,
    GeometryError,
    block_decompose,
    diags_of_cell,
)
from .parity import (
    BlockParity,
    Diagnosis,
    DiagnosisKind,
    DiagonalConflictError,
    compute_syndrome,
    decode_syndrome,
    encode_block,
    update_parity,
)

PC_ROWS = 11  # 3 operand rows (old data, new data, old check) + 8 XOR3 scratch


@dataclass(frozen=True)
class TimingModel:
    """Cycle costs of the CMEM protocol steps. All configurable, all >= 1."""

    xor3_cycles: int = 8
    copy_cycles: int = 1
    writeback_cycles: int = 1
    controller_read_cycles: int = 1
    correction_write_cycles: int = 1
    zero_compare_cycles: int = 1

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def mem_cycles_per_critical(self) -> int:
        """MEM occupancy of one critical op: old copy, execute, new copy."""
        return 2 * self.copy_cycles + 1

    @property
    def pc_cycles_per_critical(self) -> int:
        """Processing-crossbar occupancy: transfers + XOR3 + writeback."""
        return 2 * self.copy_cycles + 1 + self.xor3_cycles + self.writeback_cycles


def xor3_tree_levels(m: int) -> int:
    """Levels of a ternary XOR tree reducing m vectors to one."""
    levels = 0
    width = m
    while width > 1:
        width = math.ceil(width / 3)
        levels += 1
    return levels


def check_chain_cycles(m: int, tm: TimingModel) -> int:
    """Clean-path latency of checking one row/column of blocks.

    m line copies, the XOR3 reduction tree, one XOR3 against the stored
    parity, and the zero compare. Corrections cost extra per dirty block.
    """
    return (m * tm.copy_cycles
            + (xor3_tree_levels(m) + 1) * tm.xor3_cycles
            + tm.zero_compare_cycles)


@dataclass(frozen=True)
class Event:
    """One scheduled occurrence: a unit doing an action for span cycles."""

    cycle: int
    unit: str
    action: str
    operands: str = ""
    span: int = 1

    @property
    def end(self) -> int:
        return self.cycle + self.span

    def to_line(self) -> str:
        ops = self.operands
        if self.span != 1:
            ops = (ops + " " if ops else "") + f"cycles={self.span}"
        return f"{self.cycle}\t{self.unit}\t{self.action}\t{ops}"

    @classmethod
    def from_line(cls, line: str) -> "Event":
        parts = line.rstrip("\n").split("\t", 3)
        if len(parts) < 3:
            raise ValueError(f"bad event record: {line!r}")
        cycle, unit, action = int(parts[0]), parts[1], parts[2]
        operands = parts[3] if len(parts) > 3 else ""
        span = 1
        toks = operands.split()
        if toks and toks[-1].startswith("cycles="):
            span = int(toks[-1].split("=", 1)[1])
            operands = " ".join(toks[:-1])
        return cls(cycle, unit, action, operands, span)


class UnitTimeline:
    """Next-free cycle per unit, plus busy-cycle sets for the check-bit
    crossbars whose reads and writebacks straddle idle gaps."""

    def __init__(self):
        self._next_free: dict[str, int] = {}
        self._busy: dict[str, set[int]] = {}

    def next_free(self, unit: str) -> int:
        return self._next_free.get(unit, 0)

    def reserve(self, unit: str, start: int, span: int = 1) -> None:
        if start < self.next_free(unit):
            raise RuntimeError(
                f"unit {unit} reserved at {start} before its free cycle "
                f"{self.next_free(unit)}")
        self._next_free[unit] = start + span

    def sparse_free(self, unit: str, start: int, span: int = 1) -> bool:
        busy = self._busy.get(unit)
        if not busy:
            return True
        return not any(c in busy for c in range(start, start + span))

    def reserve_sparse(self, unit: str, start: int, span: int = 1) -> None:
        busy = self._busy.setdefault(unit, set())
        for c in range(start, start + span):
            if c in busy:
                raise RuntimeError(f"unit {unit} double-booked at cycle {c}")
            busy.add(c)


@dataclass(frozen=True)
class ShifterMap:
    """Line-to-(diagonal slot, block ordinal) routing for one fixed line.

    Entry r of each bank is where MEM line r lands after the per-block
    barrel shift: the check-bit slot it feeds and which block along the
    line it belongs to.
    """

    leading: tuple[tuple[int, int], ...]
    counter: tuple[tuple[int, int], ...]


def shifter_map(orientation: Orientation, fixed_line: int, geom: Geometry) -> ShifterMap:
    """Routing used when an op writes the given fixed line (column for ROW
    ops, row for COLUMN ops); the moving lines are the op's lanes."""
    if not 0 <= fixed_line < geom.n:
        raise GeometryError(f"line {fixed_line} outside [0,{geom.n})")
    m = geom.m
    f = fixed_line % m
    lead = []
    ctr = []
    for line in range(geom.n):
        local = line % m
        ordinal = line // m
        if orientation is Orientation.ROW:
            # moving index is the row i, fixed is the column j
            lead.append(((local + f) % m, ordinal))
            ctr.append(((local - f) % m, ordinal))
        else:
            # moving index is the column j, fixed is the row i
            lead.append(((f + local) % m, ordinal))
            ctr.append(((f - local) % m, ordinal))
    return ShifterMap(tuple(lead), tuple(ctr))


def touched_check_cells(op: MicroOp, geom: Geometry) -> dict[tuple, tuple[int, int]]:
    """Map (bank, diag, block_row, block_col) -> written local cell.

    Raises :class:`DiagonalConflictError` if one op would touch a check-bit
    twice; row/column-parallel ops never do, so this is an internal guard.
    """
    touched: dict[tuple, tuple[int, int]] = {}
    for row, col in op.written_cells():
        bc = block_decompose(CellAddr(row, col), geom)
        for diag in diags_of_cell(bc.local_i, bc.local_j, geom.m):
            key = (diag.bank, diag.idx, bc.block_row, bc.block_col)
            if key in touched:
                raise DiagonalConflictError(
                    f"op touches check-bit {key} twice")
            touched[key] = (bc.local_i, bc.local_j)
    return touched


class CheckMem:
    """Check-bit storage: m crossbars of (n/m) x (n/m) cells per bank.

    Cell (a, b) of crossbar d in a bank holds the check-bit for diagonal d
    of the block a block-columns from the left and b block-rows from the
    top, so plane indexing is [diag, block_col, block_row].
    """

    def __init__(self, geom: Geometry, planes: dict[Bank, np.ndarray]):
        nb = geom.blocks_per_side
        for bank in Bank:
            if planes[bank].shape != (geom.m, nb, nb):
                raise GeometryError(
                    f"{bank.value} planes shaped {planes[bank].shape}, "
                    f"expected {(geom.m, nb, nb)}")
        self.geom = geom
        self.planes = {bank: planes[bank].astype(np.uint8, copy=False) for bank in Bank}

    @classmethod
    def from_state(cls, state: CrossbarState) -> "CheckMem":
        """Encode every block of the given memory contents."""
        geom = state.geom
        m, nb = geom.m, geom.blocks_per_side
        idx = np.arange(m)
        blocks = state.cells.reshape(nb, m, nb, m).transpose(0, 2, 1, 3).astype(np.int64)
        lead = blocks[..., idx[:, None], (idx[None, :] - idx[:, None]) % m].sum(axis=2) & 1
        ctr = blocks[..., idx[:, None], (idx[:, None] - idx[None, :]) % m].sum(axis=2) & 1
        # lead[br, bc, d] -> plane[d, bc, br]
        return cls(geom, {
            Bank.LEADING: lead.transpose(2, 1, 0).astype(np.uint8),
            Bank.COUNTER: ctr.transpose(2, 1, 0).astype(np.uint8),
        })

    @property
    def total_bits(self) -> int:
        nb = self.geom.blocks_per_side
        return 2 * self.geom.m * nb * nb

    def parity(self, block_row: int, block_col: int) -> BlockParity:
        return BlockParity(
            tuple(int(b) for b in self.planes[Bank.LEADING][:, block_col, block_row]),
            tuple(int(b) for b in self.planes[Bank.COUNTER][:, block_col, block_row]),
        )

    def set_parity(self, block_row: int, block_col: int, parity: BlockParity) -> None:
        self.planes[Bank.LEADING][:, block_col, block_row] = parity.leading
        self.planes[Bank.COUNTER][:, block_col, block_row] = parity.counter

    def flip_bit(self, bank: Bank, diag: int, block_row: int, block_col: int) -> None:
        self.planes[bank][diag, block_col, block_row] ^= 1

    def copy(self) -> "CheckMem":
        return CheckMem(self.geom, {bank: self.planes[bank].copy() for bank in Bank})

    def __eq__(self, other) -> bool:
        return (isinstance(other, CheckMem)
                and self.geom == other.geom
                and all(np.array_equal(self.planes[b], other.planes[b]) for b in Bank))


@dataclass
class ProcessingCrossbar:
    """11 x n scratch crossbar computing XOR3 off the critical path."""

    rows: np.ndarray
    busy_until: int = 0


@dataclass
class PcPair:
    """One processing crossbar per bank; a critical op occupies a whole pair."""

    index: int
    leading: ProcessingCrossbar
    counter: ProcessingCrossbar
    busy_until: int = 0

    @classmethod
    def create(cls, index: int, n: int) -> "PcPair":
        return cls(index,
                   ProcessingCrossbar(np.zeros((PC_ROWS, n), dtype=np.uint8)),
                   ProcessingCrossbar(np.zeros((PC_ROWS, n), dtype=np.uint8)))

    @property
    def unit(self) -> str:
        return f"PC{self.index}"


@dataclass
class CheckingCrossbar:
    """2 x n row pair holding block syndromes for the zero compare."""

    cells: np.ndarray
    busy_until: int = 0

    @classmethod
    def create(cls, n: int) -> "CheckingCrossbar":
        return cls(np.zeros((2, n), dtype=np.uint8))


@dataclass(frozen=True)
class BlockReport:
    """Diagnosis of one block from one check pass."""

    block_row: int
    block_col: int
    diagnosis: Diagnosis


@dataclass(frozen=True)
class CheckSummary:
    """Aggregated result of a full-memory check."""

    clean: int
    corrected: int
    uncorrectable: int
    reports: tuple[BlockReport, ...]


@dataclass(frozen=True)
class CriticalOpResult:
    issue_cycle: int
    pc_index: int
    stall_cycles: int


def _cbx_unit(bank: Bank, diag: int) -> str:
    return f"CBX:{bank.value}:{diag}"


class Machine:
    """One MEM + CMEM instance with its unit timelines and event log.

    Functional state and cycle accounting advance together; the timed
    pipeline and the plain codec agree on final states by construction,
    which the tests cross-check.
    """

    def __init__(self, state: CrossbarState, timing: TimingModel | None = None,
                 pc_pairs: int = 3, engine_cfg: EngineConfig | None = None,
                 pc_forwarding: bool = False):
        if pc_pairs < 1:
            raise ValueError(f"need at least one processing-crossbar pair, got {pc_pairs}")
        self.geom = state.geom
        self.state = state.copy()
        self.checkmem = CheckMem.from_state(state)
        self.timing = timing or TimingModel()
        self.engine_cfg = engine_cfg or EngineConfig()
        self.pc_forwarding = pc_forwarding
        self.pcs = [PcPair.create(i, self.geom.n) for i in range(pc_pairs)]
        self.checker = CheckingCrossbar.create(self.geom.n)
        self.timeline = UnitTimeline()
        self.events: list[Event] = []
        self.stall_cycles = 0
        self.pcs_used: set[int] = set()
        # first cycle at which each in-flight check-bit cell is readable again
        self._cell_ready: dict[tuple, int] = {}

    @classmethod
    def blank(cls, geom: Geometry, **kwargs) -> "Machine":
        return cls(CrossbarState.zeros(geom), **kwargs)

    @property
    def horizon(self) -> int:
        """One past the last busy cycle (total cycles so far)."""
        return max((ev.end for ev in self.events), default=0)

    def log(self, cycle: int, unit: str, action: str, operands: str = "",
            span: int = 1) -> None:
        self.events.append(Event(cycle, unit, action, operands, span))

    def inject_data_flip(self, row: int, col: int) -> None:
        """Soft error: flip one MEM cell without touching the check-bits."""
        self.geom.check_cell(row, col)
        self.state.cells[row, col] ^= 1

    def inject_check_flip(self, bank: Bank, diag: int, block_row: int,
                          block_col: int) -> None:
        self.checkmem.flip_bit(bank, diag, block_row, block_col)

    def consistent(self) -> bool:
        """True iff the stored check-bits equal a re-encode of every block."""
        return self.checkmem == CheckMem.from_state(self.state)

    def block_consistent(self, block_row: int, block_col: int) -> bool:
        return (encode_block(self.state.block(block_row, block_col))
                == self.checkmem.parity(block_row, block_col))

    # ------------------------------------------------------------------
    # operations

    def noncritical_op(self, op: MicroOp, earliest: int = 0) -> int:
        """Plain MAGIC op: one MEM cycle, no ECC involvement."""
        validate_op(self.state, op, self.engine_cfg)
        t = max(earliest, self.timeline.next_free("MEM"))
        self.timeline.reserve("MEM", t, 1)
        apply_op_inplace(self.state.cells, op, self.engine_cfg)
        self.log(t, "MEM", "op", format_op(op) + " critical=0")
        return t

    def critical_op(self, op: MicroOp, earliest: int = 0) -> CriticalOpResult:
        """Run the cancel/perform/add protocol around one MAGIC op."""
        validate_op(self.state, op, self.engine_cfg)
        tm = self.timing
        c, x, wb = tm.copy_cycles, tm.xor3_cycles, tm.writeback_cycles
        touched = touched_check_cells(op, self.geom)

        mem_ready = max(earliest, self.timeline.next_free("MEM"))
        lower = mem_ready
        if not self.pc_forwarding:
            for key in touched:
                ready = self._cell_ready.get(key, 0)
                lower = max(lower, ready - c)  # read happens at t + c

        # one parallel line access per crossbar, even when several blocks
        # along the written line share a diagonal index
        cbx_units = sorted({_cbx_unit(bank, diag) for bank, diag, _, _ in touched})
        t = lower
        pair = None
        while True:
            free = [p for p in self.pcs if p.busy_until <= t]
            if not free:
                t = min(p.busy_until for p in self.pcs)
                continue
            read_at, write_at = t + c, t + 2 * c + 1 + x
            if any(not (self.timeline.sparse_free(unit, read_at, c)
                        and self.timeline.sparse_free(unit, write_at, wb))
                   for unit in cbx_units):
                t += 1
                continue
            pair = free[0]
            break

        stall = t - mem_ready
        if stall > 0:
            self.log(mem_ready, "SCHED", "stall",
                     f"op_out={op.output_line} wait={stall}", span=stall)
            self.stall_cycles += stall

        # reservations
        self.timeline.reserve("MEM", t, tm.mem_cycles_per_critical)
        pair.busy_until = t + tm.pc_cycles_per_critical
        self.pcs_used.add(pair.index)
        read_at, write_at = t + c, t + 2 * c + 1 + x
        for unit in cbx_units:
            self.timeline.reserve_sparse(unit, read_at, c)
            self.timeline.reserve_sparse(unit, write_at, wb)
        ready_at = write_at + wb
        for key in touched:
            self._cell_ready[key] = ready_at

        # functional effect: capture old bits, execute, fold deltas per block
        cells = op.written_cells()
        old_bits = {cell: int(self.state.cells[cell]) for cell in cells}
        fixed_line = op.output_line
        smap = shifter_map(op.orientation, fixed_line, self.geom)
        nb = self.geom.blocks_per_side
        if op.orientation is Orientation.ROW:
            line_old = self.state.cells[:, fixed_line].copy()
        else:
            line_old = self.state.cells[fixed_line, :].copy()
        stored_bits = {key: int(self.checkmem.planes[key[0]][key[1], key[3], key[2]])
                       for key in touched}
        apply_op_inplace(self.state.cells, op, self.engine_cfg)
        per_block: dict[tuple[int, int], list[tuple[int, int, int, int]]] = {}
        for row, col in cells:
            new = int(self.state.cells[row, col])
            bc = block_decompose(CellAddr(row, col), self.geom)
            per_block.setdefault((bc.block_row, bc.block_col), []).append(
                (bc.local_i, bc.local_j, old_bits[(row, col)], new))
        for (br, bcol), deltas in per_block.items():
            self.checkmem.set_parity(
                br, bcol, update_parity(self.checkmem.parity(br, bcol), deltas))

        # operand-row fidelity: old/new data arrive through the shifters in
        # (diagonal slot, block ordinal) order; stored check-bits join them
        if op.orientation is Orientation.ROW:
            line_new = self.state.cells[:, fixed_line]
        else:
            line_new = self.state.cells[fixed_line, :]
        for xbar, bank, routing in ((pair.leading, Bank.LEADING, smap.leading),
                                    (pair.counter, Bank.COUNTER, smap.counter)):
            pos = np.fromiter((slot * nb + ordinal for slot, ordinal in routing),
                              dtype=int, count=self.geom.n)
            xbar.rows[:3, :] = 0
            xbar.rows[0, pos] = line_old
            xbar.rows[2, pos] = line_new
            for (kbank, diag, kbr, kbc), bit in stored_bits.items():
                if kbank is bank:
                    ordinal = kbr if op.orientation is Orientation.ROW else kbc
                    xbar.rows[1, diag * nb + ordinal] = bit

        diags = ";".join(
            f"{bank.value[0].upper()}{diag}@{br},{bcol}"
            for (bank, diag, br, bcol) in sorted(
                touched, key=lambda k: (k[0].value, k[1], k[2], k[3])))
        self.log(t, "MEM", "copy_old", f"line={fixed_line} pc={pair.index}", span=c)
        self.log(t + c, "MEM", "op", format_op(op) + " critical=1")
        self.log(t + c, pair.unit, "load_check", f"cells={diags}", span=c)
        self.log(t + c + 1, "MEM", "copy_new", f"line={fixed_line} pc={pair.index}", span=c)
        self.log(t + 2 * c + 1, pair.unit, "xor3", f"line={fixed_line}", span=x)
        self.log(write_at, pair.unit, "writeback", f"cells={diags}", span=wb)
        return CriticalOpResult(t, pair.index, stall)

    def block_ecc_reset(self, block_row: int, block_col: int,
                        earliest: int = 0) -> int:
        """Initialize a whole block to 1 and write its check-bits directly.

        Resetting a full block sidesteps the XOR3 pipeline: the parity of an
        all-ones odd-sized block is all-ones in both banks, so the
        controller writes it in a single pass.
        """
        m = self.geom.m
        t0 = max(earliest, self.timeline.next_free("MEM"))
        base_row, base_col = block_row * m, block_col * m
        lanes = frozenset(range(base_row, base_row + m))
        self.log(t0, "SCHED", "block_reset", f"block={block_row},{block_col}")
        t = t0
        for lc in range(m):
            op = init_op(Orientation.ROW, base_col + lc, lanes)
            self.timeline.reserve("MEM", t, 1)
            apply_op_inplace(self.state.cells, op, self.engine_cfg)
            self.log(t, "MEM", "op", format_op(op) + " critical=0 reset=1")
            t += 1
        ones = BlockParity((1,) * m, (1,) * m)
        self.checkmem.set_parity(block_row, block_col, ones)
        wb = self.timing.writeback_cycles
        t = max(t, self.timeline.next_free("CTRL"))
        while not all(self.timeline.sparse_free(_cbx_unit(bank, diag), t, wb)
                      for bank in Bank for diag in range(m)):
            t += 1
        for bank in Bank:
            for diag in range(m):
                self.timeline.reserve_sparse(_cbx_unit(bank, diag), t, wb)
                self._cell_ready[(bank, diag, block_row, block_col)] = t + wb
        self.timeline.reserve("CTRL", t, wb)
        self.log(t, "CTRL", "ecc_write", f"block={block_row},{block_col}", span=wb)
        return t + wb

    def check_block_row(self, index: int, orientation: Orientation = Orientation.ROW,
                        earliest: int = 0) -> tuple[list[BlockReport], int]:
        """Check one row (or column) of blocks; corrects what it can.

        Returns the per-block reports and the cycle after the check (and any
        corrections) completed. The MEM is released after the m copy cycles.
        """
        geom, tm = self.geom, self.timing
        m, nb = geom.m, geom.blocks_per_side
        if not 0 <= index < nb:
            raise GeometryError(f"block row index {index} outside [0,{nb})")
        c, x, zc = tm.copy_cycles, tm.xor3_cycles, tm.zero_compare_cycles
        levels = xor3_tree_levels(m)

        mem_ready = max(earliest, self.timeline.next_free("MEM"))
        t = mem_ready
        pair = None
        while True:
            free = [p for p in self.pcs if p.busy_until <= t]
            if not free:
                t = min(p.busy_until for p in self.pcs)
                continue
            syn_at = t + m * c + levels * x
            if self.timeline.next_free("CHECK") > syn_at + x:
                t += 1
                continue
            if any(not self.timeline.sparse_free(_cbx_unit(bank, d), syn_at, c)
                   for bank in Bank for d in range(m)):
                t += 1
                continue
            pair = free[0]
            break
        if t > mem_ready:
            self.stall_cycles += t - mem_ready
            self.log(mem_ready, "SCHED", "stall",
                     f"check={index} wait={t - mem_ready}", span=t - mem_ready)

        self.timeline.reserve("MEM", t, m * c)
        syn_at = t + m * c + levels * x
        zero_at = syn_at + x
        pair.busy_until = zero_at
        self.pcs_used.add(pair.index)
        for bank in Bank:
            for d in range(m):
                self.timeline.reserve_sparse(_cbx_unit(bank, d), syn_at, c)
        self.timeline.reserve("CHECK", zero_at, zc)
        self.checker.busy_until = zero_at + zc

        self.log(t, "SCHED", "check_row",
                 f"index={index} orient={orientation.value}")
        for k in range(m):
            line = index * m + k
            self.log(t + k * c, "MEM", "copy_row", f"line={line} pc={pair.index}", span=c)
        if levels:
            self.log(t + m * c, pair.unit, "xor3_tree",
                     f"vectors={m} levels={levels}", span=levels * x)
        self.log(syn_at, pair.unit, "syndrome_xor3", "banks=leading,counter", span=x)
        self.log(zero_at, "CHECK", "zero_compare", f"blocks={nb}", span=zc)

        # functional: per-block syndrome, decode, correct
        reports: list[BlockReport] = []
        done = zero_at + zc
        for k in range(nb):
            br, bc = (index, k) if orientation is Orientation.ROW else (k, index)
            block = self.state.block(br, bc)
            stored = self.checkmem.parity(br, bc)
            diag = decode_syndrome(compute_syndrome(block, stored))
            reports.append(BlockReport(br, bc, diag))
            if diag.kind is DiagnosisKind.CLEAN:
                continue
            read_at = max(done, self.timeline.next_free("CTRL"))
            self.timeline.reserve("CTRL", read_at, tm.controller_read_cycles)
            self.log(read_at, "CTRL", "read_syndrome",
                     f"block={br},{bc} result={diag.kind.value}",
                     span=tm.controller_read_cycles)
            done = read_at + tm.controller_read_cycles
            if diag.kind is DiagnosisKind.UNCORRECTABLE:
                continue
            if diag.kind is DiagnosisKind.DATA_ERROR:
                row = br * geom.m + diag.i
                col = bc * geom.m + diag.j
                self.state.cells[row, col] ^= 1
                write_at = max(done, self.timeline.next_free("MEM"))
                self.timeline.reserve("MEM", write_at, tm.correction_write_cycles)
                self.log(write_at, "MEM", "correct_data", f"cell={row},{col}",
                         span=tm.correction_write_cycles)
            else:
                self.checkmem.flip_bit(diag.bank, diag.idx, br, bc)
                write_at = done
                unit = _cbx_unit(diag.bank, diag.idx)
                while not self.timeline.sparse_free(unit, write_at,
                                                    tm.correction_write_cycles):
                    write_at += 1
                self.timeline.reserve_sparse(unit, write_at, tm.correction_write_cycles)
                self.log(write_at, unit, "correct_check",
                         f"block={br},{bc} diag={diag.idx}",
                         span=tm.correction_write_cycles)
            done = write_at + tm.correction_write_cycles
        return reports, done

    def full_memory_check(self, orientation: Orientation = Orientation.ROW,
                          earliest: int = 0) -> CheckSummary:
        """Sweep every row of blocks; chains pipeline through the PC pairs."""
        reports: list[BlockReport] = []
        for index in range(self.geom.blocks_per_side):
            row_reports, _ = self.check_block_row(index, orientation, earliest)
            reports.extend(row_reports)
        clean = sum(r.diagnosis.kind is DiagnosisKind.CLEAN for r in reports)
        uncorrectable = sum(
            r.diagnosis.kind is DiagnosisKind.UNCORRECTABLE for r in reports)
        corrected = len(reports) - clean - uncorrectable
        return CheckSummary(clean, corrected, uncorrectable, tuple(reports))


# ----------------------------------------------------------------------
# device counts

@dataclass(frozen=True)
class DeviceCountRow:
    unit: str
    memristors: int
    transistors: int
    expression: str


@dataclass(frozen=True)
class DeviceCounts:
    rows: tuple[DeviceCountRow, ...]

    @property
    def total_memristors(self) -> int:
        return sum(r.memristors for r in self.rows)

    @property
    def total_transistors(self) -> int:
        return sum(r.transistors for r in self.rows)


def device_counts(n: int, m: int, k: int) -> DeviceCounts:
    """Memristor/transistor counts of every unit for an n x n crossbar with
    m x m blocks and k processing-crossbar pairs."""
    Geometry(n, m)  # validates m | n, m odd
    if k < 1:
        raise ValueError(f"need at least one processing-crossbar pair, got {k}")
    nb = n // m
    rows = (
        DeviceCountRow("Data (MEM)", n * n, 0, "n x n"),
        DeviceCountRow("Check-Bits", 2 * m * nb * nb, 0, "2 x m x (n/m)^2"),
        DeviceCountRow("Processing XBs", 2 * PC_ROWS * k * n, 0, "2 x 11 x k x n"),
        DeviceCountRow("Checking XB", 2 * n, 0, "2 x n"),
        DeviceCountRow("Shifters", 0, 4 * n * m, "4 x n x m"),
        DeviceCountRow("Connection Unit", 0, 2 * n * (k + 4), "2 x n x (k+4)"),
    )
    return DeviceCounts(rows)
