"""Netlist-to-row compilation and ECC-aware greedy scheduling.

A netlist is first mapped to a single-crossbar-row MAGIC program
(topological order with reference-counted cell reuse), then the ECC
operations are woven in: a check of the block row holding the function
inputs, a direct ECC reset of the output blocks, and the
cancel/perform/add pipeline around every op that writes an output column.
Events are issued greedily in program order at the earliest cycle when all
required units are free.
"""

import heapq
import math
from dataclasses import dataclass
from enum import Enum

from .checkmem import Event, Machine, TimingModel, check_chain_cycles
from .engine import (
    CrossbarState,
    MicroOp,
    OpKind,
    Orientation,
    cycle_count,
    init_op,
    nor_op,
)
from .geometry import Geometry
from .netlist import Netlist, NetlistError
from .parity import DiagnosisKind


class RowCapacityError(ValueError):
    """The netlist does not fit the crossbar row under the reuse policy."""


PROGRAM_ROW = 0  # compiled functions execute in the first crossbar row


@dataclass(frozen=True)
class RowProgram:
    """A netlist lowered to MAGIC ops confined to one crossbar row."""

    netlist: Netlist
    geom: Geometry
    ops: tuple[MicroOp, ...]
    cell_map: dict[str, int]  # value id -> column holding it at end of program
    input_columns: dict[str, int]
    output_columns: dict[str, int]

    @property
    def baseline_cycles(self) -> int:
        return cycle_count(list(self.ops))

    @property
    def input_block_cols(self) -> tuple[int, ...]:
        m = self.geom.m
        return tuple(sorted({col // m for col in self.input_columns.values()}))

    @property
    def output_block_cols(self) -> tuple[int, ...]:
        """Blocks holding gate-produced outputs (aliased inputs excluded)."""
        m = self.geom.m
        cols = {col // m for name, col in self.output_columns.items()
                if name not in self.input_columns}
        return tuple(sorted(cols))


def map_to_row(netlist: Netlist, geom: Geometry) -> RowProgram:
    """Lower a netlist to a single-row program with block-aligned layout.

    Inputs occupy the leftmost blocks and stay pinned; gate-produced outputs
    get dedicated blocks right after them (so ECC-covered cells never share
    a block with scratch data); intermediate columns are recycled once every
    consumer of their value has fired, preferring the lowest free column.
    Ready gates are ordered largest-fanout-first to shorten value lifetimes.
    """
    m, n = geom.m, geom.n
    inputs, outputs, gates = netlist.inputs, netlist.outputs, netlist.gates

    input_columns = {name: idx for idx, name in enumerate(inputs)}
    in_blocks = math.ceil(len(inputs) / m) if inputs else 0
    out_gate_ids = [o for o in outputs if o not in input_columns]
    out_start = in_blocks * m
    output_columns = {}
    for idx, name in enumerate(out_gate_ids):
        output_columns[name] = out_start + idx
    out_blocks = math.ceil(len(out_gate_ids) / m) if out_gate_ids else 0
    scratch_start = out_start + out_blocks * m
    if scratch_start > n or len(inputs) > n:
        raise RowCapacityError(
            f"{len(inputs)} inputs + {len(out_gate_ids)} outputs exceed row width {n}")
    free_cols = list(range(scratch_start, n))
    heapq.heapify(free_cols)

    refcount = {gid: 0 for gid in input_columns}
    for gate in gates:
        refcount[gate.gate_id] = 0
        for op in gate.operands:
            refcount[op] += 1

    consumers: dict[str, list[int]] = {}
    for pos, gate in enumerate(gates):
        for op in gate.operands:
            consumers.setdefault(op, []).append(pos)

    cell_map = dict(input_columns)
    emitted = [False] * len(gates)
    # ready heap keyed largest fanout first, then program order
    ready: list[tuple[int, int]] = []
    deps_left = []
    for pos, gate in enumerate(gates):
        missing = sum(op not in cell_map for op in set(gate.operands))
        deps_left.append(missing)
        if missing == 0:
            heapq.heappush(ready, (-netlist.fanout(gate.gate_id), pos))

    ops: list[MicroOp] = []
    lanes = frozenset({PROGRAM_ROW})
    scheduled = 0
    while ready:
        _, pos = heapq.heappop(ready)
        if emitted[pos]:
            continue
        gate = gates[pos]
        emitted[pos] = True
        scheduled += 1
        if gate.gate_id in output_columns:
            dest = output_columns[gate.gate_id]
        else:
            if not free_cols:
                raise RowCapacityError(
                    f"row width {n} exhausted at gate {gate.gate_id!r}")
            dest = heapq.heappop(free_cols)
        in_cols = tuple(cell_map[op] for op in gate.operands)
        ops.append(init_op(Orientation.ROW, dest, lanes))
        ops.append(nor_op(Orientation.ROW, in_cols, dest, lanes))
        cell_map[gate.gate_id] = dest

        for operand in set(gate.operands):
            refcount[operand] -= gate.operands.count(operand)
            if (refcount[operand] == 0 and operand not in output_columns
                    and operand not in input_columns
                    and operand not in outputs):
                heapq.heappush(free_cols, cell_map[operand])
        for nxt in consumers.get(gate.gate_id, []):
            deps_left[nxt] -= sum(
                op == gate.gate_id for op in set(gates[nxt].operands))
            if deps_left[nxt] == 0 and not emitted[nxt]:
                heapq.heappush(ready, (-netlist.fanout(gates[nxt].gate_id), nxt))

    if scheduled != len(gates):
        raise NetlistError("internal error: not all gates scheduled")

    out_cols = {name: cell_map[name] for name in outputs}
    return RowProgram(netlist, geom, tuple(ops), cell_map, input_columns, out_cols)


# ----------------------------------------------------------------------
# ECC insertion and the schedule object

class ActionKind(Enum):
    CHECK_ROW = "check_row"
    BLOCK_RESET = "block_reset"
    OP = "op"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    op: MicroOp | None = None
    critical: bool = False
    index: int = 0
    orientation: Orientation = Orientation.ROW
    block: tuple[int, int] | None = None


@dataclass
class EccSchedule:
    """Cycle- and unit-annotated program with its ECC machinery woven in."""

    row_program: RowProgram
    timing: TimingModel
    pc_pairs: int
    actions: tuple[Action, ...]
    events: tuple[Event, ...]
    total_cycles: int
    baseline_cycles: int
    stall_cycles: int
    pc_pairs_used: int
    input_check_cycles: int
    critical_ops: int


@dataclass
class ScheduleRun:
    """Result of executing a schedule on a concrete machine."""

    outputs: dict[str, int]
    total_cycles: int
    corrected: int
    uncorrectable: int
    reports: list
    events: list[Event]
    machine: Machine | None = None


def build_actions(rp: RowProgram) -> tuple[Action, ...]:
    """ECC-aware action list for a row program.

    The input-block check runs only when the function actually consumes
    data (a pass-through has nothing to verify and costs nothing). Per-cell
    Init ops on output columns are replaced by whole-block ECC resets;
    every remaining write to an output column is critical.
    """
    actions: list[Action] = []
    out_cols = set(rp.output_columns[name] for name in rp.output_columns
                   if name not in rp.input_columns)
    if rp.ops:
        actions.append(Action(ActionKind.CHECK_ROW, index=PROGRAM_ROW // rp.geom.m,
                              orientation=Orientation.ROW))
        for bc in rp.output_block_cols:
            actions.append(Action(ActionKind.BLOCK_RESET,
                                  block=(PROGRAM_ROW // rp.geom.m, bc)))
    for op in rp.ops:
        writes_output = op.output_line in out_cols
        if writes_output and op.kind is OpKind.INIT:
            continue  # per-cell init subsumed by the block reset
        actions.append(Action(ActionKind.OP, op=op, critical=writes_output))
    return tuple(actions)


def run_actions(machine: Machine, actions: tuple[Action, ...],
                gate_floor_after_check: bool = True) -> ScheduleRun:
    """Issue actions in order against the machine's unit timelines.

    Function ops are held until the input check (plus any corrections it
    performs) has completed, since unverified inputs must not feed gates.
    """
    floor = 0
    corrected = uncorrectable = 0
    reports = []
    for action in actions:
        if action.kind is ActionKind.CHECK_ROW:
            row_reports, done = machine.check_block_row(
                action.index, action.orientation)
            reports.extend(row_reports)
            corrected += sum(r.diagnosis.kind in (DiagnosisKind.DATA_ERROR,
                                                  DiagnosisKind.CHECK_BIT_ERROR)
                             for r in row_reports)
            uncorrectable += sum(r.diagnosis.kind is DiagnosisKind.UNCORRECTABLE
                                 for r in row_reports)
            if gate_floor_after_check:
                floor = max(floor, done)
        elif action.kind is ActionKind.BLOCK_RESET:
            machine.block_ecc_reset(*action.block, earliest=floor)
        elif action.critical:
            machine.critical_op(action.op, earliest=floor)
        else:
            machine.noncritical_op(action.op, earliest=floor)
    outputs = {}
    return ScheduleRun(outputs, machine.horizon, corrected, uncorrectable,
                       reports, list(machine.events))


def insert_ecc(rp: RowProgram, geom: Geometry, tm: TimingModel,
               k_pc_pairs: int) -> EccSchedule:
    """Schedule a row program with its ECC operations on a clean machine."""
    if k_pc_pairs < 1:
        raise ValueError(f"need at least one processing-crossbar pair, got {k_pc_pairs}")
    if geom != rp.geom:
        raise ValueError("schedule geometry differs from the row program's")
    actions = build_actions(rp)
    machine = Machine.blank(geom, timing=tm, pc_pairs=k_pc_pairs)
    run = run_actions(machine, actions)
    n_critical = sum(1 for a in actions if a.kind is ActionKind.OP and a.critical)
    check_cycles = check_chain_cycles(geom.m, tm) if rp.ops else 0
    return EccSchedule(
        row_program=rp,
        timing=tm,
        pc_pairs=k_pc_pairs,
        actions=actions,
        events=tuple(run.events),
        total_cycles=run.total_cycles,
        baseline_cycles=rp.baseline_cycles,
        stall_cycles=machine.stall_cycles,
        pc_pairs_used=len(machine.pcs_used),
        input_check_cycles=check_cycles,
        critical_ops=n_critical,
    )


def execute_schedule(schedule: EccSchedule, assignment: dict[str, int],
                     flips: tuple[tuple[int, int], ...] = (),
                     check_flips: tuple = ()) -> ScheduleRun:
    """Run a schedule on a fresh machine: seed inputs, optionally inject
    faults, replay the actions, and read the outputs back."""
    rp = schedule.row_program
    state = CrossbarState.zeros(rp.geom)
    for name, col in rp.input_columns.items():
        if name not in assignment:
            raise NetlistError(f"missing value for input {name!r}")
        state.cells[PROGRAM_ROW, col] = assignment[name] & 1
    machine = Machine(state, timing=schedule.timing, pc_pairs=schedule.pc_pairs)
    for row, col in flips:
        machine.inject_data_flip(row, col)
    for bank, diag, br, bc in check_flips:
        machine.inject_check_flip(bank, diag, br, bc)
    run = run_actions(machine, schedule.actions)
    run.outputs = {name: int(machine.state.cells[PROGRAM_ROW, col])
                   for name, col in rp.output_columns.items()}
    run.machine = machine
    return run


# ----------------------------------------------------------------------
# reporting

@dataclass(frozen=True)
class ScheduleStats:
    baseline: int
    proposed: int
    overhead_percent: float
    min_pc_pairs: int
    stall_cycles: int
    input_check_cycles: int
    critical_ops: int
    init_cycles: int  # output-preset ops inside the baseline count


def _reschedule(rp: RowProgram, tm: TimingModel, k: int) -> EccSchedule:
    return insert_ecc(rp, rp.geom, tm, k)


def min_pc_pairs(rp: RowProgram, tm: TimingModel, k_max: int = 8) -> int:
    """Smallest pair count with zero stalls, by binary search over k.

    Stalls are non-increasing in k (more pairs never delay an issue), so
    bisection is exact. Falls back to doubling past k_max for pathological
    timing models.
    """
    hi = k_max
    while _reschedule(rp, tm, hi).stall_cycles > 0 and hi < 64:
        hi *= 2
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _reschedule(rp, tm, mid).stall_cycles == 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def report(schedule: EccSchedule) -> ScheduleStats:
    """Latency statistics of one schedule, including the PC-pair sweep."""
    baseline = schedule.baseline_cycles
    proposed = schedule.total_cycles
    overhead = 100.0 * (proposed - baseline) / baseline if baseline else 0.0
    inits = sum(1 for op in schedule.row_program.ops if op.kind is OpKind.INIT)
    return ScheduleStats(
        baseline=baseline,
        proposed=proposed,
        overhead_percent=overhead,
        min_pc_pairs=min_pc_pairs(schedule.row_program, schedule.timing),
        stall_cycles=schedule.stall_cycles,
        input_check_cycles=schedule.input_check_cycles,
        critical_ops=schedule.critical_ops,
        init_cycles=inits,
    )


def geometric_mean_ratio(stats: list[ScheduleStats]) -> float:
    """exp(mean(ln(proposed/baseline))) over circuits with a nonzero baseline."""
    ratios = [s.proposed / s.baseline for s in stats if s.baseline > 0]
    if not ratios:
        return 1.0
    return math.exp(sum(math.log(r) for r in ratios) / len(ratios))
