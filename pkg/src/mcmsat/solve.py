"""Solver backends, model decoding, and the descending optimization loop.

A backend is either the bundled reference solver ("internal") or an
external command template run on an OPB file.  The optimizer encodes
fresh at each level, descending from one below the upper bound until the
first UNSAT proves optimality; a timeout stops early with the best
verified solution so far.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace

from .encoder import (
    ADD_PAIR,
    ADD_SHIFT_POW,
    EXACTLY2,
    POWER_DIFF,
    SUB_POW_SHIFT,
    SUB_SHIFT_POW,
    EncodeResult,
    EncodingConfig,
    encode_mcm,
)
from .model import (
    AdderGraph,
    AOperationParams,
    GraphNode,
    McmError,
    McmInstance,
    csd_upper_bound,
    recoding_witness,
    verify_solution,
)
from .pb import SAT, UNKNOWN, UNSAT, Model, PbFormula, parse_solver_output
from .refsolver import RefSolver

SOLVER_ENV_VAR = "MCMSAT_SOLVER"
INTERNAL = "internal"


class SolverError(McmError):
    """Backend missing, crashed, or produced unusable output."""


class DecodeError(McmError):
    """Model inconsistent with the encoding (solver or encoder bug)."""


@dataclass(frozen=True)
class SolveOutcome:
    status: str  # SAT / UNSAT / UNKNOWN
    model: Model | None  # present iff status == SAT
    elapsed: float
    backend: str


def default_backend() -> str:
    return os.environ.get(SOLVER_ENV_VAR, INTERNAL)


def solve(
    formula: PbFormula,
    backend: str = INTERNAL,
    timeout: float | None = None,
    phases: dict | None = None,
) -> SolveOutcome:
    """Decide one formula.  UNKNOWN only on timeout or budget exhaustion.

    An external backend is a command template; `{opb}` is replaced with
    the path of the problem file (appended when absent).
    """
    start = time.monotonic()
    if backend == INTERNAL:
        solver = RefSolver(formula, phases=phases)
        deadline = None if timeout is None else start + timeout
        status, model = solver.solve(deadline=deadline)
        return SolveOutcome(status, model, time.monotonic() - start, INTERNAL)

    with tempfile.NamedTemporaryFile(
        "w", suffix=".opb", prefix="mcmsat_", delete=False
    ) as handle:
        handle.write(formula.emit_opb())
        path = handle.name
    try:
        argv = shlex.split(backend)
        if any("{opb}" in a for a in argv):
            argv = [a.replace("{opb}", path) for a in argv]
        else:
            argv.append(path)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=timeout
            )
        except FileNotFoundError as exc:
            raise SolverError(f"backend executable missing: {argv[0]}") from exc
        except subprocess.TimeoutExpired:
            return SolveOutcome(UNKNOWN, None, time.monotonic() - start, backend)
        status, model = parse_solver_output(proc.stdout, formula.var_count)
        return SolveOutcome(status, model, time.monotonic() - start, backend)
    finally:
        os.unlink(path)


def solve_portfolio(
    formula: PbFormula,
    backends: list[str],
    timeout: float | None = None,
    phases: dict | None = None,
) -> SolveOutcome:
    """Run several backends concurrently; first decisive answer wins."""
    if len(backends) == 1:
        return solve(formula, backends[0], timeout, phases)
    start = time.monotonic()
    with ThreadPoolExecutor(max_workers=len(backends)) as pool:
        futures = {
            pool.submit(solve, formula, b, timeout, phases): b for b in backends
        }
        pending = set(futures)
        best: SolveOutcome | None = None
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                outcome = fut.result()
                if outcome.status != UNKNOWN:
                    for other in pending:
                        other.cancel()
                    return outcome
                best = outcome
    assert best is not None
    return SolveOutcome(UNKNOWN, None, time.monotonic() - start, best.backend)


# -- decoding ----------------------------------------------------------------


def _shift_pair(u: int, v: int, target: int, max_shift: int, sign: int):
    """Find (l1, l2) with |u<<l1 +/- v<<l2| == target."""
    for l1 in range(max_shift + 1):
        su = u << l1
        for l2 in range(max_shift + 1):
            sv = v << l2
            value = su + sv if sign == 0 else abs(su - sv)
            if value == target:
                return l1, l2
    return None


def _power_split(value: int, sign: int, max_shift: int):
    """value as 2^a + 2^b (sign 0) or 2^a - 2^b (sign 1)."""
    for a in range(max_shift + 1):
        for b in range(max_shift + 1):
            got = (1 << a) + (1 << b) if sign == 0 else (1 << a) - (1 << b)
            if got == value:
                return a, b
    return None


def decode_solution(res: EncodeResult, model: Model) -> AdderGraph:
    """Rebuild the operation list from a satisfying assignment.

    Shift amounts are re-derived arithmetically from the decoded values,
    which tolerates models where several list selectors were true.
    """
    inst = res.inst
    max_shift = inst.bit_width - 1
    nodes: list[GraphNode] = []
    pinned_by_slot = {p.slot: p for p in res.pinned}
    value_index: dict[int, int] = {1: 0}

    total_slots = len(res.op_values) if res.op_values else len(res.pinned)
    for slot in range(1, total_slots + 1):
        pin = pinned_by_slot.get(slot)
        if pin is not None:
            left = value_index.get(pin.left_value)
            right = value_index.get(pin.right_value)
            if left is None or right is None:
                raise DecodeError("decode failure: pinned operand missing")
            nodes.append(GraphNode(pin.value, left, right, pin.params))
            value_index.setdefault(pin.value, slot)
            continue
        vec = res.op_values[slot - 1]
        value = model.value_of(vec)
        pre_vec = res.pre_shift_values[slot - 1]
        pre_value = model.value_of(pre_vec) if pre_vec is not None else value
        if value < 1 or pre_value < 1:
            raise DecodeError(f"decode failure: slot {slot} holds {value}")
        if pre_value % value:
            raise DecodeError("decode failure: inconsistent right shift")
        right_shift = (pre_value // value).bit_length() - 1
        if value << right_shift != pre_value:
            raise DecodeError("decode failure: inconsistent right shift")
        chosen = next(
            (c for c in res.candidates[slot - 1] if model[c.cond] == 1), None
        )
        if chosen is None:
            raise DecodeError(f"decode failure: slot {slot} selected no candidate")
        kind = chosen.kind
        if kind in (EXACTLY2, POWER_DIFF):
            sign = 0 if kind == EXACTLY2 else 1
            split = _power_split(pre_value, sign, max_shift)
            if split is None:
                raise DecodeError(f"decode failure: slot {slot} value {pre_value}")
            left = right = 0
            params = AOperationParams(split[0], split[1], right_shift, sign)
        elif kind in (ADD_SHIFT_POW, SUB_SHIFT_POW, SUB_POW_SHIFT):
            u = 1 if chosen.op1 == 0 else nodes[chosen.op1 - 1].value
            sign = 0 if kind == ADD_SHIFT_POW else 1
            found = None
            for k in range(max_shift + 1):
                for l1 in range(max_shift + 1):
                    su = u << l1
                    value_try = su + (1 << k) if sign == 0 else abs(su - (1 << k))
                    if value_try == pre_value:
                        found = (l1, k)
                        break
                if found:
                    break
            if found is None:
                raise DecodeError(f"decode failure: slot {slot} value {pre_value}")
            left, right = chosen.op1, 0
            params = AOperationParams(found[0], found[1], right_shift, sign)
        else:
            u = nodes[chosen.op1 - 1].value
            v = nodes[chosen.op2 - 1].value
            sign = 0 if kind == ADD_PAIR else 1
            split = _shift_pair(u, v, pre_value, max_shift, sign)
            if split is None:
                raise DecodeError(f"decode failure: slot {slot} value {pre_value}")
            left, right = chosen.op1, chosen.op2
            params = AOperationParams(split[0], split[1], right_shift, sign)
        nodes.append(GraphNode(value, left, right, params))
        value_index.setdefault(value, slot)
    return AdderGraph(tuple(nodes))


def prune_graph(graph: AdderGraph, targets) -> AdderGraph:
    """Drop operations no target depends on, preserving order."""
    wanted = set(targets)
    keep: set[int] = set()
    for idx in range(len(graph.nodes), 0, -1):
        node = graph.nodes[idx - 1]
        if node.value in wanted or idx in keep:
            keep.add(idx)
            keep.add(node.left)
            keep.add(node.right)
            wanted.discard(node.value)
    order = [i for i in range(1, len(graph.nodes) + 1) if i in keep]
    remap = {0: 0}
    nodes = []
    for new_idx, old_idx in enumerate(order, start=1):
        node = graph.nodes[old_idx - 1]
        nodes.append(
            GraphNode(node.value, remap[node.left], remap[node.right], node.params)
        )
        remap[old_idx] = new_idx
    return AdderGraph(tuple(nodes))


def _reorder_roots_first(graph: AdderGraph) -> AdderGraph | None:
    """Topological reorder with all from-scratch operations leading."""
    roots = [i for i, n in enumerate(graph.nodes, 1) if n.left == 0 and n.right == 0]
    rest = [i for i, n in enumerate(graph.nodes, 1) if not (n.left == 0 and n.right == 0)]
    order = roots + rest
    remap = {0: 0}
    for new_idx, old_idx in enumerate(order, 1):
        remap[old_idx] = new_idx
    nodes = [None] * len(order)
    for old_idx in order:
        node = graph.nodes[old_idx - 1]
        if remap[node.left] >= remap[old_idx] or remap[node.right] >= remap[old_idx]:
            return None  # a non-root feeds a root; cannot lead with roots
        nodes[remap[old_idx] - 1] = node
    return AdderGraph(
        tuple(
            GraphNode(n.value, remap[n.left], remap[n.right], n.params)
            for n in nodes
        )
    )


def witness_phase_hints(enc: EncodeResult, graph: AdderGraph) -> dict | None:
    """Translate a known solution into per-variable phase preferences.

    The solver then reaches that solution as its first search leaf and
    remains complete either way; this is a warm start, not a shortcut
    past verification.  Returns None when the graph does not fit the
    encoding (too many operations, right shifts, variant 1, or a value
    outside a slot's candidate set).
    """
    cfg = enc.cfg
    if cfg.variant == 1 or cfg.right_shifts or enc.trivial_verdict is not None:
        return None
    if any(n.params is None or n.params.right_shift for n in graph.nodes):
        return None
    graph = _reorder_roots_first(graph)
    if graph is None:
        return None
    pinned_slots = {p.slot for p in enc.pinned}
    free_slots = [i for i in range(1, len(enc.op_values) + 1) if i not in pinned_slots]
    if len(graph.nodes) > len(free_slots):
        return None
    if pinned_slots:
        return None  # pinned prefixes change operand indexing; skip
    hints = dict(enc.phase_hints)
    n = enc.inst.bit_width

    def hint_vec(vec, value):
        for i, var in enumerate(vec.bits):
            hints[var] = (value >> (n - 1 - i)) & 1

    def hint_onehot(sel_vec, amount):
        for i, var in enumerate(sel_vec.bits):
            hints[var] = 1 if i == amount else 0

    placed = {}  # graph node index -> slot
    for node_idx, node in enumerate(graph.nodes, 1):
        slot = free_slots[node_idx - 1]
        placed[node_idx] = slot
        p = node.params
        powers = enc.slot_powers[slot - 1]
        shifts = enc.slot_shifts[slot - 1]
        if node.left == 0 and node.right == 0:
            a, b = p.left_shift_1, p.left_shift_2
            if p.sign == 0:
                if a == b:
                    return None  # doubled power needs an adder, not a popcount pin
                kind, op1, op2 = EXACTLY2, 0, 0
                if powers.get("e2") is None:
                    return None
                vec = powers["e2"]
                for i, var in enumerate(vec.bits):
                    pos = n - 1 - i
                    hints[var] = 1 if pos in (a, b) else 0
            else:
                kind, op1, op2 = POWER_DIFF, 0, 0
                if powers.get("e1") is None or powers.get("e1b") is None:
                    return None
                hi, lo = max(a, b), min(a, b)
                hint_vec(powers["e1"], 1 << hi)
                hint_vec(powers["e1b"], 1 << lo)
        elif node.left == 0 or node.right == 0:
            if node.left == 0:
                other, pow_amt, shift_amt = node.right, p.left_shift_1, p.left_shift_2
            else:
                other, pow_amt, shift_amt = node.left, p.left_shift_2, p.left_shift_1
            op1 = placed[other]
            shifted = graph.node_value(other) << shift_amt
            power = 1 << pow_amt
            if p.sign == 0:
                kind = ADD_SHIFT_POW
            elif shifted >= power:
                kind = SUB_SHIFT_POW
            else:
                kind = SUB_POW_SHIFT
            op2 = 0
            if powers.get("e1") is None or op1 not in shifts:
                return None
            hint_vec(powers["e1"], power)
            hint_onehot(shifts[op1], shift_amt)
        else:
            lslot, rslot = placed[node.left], placed[node.right]
            lval = graph.node_value(node.left) << p.left_shift_1
            rval = graph.node_value(node.right) << p.left_shift_2
            op1, op2 = min(lslot, rslot), max(lslot, rslot)
            if lslot == op1:
                first_val, first_amt = lval, p.left_shift_1
                second_amt = p.left_shift_2
            else:
                first_val, first_amt = rval, p.left_shift_2
                second_amt = p.left_shift_1
            second_val = (lval + rval) - first_val
            if p.sign == 0:
                kind = ADD_PAIR
            elif first_val >= second_val:
                kind = SUB_PAIR
            else:
                kind = SUB_PAIR_REV
            if op1 not in shifts or (op1, op2) not in shifts:
                return None
            hint_onehot(shifts[op1], first_amt)
            hint_onehot(shifts[(op1, op2)], second_amt)
        chosen = next(
            (
                c
                for c in enc.candidates[slot - 1]
                if c.kind == kind and c.op1 == op1 and c.op2 == op2
            ),
            None,
        )
        if chosen is None:
            return None
        for cand in enc.candidates[slot - 1]:
            hints[cand.cond] = 1 if cand is chosen else 0
        hint_vec(enc.op_values[slot - 1], node.value)

    slot_of_value = {}
    for node_idx, slot in placed.items():
        slot_of_value.setdefault(graph.nodes[node_idx - 1].value, slot)
    for target, members, sels in enc.binding:
        slot = slot_of_value.get(target)
        if slot is None or slot not in members:
            return None
        for member, sel in zip(members, sels):
            hints[sel] = 1 if member == slot else 0
    return hints


# -- optimization loop -------------------------------------------------------


@dataclass(frozen=True)
class OptimizationReport:
    optimal_ops: int
    proven: bool
    graph: AdderGraph
    per_level: tuple[tuple[int, SolveOutcome], ...]
    upper_bound: int
    backend: str
    variant: int
    elapsed: float


def solve_encoding(
    enc: EncodeResult,
    backend="internal",
    timeout: float | None = None,
    hint_graph: AdderGraph | None = None,
) -> SolveOutcome:
    """Solve one encoding, optionally warm-started from a known graph."""
    if enc.trivial_verdict is not None:
        status = SAT if enc.trivial_verdict == "SAT" else UNSAT
        model = Model((0,)) if status == SAT else None
        return SolveOutcome(status, model, 0.0, "preprocess")
    phases = enc.phase_hints
    if hint_graph is not None:
        hinted = witness_phase_hints(enc, hint_graph)
        if hinted is not None:
            phases = hinted
    if isinstance(backend, (list, tuple)):
        return solve_portfolio(enc.formula, list(backend), timeout, phases)
    return solve(enc.formula, backend, timeout, phases)


def optimal_mcm(
    inst: McmInstance,
    upper_bound: int | None = None,
    cfg: EncodingConfig | None = None,
    backend: str | list[str] = INTERNAL,
    per_level_timeout: float | None = None,
) -> OptimizationReport:
    """Descend one level at a time until the first UNSAT proves optimality.

    The upper bound must be realizable; by default it comes from the
    signed-digit recoding which always is.  On a timeout the report is
    unproven and carries the best verified graph found so far.
    """
    start = time.monotonic()
    if cfg is None:
        cfg = EncodingConfig(ops=1)
    backend_name = ",".join(backend) if isinstance(backend, (list, tuple)) else backend
    if inst.is_empty:
        return OptimizationReport(
            0, True, AdderGraph(()), (), 0, backend_name, cfg.variant,
            time.monotonic() - start,
        )
    ub = csd_upper_bound(inst) if upper_bound is None else upper_bound
    if ub <= 0:
        raise McmError("upper bound must be positive for a non-empty instance")

    best_ops = ub
    best_graph: AdderGraph | None = None
    proven = False
    levels: list[tuple[int, SolveOutcome]] = []
    for level in range(ub - 1, -1, -1):
        if level == 0:
            # No operations cannot cover a non-empty target set.
            levels.append((0, SolveOutcome(UNSAT, None, 0.0, "preprocess")))
            proven = True
            break
        enc = encode_mcm(inst, replace(cfg, ops=level))
        hint = best_graph if best_graph is not None and best_graph.cost <= level else None
        outcome = solve_encoding(enc, backend, per_level_timeout, hint_graph=hint)
        levels.append((level, outcome))
        if outcome.status == SAT:
            graph = decode_solution(enc, outcome.model)
            best_graph = prune_graph(graph, inst.targets)
            best_ops = level
            continue
        if outcome.status == UNSAT:
            proven = True
        break
    if best_graph is None:
        best_graph = recoding_witness(inst)
        if best_graph.cost > ub:
            raise McmError(
                "cannot synthesize a witness at the claimed upper bound"
            )
    if not verify_solution(inst, best_graph):
        raise DecodeError("decode failure: optimizer produced an invalid graph")
    return OptimizationReport(
        best_ops,
        proven,
        best_graph,
        tuple(levels),
        ub,
        backend_name,
        cfg.variant,
        time.monotonic() - start,
    )
