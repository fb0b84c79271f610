"""Problem semantics for multiplierless constant multiplication.

A constant set is realized by a chain of add/subtract operations over
shifted earlier values (the node operation: |(u << l1) +/- (v << l2)| >> r,
with node 0 being the constant 1).  The cost of a solution is the number
of such operations.
"""

from __future__ import annotations

from dataclasses import dataclass


class McmError(Exception):
    """Domain error: bad operands, malformed instance, or invalid graph."""


@dataclass(frozen=True)
class McmInstance:
    """Normalized target set: positive, odd, pairwise distinct constants.

    bit_width is the number of bits of the largest target plus one;
    source_map records (raw, normalized-or-None) pairs for reporting.
    """

    targets: tuple[int, ...]
    bit_width: int
    source_map: tuple[tuple[int, int | None], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.targets


@dataclass(frozen=True)
class AOperationParams:
    left_shift_1: int = 0
    left_shift_2: int = 0
    right_shift: int = 0
    sign: int = 0  # 0 add, 1 subtract

    def __post_init__(self):
        if self.left_shift_1 < 0 or self.left_shift_2 < 0 or self.right_shift < 0:
            raise McmError("negative shift")
        if self.sign not in (0, 1):
            raise McmError("sign must be 0 or 1")


@dataclass(frozen=True)
class GraphNode:
    """value = |(left << l1) +/- (right << l2)| >> r, operands by node index."""

    value: int
    left: int
    right: int
    params: AOperationParams | None = None


@dataclass(frozen=True)
class AdderGraph:
    """Operation list; index 0 is the implicit constant 1, nodes start at 1."""

    nodes: tuple[GraphNode, ...] = ()

    @property
    def cost(self) -> int:
        return len(self.nodes)

    def node_value(self, index: int) -> int:
        return 1 if index == 0 else self.nodes[index - 1].value

    def values(self) -> tuple[int, ...]:
        return tuple(n.value for n in self.nodes)


def normalize_targets(raw) -> McmInstance:
    """Map each value to its positive odd part, drop 0/1/duplicates.

    Powers of two reduce to 1 and cost nothing, so an input of only
    powers of two yields an empty instance with optimal cost 0.
    """
    raw = list(raw)
    if not raw:
        raise McmError("empty input")
    targets: list[int] = []
    seen: set[int] = set()
    source_map: list[tuple[int, int | None]] = []
    for value in raw:
        v = abs(int(value))
        while v and v % 2 == 0:
            v //= 2
        if v <= 1:
            source_map.append((value, None))
            continue
        source_map.append((value, v))
        if v not in seen:
            seen.add(v)
            targets.append(v)
    if not targets:
        return McmInstance((), 1, tuple(source_map))
    width = max(targets).bit_length() + 1
    return McmInstance(tuple(targets), width, tuple(source_map))


def apply_a_operation(u: int, v: int, p: AOperationParams) -> int:
    """Evaluate one operation; the pre-shift value must be divisible by 2^r."""
    if u < 1 or v < 1:
        raise McmError("operands must be >= 1")
    pre = (u << p.left_shift_1) + (-1) ** p.sign * (v << p.left_shift_2)
    pre = abs(pre)
    if pre == 0:
        raise McmError("degenerate zero result")
    if pre % (1 << p.right_shift) != 0:
        raise McmError("invalid r: right shift drops set bits")
    return pre >> p.right_shift


def _find_params(u: int, v: int, value: int, max_shift: int, right_shifts: bool):
    """Search shift/sign assignments realizing value from (u, v)."""
    r_range = range(max_shift + 1) if right_shifts else (0,)
    for sign in (0, 1):
        for l1 in range(max_shift + 1):
            for l2 in range(max_shift + 1):
                pre = abs((u << l1) + (-1) ** sign * (v << l2))
                if pre == 0:
                    continue
                for r in r_range:
                    if pre % (1 << r) == 0 and pre >> r == value:
                        return AOperationParams(l1, l2, r, sign)
    return None


def check_solution(inst: McmInstance, graph: AdderGraph) -> tuple[bool, list[str]]:
    """Full validity check with diagnostics for every failing node."""
    problems: list[str] = []
    max_shift = inst.bit_width - 1
    for k, node in enumerate(graph.nodes, start=1):
        if node.value < 1:
            problems.append(f"node {k}: value {node.value} is not positive")
            continue
        if not (0 <= node.left < k and 0 <= node.right < k):
            problems.append(f"node {k}: operand index out of range")
            continue
        u = graph.node_value(node.left)
        v = graph.node_value(node.right)
        if node.params is not None:
            p = node.params
            if max(p.left_shift_1, p.left_shift_2, p.right_shift) > max_shift:
                problems.append(f"node {k}: shift exceeds {max_shift}")
                continue
            try:
                got = apply_a_operation(u, v, p)
            except McmError as exc:
                problems.append(f"node {k}: {exc}")
                continue
            if got != node.value:
                problems.append(
                    f"node {k}: operation yields {got}, node claims {node.value}"
                )
        else:
            if _find_params(u, v, node.value, max_shift, right_shifts=True) is None:
                problems.append(
                    f"node {k}: {node.value} unreachable from ({u}, {v})"
                )
    covered = {1} | set(graph.values())
    for t in inst.targets:
        if t not in covered:
            problems.append(f"target {t} not covered")
    return not problems, problems


def verify_solution(inst: McmInstance, graph: AdderGraph) -> bool:
    ok, _ = check_solution(inst, graph)
    return ok


def csd_digits(value: int) -> tuple[int, ...]:
    """Canonical signed digits of a positive integer, most significant first.

    Non-adjacent form: no two consecutive nonzero digits, minimal
    nonzero count among signed-digit representations.
    """
    if value < 1:
        raise McmError("csd requires a positive value")
    digits: list[int] = []
    c = value
    while c:
        if c & 1:
            d = 2 - (c & 3)  # +1 if c % 4 == 1 else -1
            digits.append(d)
            c -= d
        else:
            digits.append(0)
        c >>= 1
    return tuple(reversed(digits))


def csd_value(digits) -> int:
    out = 0
    for d in digits:
        out = (out << 1) + d
    return out


@dataclass(frozen=True)
class RecodingBounds:
    csd: int
    binary: int


def recoding_upper_bounds(inst: McmInstance) -> RecodingBounds:
    """Per-target digit-recoding operation counts, summed.

    Each target costs (number of nonzero digits - 1) operations when
    decomposed digit by digit; CSD digits give the tighter bound, plain
    binary is reported alongside.
    """
    csd_total = 0
    binary_total = 0
    for t in inst.targets:
        csd_total += sum(1 for d in csd_digits(t) if d) - 1
        binary_total += bin(t).count("1") - 1
    return RecodingBounds(csd_total, binary_total)


def csd_upper_bound(inst: McmInstance) -> int:
    return recoding_upper_bounds(inst).csd


def recoding_witness(inst: McmInstance) -> AdderGraph:
    """Adder graph realizing every target by its CSD decomposition.

    Digits are folded most significant first, so every partial sum stays
    positive and below 2^bit_width.  Costs exactly csd_upper_bound ops
    (fewer when partial sums repeat across targets).
    """
    nodes: list[GraphNode] = []
    index_of: dict[int, int] = {1: 0}

    def add_node(value, left, right, params):
        if value in index_of:
            return index_of[value]
        nodes.append(GraphNode(value, left, right, params))
        index_of[value] = len(nodes)
        return index_of[value]

    for t in inst.targets:
        digits = csd_digits(t)
        width = len(digits)
        positions = [
            (width - 1 - i, d) for i, d in enumerate(digits) if d
        ]  # (power, sign digit), MSB first
        acc_power, _ = positions[0]
        acc_value = 1 << acc_power
        acc_index = 0
        acc_shift = acc_power  # pending shift on the accumulator while it is node 0
        for power, d in positions[1:]:
            value = acc_value + d * (1 << power)
            params = AOperationParams(
                left_shift_1=acc_shift,
                left_shift_2=power,
                sign=0 if d > 0 else 1,
            )
            acc_index = add_node(value, acc_index, 0, params)
            acc_value = value
            acc_shift = 0
        if acc_value != t:  # single-digit target: power of two, already node 0
            raise McmError(f"recoding witness failed for {t}")
    return AdderGraph(tuple(nodes))
