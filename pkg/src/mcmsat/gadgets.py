"""Constraint gadgets over bit vectors: XORs, ripple adders/subtractors
(plain, conditional, and conditional with a shared carry/borrow chain),
constant and variable barrel shifts, list selectors, and popcount pins.

All vectors are big-endian (index 0 is the MSB).  Carry/borrow chains
have length N-1; chain[i] feeds result bit i and is defined from the
operands at position i+1.  Emission order within each gadget is fixed so
formulas are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pb import EQ, GE, BitVec, PbError, PbFormula


@dataclass(frozen=True)
class CarryChain:
    bits: tuple[int, ...]  # length N-1; empty for N == 1

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]


def encode_xor2(f: PbFormula, a: int, b: int, c: int) -> None:
    """a <-> (b xor c)."""
    f.add(((-1, a), (1, b), (1, c)), GE, 0)
    f.add(((-1, a), (-1, b), (-1, c)), GE, -2)
    f.add(((1, a), (1, b), (-1, c)), GE, 0)
    f.add(((1, a), (-1, b), (1, c)), GE, 0)


def encode_cond_xor2(f: PbFormula, a: int, b: int, c: int, cond: int) -> None:
    """cond -> (a <-> (b xor c))."""
    f.add(((-1, cond), (-1, a), (1, b), (1, c)), GE, -1)
    f.add(((-1, cond), (-1, a), (-1, b), (-1, c)), GE, -3)
    f.add(((-1, cond), (1, a), (1, b), (-1, c)), GE, -1)
    f.add(((-1, cond), (1, a), (-1, b), (1, c)), GE, -1)


def encode_xor3(f: PbFormula, a: int, b: int, c: int, d: int) -> None:
    """a <-> (b xor c xor d)."""
    f.add(((-1, a), (1, b), (1, c), (1, d)), GE, 0)
    f.add(((-1, a), (1, b), (-1, c), (-1, d)), GE, -2)
    f.add(((-1, a), (-1, b), (1, c), (-1, d)), GE, -2)
    f.add(((-1, a), (-1, b), (-1, c), (1, d)), GE, -2)
    f.add(((1, a), (-1, b), (-1, c), (-1, d)), GE, -2)
    f.add(((1, a), (-1, b), (1, c), (1, d)), GE, 0)
    f.add(((1, a), (1, b), (-1, c), (1, d)), GE, 0)
    f.add(((1, a), (1, b), (1, c), (-1, d)), GE, 0)


def encode_cond_xor3(f: PbFormula, a: int, b: int, c: int, d: int, cond: int) -> None:
    """cond -> (a <-> (b xor c xor d))."""
    f.add(((-1, cond), (-1, a), (1, b), (1, c), (1, d)), GE, -1)
    f.add(((-1, cond), (-1, a), (1, b), (-1, c), (-1, d)), GE, -3)
    f.add(((-1, cond), (-1, a), (-1, b), (1, c), (-1, d)), GE, -3)
    f.add(((-1, cond), (-1, a), (-1, b), (-1, c), (1, d)), GE, -3)
    f.add(((-1, cond), (1, a), (-1, b), (-1, c), (-1, d)), GE, -3)
    f.add(((-1, cond), (1, a), (-1, b), (1, c), (1, d)), GE, -1)
    f.add(((-1, cond), (1, a), (1, b), (-1, c), (1, d)), GE, -1)
    f.add(((-1, cond), (1, a), (1, b), (1, c), (-1, d)), GE, -1)


def encode_cond_copy(f: PbFormula, cond: int, b: int, c: int) -> None:
    """cond -> (b <-> c)."""
    f.add(((-1, cond), (-1, b), (1, c)), GE, -1)
    f.add(((-1, cond), (1, b), (-1, c)), GE, -1)


def _check_widths(*vecs: BitVec) -> int:
    width = len(vecs[0])
    for v in vecs[1:]:
        if len(v) != width:
            raise PbError("bit vector width mismatch")
    return width


def _chain_for(f: PbFormula, width: int, shared: CarryChain | None) -> CarryChain:
    if shared is not None:
        if len(shared) != width - 1:
            raise PbError("shared chain length mismatch")
        return shared
    return CarryChain(tuple(f.new_var() for _ in range(width - 1)))


def encode_adder(
    f: PbFormula,
    out: BitVec,
    b: BitVec,
    c: BitVec,
    cond: int | None = None,
    shared_carries: CarryChain | None = None,
) -> CarryChain:
    """out = b + c over N bits, overflow forbidden.

    Unconditional when cond is None.  With cond, the sum is only
    enforced when cond is true; passing shared_carries additionally
    reuses an external carry chain (sound only while at most one of the
    gadgets sharing it is enabled).
    """
    if shared_carries is not None and cond is None:
        raise PbError("shared carries require a condition")
    n = _check_widths(out, b, c)
    d = _chain_for(f, n, shared_carries)
    shared = shared_carries is not None
    # Carry definitions: d[i-1] is the carry out of position i+1 (1-based).
    if n >= 2:
        if not shared:
            for i in range(n - 2):
                f.add(((-2, d[i]), (1, b[i + 1]), (1, c[i + 1]), (1, d[i + 1])), GE, 0)
            for i in range(n - 2):
                f.add(((2, d[i]), (-1, b[i + 1]), (-1, c[i + 1]), (-1, d[i + 1])), GE, -1)
            f.add(((-2, d[n - 2]), (1, b[n - 1]), (1, c[n - 1])), GE, 0)
            f.add(((1, d[n - 2]), (-1, b[n - 1]), (-1, c[n - 1])), GE, -1)
        else:
            for i in range(n - 2):
                f.add(((-2, cond), (-2, d[i]), (1, b[i + 1]), (1, c[i + 1]), (1, d[i + 1])), GE, -2)
            for i in range(n - 2):
                f.add(((-2, cond), (2, d[i]), (-1, b[i + 1]), (-1, c[i + 1]), (-1, d[i + 1])), GE, -3)
            f.add(((-2, cond), (-2, d[n - 2]), (1, b[n - 1]), (1, c[n - 1])), GE, -2)
            f.add(((-1, cond), (1, d[n - 2]), (-1, b[n - 1]), (-1, c[n - 1])), GE, -2)
    # Disallow overflow out of the MSB.
    if cond is None:
        terms = ((-1, b[0]), (-1, c[0]))
        if n >= 2:
            terms += ((-1, d[0]),)
        f.add(terms, GE, -1)
    else:
        terms = ((-1, cond), (-1, b[0]), (-1, c[0]))
        if n >= 2:
            terms += ((-1, d[0]),)
        f.add(terms, GE, -2)
    # Sum bits.
    if cond is None:
        for i in range(n - 1):
            encode_xor3(f, out[i], b[i], c[i], d[i])
        encode_xor2(f, out[n - 1], b[n - 1], c[n - 1])
    else:
        for i in range(n - 1):
            encode_cond_xor3(f, out[i], b[i], c[i], d[i], cond)
        encode_cond_xor2(f, out[n - 1], b[n - 1], c[n - 1], cond)
    return d


def encode_subtractor(
    f: PbFormula,
    out: BitVec,
    b: BitVec,
    c: BitVec,
    cond: int | None = None,
    shared_borrows: CarryChain | None = None,
) -> CarryChain:
    """out = b - c over N bits; underflow (b < c) forbidden."""
    if shared_borrows is not None and cond is None:
        raise PbError("shared borrows require a condition")
    n = _check_widths(out, b, c)
    d = _chain_for(f, n, shared_borrows)
    shared = shared_borrows is not None
    # Borrow definitions: d[i-1] is the borrow out of position i+1.
    if n >= 2:
        if not shared:
            for i in range(n - 2):
                f.add(((2, d[i]), (1, b[i + 1]), (-1, c[i + 1]), (-1, d[i + 1])), GE, 0)
            for i in range(n - 2):
                f.add(((-2, d[i]), (-1, b[i + 1]), (1, c[i + 1]), (1, d[i + 1])), GE, -1)
            f.add(((-2, d[n - 2]), (-1, b[n - 1]), (1, c[n - 1])), GE, -1)
            f.add(((1, d[n - 2]), (1, b[n - 1]), (-1, c[n - 1])), GE, 0)
        else:
            for i in range(n - 2):
                f.add(((-2, cond), (2, d[i]), (1, b[i + 1]), (-1, c[i + 1]), (-1, d[i + 1])), GE, -2)
            for i in range(n - 2):
                f.add(((-2, cond), (-2, d[i]), (-1, b[i + 1]), (1, c[i + 1]), (1, d[i + 1])), GE, -3)
            f.add(((-2, cond), (-2, d[n - 2]), (-1, b[n - 1]), (1, c[n - 1])), GE, -3)
            f.add(((-1, cond), (1, d[n - 2]), (1, b[n - 1]), (-1, c[n - 1])), GE, -1)
    # Disallow underflow at the MSB.
    if cond is None:
        f.add(((1, b[0]), (-1, c[0])), GE, 0)
        if n >= 2:
            f.add(((1, b[0]), (-1, d[0])), GE, 0)
            f.add(((-1, c[0]), (-1, d[0])), GE, -1)
    else:
        f.add(((-1, cond), (1, b[0]), (-1, c[0])), GE, -1)
        if n >= 2:
            f.add(((-1, cond), (1, b[0]), (-1, d[0])), GE, -1)
            f.add(((-1, cond), (-1, c[0]), (-1, d[0])), GE, -2)
    # Difference bits.
    if cond is None:
        for i in range(n - 1):
            encode_xor3(f, out[i], b[i], c[i], d[i])
        encode_xor2(f, out[n - 1], b[n - 1], c[n - 1])
    else:
        for i in range(n - 1):
            encode_cond_xor3(f, out[i], b[i], c[i], d[i], cond)
        encode_cond_xor2(f, out[n - 1], b[n - 1], c[n - 1], cond)
    return d


def encode_cond_shift(
    f: PbFormula,
    cond: int,
    out: BitVec,
    src: BitVec,
    amount: int,
    direction: str = "left",
) -> None:
    """cond -> (out = src << amount), or >> for direction "right".

    Bits shifted past either end must be zero, so the shift is always
    value-exact when enabled.
    """
    n = _check_widths(out, src)
    if not 0 <= amount <= n - 1:
        raise PbError("shift amount out of range")
    if direction == "left":
        # Low `amount` bits of out are zero.
        for i in range(n - amount, n):
            f.add(((-1, cond), (-1, out[i])), GE, -1)
        for i in range(n - amount):
            encode_cond_copy(f, cond, out[i], src[i + amount])
        # No set bit may leave through the top.
        for i in range(amount):
            f.add(((-1, cond), (-1, src[i])), GE, -1)
    elif direction == "right":
        for i in range(amount):
            f.add(((-1, cond), (-1, out[i])), GE, -1)
        for i in range(n - amount):
            encode_cond_copy(f, cond, out[i + amount], src[i])
        # Discarded low bits of src must be zero (exact division).
        for i in range(n - amount, n):
            f.add(((-1, cond), (-1, src[i])), GE, -1)
    else:
        raise PbError(f"bad shift direction {direction!r}")


def encode_shift(
    f: PbFormula, out: BitVec, src: BitVec, direction: str = "left"
) -> BitVec:
    """out = src shifted by a solver-chosen amount in [0, N-1].

    Returns the N fresh one-hot selector variables; selectors[k] enables
    amount k, so index order matches ascending shift amounts.
    """
    n = _check_widths(out, src)
    selectors = f.new_bitvec(n)
    f.add(tuple((1, s) for s in selectors.bits), EQ, 1)
    for amount in range(n):
        encode_cond_shift(f, selectors[amount], out, src, amount, direction)
    return selectors


def equate_var_list_to_var(
    f: PbFormula, members: list[BitVec], out: BitVec | None = None
) -> tuple[BitVec, tuple[int, ...]]:
    """out equals at least one member; returns (out, selector vars).

    Multiple selectors may be true when the chosen members agree.
    """
    if not members:
        raise PbError("empty member list")
    width = _check_widths(*members)
    if out is None:
        out = f.new_bitvec(width)
    elif len(out) != width:
        raise PbError("output width mismatch")
    selectors = tuple(f.new_var() for _ in members)
    f.add(tuple((1, s) for s in selectors), GE, 1)
    for sel, member in zip(selectors, members):
        for i in range(width):
            encode_cond_copy(f, sel, member[i], out[i])
    return out, selectors


def equate_var_list_to_const(
    f: PbFormula, members: list[BitVec], constant: int
) -> tuple[int, ...]:
    """At least one member equals the constant; returns the selector vars."""
    if not members:
        raise PbError("empty member list")
    width = _check_widths(*members)
    if not 0 <= constant < (1 << width):
        raise PbError("constant too wide")
    selectors = tuple(f.new_var() for _ in members)
    f.add(tuple((1, s) for s in selectors), GE, 1)
    for sel, member in zip(selectors, members):
        for i in range(width):
            bit = (constant >> (width - 1 - i)) & 1
            if bit:
                f.add(((-1, sel), (1, member[i])), GE, 0)
            else:
                f.add(((-1, sel), (-1, member[i])), GE, -1)
    return selectors


def exactly(f: PbFormula, count: int, width: int) -> BitVec:
    """Fresh vector with exactly `count` bits set."""
    if not 0 <= count <= width:
        raise PbError("popcount out of range")
    vec = f.new_bitvec(width)
    f.add(tuple((1, b) for b in vec.bits), EQ, count)
    return vec


def emit_false(f: PbFormula) -> None:
    """Append an unsatisfiable pair (used for structurally empty choices)."""
    z = f.new_var()
    f.add(((1, z),), GE, 1)
    f.add(((-1, z),), GE, 0)
