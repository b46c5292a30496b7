"""Word-level arithmetic lowered onto a :class:`Builder`.

Every word carries the exact integer range it can take, so each adder is
sized to the narrowest two's-complement width that holds its result and
nothing can overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Builder


def width_for(lo: int, hi: int) -> int:
    """Bits needed for every integer in [lo, hi] (unsigned when lo >= 0)."""
    if lo > hi:
        raise ValueError("empty range")
    if lo >= 0:
        return max(1, hi.bit_length())
    n = 1
    while not (-(1 << (n - 1)) <= lo and hi < (1 << (n - 1))):
        n += 1
    return n


@dataclass(frozen=True)
class Word:
    bits: tuple[int, ...]
    lo: int
    hi: int

    @property
    def signed(self) -> bool:
        return self.lo < 0

    @property
    def width(self) -> int:
        return len(self.bits)


def const_word(b: Builder, value: int) -> Word:
    w = width_for(min(value, 0), max(value, 0))
    return Word(tuple(b.const((value >> j) & 1) for j in range(w)), value, value)


def unsigned_word(bits, hi: int | None = None) -> Word:
    bits = tuple(bits)
    return Word(bits, 0, (1 << len(bits)) - 1 if hi is None else hi)


def extend(b: Builder, word: Word, width: int) -> list[int]:
    bits = list(word.bits[:width])
    fill = word.bits[-1] if word.signed else b.const(0)
    return bits + [fill] * (width - len(bits))


def shift_left(b: Builder, word: Word, k: int) -> Word:
    return Word((b.const(0),) * k + word.bits, word.lo << k, word.hi << k)


def _compress(b: Builder, cols: list[list[int]]) -> list[int]:
    """3:2 reduction column by column, then a ripple-carry final adder."""
    width = len(cols)
    for j in range(width):
        col = cols[j]
        while len(col) >= 3:
            s, c = b.fa(col.pop(0), col.pop(0), col.pop(0))
            col.append(s)
            if j + 1 < width:
                cols[j + 1].append(c)
    out, carry = [], None
    for j in range(width):
        bits = cols[j] + ([carry] if carry is not None else [])
        carry = None
        if not bits:
            out.append(b.const(0))
        elif len(bits) == 1:
            out.append(bits[0])
        elif len(bits) == 2:
            s, carry = b.ha(*bits)
            out.append(s)
        else:
            s, carry = b.fa(*bits)
            out.append(s)
    return out


def add_words(b: Builder, terms, constant: int = 0) -> Word:
    """Sum of ``(word, sign)`` terms plus a constant, through one bit heap.

    Signed operands contribute an inverted sign bit and a constant
    correction instead of sign-extension copies; subtracted operands
    contribute inverted bits and a constant correction.
    """
    terms = list(terms)
    lo = constant + sum(w.lo if s > 0 else -w.hi for w, s in terms)
    hi = constant + sum(w.hi if s > 0 else -w.lo for w, s in terms)
    width = width_for(lo, hi)
    cols: list[list[int]] = [[] for _ in range(width)]
    k = constant
    for w, s in terms:
        n = w.width
        for j, bit in enumerate(w.bits):
            if j >= width:
                break  # vanishes modulo 2^width
            top = w.signed and j == n - 1
            # +x sign bit: -x 2^j = (1 - x) 2^j - 2^j
            # -x plain bit: likewise; -x sign bit is simply +x 2^j
            if (s > 0) == top:
                k -= 1 << j
                bit = b.inv(bit)
            if (v := b.value(bit)) is not None:
                k += v << j
            else:
                cols[j].append(bit)
    k %= 1 << width
    for j in range(width):
        if (k >> j) & 1:
            cols[j].append(b.const(1))
    bits = _compress(b, cols)
    return Word(tuple(bits), lo, hi)


def popcount(b: Builder, bits) -> Word:
    bits = list(bits)
    if not bits:
        return const_word(b, 0)
    return add_words(b, [(Word((n,), 0, 1), 1) for n in bits])


def scale_const(b: Builder, word: Word, q: int) -> list[tuple[Word, int]]:
    """Shift-add terms for ``q * word``: one shifted copy per set bit of |q|."""
    sign = 1 if q > 0 else -1
    m = abs(q)
    return [(shift_left(b, word, j), sign) for j in range(m.bit_length()) if (m >> j) & 1]


def relu(b: Builder, word: Word) -> Word:
    """max(word, 0), by gating the magnitude bits with the inverted sign."""
    if not word.signed:
        return word
    if word.hi <= 0:
        return const_word(b, 0)
    keep = b.inv(word.bits[-1])
    bits = tuple(b.and2(keep, n) for n in word.bits[:-1])
    w = width_for(0, word.hi)
    return Word(bits[:w], 0, word.hi)


def less_than(b: Builder, x: Word, y: Word) -> int:
    """Single net that is 1 when x < y."""
    diff = add_words(b, [(x, 1), (y, -1)])
    if diff.lo >= 0:
        return b.const(0)
    if diff.hi < 0:
        return b.const(1)
    return diff.bits[-1]


def mux_word(b: Builder, sel: int, x: Word, y: Word) -> Word:
    """``sel ? y : x`` on words of possibly different ranges."""
    lo, hi = min(x.lo, y.lo), max(x.hi, y.hi)
    w = width_for(lo, hi)
    xs, ys = extend(b, x, w), extend(b, y, w)
    return Word(tuple(b.mux2(sel, p, q) for p, q in zip(xs, ys)), lo, hi)
