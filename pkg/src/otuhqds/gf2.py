"""Polynomial arithmetic over GF(2), irreducibility testing and sampling.

Polynomials are carried around in two forms:

* plain ints, where bit ``i`` is the coefficient of ``x^i`` (so ``0b111``
  is ``x^2 + x + 1``).  All the low-level helpers work on these.
* :class:`Gf2Poly`, the monic degree-``n`` form used as a hash modulus:
  only the ``n`` low coefficients are stored, the leading 1 is implicit,
  and the coefficient string ``(a_{n-1}, ..., a_1, a_0)`` maps onto an
  n-bit string with ``a_{n-1}`` first.  This layout is frozen: it is
  embedded in every serialized signature.

Irreducibility uses the classic two-part criterion: ``x^(2^n) == x
(mod p)`` together with ``gcd(x^(2^(n/d)) - x, p) == 1`` for every prime
``d`` dividing ``n``.  Squarings are table-driven for large degrees and
candidates are pre-screened by trial division against all irreducibles
of degree <= 8, which removes ~93% of random candidates at a tiny cost.
"""

from __future__ import annotations

from functools import lru_cache

from .bitstring import BitString
from .errors import RandomnessExhaustedError

# --------------------------------------------------------------------------
# int-level polynomial helpers (bit i of the int = coefficient of x^i)
# --------------------------------------------------------------------------


def poly_degree(a: int) -> int:
    """Degree of a nonzero polynomial int; -1 for the zero polynomial."""
    return a.bit_length() - 1


def poly_mul(a: int, b: int) -> int:
    """Carry-less (GF(2)) product of two polynomial ints."""
    if a < b:
        a, b = b, a
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        a <<= 1
        b >>= 1
    return acc


def poly_mod(a: int, m: int) -> int:
    """Remainder of a modulo m (m nonzero)."""
    if m == 0:
        raise ZeroDivisionError("reduction modulo the zero polynomial")
    dm = m.bit_length()
    da = a.bit_length()
    while da >= dm:
        a ^= m << (da - dm)
        da = a.bit_length()
    return a


def poly_gcd_int(a: int, b: int) -> int:
    """GCD of two polynomial ints (not both zero)."""
    if a == 0 and b == 0:
        raise ValueError("gcd(0, 0) is undefined")
    while b:
        a, b = b, poly_mod(a, b)
    return a


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> tuple[int, ...]:
    """Distinct prime factors of n by trial division (n is a hash length)."""
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return tuple(out)


# --------------------------------------------------------------------------
# fast squaring: bit-spreading tables plus per-modulus reduction tables
# --------------------------------------------------------------------------

_SPREAD16: list[int] | None = None


def _spread16() -> list[int]:
    """v -> v with a zero interleaved after every bit (the GF(2) square)."""
    global _SPREAD16
    if _SPREAD16 is None:
        small = [0] * 256
        for v in range(256):
            s = 0
            for j in range(8):
                if (v >> j) & 1:
                    s |= 1 << (2 * j)
            small[v] = s
        _SPREAD16 = [small[v & 0xFF] | (small[v >> 8] << 16) for v in range(65536)]
    return _SPREAD16


class _SquareCtx:
    """Repeated squaring modulo one fixed monic polynomial.

    Built once per irreducibility test; squaring then costs a handful of
    table lookups instead of a bit-by-bit division.
    """

    __slots__ = ("n", "mask", "tables")

    def __init__(self, full: int, n: int):
        self.n = n
        self.mask = (1 << n) - 1
        # x^(n+k) mod p for k = 0 .. n-2 (the square of an n-bit residue
        # has degree at most 2n-2), then grouped into per-byte XOR tables.
        r = full ^ (1 << n)  # x^n reduced
        powers = [r]
        for _ in range(n - 2):
            r <<= 1
            if (r >> n) & 1:
                r ^= full
            powers.append(r)
        tables = []
        for j in range(0, n - 1, 8):
            chunk = powers[j : j + 8]
            tab = [0] * 256
            for b in range(1, 256):
                low = (b & -b).bit_length() - 1
                if low < len(chunk):
                    tab[b] = tab[b & (b - 1)] ^ chunk[low]
                else:
                    tab[b] = tab[b & (b - 1)]
            tables.append(tab)
        self.tables = tables

    def square(self, v: int) -> int:
        spread = _spread16()
        s = 0
        shift = 0
        t = v
        while t:
            s |= spread[t & 0xFFFF] << shift
            t >>= 16
            shift += 32
        r = s & self.mask
        hi = s >> self.n
        for tab in self.tables:
            if not hi:
                break
            r ^= tab[hi & 0xFF]
            hi >>= 8
        return r


def _square_mod_small(v: int, full: int) -> int:
    spread = _spread16()
    s = 0
    shift = 0
    while v:
        s |= spread[v & 0xFFFF] << shift
        v >>= 16
        shift += 32
    return poly_mod(s, full)


# --------------------------------------------------------------------------
# trial-division prefilter against every irreducible of degree <= 8
# --------------------------------------------------------------------------

_PREFILTER: list[tuple[list[int], int]] | None = None
_PREFILTER_MAX_DEG = 8


def _prefilter_tables() -> list[tuple[list[int], int]]:
    """Per small divisor g: a byte-fold table and a divisibility bitmap.

    Folding a value byte-by-byte through ``tab[acc] ^ byte`` keeps
    ``acc`` congruent to the processed prefix mod g; the bitmap then
    answers "is the final accumulator divisible by g".
    """
    global _PREFILTER
    if _PREFILTER is None:
        out = []
        for d in range(2, _PREFILTER_MAX_DEG + 1):
            for g in irreducibles_of_degree(d):
                tab = [poly_mod(a << 8, g) for a in range(256)]
                bitmap = 0
                for a in range(256):
                    if poly_mod(a, g) == 0:
                        bitmap |= 1 << a
                out.append((tab, bitmap))
        _PREFILTER = out
    return _PREFILTER


def _has_small_factor(full: int, n: int) -> bool:
    """True if a degree-n polynomial has an irreducible factor of degree <= 8.

    Only valid for n > 2 * _PREFILTER_MAX_DEG (so the polynomial itself is
    never one of the divisors).
    """
    if full & 1 == 0:  # divisible by x
        return True
    if full.bit_count() & 1 == 0:  # p(1) == 0, divisible by x + 1
        return True
    data = full.to_bytes((n + 8) // 8, "big")
    for tab, bitmap in _prefilter_tables():
        acc = 0
        for byte in data:
            acc = tab[acc] ^ byte
        if (bitmap >> acc) & 1:
            return True
    return False


# --------------------------------------------------------------------------
# the monic polynomial type
# --------------------------------------------------------------------------


class Gf2Poly:
    """Monic polynomial x^n + a_{n-1} x^{n-1} + ... + a_1 x + a_0 over GF(2).

    ``coeffs`` holds the n low coefficients as an int (bit i = a_i); the
    leading coefficient is implicitly 1.  ``degree`` 0 is the constant 1.
    """

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs: int):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        if coeffs < 0 or coeffs >> degree:
            raise ValueError(f"coefficients do not fit below degree {degree}")
        self.degree = degree
        self.coeffs = coeffs

    @property
    def full(self) -> int:
        """The polynomial as a plain int including the leading term."""
        return (1 << self.degree) | self.coeffs

    @classmethod
    def from_full_int(cls, full: int) -> "Gf2Poly":
        if full <= 0:
            raise ValueError("need a nonzero polynomial")
        degree = full.bit_length() - 1
        return cls(degree, full ^ (1 << degree))

    @classmethod
    def from_terms(cls, *exponents: int) -> "Gf2Poly":
        """Build from exponents with coefficient 1, e.g. (128, 29, 27, 2, 0)."""
        full = 0
        for e in exponents:
            full ^= 1 << e
        return cls.from_full_int(full)

    @classmethod
    def from_bitstring(cls, bits: BitString) -> "Gf2Poly":
        """Coefficient string (a_{n-1}, ..., a_0), first bit = a_{n-1}."""
        return cls(bits.length, bits.value)

    def to_bitstring(self) -> BitString:
        return BitString(self.coeffs, self.degree)

    def to_hex(self) -> str:
        """n-bit payload, a_{n-1} first, implicit leading 1 omitted."""
        return self.to_bitstring().to_hex()

    @classmethod
    def from_hex(cls, text: str, degree: int) -> "Gf2Poly":
        return cls.from_bitstring(BitString.from_hex(text, degree))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gf2Poly):
            return NotImplemented
        return self.degree == other.degree and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.degree, self.coeffs))

    def __repr__(self) -> str:
        terms = [f"x^{i}" if i > 1 else ("x" if i == 1 else "1")
                 for i in range(self.degree, -1, -1) if (self.full >> i) & 1]
        return f"Gf2Poly({' + '.join(terms)})"


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


def _residue_int(value, n: int) -> int:
    if isinstance(value, BitString):
        if value.length > n:
            raise ValueError(f"residue has {value.length} bits, modulus degree is {n}")
        return value.value
    value = int(value)
    if value < 0 or value.bit_length() > n:
        raise ValueError("residue degree must be below the modulus degree")
    return value


def poly_mul_mod(a, b, p: Gf2Poly) -> BitString:
    """a * b mod p for residues a, b of degree < deg p.

    Residues may be given as BitStrings (length <= deg p) or plain ints.
    """
    n = p.degree
    av = _residue_int(a, n)
    bv = _residue_int(b, n)
    full = p.full
    acc = 0
    while bv:
        if bv & 1:
            acc ^= av
        av <<= 1
        if (av >> n) & 1:
            av ^= full
        bv >>= 1
    return BitString(acc, n)


def poly_gcd(f, g) -> Gf2Poly:
    """Monic gcd of two polynomials (Gf2Poly or plain ints, not both zero)."""
    fv = f.full if isinstance(f, Gf2Poly) else int(f)
    gv = g.full if isinstance(g, Gf2Poly) else int(g)
    return Gf2Poly.from_full_int(poly_gcd_int(fv, gv))


def frobenius_power(k: int, p: Gf2Poly) -> BitString:
    """x^(2^k) mod p by k successive modular squarings."""
    if p.degree < 1:
        raise ValueError("modulus must have degree >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    n = p.degree
    full = p.full
    r = poly_mod(2, full)  # x
    if n > 32:
        ctx = _SquareCtx(full, n)
        for _ in range(k):
            r = ctx.square(r)
    else:
        for _ in range(k):
            r = _square_mod_small(r, full)
    return BitString(r, n)


def _rabin_test(full: int, n: int) -> bool:
    if n == 1:
        return True  # x and x + 1
    factors = _prime_factors(n)
    checkpoints = {n // d for d in factors}
    ctx = _SquareCtx(full, n) if n > 32 else None
    r = poly_mod(2, full)
    saved = {}
    for k in range(1, n + 1):
        r = ctx.square(r) if ctx else _square_mod_small(r, full)
        if k in checkpoints:
            saved[k] = r
    if r != poly_mod(2, full):  # x^(2^n) != x mod p
        return False
    x = poly_mod(2, full)
    for d in factors:
        if poly_gcd_int(saved[n // d] ^ x, full) != 1:
            return False
    return True


@lru_cache(maxsize=1 << 18)
def _is_irreducible_small(full: int) -> bool:
    return _rabin_test(full, full.bit_length() - 1)


def is_irreducible(p: Gf2Poly) -> bool:
    """Exact irreducibility test for a monic polynomial of degree >= 1."""
    n = p.degree
    if n < 1:
        raise ValueError("degree must be >= 1")
    full = p.full
    if n <= 20:
        return _is_irreducible_small(full)
    if _has_small_factor(full, n):
        return False
    return _rabin_test(full, n)


def sample_irreducible(n: int, rng) -> tuple[Gf2Poly, int]:
    """Rejection-sample an irreducible of degree n; returns (poly, trials).

    Each candidate takes n-1 random bits for (a_{n-1}, ..., a_1) with
    a_0 forced to 1 (every irreducible of degree >= 2 has a nonzero
    constant term).  ``rng`` needs a ``getrandbits`` method.
    """
    if n < 2:
        raise ValueError("degree must be >= 2")
    trials = 0
    while True:
        trials += 1
        coeffs = (rng.getrandbits(n - 1) << 1) | 1
        p = Gf2Poly(n, coeffs)
        if is_irreducible(p):
            return p, trials
        if trials > 1 << 24:  # unreachable with sane randomness
            raise RandomnessExhaustedError("no irreducible found")


# --------------------------------------------------------------------------
# exhaustive enumeration (test oracle for small degrees)
# --------------------------------------------------------------------------

_SIEVE_MAX = 16


@lru_cache(maxsize=None)
def irreducibles_of_degree(n: int) -> tuple[int, ...]:
    """All irreducibles of degree n as plain ints, found by trial division.

    Deliberately independent of the squaring-based test above so the two
    can be checked against each other.
    """
    if not 1 <= n <= _SIEVE_MAX:
        raise ValueError(f"enumeration supported for 1 <= n <= {_SIEVE_MAX}")
    if n == 1:
        return (0b10, 0b11)
    divisors = []
    for d in range(1, n // 2 + 1):
        divisors.extend(irreducibles_of_degree(d))
    out = []
    for cand in range(1 << n, 1 << (n + 1)):
        if cand & 1 == 0 or cand.bit_count() & 1 == 0:
            continue  # divisible by x or by x + 1
        if all(poly_mod(cand, g) != 0 for g in divisors[2:]):
            out.append(cand)
    return tuple(out)


def count_irreducibles(n: int) -> int:
    """Exact count of irreducibles of degree n (n <= 16, by brute force)."""
    return len(irreducibles_of_degree(n))
