"""Seeded k-wise independent hash families and big-endian bit utilities.

Two families live here:

* :class:`PairwiseHash` - invertible affine relabeling ``x -> a0 + a1*x mod p``
  over a prime field, pairwise independent, used to randomize item labels
  and to route items into buckets.
* :class:`SignFamily` - degree-k polynomial hashing over a prime field with
  the low bit mapped to +-1.  The production field is the Mersenne prime
  2^61 - 1, where the +-1 bias is 2^-60 and reduction is a handful of
  shifts.  Tiny prime fields are supported for exhaustive-enumeration
  tests of the k-wise uniformity of the underlying hash values.

A deterministic map from an odd-size field onto {-1, +1} is necessarily
biased by 1/q (the sum of q many +-1 values is odd), so exact sign
moments cannot be certified on a prime field.  :class:`TinyGf2SignFamily`
provides the exact counterpart: the same polynomial construction over a
binary field GF(2^m), whose even order makes the low-bit sign exactly
balanced.  It is test scaffolding, enumerable over all seeds at m <= 3.
"""

from dataclasses import dataclass, field

from .fieldops import (
    P61,
    addmod61,
    derive61,
    fold_seed,
    mulmod61,
    next_prime,
    reduce61,
)

# Counter-space layout for seed derivation (disjoint per purpose).
CTR_PAIRWISE_A0 = 11
CTR_PAIRWISE_A1 = 12  # ..CTR_PAIRWISE_A1+5 used by the rejection loop
CTR_SIGN_COEFF = 40  # ..CTR_SIGN_COEFF+degree-1


def label_bit(a: int, r: int, width: int) -> int:
    """Bit ``r`` of ``a``, 1-indexed from the most significant of ``width`` bits."""
    if not 1 <= r <= width:
        raise ValueError(f"bit index {r} outside [1, {width}]")
    return (a >> (width - r)) & 1


def prefix_match(a: int, b: int, r: int, width: int) -> bool:
    """True iff the ``r`` most significant bits (big-endian) of a and b agree.

    Implemented as a single shift-and-compare, which is exact.  The
    absolute-difference test ``|a - b| < 2^(width-r)`` is only a one-way
    implication: prefixes that straddle a power of two (e.g. 01111 vs
    10000) have difference 1 yet disagree in every leading bit.
    """
    if not 0 <= r <= width:
        raise ValueError(f"prefix length {r} outside [0, {width}]")
    if r == 0:
        return True
    return ((a ^ b) >> (width - r)) == 0


@dataclass(frozen=True)
class PairwiseHash:
    """Invertible affine relabeling over GF(p): ``eval(x) = a0 + a1*x mod p``."""

    p: int
    a0: int
    a1: int
    n: int  # domain size; inversion reports labels without preimage in [n]
    a1_inv: int = field(init=False)
    bit_width: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.a1 < self.p:
            raise ValueError("a1 must be in [1, p)")
        if not 0 <= self.a0 < self.p:
            raise ValueError("a0 must be in [0, p)")
        object.__setattr__(self, "a1_inv", pow(self.a1, -1, self.p))
        object.__setattr__(self, "bit_width", (self.p - 1).bit_length() if self.p > 1 else 1)

    def eval(self, x: int) -> int:
        return (self.a0 + self.a1 * (x % self.p)) % self.p

    def invert(self, y: int) -> int:
        """Preimage of label ``y``; -1 if it falls outside the item domain [n]."""
        if not 0 <= y < self.p:
            raise ValueError(f"label {y} outside [0, {self.p})")
        x = (y - self.a0) * self.a1_inv % self.p
        return x if x < self.n else -1


def make_pairwise(n: int, seed: int, square_target: int | None = None) -> PairwiseHash:
    """Pairwise hash over the smallest prime >= max(n+1, square_target).

    Coefficients are drawn deterministically from ``seed``; a1 is redrawn
    until nonzero.
    """
    n = max(int(n), 1)
    p = next_prime(max(n + 1, square_target or 0))
    s = fold_seed(seed)
    a0 = derive61(s, CTR_PAIRWISE_A0) % p
    a1 = 0
    j = 0
    while a1 == 0:
        a1 = derive61(s, CTR_PAIRWISE_A1 + j) % p
        j += 1
    return PairwiseHash(p=p, a0=a0, a1=a1, n=n)


def invert_pairwise(h: PairwiseHash, y: int) -> int:
    return h.invert(y)


class SignFamily:
    """Degree-k polynomial sign family over a prime field.

    ``eval(i)`` is +-1 from the low bit of a k-wise independent hash
    value.  Over the default Mersenne field the bias is 2^-60; over a
    tiny field q the hash values themselves are exactly k-wise uniform
    (certified by enumeration in the test suite) but the sign carries
    the unavoidable 1/q bias of an odd field.
    """

    def __init__(self, degree: int, seed: int = 0, q: int = P61, coeffs=None):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = degree
        self.q = q
        if coeffs is not None:
            coeffs = tuple(int(c) % q for c in coeffs)
            if len(coeffs) != degree:
                raise ValueError("need exactly `degree` coefficients")
        else:
            s = fold_seed(seed)
            coeffs = tuple(derive61(s, CTR_SIGN_COEFF + j) % q for j in range(degree))
        self.coeffs = coeffs

    def eval_value(self, i: int) -> int:
        """The underlying field value h(i), before the sign map."""
        if self.q == P61:
            x = reduce61(int(i))
            acc = 0
            for c in self.coeffs:
                acc = addmod61(mulmod61(acc, x), c)
            return int(acc)
        acc = 0
        x = i % self.q
        for c in self.coeffs:
            acc = (acc * x + c) % self.q
        return acc

    def eval(self, i: int) -> int:
        return 1 - ((self.eval_value(i) & 1) << 1)

    @classmethod
    def enumerate_all(cls, degree: int, q: int):
        """Yield every family over GF(q) (q^degree of them); test scaffolding."""
        total = q**degree
        for s in range(total):
            coeffs = []
            v = s
            for _ in range(degree):
                coeffs.append(v % q)
                v //= q
            yield cls(degree, q=q, coeffs=coeffs)


# Irreducible polynomials over GF(2), index m -> bit mask of x^m + ... + 1.
_GF2_IRREDUCIBLE = {1: 0b11, 2: 0b111, 3: 0b1011}


def _gf2_mul(a: int, b: int, m: int) -> int:
    poly = _GF2_IRREDUCIBLE[m]
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return acc


class TinyGf2SignFamily:
    """Polynomial sign family over GF(2^m), m <= 3; exactly unbiased signs.

    The even field order makes the low-bit sign map perfectly balanced,
    so k-wise uniformity of the hash values transfers to exact k-wise
    independence of the +-1 outputs.  Used for the exactness certificates
    (vanishing mixed moments, exact fourth-moment bound) that an odd
    prime field cannot satisfy.
    """

    def __init__(self, degree: int, coeffs, m: int = 3):
        if m not in _GF2_IRREDUCIBLE:
            raise ValueError("supported field sizes: GF(2), GF(4), GF(8)")
        self.degree = degree
        self.m = m
        self.q = 1 << m
        coeffs = tuple(int(c) for c in coeffs)
        if len(coeffs) != degree or any(not 0 <= c < self.q for c in coeffs):
            raise ValueError("coefficients must be `degree` elements of GF(2^m)")
        self.coeffs = coeffs

    def eval_value(self, i: int) -> int:
        x = i
        if not 0 <= x < self.q:
            raise ValueError("domain points must be distinct field elements")
        acc = 0
        for c in self.coeffs:
            acc = _gf2_mul(acc, x, self.m) ^ c
        return acc

    def eval(self, i: int) -> int:
        return 1 - ((self.eval_value(i) & 1) << 1)

    @classmethod
    def enumerate_all(cls, degree: int, m: int = 3):
        q = 1 << m
        for s in range(q**degree):
            coeffs = []
            v = s
            for _ in range(degree):
                coeffs.append(v % q)
                v //= q
            yield cls(degree, coeffs, m=m)


def relabel_eval(a0: int, a1: int, x: int) -> int:
    """Kernel-compatible label computation over the Mersenne field."""
    v = mulmod61(a1, reduce61(int(x))) + a0
    return v - P61 if v >= P61 else v
