"""Arithmetic over the Mersenne-prime field GF(2^61 - 1) and seed derivation.

All sketch randomness flows through this module: pairwise relabeling
hashes, the +-1 sign families, and the counter-mode seed splitter that
turns one master seed into arbitrarily many independent-looking 61-bit
seeds.  Everything here is deliberately constrained so that no signed
64-bit intermediate ever overflows; the same source runs under numba's
int64 semantics and under CPython with identical results.
"""

from ._backend import kernel

# Field modulus.  Products of two 61-bit values are reduced with shifts
# only (2^61 == 1 mod P61), keeping every intermediate below 2^63.
P61 = (1 << 61) - 1

_MASK31 = 0x7FFFFFFF
_MASK30 = 0x3FFFFFFF

# Odd 61-bit mixing constants (splitmix64's multipliers folded into the
# field range) and the Weyl increment used by the counter-mode splitter.
_MIX_K1 = 0xBF58476D1CE4E5B9 & P61
_MIX_K2 = 0x94D049BB133111EB & P61
_GAMMA = 0x9E3779B97F4A7C15 & P61


@kernel
def mulmod61(a, b):
    # a, b in [0, 2^61); split at 31 bits so each partial product and the
    # folded accumulator stay below 2^63 (int64-safe in both backends).
    a_hi = a >> 31
    a_lo = a & _MASK31
    b_hi = b >> 31
    b_lo = b & _MASK31
    hi = a_hi * b_hi
    mid = a_hi * b_lo + a_lo * b_hi
    lo = a_lo * b_lo
    # a*b = hi*2^62 + mid*2^31 + lo; reduce using 2^61 = 1 (mod P61).
    acc = (hi << 1) + (mid >> 30) + ((mid & _MASK30) << 31) + (lo >> 61) + (lo & P61)
    acc = (acc & P61) + (acc >> 61)
    if acc >= P61:
        acc -= P61
    return acc


@kernel
def addmod61(a, b):
    s = a + b
    if s >= P61:
        s -= P61
    return s


@kernel
def reduce61(x):
    """Map a nonnegative int64 into the field domain [0, P61)."""
    if x >= P61:
        x = x % P61
    return x


@kernel
def mix61(x):
    # Two multiply-xorshift rounds over the field; enough avalanche for
    # seed splitting (statistical quality is checked by the test suite,
    # and every probabilistic guarantee is re-validated by Monte Carlo).
    x = mulmod61(x ^ (x >> 30), _MIX_K1)
    x = mulmod61(x ^ (x >> 27), _MIX_K2)
    x ^= x >> 31
    if x >= P61:
        x -= P61
    return x


@kernel
def derive61(seed, counter):
    """Counter-mode seed split: independent 61-bit value per (seed, counter)."""
    t = addmod61(reduce61(seed), mulmod61(reduce61(counter + 1), _GAMMA))
    return mix61(t)


@kernel
def poly_eval61(coeffs, x):
    """Evaluate a polynomial (highest-degree coefficient first) at x in GF(P61)."""
    acc = coeffs[0]
    for j in range(1, coeffs.shape[0]):
        acc = mulmod61(acc, x)
        acc = addmod61(acc, coeffs[j])
    return acc


@kernel
def sign_of(value):
    """Map a field value to +-1 via its low bit."""
    return 1 - ((value & 1) << 1)


@kernel
def poly_sign61(coeffs, x):
    return sign_of(poly_eval61(coeffs, x))


@kernel
def sign2_scalar(c1, c0, x):
    """Degree-2 sign with unrolled Horner (hot path; avoids array slicing)."""
    acc = mulmod61(c1, x) + c0
    if acc >= P61:
        acc -= P61
    return 1 - ((acc & 1) << 1)


@kernel
def sign4_scalar(c3, c2, c1, c0, x):
    """Degree-4 sign with unrolled Horner (hot path; avoids array slicing)."""
    acc = mulmod61(c3, x) + c2
    if acc >= P61:
        acc -= P61
    acc = mulmod61(acc, x) + c1
    if acc >= P61:
        acc -= P61
    acc = mulmod61(acc, x) + c0
    if acc >= P61:
        acc -= P61
    return 1 - ((acc & 1) << 1)


@kernel
def derive_table_params(params, seed, base):
    """Fill per-row (a0, a1, sign coefficients) for a counter table.

    Row layout: bucket-hash pair first, then the row's sign-polynomial
    coefficients (params.shape[1] - 2 of them).  a1 is redrawn until
    nonzero.  ``base`` namespaces the counter stream per table kind.
    """
    rows = params.shape[0]
    deg = params.shape[1] - 2
    for rr in range(rows):
        b = base + 16 * rr
        params[rr, 0] = derive61(seed, b)
        a1 = 0
        tries = 0
        while a1 == 0 and tries < 6:
            a1 = derive61(seed, b + 1 + tries)
            tries += 1
        if a1 == 0:
            a1 = 1
        params[rr, 1] = a1
        for j in range(deg):
            params[rr, 2 + j] = derive61(seed, b + 8 + j)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 2^64."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    if n <= 2:
        return 2
    c = n | 1
    while not is_prime(c):
        c += 2
    return c


def fold_seed(seed: int) -> int:
    """Fold an arbitrary user-supplied integer seed into the field domain."""
    return mix61(int(seed) % P61)

