"""Independent oracles the tests check package results against.

Everything here is deliberately implemented by a different route than the
package: brute-force enumeration, exact rational arithmetic, closed forms.
"""
import itertools
import math
from fractions import Fraction


def brute_ball_lattice(d, n):
    """|(S u {e})^n| for standard generators of Z^d by direct enumeration."""
    pts = set()
    moves = [tuple(0 for _ in range(d))]
    for i in range(d):
        for s in (1, -1):
            v = [0] * d
            v[i] = s
            moves.append(tuple(v))
    for word in itertools.product(moves, repeat=n):
        pts.add(tuple(sum(c) for c in zip(*word)) if word else (0,) * d)
    return len(pts)


def brute_ball_words(mul, identity, gens, n):
    """|(S u {e})^n| for arbitrary (mul, identity, gens) by word enumeration."""
    pts = {identity}
    for word in itertools.product(list(gens) + [identity], repeat=n):
        x = identity
        for g in word:
            x = mul(x, g)
        pts.add(x)
    return len(pts)


def dihedral_mul(a, b):
    (t1, f1), (t2, f2) = a, b
    return (t1 + (t2 if f1 == 0 else -t2), f1 ^ f2)


def free_mul(a, b):
    word = list(a)
    for letter in b:
        if word and word[-1] == -letter:
            word.pop()
        else:
            word.append(letter)
    return tuple(word)


def srw_z_law(n):
    """Law of the simple random walk on Z after n steps, exact rationals."""
    law = {}
    half = Fraction(1, 2)
    for k in range(n + 1):
        law[2 * k - n] = math.comb(n, k) * half ** n
    return law


def srw_z_entropy(n):
    """H(mu^{*n}) for the simple walk on Z, in nats."""
    return -sum(float(p) * math.log(float(p))
                for p in srw_z_law(n).values())


def srw_z_green_partial(n_max):
    """Partial Green sum for the simple walk on Z, exact rationals."""
    total = Fraction(0)
    for n in range(0, n_max + 1):
        if n % 2 == 0:
            total += Fraction(math.comb(n, n // 2), 2 ** n)
    return total


def gamblers_ruin_escape(p):
    """Escape probability of the walk on Z with P(+1) = p > 1/2."""
    return 2 * p - 1


def biased_green_partial(p: Fraction, n_max):
    """Partial Green sum of the biased walk on Z, exact rationals.

    Returns at time 2m carry probability C(2m, m) (p q)^m.
    """
    pq = p * (1 - p)
    return sum(Fraction(math.comb(2 * m, m)) * pq ** m
               for m in range(0, n_max // 2 + 1))


def watson_escape():
    """Escape probability of the simple walk on Z^3 via the closed-form
    triple integral value (gamma-function product)."""
    G = (math.sqrt(6) / (32 * math.pi ** 3)) * math.gamma(1 / 24) \
        * math.gamma(5 / 24) * math.gamma(7 / 24) * math.gamma(11 / 24)
    return 1.0 / G


def free_group_radial_profile(n_max, rank=2):
    """Entropy profile of the uniform-on-generators walk on a free group.

    The law is radial: by symmetry the mass at word length r spreads
    uniformly over the sphere of size 2r(2r-1)^{r-1}-ish; the distance
    process is a birth-death chain, tracked in exact rationals.
    """
    q = 2 * rank
    out_p = Fraction(q - 1, q)
    in_p = Fraction(1, q)
    dist = {0: Fraction(1)}
    entropies = []
    for n in range(1, n_max + 1):
        nxt = {}
        for r, p in dist.items():
            if r == 0:
                nxt[1] = nxt.get(1, Fraction(0)) + p
            else:
                nxt[r + 1] = nxt.get(r + 1, Fraction(0)) + p * out_p
                nxt[r - 1] = nxt.get(r - 1, Fraction(0)) + p * in_p
        dist = nxt
        h = 0.0
        for r, p in dist.items():
            if p == 0:
                continue
            sphere = 1 if r == 0 else q * (q - 1) ** (r - 1)
            per_element = float(p) / sphere
            h -= float(p) * math.log(per_element)
        entropies.append(h)
    return entropies


def mixture_tv(limit_masses, contaminant_mass_in_limit, w):
    """TV between mu and (1-w) mu + w delta_c in closed form.

    mu_k - mu = w (delta_c - mu), so the l1 norm is w times
    tv(delta_c, mu) = w ((1 - mu(c)) + (1 - mu(c))).
    """
    return w * 2.0 * (1.0 - contaminant_mass_in_limit)
