"""Independent reference computations (mpmath / exact rationals).

Nothing here imports the package under test; values computed here are frozen
into the test modules and compared with the implementation.
"""

from fractions import Fraction
from math import comb

import mpmath

mpmath.mp.dps = 50


def em_probs(scores, epsilon, sensitivity):
    """Exponential-mechanism probabilities by direct high-precision weighting."""
    w = [mpmath.exp(mpmath.mpf(epsilon) * mpmath.mpf(q) / (2 * mpmath.mpf(sensitivity))) for q in scores]
    total = mpmath.fsum(w)
    return [float(x / total) for x in w]


def gaussian_sigma(delta2, epsilon, delta):
    d2 = mpmath.mpf(delta2)
    return float(d2 / mpmath.mpf(epsilon) * mpmath.sqrt(2 * mpmath.log(mpmath.mpf("1.25") / mpmath.mpf(delta))))


def binomial_upper_tail(n, p, k):
    """P[Bin(n, p) > k] as an exact Fraction."""
    p = Fraction(p)
    return sum(comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(k + 1, n + 1))


def id_bound_pure(n, f, eps):
    n, f, eps = map(mpmath.mpf, (n, f, eps))
    return float(2 * f * mpmath.exp(-n / (8 * f * f)) + f * mpmath.exp(-eps * n / (8 * f * f)))


def id_bound_approx(n, f, eps, delta):
    n, f, eps, delta = map(mpmath.mpf, (n, f, eps, delta))
    lg = mpmath.log(mpmath.mpf("1.25") / delta)
    return float(2 * f * mpmath.exp(-n / (8 * f * f)) + 2 * f * mpmath.exp(-(eps**2) * n * n / (64 * f**3 * lg)))


def gen_bound(n, f, g, size, p_star, eps, mode, h=None, delta=None):
    n, f, g, eps = map(mpmath.mpf, (n, f, g, eps))
    cov = size * mpmath.exp(-n * mpmath.mpf(p_star) / 8)
    if mode == "public":
        priv = f * mpmath.exp(-eps * g / 4)
    elif mode == "joint":
        priv = f * h * mpmath.exp(-eps * g / 8)
    else:
        lg = mpmath.log(mpmath.mpf("1.25") / mpmath.mpf(delta))
        priv = 2 * f * h * mpmath.exp(-(eps**2) * g * g / (256 * f * h * lg))
    return float(min(mpmath.mpf(1), cov + priv + mpmath.exp(-n / 2)))


def lb_identify(n, eps):
    n, eps = mpmath.mpf(n), mpmath.mpf(eps)
    return float((1 - mpmath.exp(-n / 12)) / (1 + mpmath.exp(eps * n / 2))), float(mpmath.exp(-eps * n / 2) / 30)


def lb_generate(n, eps):
    n, eps = mpmath.mpf(n), mpmath.mpf(eps)
    return float((1 - mpmath.power(4, -n) - mpmath.exp(-n / 12)) / (1 + mpmath.exp(eps * n / 2)))


def wilson(s, n, z):
    """Wilson score interval with critical value z, in high precision."""
    s, n, z = mpmath.mpf(s), mpmath.mpf(n), mpmath.mpf(z)
    p = s / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * mpmath.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return float(centre - half), float(centre + half)


def z_two_sided(conf):
    return mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf(conf))


def brute_witness(contains_list, in_support, scan):
    """Smallest i so every language with an outside element has one at index <= i."""
    first = []
    for contains in contains_list:
        for k in range(1, scan + 1):
            if contains(k) and not in_support(k):
                first.append(k)
                break
    return max(first) if first else 1


def brute_members_above(contains, t, j, scan):
    found = [k for k in range(t + 1, t + scan + 1) if contains(k)]
    return found[j - 1]


def margins(errs):
    """Margins in exact arithmetic: M(1) = 1, M(i) = min_{k<i} (e_k - e_i)."""
    out = [Fraction(1)]
    for i in range(1, len(errs)):
        out.append(min(errs[k] - errs[i] for k in range(i)))
    return out


def id_scores(errs, f):
    f = Fraction(f)
    out = []
    for i, m in enumerate(margins(errs), start=1):
        d = max(Fraction(2) / f - m, Fraction(0))
        out.append(i - f * f * d)
    return out
