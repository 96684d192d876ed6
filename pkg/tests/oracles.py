"""Independent naive reference implementations used to validate the package.

Everything here is deliberately written with plain Python loops and the
statistics module, not shared with (or imported from) the package code.
"""

import math
import statistics

GUARD = 1e-12


def _div(num, den):
    return num / den if abs(den) >= GUARD else 0.0


def _rms(z):
    return math.sqrt(sum(t * t for t in z) / len(z)) if z else 0.0


def _argmax(z):
    best = 0
    for i in range(1, len(z)):
        if z[i] > z[best]:
            best = i
    return best


def naive_derivatives(x):
    v = [x[i + 1] - x[i] for i in range(len(x) - 1)]
    a = [v[i + 1] - v[i] for i in range(len(v) - 1)]
    j = [a[i + 1] - a[i] for i in range(len(a) - 1)]
    return v, a, j


def naive_features(segment, gender):
    """All 33 global features of one segment, by definition, one at a time."""
    x = [float(t) for t in segment]
    n = len(x)
    v, a, j = naive_derivatives(x)
    out = []

    out.append(sum(t for t in v if t > 0))  # 1
    out.append(sum(t for t in v if t < 0))  # 2

    maxima = [i for i in range(1, n - 1) if x[i] > x[i - 1] and x[i] > x[i + 1]]
    if len(maxima) >= 3:
        ranked = sorted(maxima, key=lambda i: (-x[i], i))[:3]
        out.extend(i / (n - 1) for i in ranked)  # 3, 4, 5
    else:
        out.append(_argmax(x) / (n - 1))
        out.extend([0.0, 0.0])

    mean_v = sum(v) / len(v)
    absmax_v = max(abs(t) for t in v)
    out.append(_div(mean_v, absmax_v))  # 6
    out.append(_div(mean_v, max(v)))  # 7
    out.append(_div(_rms(v), absmax_v))  # 8
    out.append(statistics.fmean(x))  # 9
    out.append(statistics.pstdev(x))  # 10
    out.append(_div(_rms(a), max(abs(t) for t in a)))  # 11
    out.append(statistics.median(x))  # 12
    out.append(statistics.pstdev(v))  # 13
    out.append(statistics.pstdev(a))  # 14
    out.append(statistics.fmean([abs(t) for t in j]))  # 15
    out.append(statistics.fmean(j))  # 16
    out.append(max(abs(t) for t in j))  # 17
    out.append(max(j))  # 18
    out.append(_rms(j))  # 19
    out.append(_argmax([abs(t) for t in j]) / (len(j) - 1))  # 20
    out.append(_argmax(j) / (len(j) - 1))  # 21

    nz = [t for t in v if t != 0]
    out.append(float(sum(1 for p, q in zip(nz, nz[1:]) if (p > 0) != (q > 0))))  # 22
    out.append(_div(sum(abs(t) for t in v if t > 0), sum(abs(t) for t in v if t < 0)))  # 23
    out.append(_div(sum(1 for t in v if t > 0), sum(1 for t in v if t < 0)))  # 24

    rng = max(x) - min(x)
    out.append(rng)  # 25
    out.append(_div(mean_v, rng))  # 26
    out.append(float(len(maxima)))  # 27
    out.append(statistics.fmean([abs(t) for t in a]))  # 28
    out.append(max(x))  # 29
    out.append(min(x))  # 30

    mu = statistics.fmean(x)
    m2 = sum((t - mu) ** 2 for t in x) / n
    m3 = sum((t - mu) ** 3 for t in x) / n
    m4 = sum((t - mu) ** 4 for t in x) / n
    out.append(_div(m3, m2**1.5))  # 31
    out.append(_div(m4, m2 * m2) - 3.0 if m2 * m2 >= GUARD else 0.0)  # 32
    out.append(float(gender))  # 33
    return out


def concordance_auc(labels, scores):
    """AUC as pairwise concordance probability, ties counting one half."""
    pos = [s for lab, s in zip(labels, scores) if lab == 1]
    neg = [s for lab, s in zip(labels, scores) if lab == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def anova_f(column, y):
    """One-way F statistic for a binary grouping, via explicit group means."""
    g0 = [v for v, lab in zip(column, y) if lab == 0]
    g1 = [v for v, lab in zip(column, y) if lab == 1]
    n = len(column)
    grand = sum(column) / n
    m0 = sum(g0) / len(g0)
    m1 = sum(g1) / len(g1)
    ssb = len(g0) * (m0 - grand) ** 2 + len(g1) * (m1 - grand) ** 2
    ssw = sum((v - m0) ** 2 for v in g0) + sum((v - m1) ** 2 for v in g1)
    return (ssb / 1.0) / (ssw / (n - 2))


def normal_cdf(x, intervals=4096):
    """Phi(x) by Simpson quadrature of the standard normal density."""
    if x < 0:
        return 1.0 - normal_cdf(-x, intervals)
    if x == 0:
        return 0.5

    def phi(t):
        return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)

    h = x / intervals
    total = phi(0.0) + phi(x)
    for i in range(1, intervals):
        total += phi(i * h) * (4.0 if i % 2 == 1 else 2.0)
    return 0.5 + total * h / 3.0


def chi2_sf_1dof(x):
    """Survival of chi-square(1): 2 * (1 - Phi(sqrt(x)))."""
    return 2.0 * (1.0 - normal_cdf(math.sqrt(x)))


def kkt_violations(alpha, y_signed, decision, c, tol):
    """Indices violating the soft-margin KKT conditions at tolerance."""
    bad = []
    for i, (al, yi, fi) in enumerate(zip(alpha, y_signed, decision)):
        margin = yi * fi
        if al < 1e-8:
            if margin < 1.0 - tol - 1e-6:
                bad.append(i)
        elif al > c - 1e-8:
            if margin > 1.0 + tol + 1e-6:
                bad.append(i)
        elif abs(margin - 1.0) > tol + 1e-6:
            bad.append(i)
    return bad
