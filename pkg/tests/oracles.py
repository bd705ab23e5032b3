"""Independent reference implementations, written as plain loops.

None of these call into distcov; they are the direct definitions the
vectorised code is checked against.
"""
from __future__ import annotations

import itertools
import math


def euclid(points):
    pts = [list(map(float, p)) if hasattr(p, "__len__") else [float(p)] for p in points]
    n = len(pts)
    return [[math.sqrt(sum((a - b) ** 2 for a, b in zip(pts[k], pts[l]))) for l in range(n)] for k in range(n)]


def center(d):
    n = len(d)
    row = [sum(d[k]) / n for k in range(n)]
    col = [sum(d[k][l] for k in range(n)) / n for l in range(n)]
    grand = sum(map(sum, d)) / n**2
    return [[d[k][l] - row[k] - col[l] + grand for l in range(n)] for k in range(n)]


def vn2_expansion(a, b):
    """V_n^2 = S1 + S2 - 2 S3 from uncentred distances, no centred matrix formed."""
    n = len(a)
    s1 = sum(a[k][l] * b[k][l] for k in range(n) for l in range(n)) / n**2
    s2 = (sum(map(sum, a)) / n**2) * (sum(map(sum, b)) / n**2)
    s3 = sum(a[k][l] * b[k][m] for k in range(n) for l in range(n) for m in range(n)) / n**3
    return s1 + s2 - 2 * s3


def mean_distance_product(a, b):
    n = len(a)
    sa = 0.0
    sb = 0.0
    for k in range(n):
        for l in range(n):
            sa += a[k][l]
            sb += b[k][l]
    return (sa / n**2) * (sb / n**2)


def all_permutations(n):
    return [list(p) for p in itertools.permutations(range(n))]
