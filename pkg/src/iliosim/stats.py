"""Pearson chi-square machinery with an in-artifact upper-tail p-value.

The survival function is computed through the regularized incomplete
gamma function Q(a, x) using the classic series / continued-fraction
pair (series for x < a + 1, Lentz's continued fraction otherwise), with
everything scaled through lgamma in log space. Relative error is well
below 1e-8 against high-precision references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateTable, ValidationError

_MAX_ITER = 500
_EPS = 1e-15
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    """P(a, x) by the ascending series: converges fast for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_continued_fraction(a: float, x: float) -> float:
    """Q(a, x) by Lentz's modified continued fraction: for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Gamma(a, x)/Gamma(a)."""
    if a <= 0.0:
        raise ValidationError("shape parameter must be positive")
    if x < 0.0:
        raise ValidationError("argument must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return min(max(1.0 - _gamma_p_series(a, x), 0.0), 1.0)
    return min(max(_gamma_q_continued_fraction(a, x), 0.0), 1.0)


def chi_square_sf(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 1:
        raise ValidationError("degrees of freedom must be >= 1")
    if statistic < 0.0:
        raise ValidationError("chi-square statistic must be non-negative")
    return regularized_gamma_q(df / 2.0, statistic / 2.0)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p: float


def chi_square(table) -> ChiSquareResult:
    """Pearson chi-square test of homogeneity on an r x k count table.

    Expected counts come from the row/column marginals; a zero marginal
    makes the table degenerate.
    """
    rows = [list(r) for r in table]
    if len(rows) < 2 or any(len(r) < 2 for r in rows):
        raise ValidationError("contingency table needs at least 2 rows and 2 columns")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationError("contingency table rows must have equal length")
    for r in rows:
        for cell in r:
            if cell != int(cell) or cell < 0:
                raise ValidationError(f"cell counts must be non-negative integers, got {cell!r}")
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(r[j] for r in rows) for j in range(width)]
    grand = sum(row_sums)
    if any(s == 0 for s in row_sums) or any(s == 0 for s in col_sums):
        raise DegenerateTable("table has a zero row or column marginal")

    statistic = 0.0
    for i, r in enumerate(rows):
        for j, observed in enumerate(r):
            expected = row_sums[i] * col_sums[j] / grand
            statistic += (observed - expected) ** 2 / expected
    df = (len(rows) - 1) * (width - 1)
    p = 1.0 if statistic == 0.0 else chi_square_sf(statistic, df)
    return ChiSquareResult(statistic=statistic, df=df, p=p)
