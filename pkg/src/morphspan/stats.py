"""Multiple-comparison correction, boxplot summaries by sex and age
group, and polynomial trend bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DegenerateInputError
from .qc import fit_lifespan_polynomial

ALPHA = 0.05


@dataclass
class PValueRow:
    name: str
    coefficient: float
    se: float
    p_raw: float
    p_adjusted: float
    significant: bool


def bh_fdr(pvalues, coefficients=None, ses=None, alpha: float = ALPHA):
    """Benjamini-Hochberg step-up adjustment.

    ``pvalues`` is a list of (name, p). Adjusted p_i is
    min over j with p_(j) >= p_(i) of p_(j) * m / rank(j), clamped at 1;
    output keeps input order.
    """
    names = [name for name, _ in pvalues]
    p = np.array([float(v) for _, v in pvalues])
    if np.any((p < 0) | (p > 1)):
        raise DegenerateInputError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted_sorted = p[order] * m / np.arange(1, m + 1)
    # Step-up monotonization from the largest p downward.
    adjusted_sorted = np.minimum.accumulate(adjusted_sorted[::-1])[::-1]
    adjusted_sorted = np.clip(adjusted_sorted, 0.0, 1.0)
    # p * m / m can land one ulp under p; adjusted >= raw must hold.
    adjusted_sorted = np.maximum(adjusted_sorted, p[order])
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted

    coefficients = coefficients or [float("nan")] * m
    ses = ses or [float("nan")] * m
    return [
        PValueRow(
            name=names[i],
            coefficient=float(coefficients[i]),
            se=float(ses[i]),
            p_raw=float(p[i]),
            p_adjusted=float(adjusted[i]),
            significant=bool(adjusted[i] < alpha),
        )
        for i in range(m)
    ]


@dataclass
class BoxStats:
    sex: str
    age_bin: str
    n: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list


DEFAULT_BIN_EDGES = tuple(list(range(0, 90, 10)) + [90])


def _bin_label(lo, hi):
    # Decade bins print as 0-9, 10-19, ..., with a terminal 80-90.
    if hi >= 90:
        return f"{lo}-90"
    return f"{lo}-{hi - 1}"


def box_stats(values, decade_bins: bool = True, bin_edges=None):
    """Tukey box statistics per (sex, age group).

    ``values`` is a sequence of (sex, age, x). Quartiles use linear
    interpolation (type 7); whiskers extend to the most extreme data
    point within 1.5 IQR of the quartiles. Empty groups are omitted.
    """
    values = list(values)
    if not values:
        raise DegenerateInputError("box_stats needs at least one value")
    edges = list(bin_edges) if bin_edges else list(DEFAULT_BIN_EDGES)

    groups = {}
    for sex, age, x in values:
        if not decade_bins:
            groups.setdefault((sex, "all"), []).append(float(x))
            continue
        for lo, hi in zip(edges[:-1], edges[1:]):
            if lo <= age < hi or (hi == edges[-1] and age == hi):
                groups.setdefault((sex, _bin_label(lo, hi)), []).append(float(x))
                break

    out = []
    for (sex, label) in sorted(groups):
        data = np.sort(np.array(groups[(sex, label)]))
        q1, med, q3 = np.quantile(data, [0.25, 0.5, 0.75])  # type 7
        iqr = q3 - q1
        in_low = data[data >= q1 - 1.5 * iqr]
        in_high = data[data <= q3 + 1.5 * iqr]
        wlo = float(in_low.min()) if len(in_low) else float(data.min())
        whi = float(in_high.max()) if len(in_high) else float(data.max())
        outliers = data[(data < wlo) | (data > whi)].tolist()
        out.append(
            BoxStats(
                sex=sex,
                age_bin=label,
                n=len(data),
                median=float(med),
                q1=float(q1),
                q3=float(q3),
                whisker_low=wlo,
                whisker_high=whi,
                outliers=outliers,
            )
        )
    return out


def trend_with_band(points, degree: int, grid):
    """Polynomial trend with pointwise 95% t confidence band.

    Returns (fit values on grid, (lower, upper) band arrays).
    """
    poly = fit_lifespan_polynomial(points, degree=degree)
    grid = np.asarray(grid, dtype=float)
    fit_vals = poly(grid)
    se = poly.predict_se(grid)
    tcrit = sps.t.ppf(0.975, poly.n - degree - 1)
    return fit_vals, (fit_vals - tcrit * se, fit_vals + tcrit * se)
