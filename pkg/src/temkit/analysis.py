"""Decay-rate fits, mitigation-overhead ratios, and report tables.

Everything here is a pure function over plain numbers; the simulation and
estimation modules produce the series these consume.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

# Overhead ratio of zero-noise extrapolation over the inverse-map approach
# grows as (1 + ZNE_LOG_COEFF * ln R)^2 with the signal damping R.
ZNE_LOG_COEFF = 3.59


@dataclass(frozen=True)
class DecayFit:
    """Exponential fit C(t) = amplitude * exp(-rate * t)."""

    rate: float
    amplitude: float
    stderr: float
    ci95: tuple[float, float]
    n_used: int
    dropped: tuple[float, ...]

    def covers(self, rate: float) -> bool:
        return self.ci95[0] <= rate <= self.ci95[1]


def fit_decay_rate(points: Iterable[tuple[float, float]]) -> DecayFit:
    """Least-squares decay rate of positive series samples.

    Fits ln C against t.  Non-positive values cannot enter the log; they are
    dropped and their time stamps reported in `dropped`.  Needs at least
    three usable points.  The confidence interval is the standard two-sided
    95% band of the regression slope.
    """
    pts = [(float(t), float(c)) for t, c in points]
    kept = [(t, c) for t, c in pts if c > 0.0]
    dropped = tuple(t for t, c in pts if c <= 0.0)
    if len(kept) < 3:
        raise ValueError("need at least three positive decay points")
    t = np.array([p[0] for p in kept])
    y = np.log([p[1] for p in kept])
    t_mean = t.mean()
    sxx = float(np.sum((t - t_mean) ** 2))
    if sxx == 0.0:
        raise ValueError("decay fit needs distinct time stamps")
    slope = float(np.sum((t - t_mean) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * t_mean)
    resid = y - (intercept + slope * t)
    dof = len(kept) - 2
    se = float(np.sqrt(np.sum(resid**2) / dof / sxx))
    half = float(stats.t.ppf(0.975, dof)) * se
    rate = -slope
    return DecayFit(
        rate=rate,
        amplitude=float(np.exp(intercept)),
        stderr=se,
        ci95=(rate - half, rate + half),
        n_used=len(kept),
        dropped=dropped,
    )


def theory_decay_rate(h: float) -> float:
    """Decay rate of the ideal boundary correlator, -ln cos(2h)."""
    c = np.cos(2.0 * h)
    if c <= 0.0:
        raise ValueError("no exponential decay for cos(2h) <= 0")
    return float(-np.log(c))


def signal_damping(ideal: float, noisy: float) -> float:
    """Damping ratio R = ideal / noisy of a single signal value."""
    if noisy == 0.0:
        raise ValueError("noisy reference value is zero")
    r = float(ideal) / float(noisy)
    if r <= 0.0:
        raise ValueError("ideal and noisy values must share a sign")
    return r


@dataclass(frozen=True)
class OverheadRatios:
    """Sampling-cost ratios of the alternatives over the inverse-map method."""

    r: float
    pec_over_tem: float
    zne_over_tem: float


def sampling_overheads(r: float) -> OverheadRatios:
    """Overhead ratios at signal damping R: (R^2, (1 + 3.59 ln R)^2)."""
    if r < 1.0:
        raise ValueError("signal damping must be at least 1")
    return OverheadRatios(
        r=float(r),
        pec_over_tem=float(r) ** 2,
        zne_over_tem=(1.0 + ZNE_LOG_COEFF * float(np.log(r))) ** 2,
    )


@dataclass(frozen=True)
class RelativeErrorReport:
    """Per-point relative errors |value - reference| / |reference|.

    `unmitigated` compares raw estimates against the noisy simulation,
    `mitigated` compares mitigated estimates against the exact values.
    Points whose reference is exactly zero are excluded; the surviving
    series keep their original indices in the `*_index` fields.
    """

    unmitigated: tuple[float, ...]
    mitigated: tuple[float, ...]
    unmitigated_index: tuple[int, ...]
    mitigated_index: tuple[int, ...]


def _relative_series(
    values: Sequence[float], reference: Sequence[float]
) -> tuple[tuple[float, ...], tuple[int, ...]]:
    out, idx = [], []
    for i, (v, ref) in enumerate(zip(values, reference)):
        if ref == 0.0:
            continue
        out.append(abs(float(v) - float(ref)) / abs(float(ref)))
        idx.append(i)
    return tuple(out), tuple(idx)


def relative_error_report(
    experimental: Sequence[float],
    mitigated: Sequence[float],
    noisy_sim: Sequence[float],
    exact: Sequence[float],
) -> RelativeErrorReport:
    """Relative-error series of raw and mitigated estimates."""
    n = len(experimental)
    if not (len(mitigated) == len(noisy_sim) == len(exact) == n):
        raise ValueError("series must be aligned")
    r_u, i_u = _relative_series(experimental, noisy_sim)
    r_m, i_m = _relative_series(mitigated, exact)
    return RelativeErrorReport(r_u, r_m, i_u, i_m)


# -- CSV emitters -------------------------------------------------------------

DECAY_CSV_HEADER = (
    "t",
    "ideal",
    "noisy_sim",
    "unmitigated",
    "unmitigated_stderr",
    "mitigated",
    "mitigated_stderr",
)

OVERHEAD_CSV_HEADER = ("label", "R", "pec_over_tem", "zne_over_tem")

CONVERGENCE_CSV_HEADER = (
    "chi",
    "value",
    "delta_chi",
    "delta_curve",
    "entropy",
    "projected_entropy",
)


def _cell(value) -> str:
    return "" if value is None else repr(float(value))


def write_decay_csv(
    path: str | Path,
    t: Sequence[float],
    ideal: Sequence[float] | None = None,
    noisy_sim: Sequence[float] | None = None,
    unmitigated: Sequence[float] | None = None,
    unmitigated_stderr: Sequence[float] | None = None,
    mitigated: Sequence[float] | None = None,
    mitigated_stderr: Sequence[float] | None = None,
) -> None:
    """Write a decay-curve table with header DECAY_CSV_HEADER.

    Missing series leave their column blank; present series must align
    with `t`.
    """
    cols = (ideal, noisy_sim, unmitigated, unmitigated_stderr,
            mitigated, mitigated_stderr)
    for col in cols:
        if col is not None and len(col) != len(t):
            raise ValueError("series must be aligned")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(DECAY_CSV_HEADER)
        for i, ti in enumerate(t):
            w.writerow(
                [repr(float(ti))]
                + [_cell(col[i] if col is not None else None) for col in cols]
            )


def write_overhead_csv(
    path: str | Path, entries: Iterable[tuple[str, float]]
) -> None:
    """Write an overhead table with header OVERHEAD_CSV_HEADER.

    Entries are (label, damping ratio) pairs; the two overhead columns are
    computed here.
    """
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(OVERHEAD_CSV_HEADER)
        for label, r in entries:
            o = sampling_overheads(r)
            w.writerow([label, repr(o.r), repr(o.pec_over_tem),
                        repr(o.zne_over_tem)])


def write_convergence_csv(path: str | Path, report) -> None:
    """Write a bond-dimension convergence table with CONVERGENCE_CSV_HEADER.

    `report` needs the convergence-report fields (chis, values, delta_chi,
    delta_curve, entropies, projected_entropies); the first delta_curve
    cell is blank since differences start at the second point.
    """
    ent = report.entropies
    proj = report.projected_entropies
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CONVERGENCE_CSV_HEADER)
        for i, chi in enumerate(report.chis):
            w.writerow([
                str(int(chi)),
                repr(float(report.values[i])),
                repr(float(report.delta_chi[i])),
                _cell(report.delta_curve[i - 1] if i else None),
                _cell(ent[i] if ent is not None else None),
                _cell(proj[i] if proj is not None else None),
            ])
