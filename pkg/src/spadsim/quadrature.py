"""Vectorized adaptive Simpson quadrature.

All open panels are refined together each sweep, so the integrand is called
on whole arrays rather than point by point. A panel is accepted once its
Richardson error estimate falls below its share of the global tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error: float
    evaluations: int


def adaptive_simpson(func, a, b, *, rtol=1e-6, atol=0.0, breakpoints=(), initial_panels=8,
                     max_evaluations=1_000_000) -> QuadResult:
    """Integrate a vectorized ``func`` over ``[a, b]``.

    ``breakpoints`` inside the interval are forced panel edges; put them where
    the integrand changes character so refinement starts in the right place.
    """
    if b < a:
        raise ValueError("integration limits must satisfy a <= b")
    if b == a:
        return QuadResult(0.0, 0.0, 0)
    edges = np.unique(np.clip(np.r_[a, np.asarray(breakpoints, float), b], a, b))
    edges = np.concatenate([np.linspace(lo, hi, initial_panels + 1)[:-1]
                            for lo, hi in zip(edges[:-1], edges[1:])] + [[b]])
    lo, hi = edges[:-1], edges[1:]
    length = b - a

    evals = 0
    # Each panel carries f at its 3 Simpson nodes.
    f_lo, f_mid, f_hi = (np.asarray(func(x), float) for x in (lo, 0.5 * (lo + hi), hi))
    evals += 3 * lo.size
    accepted = 0.0
    accepted_err = 0.0

    while lo.size:
        h = hi - lo
        m = 0.5 * (lo + hi)
        f_q1 = np.asarray(func(0.5 * (lo + m)), float)
        f_q3 = np.asarray(func(0.5 * (m + hi)), float)
        evals += 2 * lo.size
        coarse = h / 6 * (f_lo + 4 * f_mid + f_hi)
        fine = h / 12 * (f_lo + 4 * f_q1 + 2 * f_mid + 4 * f_q3 + f_hi)
        err = np.abs(fine - coarse) / 15
        refined = fine + (fine - coarse) / 15

        estimate = accepted + refined.sum()
        tol = max(atol, rtol * abs(estimate))
        ok = err <= tol * h / length
        ok |= h <= 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi))

        accepted += refined[ok].sum()
        accepted_err += err[ok].sum()
        keep = ~ok
        if keep.any() and evals > max_evaluations:
            raise QuadratureError(
                f"no convergence after {evals} evaluations "
                f"(rtol={rtol}, remaining error {err[keep].sum():.3g})")
        lo, m, hi = lo[keep], m[keep], hi[keep]
        f_lo, f_q1, f_mid, f_q3, f_hi = (v[keep] for v in (f_lo, f_q1, f_mid, f_q3, f_hi))
        # split each surviving panel in two; children reuse the parent's nodes
        lo, hi = np.r_[lo, m], np.r_[m, hi]
        f_lo, f_mid, f_hi = np.r_[f_lo, f_mid], np.r_[f_q1, f_q3], np.r_[f_mid, f_hi]

    return QuadResult(float(accepted), float(accepted_err), evals)
