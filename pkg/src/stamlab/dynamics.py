"""Rescaled convolution and the Ornstein-Uhlenbeck flow.

rescaled_convolve realizes X_lam = sqrt(1-lam)*X0 + sqrt(lam)*X1 for
independent inputs: each input is scaled by an exact affine pushforward
(GridDensity grids transform in closed form, so scaling never interpolates),
brought to a common spacing, and convolved by zero-padded FFT.

ou_evolve realizes X_t = e^{-t}X + sqrt(1-e^{-2t})G through the same
convolution (lam = 1-e^{-2t} against a standard Gaussian component), so
there is no time-stepping error anywhere.  Large t is split into semigroup
steps: a single step at large t would need the output grid to resolve the
e^{-t}-compressed input, which is exponentially many nodes, while chaining
keeps every intermediate grid at the natural scale of its own density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .families import FamilySpec, build_density, family_values_on, scale_density
from .grids import (
    TAIL_TOL,
    Capabilities,
    Grid,
    GridDensity,
    ValidationError,
    _require,
    trapezoid,
)

# hard ceiling on any working grid; convolutions that would exceed it are
# computed at the coarsest spacing still resolving the combined span.  Sized
# so a scaled kink density (trapezoid mass error ~ h^2 * e^{2t} at step t)
# is never forced below mass tolerance.
COUNT_CAP = 1048577

# fraction of tail_tol a single convolution may trim away (both sides total)
TRIM_BUDGET = TAIL_TOL / 10

# largest single OU step; above this, semigroup splitting keeps grids sane
# (e^{-t} shrinks the carried grid spacing, so one giant step would demand
# a needlessly fine common grid)
MAX_OU_STEP = 2.0

_GAUSS_COMPONENT_COVERAGE = 1e-11


@dataclass(frozen=True)
class ConvolutionPlan:
    """Geometry of one rescaled convolution before tail trimming."""

    lam: float
    target_grid: Grid
    fft_size: int


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _resample(d: GridDensity, spacing: float) -> GridDensity:
    """Re-grid d at the given spacing over its span.

    Families are re-evaluated analytically; everything else goes through a
    cubic spline of log f, which preserves log-concavity far better than
    interpolating f itself.
    """
    if abs(d.grid.spacing - spacing) <= 1e-12 * spacing:
        return d
    count = int(math.ceil(d.grid.span / spacing)) + 1
    if count % 2 == 0:
        count += 1
    grid = Grid(origin=d.grid.origin, spacing=spacing, count=max(count, 17))
    if d.family is not None:
        values = family_values_on(d.family, grid)
    else:
        floor = max(d.floor_abs(), 5e-324)
        logf = np.log(np.maximum(d.values, floor))
        spline = CubicSpline(d.grid.nodes, logf, extrapolate=False)
        values = np.exp(np.nan_to_num(spline(grid.nodes), nan=-math.inf))
    return GridDensity(
        grid=grid,
        values=values,
        tail_mass_bound=d.tail_mass_bound,
        family=d.family,
        caps=d.caps,
    )


def plan_convolution(d0: GridDensity, d1: GridDensity, lam: float) -> ConvolutionPlan:
    """Common-spacing geometry for the rescaled convolution (pre-trim)."""
    _require(0.0 <= lam <= 1.0, f"lambda must be in [0, 1], got {lam}")
    s0 = scale_density(d0, math.sqrt(1.0 - lam)) if lam < 1.0 else d0
    s1 = scale_density(d1, math.sqrt(lam)) if lam > 0.0 else d1
    h = min(s0.grid.spacing, s1.grid.spacing)
    span = s0.grid.span + s1.grid.span
    if span / h + 1 > COUNT_CAP:
        h = span / (COUNT_CAP - 1)
    n0 = int(math.ceil(s0.grid.span / h)) + 1
    n1 = int(math.ceil(s1.grid.span / h)) + 1
    n_full = n0 + n1 - 1
    fft_size = _next_pow2(max(n_full, 2 * max(n0, n1)))
    target = Grid(origin=s0.grid.origin + s1.grid.origin, spacing=h, count=n_full)
    return ConvolutionPlan(lam=lam, target_grid=target, fft_size=fft_size)


def _trim_cost(values: np.ndarray, h: float) -> np.ndarray:
    """cost[i] = trapezoid mass lost by dropping the i leftmost nodes.

    This is cumulative mass plus the half-weight the trapezoid rule moves
    onto the new edge node; monotone in i, and exactly zero while the
    dropped and edge nodes are all zero (compact supports trim for free).
    """
    cost = np.empty(values.size)
    cost[0] = 0.0
    cost[1:] = h * np.cumsum(values)[:-1] + h * (values[1:] - values[0]) / 2
    return cost


def _trim(values: np.ndarray, h: float, budget: float) -> tuple[int, int, float]:
    """Indices [i0, i1) keeping all but <= budget of trapezoid mass, odd count."""
    n = values.size
    side = budget / 2
    lc = _trim_cost(values, h)
    rc = _trim_cost(values[::-1], h)
    i0 = max(int(np.searchsorted(lc, side, side="right")) - 1, 0)
    j0 = max(int(np.searchsorted(rc, side, side="right")) - 1, 0)
    if n - i0 - j0 < 17:
        return 0, n, 0.0
    if (n - i0 - j0) % 2 == 0:
        if j0 > 0:
            j0 -= 1
        elif i0 > 0:
            i0 -= 1
        else:
            j0 = 1
    trimmed = float(lc[i0] + rc[j0])
    return i0, n - j0, trimmed


def rescaled_convolve(
    d0: GridDensity,
    d1: GridDensity,
    lam: float,
    trim_budget: float = TRIM_BUDGET,
) -> GridDensity:
    """Density of sqrt(1-lam)*X0 + sqrt(lam)*X1 for independent inputs."""
    _require(0.0 <= lam <= 1.0, f"lambda must be in [0, 1], got {lam}")
    if lam == 0.0:
        return d0
    if lam == 1.0:
        return d1

    s0 = scale_density(d0, math.sqrt(1.0 - lam))
    s1 = scale_density(d1, math.sqrt(lam))
    plan = plan_convolution(d0, d1, lam)
    h = plan.target_grid.spacing
    r0 = _resample(s0, h)
    r1 = _resample(s1, h)
    n_full = r0.grid.count + r1.grid.count - 1

    fft_size = _next_pow2(max(n_full, 2 * max(r0.grid.count, r1.grid.count)))
    for _ in range(3):
        out = np.fft.irfft(
            np.fft.rfft(r0.values, fft_size) * np.fft.rfft(r1.values, fft_size),
            fft_size,
        )[:n_full] * h
        np.clip(out, 0.0, None, out=out)
        # wrap-around sentinel: aliasing would fold tail mass onto the ends
        edge = h * max(float(out[:3].sum()), float(out[-3:].sum()))
        if edge <= TAIL_TOL:
            break
        fft_size *= 2
    else:
        raise ValidationError(
            f"convolution wrap-around persists at fft_size {fft_size}; "
            "inputs carry too much boundary mass"
        )

    i0, i1, trimmed = _trim(out, h, trim_budget)
    kept = out[i0:i1]
    mass = trapezoid(kept, h)
    drift = abs(mass - 1.0)
    _require(
        drift <= 10 * TAIL_TOL,
        f"convolution mass drift {drift:.3e} exceeds {10 * TAIL_TOL:.1e}",
    )
    smooth = d0.caps.smooth or d1.caps.smooth
    return GridDensity(
        grid=Grid(origin=r0.grid.origin + r1.grid.origin + i0 * h, spacing=h, count=i1 - i0),
        values=kept / mass,
        tail_mass_bound=d0.tail_mass_bound + d1.tail_mass_bound + trimmed,
        family=None,
        caps=Capabilities(entropy=True, fisher=smooth, k=smooth, smooth=smooth),
    )


# node count an OU state is allowed to carry between steps; anything larger
# is smooth by then (one Gaussian convolution behind it) and downsamples
# without measurable loss
OU_RELAX_COUNT = 32769


def _relax(d: GridDensity) -> GridDensity:
    if d.grid.count <= OU_RELAX_COUNT:
        return d
    r = _resample(d, d.grid.span / (OU_RELAX_COUNT - 1))
    mass = trapezoid(r.values, r.grid.spacing)
    _require(
        abs(mass - 1.0) <= 10 * TAIL_TOL,
        f"OU relaxation mass drift {abs(mass - 1.0):.3e} exceeds {10 * TAIL_TOL:.1e}",
    )
    return GridDensity(
        grid=r.grid,
        values=r.values / mass,
        tail_mass_bound=d.tail_mass_bound,
        family=d.family,
        caps=d.caps,
    )


def ou_evolve(d: GridDensity, t: float) -> GridDensity:
    """Density of X_t = e^{-t}X + sqrt(1-e^{-2t})G along the OU flow."""
    _require(t >= 0.0, f"OU time must be >= 0, got {t}")
    if t == 0.0:
        return d
    steps = max(1, int(math.ceil(t / MAX_OU_STEP)))
    dt = t / steps
    lam = -math.expm1(-2.0 * dt)
    budget = TRIM_BUDGET / steps
    coverage = min(_GAUSS_COMPONENT_COVERAGE, budget / 8)
    component = build_density(
        FamilySpec.make("gaussian", mean=0.0, var=1.0), coverage=coverage
    )
    out = d
    for _ in range(steps):
        out = _relax(rescaled_convolve(out, component, lam, trim_budget=budget))
    return out


def _eval_on(d: GridDensity, x: np.ndarray) -> np.ndarray:
    from .families import evaluate_density

    return evaluate_density(d, x)


def l1_distance(da: GridDensity, db: GridDensity) -> float:
    """Trapezoid L1 distance on the union of the two windows."""
    if (
        da.grid.origin == db.grid.origin
        and da.grid.spacing == db.grid.spacing
        and da.grid.count == db.grid.count
    ):
        return trapezoid(np.abs(da.values - db.values), da.grid.spacing)
    lo = min(da.grid.origin, db.grid.origin)
    hi = max(da.grid.right, db.grid.right)
    h = min(da.grid.spacing, db.grid.spacing)
    n = int(math.ceil((hi - lo) / h)) + 1
    if n > COUNT_CAP:
        n = COUNT_CAP
        h = (hi - lo) / (n - 1)
    x = lo + h * np.arange(n)
    return trapezoid(np.abs(_eval_on(da, x) - _eval_on(db, x)), h)


def commutation_check(d0: GridDensity, d1: GridDensity, lam: float, t: float) -> float:
    """L1 distance between evolving-then-mixing and mixing-then-evolving.

    In law (X_lam)_t = (X_t)_lam, because the Gaussian components mix into a
    single Gaussian with the same total variance; the returned distance is
    pure numerics.
    """
    a = ou_evolve(rescaled_convolve(d0, d1, lam), t)
    b = rescaled_convolve(ou_evolve(d0, t), ou_evolve(d1, t), lam)
    return l1_distance(a, b)
