"""Uniform 1-D grids, gridded densities, and their potentials.

Everything downstream works on a `GridDensity`: a normalized density sampled
on a uniform grid, together with an analytic bound on the mass truncated
outside the grid and a capability record saying which functionals are
meaningful for it.  `Potential` carries psi = -log f and its first two
derivatives, with masks separating the region where the values themselves
are trusted from the (smaller) region where finite-difference derivatives
are trusted.

All types are immutable; operations are pure functions.  Lazily computed
attributes are cached on the instance, which is safe because they are
deterministic functions of immutable state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

if TYPE_CHECKING:
    from .families import FamilySpec

# Nodes where f < DENSITY_FLOOR_REL * max(f) are outside the trusted band:
# psi and its derivatives blow up there and must not pollute quadratures.
DENSITY_FLOOR_REL = 1e-15
# Finite-difference derivatives of convolved densities are additionally
# restricted to f >= FD_TRUST_REL * max(f): below that the absolute error
# inherited from input tail truncation dominates the second differences.
FD_TRUST_REL = 1e-8
# Default truncation mass target for built densities.
TAIL_TOL = 1e-9
# Default grid: ~4096 nodes covering the [eps, 1-eps] quantile range.
DEFAULT_RESOLUTION = 4096
DEFAULT_COVERAGE = 1e-10
# Isotropy tolerance for mean/variance checks.
MOM_TOL = 1e-7


class StamlabError(Exception):
    """Base class for all library errors."""


class ValidationError(StamlabError):
    """Invalid construction parameters or malformed inputs."""


class CapabilityError(StamlabError):
    """A functional was requested that the density cannot support."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


@dataclass(frozen=True)
class Grid:
    """Uniform grid: nodes are origin + i*spacing for i in [0, count)."""

    origin: float
    spacing: float
    count: int

    def __post_init__(self) -> None:
        _require(self.spacing > 0, f"grid spacing must be > 0, got {self.spacing}")
        _require(self.count >= 16, f"grid count must be >= 16, got {self.count}")

    @property
    def nodes(self) -> np.ndarray:
        cached = self.__dict__.get("_nodes")
        if cached is None:
            cached = self.origin + self.spacing * np.arange(self.count)
            cached.setflags(write=False)
            object.__setattr__(self, "_nodes", cached)
        return cached

    @property
    def right(self) -> float:
        return self.origin + self.spacing * (self.count - 1)

    @property
    def span(self) -> float:
        return self.spacing * (self.count - 1)

    def half(self) -> "Grid":
        """Every-other-node subgrid; requires odd count so endpoints survive."""
        _require(self.count % 2 == 1, "half() needs an odd node count")
        return Grid(self.origin, 2 * self.spacing, (self.count + 1) // 2)


def odd_count(hint: int) -> int:
    """Node count for a resolution hint: forced odd (>= 17) so that the
    half-grid used for Richardson estimates shares both endpoints."""
    n = max(int(hint), 16)
    return n if n % 2 == 1 else n + 1


def trapezoid(values: np.ndarray, spacing: float) -> float:
    return spacing * (values.sum() - 0.5 * (values[0] + values[-1]))


def integrate_with_err(values: np.ndarray, spacing: float) -> tuple[float, float]:
    """Composite trapezoid with a Richardson error estimate from the
    half-resolution subsample (|I_h - I_2h| / 3 for an O(h^2) rule)."""
    full = trapezoid(values, spacing)
    if len(values) % 2 == 1:
        half = trapezoid(values[::2], 2 * spacing)
        err = abs(full - half) / 3.0
    else:
        # even counts cannot nest exactly; fall back to dropping one node
        half = trapezoid(values[:-1:2], 2 * spacing)
        err = abs(full - half) / 3.0 + abs(values[-1]) * spacing
    return full, err


@dataclass(frozen=True)
class Capabilities:
    """Which functionals the density supports (executable smoothness record)."""

    entropy: bool = True
    fisher: bool = True
    k: bool = True
    smooth: bool = True


@dataclass(frozen=True)
class GridDensity:
    """Normalized nonnegative density on a uniform grid.

    tail_mass_bound is an analytic (or propagated) bound on the true mass
    lying outside the grid.  `family` is the analytic provenance when known;
    convolution outputs carry family=None and are handled by the
    finite-difference paths.
    """

    grid: Grid
    values: np.ndarray
    tail_mass_bound: float
    family: Optional["FamilySpec"] = None
    caps: Capabilities = field(default_factory=Capabilities)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        _require(vals.ndim == 1, "density values must be a 1-D array")
        _require(len(vals) == self.grid.count, "values length must match grid count")
        _require(bool(np.all(np.isfinite(vals))), "density values must be finite")
        _require(bool(np.all(vals >= 0)), "density values must be nonnegative")
        _require(self.tail_mass_bound >= 0, "tail_mass_bound must be >= 0")
        if not vals.flags.owndata:
            vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_memo", {})

    def memo(self, key: str, compute: Callable[[], object]) -> object:
        """Cache a derived pure value on this immutable density."""
        store = self.__dict__["_memo"]
        if key not in store:
            store[key] = compute()
        return store[key]

    def mass(self) -> float:
        return trapezoid(self.values, self.grid.spacing)

    def half(self) -> "GridDensity":
        """Half-resolution view (shared endpoints); used for refinement checks.

        The subsample is renormalization-free on purpose: Richardson
        comparisons must see the same function at two spacings.
        """
        return GridDensity(
            grid=self.grid.half(),
            values=self.values[::2].copy(),
            tail_mass_bound=self.tail_mass_bound,
            family=self.family,
            caps=self.caps,
        )

    def floor_abs(self) -> float:
        return DENSITY_FLOOR_REL * float(self.values.max())


def validate_mass(d: GridDensity, tol: float = 10 * TAIL_TOL) -> None:
    m = d.mass()
    _require(abs(m - 1.0) <= tol, f"density mass {m!r} outside 1 +- {tol}")


@dataclass(frozen=True)
class Potential:
    """psi = -log f with derivatives on the same grid.

    psi1/psi2 are the derivatives used by the functionals: analytic when the
    family provides closed forms, finite differences otherwise.  The
    second-order central finite-difference versions are always retained in
    psi1_fd/psi2_fd for cross-checking.  valid_mask marks nodes above the
    density floor; trust_mask additionally restricts to where derivatives
    are numerically meaningful (equal to valid_mask on analytic paths).
    """

    grid: Grid
    psi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    psi1_fd: np.ndarray
    psi2_fd: np.ndarray
    valid_mask: np.ndarray
    trust_mask: np.ndarray
    analytic: bool

    def __post_init__(self) -> None:
        for name in ("psi", "psi1", "psi2", "psi1_fd", "psi2_fd", "valid_mask", "trust_mask"):
            arr = np.asarray(getattr(self, name))
            if not arr.flags.owndata:
                arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def psi1_fd_err(self) -> np.ndarray:
        """Nodewise Richardson-style estimate of the psi1_fd truncation error,
        from comparing the h and 2h central-difference stencils."""
        h = self.grid.spacing
        p = self.psi
        wide = np.full_like(p, np.inf)
        wide[2:-2] = (p[4:] - p[:-4]) / (4 * h)
        err = np.abs(self.psi1_fd - wide) / 3.0
        err[:2] = err[-2:] = np.inf
        return err

    def psi2_fd_err(self) -> np.ndarray:
        """Nodewise Richardson-style estimate of the psi2_fd truncation error,
        from comparing the h and 2h second-difference stencils."""
        h = self.grid.spacing
        p = self.psi
        wide = np.full_like(p, np.inf)
        wide[2:-2] = (p[4:] - 2 * p[2:-2] + p[:-4]) / (4 * h * h)
        err = np.abs(self.psi2_fd - wide) / 3.0
        err[:2] = err[-2:] = np.inf
        return err


def central_diff1(y: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative, one-sided second-order at the ends."""
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (2 * h)
    out[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    out[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h)
    return out


def central_diff2(y: np.ndarray, h: float) -> np.ndarray:
    """Second-order second derivative, copied inward at the ends."""
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / (h * h)
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def central_diff1_4th(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative (5-point central), second-order fallback
    near the ends.  Used by the Fisher paths, where the default grid's h
    makes the O(h^2) stencil bias visible at the 1e-6 tolerance scale."""
    out = np.empty_like(y)
    out[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)
    out[1] = (y[2] - y[0]) / (2 * h)
    out[-2] = (y[-1] - y[-3]) / (2 * h)
    out[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    out[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h)
    return out


@dataclass(frozen=True)
class LogConcavityReport:
    ok: bool
    worst: float
    at: float


# absolute float-noise scale of density values entering FD second
# differences (FFT convolution noise measured ~2e-16 of the peak; the
# factor folds the 4/h^2 stencil amplification and a 10x safety margin)
FD_NOISE_EPS = 8e-15


def check_log_concave(p: Potential, tol: float = 1e-9) -> LogConcavityReport:
    """True iff psi2 >= -tol on interior trusted nodes; reports the argmin.

    Finite-difference potentials get a nodewise allowance for float noise:
    second differences of -log f amplify absolute value noise by
    4/(h^2 * f/max f), which dwarfs tol near the trust floor even though
    the density is perfectly log-concave.  Structural violations (an actual
    convexity gap) are orders of magnitude above the allowance.
    """
    mask = p.trust_mask.copy()
    mask[0] = mask[-1] = False
    if not mask.any():
        return LogConcavityReport(ok=False, worst=float("-inf"), at=float("nan"))
    if p.analytic:
        adjusted = p.psi2
    else:
        rel = np.exp(p.psi.min() - p.psi)
        h = p.grid.spacing
        adjusted = p.psi2 + FD_NOISE_EPS / (rel * h * h)
    adjusted = np.where(mask, adjusted, np.inf)
    i = int(np.argmin(adjusted))
    worst = float(adjusted[i])
    return LogConcavityReport(ok=worst >= -tol, worst=worst, at=float(p.grid.nodes[i]))


def moments(d: GridDensity) -> tuple[float, float, float]:
    """Trapezoidal (mean, variance) with a Richardson error estimate."""
    x = d.grid.nodes
    h = d.grid.spacing
    m0, e0 = integrate_with_err(d.values, h)
    m1, e1 = integrate_with_err(x * d.values, h)
    m2, e2 = integrate_with_err(x * x * d.values, h)
    if not (np.isfinite(m1) and np.isfinite(m2)):
        raise ValidationError("non-finite moments")
    mean = m1 / m0
    var = m2 / m0 - mean * mean
    _require(np.isfinite(var) and var > 0, f"variance {var!r} not positive finite")
    return float(mean), float(var), float(e0 + e1 + e2)


def require_isotropic(d: GridDensity, tol: float = MOM_TOL, what: str = "input") -> None:
    mean, var, err = moments(d)
    budget = tol + err
    if abs(mean) > budget or abs(var - 1.0) > budget:
        raise ValidationError(
            f"{what} is not isotropic: mean={mean:.3e}, var-1={var - 1.0:.3e} "
            f"(tolerance {budget:.1e})"
        )
