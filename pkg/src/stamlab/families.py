"""Built-in log-concave families and density construction.

Each family provides an analytic log-density, analytic potential derivatives
when they exist, exact quantiles (or an analytic tail bound) for grid
placement, analytic moments, and closure under the affine maps a*X + b with
a > 0.  That closure is what lets the dynamics module scale inputs exactly
instead of interpolating.

Grid conventions chosen for quadrature accuracy (all node counts odd):
- symmetric families put their center exactly on a node (the laplace kink
  then causes only a localized, sign-cancelling trapezoid error);
- the uniform support edges sit exactly halfway between nodes, which makes
  the trapezoid rule exact for piecewise-constant integrands and makes
  discrete convolution agree with the exact convolution of the cell
  interpretation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .grids import (
    DEFAULT_COVERAGE,
    DEFAULT_RESOLUTION,
    DENSITY_FLOOR_REL,
    FD_TRUST_REL,
    Capabilities,
    Grid,
    GridDensity,
    Potential,
    ValidationError,
    _require,
    central_diff1,
    central_diff2,
    moments,
    odd_count,
)

FAMILY_NAMES = (
    "gaussian",
    "logistic",
    "gumbel",
    "gamma",
    "smoothed_laplace",
    "uniform",
    "laplace",
)

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class FamilySpec:
    """A family name plus its parameters (stored sorted for hashability)."""

    family: str
    params: tuple[tuple[str, float], ...]

    @staticmethod
    def make(family: str, **params: float) -> "FamilySpec":
        _require(family in FAMILY_NAMES, f"unknown family {family!r}; known: {FAMILY_NAMES}")
        items = tuple(sorted((k, float(v)) for k, v in params.items()))
        spec = FamilySpec(family, items)
        _handler(spec).validate(spec.as_dict())
        return spec

    def as_dict(self) -> dict[str, float]:
        return dict(self.params)

    def p(self, key: str) -> float:
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)


# ---------------------------------------------------------------------------
# family handlers

class _Gaussian:
    required = ("mean", "var")
    default_resolution = DEFAULT_RESOLUTION
    default_coverage = DEFAULT_COVERAGE
    symmetric = True

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("gaussian", p, self.required)
        _require(p["var"] > 0, f"gaussian var must be > 0, got {p['var']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        return Capabilities(entropy=True, fisher=True, k=True, smooth=True)

    def center(self, p: Mapping[str, float]) -> float:
        return p["mean"]

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        v = p["var"]
        return -((x - p["mean"]) ** 2) / (2 * v) - 0.5 * math.log(2 * math.pi * v)

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        return (x - p["mean"]) / p["var"]

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        return np.full_like(x, 1.0 / p["var"])

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["mean"] + math.sqrt(p["var"]) * special.ndtri(eps)

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["mean"] - math.sqrt(p["var"]) * special.ndtri(eps)

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        return p["mean"], p["var"]

    def affine(self, p: Mapping[str, float], a: float, b: float) -> dict[str, float]:
        return {"mean": a * p["mean"] + b, "var": a * a * p["var"]}


class _Logistic:
    required = ("loc", "scale")
    default_resolution = DEFAULT_RESOLUTION
    default_coverage = DEFAULT_COVERAGE
    symmetric = True

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("logistic", p, self.required)
        _require(p["scale"] > 0, f"logistic scale must be > 0, got {p['scale']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        return Capabilities(entropy=True, fisher=True, k=True, smooth=True)

    def center(self, p: Mapping[str, float]) -> float:
        return p["loc"]

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        s = p["scale"]
        z = np.abs((x - p["loc"]) / s)
        return -z - 2 * np.log1p(np.exp(-z)) - math.log(s)

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        s = p["scale"]
        return np.tanh((x - p["loc"]) / (2 * s)) / s

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        s = p["scale"]
        return 1.0 / (2 * s * s * np.cosh((x - p["loc"]) / (2 * s)) ** 2)

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] + p["scale"] * math.log(eps / (1 - eps))

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] - p["scale"] * math.log(eps / (1 - eps))

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        s = p["scale"]
        return p["loc"], s * s * math.pi ** 2 / 3

    def affine(self, p: Mapping[str, float], a: float, b: float) -> dict[str, float]:
        return {"loc": a * p["loc"] + b, "scale": a * p["scale"]}


class _Gumbel:
    required = ("loc", "beta")
    default_resolution = DEFAULT_RESOLUTION
    default_coverage = DEFAULT_COVERAGE
    symmetric = False

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("gumbel", p, self.required)
        _require(p["beta"] > 0, f"gumbel beta must be > 0, got {p['beta']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        return Capabilities(entropy=True, fisher=True, k=True, smooth=True)

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        b = p["beta"]
        z = (x - p["loc"]) / b
        return -z - np.exp(-z) - math.log(b)

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        b = p["beta"]
        return (1.0 - np.exp(-(x - p["loc"]) / b)) / b

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        b = p["beta"]
        return np.exp(-(x - p["loc"]) / b) / (b * b)

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] - p["beta"] * math.log(-math.log(eps))

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        # P(X > x) = eps  <=>  z = -log(-log(1-eps)); log1p keeps precision
        return p["loc"] - p["beta"] * math.log(-math.log1p(-eps))

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        b = p["beta"]
        return p["loc"] + EULER_GAMMA * b, b * b * math.pi ** 2 / 6

    def affine(self, p: Mapping[str, float], a: float, b: float) -> dict[str, float]:
        return {"loc": a * p["loc"] + b, "beta": a * p["beta"]}


class _Gamma:
    required = ("shape", "scale", "loc")
    # K_L(gamma) is dominated by the left support edge; the blanket default
    # grid leaves an O(1e-4) boundary-term error in the K identity, so gamma
    # defaults to a finer, wider grid.
    default_resolution = 32769
    default_coverage = 1e-15
    symmetric = False

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("gamma", p, self.required)
        _require(p["shape"] >= 1, f"gamma shape must be >= 1, got {p['shape']}")
        _require(p["scale"] > 0, f"gamma scale must be > 0, got {p['scale']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        k = p["shape"]
        # E[1/X^2] needs shape > 2; the K-related integrals need shape >= 3.
        # At 3 <= shape <= 4 the K_L integral is truncation-sensitive (its
        # tail near the support edge diverges logarithmically) but the
        # identity combination K - (K_L - 2 I_L + 1) stays meaningful because
        # the divergent part cancels on the shared grid.
        return Capabilities(entropy=True, fisher=k > 2, k=k >= 3, smooth=True)

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        k, th = p["shape"], p["scale"]
        z = (x - p["loc"]) / th
        out = np.full_like(np.asarray(x, dtype=float), -np.inf)
        pos = z > 0
        zp = z[pos]
        out[pos] = (k - 1) * np.log(zp) - zp - special.gammaln(k) - math.log(th)
        return out

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        k, th = p["shape"], p["scale"]
        return 1.0 / th - (k - 1) / (x - p["loc"])

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        k = p["shape"]
        return (k - 1) / (x - p["loc"]) ** 2

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] + p["scale"] * float(special.gammaincinv(p["shape"], eps))

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] + p["scale"] * float(special.gammainccinv(p["shape"], eps))

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        k, th = p["shape"], p["scale"]
        return p["loc"] + k * th, k * th * th

    def affine(self, p: Mapping[str, float], a: float, b: float) -> dict[str, float]:
        return {"shape": p["shape"], "scale": a * p["scale"], "loc": a * p["loc"] + b}


class _SmoothedLaplace:
    """f(x) proportional to exp(-c*sqrt(a^2 + (x-loc)^2)).

    Normalization Z = 2a*K_1(c*a) and second moment (a/c)*K_2(ca)/K_1(ca)
    in modified-Bessel form; smooth for a > 0 and converging to laplace as
    a -> 0, which is why it stands in for laplace wherever K is needed.
    """

    required = ("a", "rate", "loc")
    default_resolution = DEFAULT_RESOLUTION
    default_coverage = DEFAULT_COVERAGE
    symmetric = True

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("smoothed_laplace", p, self.required)
        _require(p["a"] > 0, f"smoothed_laplace a must be > 0, got {p['a']}")
        _require(p["rate"] > 0, f"smoothed_laplace rate must be > 0, got {p['rate']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        return Capabilities(entropy=True, fisher=True, k=True, smooth=True)

    def center(self, p: Mapping[str, float]) -> float:
        return p["loc"]

    def _log_z(self, p: Mapping[str, float]) -> float:
        a, c = p["a"], p["rate"]
        # scaled Bessel kve = K_1(z)*exp(z) avoids underflow for large c*a
        return math.log(2 * a * float(special.kve(1, c * a))) - c * a

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        a, c = p["a"], p["rate"]
        r = np.hypot(a, x - p["loc"])
        return -c * r - self._log_z(p)

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        a, c = p["a"], p["rate"]
        u = x - p["loc"]
        return c * u / np.hypot(a, u)

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        a, c = p["a"], p["rate"]
        u = x - p["loc"]
        return c * a * a / np.hypot(a, u) ** 3

    def _tail_bound(self, p: Mapping[str, float], u: float) -> float:
        # For t >= u > 0: r(t) >= r(u) + (t-u)*u/r(u), so the tail mass is
        # bounded by exp(-c*r(u)) * r(u) / (c*u*Z).
        a, c = p["a"], p["rate"]
        r = math.hypot(a, u)
        return math.exp(-c * r + c * a) / (2 * a * float(special.kve(1, c * a))) * r / (c * u)

    def _tail_quantile(self, p: Mapping[str, float], eps: float) -> float:
        a = p["a"]
        lo, hi = a * 0.25, 10.0
        while self._tail_bound(p, hi) > eps:
            hi *= 2
            _require(hi < 1e9, "smoothed_laplace tail bound did not converge")
        return float(brentq(lambda u: math.log(self._tail_bound(p, u)) - math.log(eps), lo, hi))

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] - self._tail_quantile(p, eps)

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] + self._tail_quantile(p, eps)

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        a, c = p["a"], p["rate"]
        var = (a / c) * float(special.kve(2, c * a) / special.kve(1, c * a))
        return p["loc"], var

    def affine(self, p: Mapping[str, float], a_s: float, b: float) -> dict[str, float]:
        return {"a": a_s * p["a"], "rate": p["rate"] / a_s, "loc": a_s * p["loc"] + b}


class _Uniform:
    required = ("alpha", "beta")
    default_resolution = DEFAULT_RESOLUTION
    default_coverage = DEFAULT_COVERAGE
    symmetric = False
    pad_nodes = 8

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("uniform", p, self.required)
        _require(p["beta"] > p["alpha"], "uniform needs beta > alpha")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        # density is discontinuous: I_L infinite, psi'' a pair of walls
        return Capabilities(entropy=True, fisher=False, k=False, smooth=False)

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        c = -math.log(p["beta"] - p["alpha"])
        out = np.full_like(np.asarray(x, dtype=float), -np.inf)
        inside = (x > p["alpha"]) & (x < p["beta"])
        out[inside] = c
        return out

    psi1 = None
    psi2 = None

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["alpha"]

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["beta"]

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        a, b = p["alpha"], p["beta"]
        return (a + b) / 2, (b - a) ** 2 / 12

    def affine(self, p: Mapping[str, float], a_s: float, b: float) -> dict[str, float]:
        return {"alpha": a_s * p["alpha"] + b, "beta": a_s * p["beta"] + b}

    def values_on(self, p: Mapping[str, float], grid: Grid) -> np.ndarray:
        """Cell-average sampling of the indicator: a node's value is the
        density's mean over the node's cell [x-h/2, x+h/2].  The trapezoid
        rule is then exact for mass and entropy, and discrete convolution
        reproduces the exact convolution of the cell interpretation."""
        a, b = p["alpha"], p["beta"]
        c = 1.0 / (b - a)
        x = grid.nodes
        h = grid.spacing
        lo = np.maximum(x - h / 2, a)
        hi = np.minimum(x + h / 2, b)
        return c * np.clip(hi - lo, 0.0, h) / h


class _Laplace:
    required = ("loc", "b")
    # trapezoid mass error for e^(-|x|/b) is ~ h^2/6 regardless of coverage;
    # this resolution keeps it (and the Fisher identity error, same order)
    # inside the 1e-8 mass invariant with margin
    default_resolution = 262145
    default_coverage = 1e-10
    symmetric = True

    def validate(self, p: Mapping[str, float]) -> None:
        _check_keys("laplace", p, self.required)
        _require(p["b"] > 0, f"laplace b must be > 0, got {p['b']}")

    def caps(self, p: Mapping[str, float]) -> Capabilities:
        # psi'' is a point mass at the kink: K is undefined
        return Capabilities(entropy=True, fisher=True, k=False, smooth=False)

    def center(self, p: Mapping[str, float]) -> float:
        return p["loc"]

    def logpdf(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        b = p["b"]
        return -np.abs(x - p["loc"]) / b - math.log(2 * b)

    def psi1(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        # one-sided limit +1/b at the kink node keeps the Fisher integrand
        # psi1^2 * f equal to its continuous extension f/b^2 there
        b = p["b"]
        return np.where(x - p["loc"] >= 0, 1.0, -1.0) / b

    def psi2(self, p: Mapping[str, float], x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def lower_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] + p["b"] * math.log(2 * eps)

    def upper_x(self, p: Mapping[str, float], eps: float) -> float:
        return p["loc"] - p["b"] * math.log(2 * eps)

    def mean_var(self, p: Mapping[str, float]) -> tuple[float, float]:
        b = p["b"]
        return p["loc"], 2 * b * b

    def affine(self, p: Mapping[str, float], a_s: float, b: float) -> dict[str, float]:
        return {"loc": a_s * p["loc"] + b, "b": a_s * p["b"]}


_HANDLERS = {
    "gaussian": _Gaussian(),
    "logistic": _Logistic(),
    "gumbel": _Gumbel(),
    "gamma": _Gamma(),
    "smoothed_laplace": _SmoothedLaplace(),
    "uniform": _Uniform(),
    "laplace": _Laplace(),
}


def _handler(spec: FamilySpec):
    return _HANDLERS[spec.family]


def _check_keys(name: str, p: Mapping[str, float], required: tuple[str, ...]) -> None:
    missing = [k for k in required if k not in p]
    extra = [k for k in p if k not in required]
    _require(not missing, f"{name} missing params {missing}")
    _require(not extra, f"{name} got unexpected params {extra}")


# ---------------------------------------------------------------------------
# isotropic constructors

def smoothed_laplace_unit_rate(a: float) -> float:
    """Rate c making smoothed_laplace(a, c) have unit variance."""
    _require(a > 0, f"smoothed_laplace a must be > 0, got {a}")
    h = _HANDLERS["smoothed_laplace"]
    f = lambda c: h.mean_var({"a": a, "rate": c, "loc": 0.0})[1] - 1.0
    return float(brentq(f, 1e-6, 1e6))


def isotropic_spec(family: str, **kw: float) -> FamilySpec:
    """The standard zero-mean unit-variance member of each family."""
    if family == "gaussian":
        return FamilySpec.make("gaussian", mean=0.0, var=1.0)
    if family == "logistic":
        return FamilySpec.make("logistic", loc=0.0, scale=math.sqrt(3) / math.pi)
    if family == "gumbel":
        beta = math.sqrt(6) / math.pi
        return FamilySpec.make("gumbel", beta=beta, loc=-EULER_GAMMA * beta)
    if family == "gamma":
        shape = float(kw.get("shape", 4.0))
        scale = 1.0 / math.sqrt(shape)
        return FamilySpec.make("gamma", shape=shape, scale=scale, loc=-shape * scale)
    if family == "smoothed_laplace":
        a = float(kw.get("a", 0.5))
        return FamilySpec.make("smoothed_laplace", a=a, rate=smoothed_laplace_unit_rate(a), loc=0.0)
    if family == "uniform":
        r = math.sqrt(3)
        return FamilySpec.make("uniform", alpha=-r, beta=r)
    if family == "laplace":
        return FamilySpec.make("laplace", loc=0.0, b=1.0 / math.sqrt(2))
    raise ValidationError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# density construction

def default_resolution(spec: FamilySpec) -> int:
    """Node count a family needs for reporting-grade quadrature."""
    return _handler(spec).default_resolution


def family_values_on(spec: FamilySpec, grid: Grid) -> np.ndarray:
    """Evaluate a family density on an arbitrary grid (exact resampling)."""
    h = _handler(spec)
    p = spec.as_dict()
    if hasattr(h, "values_on"):
        return h.values_on(p, grid)
    return np.exp(h.logpdf(p, grid.nodes))


def build_density(
    spec: FamilySpec,
    resolution: Optional[int] = None,
    coverage: Optional[float] = None,
) -> GridDensity:
    """Sample the family analytically on a grid covering its [eps, 1-eps]
    quantile range; tail_mass_bound comes from the analytic CDF."""
    h = _handler(spec)
    p = spec.as_dict()
    res = h.default_resolution if resolution is None else int(resolution)
    eps = h.default_coverage if coverage is None else float(coverage)
    _require(0 < eps <= 1e-6, f"coverage quantile must be in (0, 1e-6], got {eps}")
    n = odd_count(res)

    if spec.family == "uniform":
        a, b = p["alpha"], p["beta"]
        n_in = n - 2 * h.pad_nodes
        _require(n_in >= 3, "uniform needs resolution >= 19")
        spacing = (b - a) / n_in
        grid = Grid(origin=a + spacing / 2 - h.pad_nodes * spacing, spacing=spacing, count=n)
        values = h.values_on(p, grid)
        tail = 0.0
    else:
        if getattr(h, "symmetric", False):
            center = h.center(p)
            half = h.upper_x(p, eps) - center
            spacing = 2 * half / (n - 1)
            grid = Grid(origin=center - half, spacing=spacing, count=n)
        else:
            lo = h.lower_x(p, eps)
            hi = h.upper_x(p, eps)
            grid = Grid(origin=lo, spacing=(hi - lo) / (n - 1), count=n)
        values = np.exp(h.logpdf(p, grid.nodes))
        tail = 2 * eps

    return GridDensity(
        grid=grid,
        values=values,
        tail_mass_bound=tail,
        family=spec,
        caps=h.caps(p),
    )


def affine_density(d: GridDensity, a: float, b: float) -> GridDensity:
    """Exact law of a*X + b (a > 0): the grid maps affinely and values scale
    by 1/a, so no interpolation is ever involved."""
    _require(a > 0, f"affine scale must be > 0, got {a}")
    grid = Grid(origin=a * d.grid.origin + b, spacing=a * d.grid.spacing, count=d.grid.count)
    fam = None
    if d.family is not None:
        h = _handler(d.family)
        fam = FamilySpec(d.family.family, tuple(sorted(h.affine(d.family.as_dict(), a, b).items())))
    return GridDensity(
        grid=grid,
        values=d.values / a,
        tail_mass_bound=d.tail_mass_bound,
        family=fam,
        caps=d.caps,
    )


def scale_density(d: GridDensity, s: float) -> GridDensity:
    """Law of s*X for s > 0."""
    return affine_density(d, s, 0.0)


def isotropize(d: GridDensity) -> GridDensity:
    """Exact affine pushforward (X - m)/s to zero mean, unit variance.

    Families use their analytic moments (the output is then exactly the
    isotropic member); otherwise quadrature moments are used.
    """
    if d.family is not None:
        m, v = _handler(d.family).mean_var(d.family.as_dict())
    else:
        m, v, _ = moments(d)
    if not (np.isfinite(v) and v > 0):
        raise ValidationError(f"cannot isotropize: variance {v!r}")
    s = math.sqrt(v)
    return affine_density(d, 1.0 / s, -m / s)


def density_from_logpdf(
    logpdf: np.ndarray | None,
    grid: Grid,
    values: Optional[np.ndarray] = None,
    tail_mass_bound: float = 0.0,
    caps: Optional[Capabilities] = None,
) -> GridDensity:
    """Wrap raw samples as a GridDensity (negative controls, ad-hoc tests).

    The result carries no family, so all derivative work goes through the
    finite-difference path.
    """
    if values is None:
        values = np.exp(np.asarray(logpdf, dtype=float))
    return GridDensity(
        grid=grid,
        values=np.asarray(values, dtype=float),
        tail_mass_bound=tail_mass_bound,
        family=None,
        caps=caps if caps is not None else Capabilities(entropy=True, fisher=True, k=True, smooth=True),
    )


# ---------------------------------------------------------------------------
# pointwise evaluation off the grid

def evaluate_density(d: GridDensity, x: np.ndarray) -> np.ndarray:
    """Density values at arbitrary points: analytic for families, cubic
    interpolation of log f otherwise (zero outside the window)."""
    x = np.asarray(x, dtype=float)
    if d.family is not None:
        return np.exp(_handler(d.family).logpdf(d.family.as_dict(), x))
    from scipy.interpolate import CubicSpline

    floor = max(d.floor_abs(), 5e-324)
    spline = CubicSpline(d.grid.nodes, np.log(np.maximum(d.values, floor)), extrapolate=False)
    return np.exp(np.nan_to_num(spline(x), nan=-np.inf))


def evaluate_psi2(d: GridDensity, x: np.ndarray) -> np.ndarray:
    """psi'' at arbitrary points: analytic for families with closed forms,
    cubic interpolation over the trusted band otherwise (zero far outside,
    where any weight multiplying it vanishes)."""
    x = np.asarray(x, dtype=float)
    pot = potential_of(d)
    if pot.analytic:
        return np.asarray(_handler(d.family).psi2(d.family.as_dict(), x), dtype=float)
    from scipy.interpolate import CubicSpline

    mask = pot.trust_mask
    _require(int(mask.sum()) >= 4, "trusted band too small to interpolate psi''")
    spline = CubicSpline(d.grid.nodes[mask], pot.psi2[mask], extrapolate=False)
    return np.nan_to_num(spline(x), nan=0.0)


# ---------------------------------------------------------------------------
# potentials

def potential_of(d: GridDensity) -> Potential:
    """psi = -log(max(f, floor)) with derivatives.

    Families with closed forms get analytic psi1/psi2 (and the trusted
    region is simply the above-floor band); finite-difference densities are
    additionally restricted to nodes comfortably above the truncation-noise
    scale, eroded by one node so no trusted stencil touches untrusted data.
    """

    def compute() -> Potential:
        f = d.values
        fmax = float(f.max())
        floor = DENSITY_FLOOR_REL * fmax
        psi = -np.log(np.maximum(f, floor))
        valid = f >= floor
        h = d.grid.spacing
        psi1_fd = central_diff1(psi, h)
        psi2_fd = central_diff2(psi, h)

        handler = _handler(d.family) if d.family is not None else None
        analytic = handler is not None and getattr(handler, "psi1", None) is not None
        if analytic:
            p = d.family.as_dict()
            psi1 = np.asarray(handler.psi1(p, d.grid.nodes), dtype=float)
            psi2 = np.asarray(handler.psi2(p, d.grid.nodes), dtype=float)
            trust = valid.copy()
        else:
            psi1 = psi1_fd
            psi2 = psi2_fd
            core = valid & (f >= FD_TRUST_REL * fmax)
            trust = core.copy()
            trust[1:] &= core[:-1]
            trust[:-1] &= core[1:]
        return Potential(
            grid=d.grid,
            psi=psi,
            psi1=psi1,
            psi2=psi2,
            psi1_fd=psi1_fd,
            psi2_fd=psi2_fd,
            valid_mask=valid,
            trust_mask=trust,
            analytic=analytic,
        )

    return d.memo("potential", compute)
