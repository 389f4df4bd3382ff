"""Scalar information functionals of one density.

Everything is computed against the Lebesgue reference (entropy, Fisher
information, the squared-Hessian average) and converted to the
Gaussian-reference quantities, so the classical identities

    D(X||G) = 0.5*log(2*pi*e) - Ent_L(X)
    I(X||G) = I_L(X) - 1
    K(X)    = K_L(X) - 2*I_L(X) + 1

act as cross-checks of the quadrature rather than definitions.  All
reported errors are the sum of a half-grid Richardson estimate, a tail
charge proportional to the truncated mass, and (where masks are involved)
a mask-leakage bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .families import potential_of
from .grids import (
    CapabilityError,
    GridDensity,
    StamlabError,
    ValidationError,
    _require,
    central_diff1_4th,
    integrate_with_err,
    require_isotropic,
    trapezoid,
)

GAUSS_ENTROPY = 0.5 * math.log(2 * math.pi * math.e)


@dataclass(frozen=True)
class Estimate:
    """A quadrature value with its error estimate."""

    value: float
    err: float

    def __iter__(self):
        yield self.value
        yield self.err


@dataclass(frozen=True)
class FunctionalReport:
    """All scalar functionals of one isotropic density.

    Fields whose capability flag is off hold nan and are marked False in
    finite_mask.  m_gauss = k_gauss + 2*rel_fisher by construction.
    """

    ent_L: float
    fisher_L: float
    rel_entropy: float
    rel_fisher: float
    k_L: float
    k_gauss: float
    m_gauss: float
    err: dict[str, float]
    finite_mask: dict[str, bool]


def _family_name(d: GridDensity) -> str:
    return d.family.family if d.family is not None else "grid density"


def _require_fisher(d: GridDensity) -> None:
    if not d.caps.fisher:
        raise CapabilityError(
            f"{_family_name(d)} is not Fisher-capable (capability matrix: the raw "
            "density is discontinuous, so I_L is infinite; smooth it with ou_evolve first)"
        )


def _require_k(d: GridDensity) -> None:
    if not d.caps.k:
        name = _family_name(d)
        if name == "laplace":
            why = "psi'' is a point mass at the kink, K is undefined; use smoothed_laplace"
        elif name == "gamma":
            why = "gamma needs shape >= 3 for finite K-related integrals"
        else:
            why = "the density is not twice differentiable"
        raise CapabilityError(f"{name} is not K-capable (capability matrix: {why})")


def _edge(a: np.ndarray) -> float:
    return float(max(abs(a[0]), abs(a[-1])))


def entropy_lebesgue(d: GridDensity) -> Estimate:
    """Differential entropy -integral(f log f), with 0*log 0 = 0."""
    f = d.values
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(f > 0, -f * np.log(np.where(f > 0, f, 1.0)), 0.0)
    _require(bool(np.all(np.isfinite(integrand))), "entropy integrand not finite")
    value, rich = integrate_with_err(integrand, d.grid.spacing)
    pot = potential_of(d)
    tail = d.tail_mass_bound * (_edge(pot.psi) + 2.0)
    return Estimate(value, rich + tail)


def fisher_lebesgue(d: GridDensity) -> Estimate:
    """I_L = integral (f')^2/f, computed as 4*integral((sqrt f)')^2.

    With analytic psi' this equals integral(psi'^2 f); the finite-difference
    path differentiates sqrt(f) (benign near the density floor) with a
    4th-order stencil so the derivative bias stays far below the quadrature
    error estimate.
    """
    _require_fisher(d)
    pot = potential_of(d)
    f = d.values
    h = d.grid.spacing
    if pot.analytic:
        integrand = pot.psi1 ** 2 * f
        edge_sq = _edge(pot.psi1) ** 2
    else:
        root1 = central_diff1_4th(np.sqrt(f), h)
        integrand = 4.0 * root1 ** 2
        edge_sq = _edge(pot.psi1_fd) ** 2
    value, rich = integrate_with_err(integrand, h)
    tail = d.tail_mass_bound * (edge_sq + 2.0)
    return Estimate(value, rich + tail)


def rel_entropy_gauss(d: GridDensity) -> Estimate:
    """D(X||G) = integral f log(f/gamma), checked against the entropy gap."""
    require_isotropic(d, what="rel_entropy_gauss input")
    f = d.values
    x = d.grid.nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.where(f > 0, np.log(np.where(f > 0, f, 1.0)), 0.0)
    integrand = f * (logf + x * x / 2 + 0.5 * math.log(2 * math.pi))
    value, rich = integrate_with_err(integrand, d.grid.spacing)
    pot = potential_of(d)
    tail = d.tail_mass_bound * (_edge(pot.psi) + _edge(x) ** 2 / 2 + 0.5 * math.log(2 * math.pi) + 2.0)
    est = Estimate(value, rich + tail)

    ent = entropy_lebesgue(d)
    # on the shared grid the two values differ by exactly
    # 0.5*(m2 - 1) + log(sqrt(2 pi))*(m0 - 1), so moment drift within the
    # isotropy gate is not an identity violation
    m0 = trapezoid(f, d.grid.spacing)
    m2 = trapezoid(x * x * f, d.grid.spacing)
    drift = 0.5 * abs(m2 - 1.0) + 0.5 * math.log(2 * math.pi) * abs(m0 - 1.0)
    gap = abs(est.value - (GAUSS_ENTROPY - ent.value))
    if gap > est.err + ent.err + drift:
        raise StamlabError(
            f"rel_entropy identity violated: direct {est.value!r} vs entropy gap "
            f"{GAUSS_ENTROPY - ent.value!r} (gap {gap:.3e} > err {est.err + ent.err + drift:.3e})"
        )
    return est


def rel_fisher_gauss(d: GridDensity) -> Estimate:
    """I(X||G) = integral (psi' - x)^2 f, checked against I_L - 1."""
    require_isotropic(d, what="rel_fisher_gauss input")
    _require_fisher(d)
    pot = potential_of(d)
    f = d.values
    x = d.grid.nodes
    h = d.grid.spacing
    if pot.analytic:
        integrand = (pot.psi1 - x) ** 2 * f
        edge_sq = (_edge(pot.psi1) + _edge(x)) ** 2
    else:
        # (psi' - x)*sqrt(f) = -(2*(sqrt f)' + x*sqrt f)
        root = np.sqrt(f)
        integrand = (2.0 * central_diff1_4th(root, h) + x * root) ** 2
        edge_sq = (_edge(pot.psi1_fd) + _edge(x)) ** 2
    value, rich = integrate_with_err(integrand, h)
    tail = d.tail_mass_bound * (edge_sq + 2.0)
    est = Estimate(value, rich + tail)

    fl = fisher_lebesgue(d)
    gap = abs(est.value - (fl.value - 1.0))
    if gap > est.err + fl.err:
        raise StamlabError(
            f"rel_fisher identity violated: direct {est.value!r} vs I_L - 1 = "
            f"{fl.value - 1.0!r} (gap {gap:.3e} > err {est.err + fl.err:.3e})"
        )
    return est


def _hessian_square(d: GridDensity, shift: float) -> Estimate:
    """integral (psi'' - shift)^2 f on trusted nodes, with mask-leak charge."""
    pot = potential_of(d)
    f = d.values
    h = d.grid.spacing
    trust = pot.trust_mask
    g = np.where(trust, pot.psi2 - shift, 0.0)
    integrand = g * g * f
    value, rich = integrate_with_err(integrand, h)
    sup_sq = float((g * g).max())
    leak = (trapezoid(np.where(trust, 0.0, f), h) + d.tail_mass_bound) * sup_sq
    err = rich + leak + d.tail_mass_bound * 2.0
    if not pot.analytic:
        # first-order sensitivity of the integrand to the FD bias in psi''
        fd = np.nan_to_num(pot.psi2_fd_err(), nan=0.0, posinf=0.0, neginf=0.0)
        bias = trapezoid(np.where(trust, 2.0 * np.abs(g) * fd, 0.0) * f, h)
        err += bias
    return Estimate(value, err)


def k_lebesgue(d: GridDensity) -> Estimate:
    """K_L = integral psi''^2 f on trusted nodes."""
    _require_k(d)
    return _hessian_square(d, 0.0)


def k_gauss(d: GridDensity) -> Estimate:
    """K = integral (psi'' - 1)^2 f, validated against K_L - 2 I_L + 1."""
    require_isotropic(d, what="k_gauss input")
    _require_k(d)
    _require_fisher(d)
    est = _hessian_square(d, 1.0)
    kl = k_lebesgue(d)
    fl = fisher_lebesgue(d)
    combined = est.err + kl.err + 2 * fl.err
    gap = abs(est.value - (kl.value - 2 * fl.value + 1.0))
    if gap > 10 * combined:
        raise StamlabError(
            f"k_gauss identity violated beyond 10x combined err: direct {est.value!r} "
            f"vs K_L - 2 I_L + 1 = {kl.value - 2 * fl.value + 1.0!r} "
            f"(gap {gap:.3e}, combined err {combined:.3e}); grid-resolution failure"
        )
    return est


def is_isotropic(d: GridDensity) -> bool:
    try:
        require_isotropic(d)
        return True
    except ValidationError:
        return False


def functional_report(d: GridDensity) -> FunctionalReport:
    """Compute every capable functional; incapable slots hold nan."""
    err: dict[str, float] = {}
    mask: dict[str, bool] = {}

    def run(name: str, capable: bool, op: Callable[[], Estimate]) -> float:
        mask[name] = capable
        if not capable:
            err[name] = math.nan
            return math.nan
        e = op()
        err[name] = e.err
        return e.value

    iso = is_isotropic(d)
    ent = run("ent_L", d.caps.entropy, lambda: entropy_lebesgue(d))
    fish = run("fisher_L", d.caps.fisher, lambda: fisher_lebesgue(d))
    rel_e = run("rel_entropy", iso, lambda: rel_entropy_gauss(d))
    rel_f = run("rel_fisher", iso and d.caps.fisher, lambda: rel_fisher_gauss(d))
    kl = run("k_L", d.caps.k, lambda: k_lebesgue(d))
    kg = run("k_gauss", iso and d.caps.k and d.caps.fisher, lambda: k_gauss(d))

    mask["m_gauss"] = mask["k_gauss"] and mask["rel_fisher"]
    if mask["m_gauss"]:
        m = kg + 2 * rel_f
        err["m_gauss"] = err["k_gauss"] + 2 * err["rel_fisher"]
    else:
        m = math.nan
        err["m_gauss"] = math.nan

    return FunctionalReport(
        ent_L=ent,
        fisher_L=fish,
        rel_entropy=rel_e,
        rel_fisher=rel_f,
        k_L=kl,
        k_gauss=kg,
        m_gauss=m,
        err=err,
        finite_mask=mask,
    )


@dataclass(frozen=True)
class PinskerCheck:
    l1: float
    l1_squared: float
    two_rel_entropy: float
    half_rel_entropy: float  # the constant as displayed in some references
    err: float

    @property
    def margin(self) -> float:
        return self.two_rel_entropy - self.l1_squared


def pinsker_check(d: GridDensity) -> PinskerCheck:
    """Total-variation test (integral |f - gamma|)^2 <= 2 D(X||G).

    Both orientations of the constant are surfaced; the standard one (2D on
    the right) is the asserted inequality.
    """
    require_isotropic(d, what="pinsker input")
    x = d.grid.nodes
    gamma = np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    l1, rich = integrate_with_err(np.abs(d.values - gamma), d.grid.spacing)
    # mass of either density outside the window is an L1 contribution
    gauss_tail = float(special.ndtr(x[0]) + special.ndtr(-x[-1]))
    l1_err = rich + d.tail_mass_bound + gauss_tail
    D = rel_entropy_gauss(d)
    return PinskerCheck(
        l1=l1,
        l1_squared=l1 * l1,
        two_rel_entropy=2 * D.value,
        half_rel_entropy=0.5 * D.value,
        err=2 * D.err + 2 * (l1 + l1_err) * l1_err,
    )
