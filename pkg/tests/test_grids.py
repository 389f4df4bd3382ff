"""Grid primitives: quadrature, potentials, derivative error estimates,
and the log-concavity detector."""
import math

import numpy as np
import pytest

from stamlab import (
    Grid,
    ValidationError,
    build_density,
    check_log_concave,
    density_from_logpdf,
    isotropic_spec,
    moments,
    potential_of,
)
from stamlab.grids import (
    central_diff1,
    central_diff2,
    integrate_with_err,
    odd_count,
    trapezoid,
    validate_mass,
)


def test_grid_nodes():
    g = Grid(-1.0, 0.25, 17)
    assert g.nodes[0] == -1.0
    assert g.nodes[-1] == pytest.approx(-1.0 + 0.25 * 16)
    assert g.count == 17


def test_grid_rejects_bad_fields():
    with pytest.raises(ValidationError):
        Grid(0.0, -0.1, 17)
    with pytest.raises(ValidationError):
        Grid(0.0, 0.1, 8)


def test_odd_count_rounds_up():
    assert odd_count(4096) == 4097
    assert odd_count(4097) == 4097
    assert odd_count(2048) == 2049


def test_trapezoid_exact_on_linear():
    x = np.linspace(0.0, 2.0, 33)
    assert trapezoid(3.0 * x + 1.0, x[1] - x[0]) == pytest.approx(8.0, abs=1e-14)


def test_integrate_with_err_brackets_true_error():
    # for a quadratic the trapezoid error is exactly h^2/12 (b-a) f'', so the
    # Richardson estimate (F_h - F_2h)/3 equals the true error exactly
    x = np.linspace(0.0, 1.0, 129)
    value, err = integrate_with_err(x * x, x[1] - x[0])
    assert abs(value - 1.0 / 3.0) == pytest.approx(err, rel=1e-10)


def test_validate_mass_rejects_unnormalized(gaussian):
    validate_mass(gaussian)
    bad = type(gaussian)(
        grid=gaussian.grid,
        values=gaussian.values * 1.01,
        tail_mass_bound=gaussian.tail_mass_bound,
        family=gaussian.family,
        caps=gaussian.caps,
    )
    with pytest.raises(ValidationError):
        validate_mass(bad)


def test_central_diff_orders():
    x = np.linspace(-1.0, 1.0, 201)
    h = x[1] - x[0]
    y = np.sin(x)
    assert np.abs(central_diff1(y, h)[1:-1] - np.cos(x)[1:-1]).max() < h * h
    assert np.abs(central_diff2(y, h)[1:-1] + np.sin(x)[1:-1]).max() < h * h


def test_potential_roundtrip(logistic):
    pot = potential_of(logistic)
    vals = np.exp(-pot.psi[pot.valid_mask])
    assert np.allclose(vals, logistic.values[pot.valid_mask], rtol=1e-12)


def test_psi_fd_err_boundary_convention(logistic):
    # the first/last two nodes carry no Richardson estimate; inf marks them
    pot = potential_of(logistic)
    for est in (pot.psi1_fd_err(), pot.psi2_fd_err()):
        assert np.isinf(est[:2]).all() and np.isinf(est[-2:]).all()
        inner = est[2:-2][pot.trust_mask[2:-2]]
        assert np.isfinite(inner[1:-1]).all()


def test_psi2_fd_halving_ratio():
    # second-order stencil: halving the spacing divides the error by ~4
    errs = {}
    for res in (2048, 4096):
        d = build_density(isotropic_spec("logistic"), resolution=res)
        pot = potential_of(d)
        band = np.abs(d.grid.nodes) <= 3.0
        errs[res] = float(np.abs(pot.psi2_fd - pot.psi2)[band].max())
    assert 3.5 <= errs[2048] / errs[4096] <= 4.5


def test_check_log_concave_accepts_gaussian(gaussian):
    rep = check_log_concave(potential_of(gaussian))
    assert rep.ok
    assert rep.worst >= -1e-9


def test_check_log_concave_accepts_gamma():
    d = build_density(isotropic_spec("gamma", shape=3.0))
    assert check_log_concave(potential_of(d)).ok


def test_check_log_concave_flags_two_bump_mixture():
    # equal-weight gaussian(+-3, 1) mixture: psi''(0) = -8 exactly
    grid = Grid(-9.0, 18.0 / 2048, 2049)
    x = grid.nodes
    f = (np.exp(-0.5 * (x - 3.0) ** 2) + np.exp(-0.5 * (x + 3.0) ** 2)) / (
        2.0 * math.sqrt(2.0 * math.pi)
    )
    d = density_from_logpdf(np.log(f), grid)
    rep = check_log_concave(potential_of(d))
    assert not rep.ok
    assert rep.worst == pytest.approx(-8.0, abs=5e-3)
    assert abs(rep.at) <= grid.spacing


@pytest.mark.parametrize(
    "name,mean_tol,var_tol",
    [("gaussian", 1e-9, 1e-8), ("uniform", 1e-9, 1e-7), ("gumbel", 1e-7, 1e-7)],
)
def test_moments(name, mean_tol, var_tol, request):
    d = request.getfixturevalue(name)
    mean, var, err = moments(d)
    assert abs(mean) <= mean_tol
    assert abs(var - 1.0) <= var_tol
    assert err >= 0.0
