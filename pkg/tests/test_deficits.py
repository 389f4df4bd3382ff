"""Convolution deficits, the Hessian lemma ladder, and the flow checks."""
import math

import numpy as np
import pytest

from stamlab import (
    CapabilityError,
    ValidationError,
    bbn_1d_check,
    debruijn_check,
    default_z_band,
    entropy_deficit,
    evaluate_psi2,
    info_deficit,
    last_lemma_check,
    lemma_L_and_L2,
    lemma_conditional_hessian,
    lemma_klebesgue,
    proof_chain_check,
    rescaled_convolve,
    two_bump_density,
)
from stamlab.grids import trapezoid


# -- deficits ---------------------------------------------------------------

def test_gaussian_pair_is_the_equality_case(gaussian):
    for lam in (0.1, 0.5, 0.9):
        ent = entropy_deficit(gaussian, gaussian, lam)
        fis = info_deficit(gaussian, gaussian, lam)
        for rep in (ent, fis):
            assert rep.bound_valid
            assert abs(rep.deficit) <= 1e-6
            assert abs(rep.bound) <= 1e-6
            assert abs(rep.margin) <= 1e-6


def test_lambda_endpoints_are_trivial(uniform, logistic):
    for lam in (0.0, 1.0):
        rep = entropy_deficit(uniform, logistic, lam)
        assert abs(rep.deficit) <= 1e-14
        assert rep.bound == 0.0
        assert rep.margin == rep.deficit


@pytest.mark.parametrize("lam", [0.1, 0.5])
def test_bounds_hold_on_mixed_pair(uniform, logistic, lam):
    ent = entropy_deficit(uniform, logistic, lam)
    assert ent.bound_valid and ent.presmooth_t == 0.0
    assert ent.deficit > 0.0
    assert ent.margin >= -1e-5
    fis = info_deficit(uniform, logistic, lam)
    assert fis.bound_valid
    assert fis.presmooth_t == 1e-3
    assert fis.margin >= -1e-5


def test_swap_symmetry(uniform, logistic):
    a = entropy_deficit(uniform, logistic, 0.3)
    b = entropy_deficit(logistic, uniform, 0.7)
    assert abs(a.deficit - b.deficit) <= 2.0 * (a.err + b.err)


def test_iid_lambda_symmetry(logistic):
    a = info_deficit(logistic, logistic, 0.25)
    b = info_deficit(logistic, logistic, 0.75)
    assert abs(a.deficit - b.deficit) <= 2.0 * (a.err + b.err)


def test_two_bump_gets_no_bound(logistic):
    bump = two_bump_density()
    rep = entropy_deficit(bump, logistic, 0.5)
    assert not rep.bound_valid
    assert math.isnan(rep.bound) and math.isnan(rep.margin)
    assert math.isnan(rep.c0) and math.isnan(rep.c1)
    # Shannon-Stam needs no log-concavity
    assert rep.deficit >= -rep.err


def test_lambda_validation(uniform, logistic):
    with pytest.raises(ValidationError):
        entropy_deficit(uniform, logistic, -0.2)
    with pytest.raises(ValidationError):
        info_deficit(uniform, logistic, 1.0001)


# -- pointwise Hessian lemma --------------------------------------------------

def test_conditional_hessian_gaussian_equality(gaussian):
    rep = lemma_conditional_hessian(gaussian, gaussian, 0.5)
    assert rep.passed
    assert np.abs(rep.extras["margins"]).max() <= 1e-6


def test_conditional_hessian_mixed_pair(logistic, smoothed_laplace):
    rep = lemma_conditional_hessian(logistic, smoothed_laplace, 0.3)
    assert rep.passed
    assert rep.extras["z"].size >= 8


def test_conditional_hessian_custom_z(gaussian):
    rep = lemma_conditional_hessian(gaussian, gaussian, 0.5, z_nodes=np.array([0.0, 0.5]))
    assert rep.passed and rep.lhs.size == 2


def test_conditional_hessian_input_gates(uniform, logistic, gaussian):
    with pytest.raises(CapabilityError):
        lemma_conditional_hessian(uniform, logistic, 0.5)
    with pytest.raises(ValidationError):
        lemma_conditional_hessian(gaussian, gaussian, 0.0)
    with pytest.raises(ValidationError):
        lemma_conditional_hessian(gaussian, gaussian, 0.5, z_nodes=np.array([50.0]))
    with pytest.raises(ValidationError):
        default_z_band(gaussian, q=0.7)


# -- quadratic-mean lemmas -----------------------------------------------------

def test_klebesgue_iid_rhs_is_curvature_variance(logistic):
    lam = 0.3
    rep = lemma_klebesgue(logistic, logistic, lam)
    assert rep.passed
    # for iid inputs the right side collapses to 2 lam(1-lam) var(psi'')
    x = logistic.grid.nodes
    f = logistic.values
    h = logistic.grid.spacing
    p2 = evaluate_psi2(logistic, x)
    var = trapezoid(p2 * p2 * f, h) - trapezoid(p2 * f, h) ** 2
    assert rep.rhs[0] == pytest.approx(2.0 * lam * (1.0 - lam) * var, rel=1e-6)


def test_klebesgue_gaussian_pair_is_tight(gaussian):
    rep = lemma_klebesgue(gaussian, gaussian, 0.5)
    assert rep.passed
    assert abs(rep.worst_margin) <= 1e-6


def test_L_and_L2_order_and_identity(logistic, smoothed_laplace):
    rep = lemma_L_and_L2(logistic, smoothed_laplace, 0.5)
    assert rep.passed
    assert rep.extras["order_margin"] >= 0.0
    # the stronger right side L leaves the smaller margin
    assert rep.extras["margin_l2"] >= rep.extras["margin_l"]
    assert abs(rep.extras["identity_gap"]) <= 10.0 * (rep.extras["identity_err"] + 1e-12)


def test_L_and_L2_needs_isotropy(logistic):
    from stamlab import scale_density

    with pytest.raises(ValidationError):
        lemma_L_and_L2(scale_density(logistic, 2.0), logistic, 0.5)


# -- flow checks ----------------------------------------------------------------

def test_debruijn_fixed_step_ratio(uniform):
    rep = debruijn_check(uniform, [0.5], adaptive=False)
    assert rep.passed
    assert rep.extras["baseline_t"] == 0.5
    assert rep.extras["step_used"][0] == pytest.approx(0.01)
    assert 3.5 <= rep.extras["ratio_entropy"][0] <= 4.5


def test_debruijn_smooth_start(logistic):
    rep = debruijn_check(logistic, [0.25, 1.0])
    assert rep.passed
    assert rep.extras["baseline_t"] == 0.0
    assert (rep.extras["decay_margins"] > -1e-6).all()


def test_debruijn_time_grid_gates(uniform, logistic):
    with pytest.raises(ValidationError):
        debruijn_check(uniform, [0.01])  # needs t > h with no t=0 data
    with pytest.raises(ValidationError):
        debruijn_check(logistic, [0.005])


def test_fisher_flow_gaussian_pair_is_flat(gaussian):
    rep = last_lemma_check(gaussian, gaussian, 0.5, [0.3], with_integral=False)
    assert rep.passed
    assert np.abs(rep.extras["margins"]).max() <= 1e-6


def test_fisher_flow_pointwise(uniform, logistic):
    rep = last_lemma_check(uniform, logistic, 0.5, [0.3], with_integral=False)
    assert rep.passed
    assert rep.extras["presmooth_t"] == 1e-3
    assert "integral_rel_gap" not in rep.extras


def test_proof_chain_rebuilds_entropy_bound(uniform, logistic):
    rep = proof_chain_check(uniform, logistic, 0.5)
    assert rep.passed
    assert rep.extras["rel_gap"] <= 0.01


def test_proof_chain_rejects_two_bump(logistic):
    with pytest.raises(ValidationError):
        proof_chain_check(two_bump_density(), logistic, 0.5)


# -- entropy jump -----------------------------------------------------------------

def test_entropy_jump_gaussian(gaussian):
    rep = bbn_1d_check(gaussian)
    assert rep.passed
    assert abs(rep.worst_margin) <= 1e-6


@pytest.mark.parametrize("name", ["uniform", "logistic"])
def test_entropy_jump_strict_for_non_gaussian(name, request):
    rep = bbn_1d_check(request.getfixturevalue(name))
    assert rep.passed
    assert rep.worst_margin > 0.0


def test_entropy_jump_needs_isotropy(logistic):
    from stamlab import scale_density

    with pytest.raises(ValidationError):
        bbn_1d_check(scale_density(logistic, 1.4))
