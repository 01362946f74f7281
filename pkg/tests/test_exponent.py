import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcconverse import (
    ChannelPair,
    ExponentParams,
    HyperplaneParams,
    JointDistUXYZ,
    OptimizerBudget,
    convexity_check,
    exponent,
    exponent_at_params,
    hyperplane_value,
    omega_functional,
    omega_max,
    omega_slope_at_zero,
    omega_weight,
)
from bcconverse.channels import bsc, identity, structured_joint, useless
from bcconverse.exponent import (
    ExponentSearch,
    OmegaResult,
    _Tilt,
    lattice_size,
    omega_curvature,
    omega_is_bounded,
    omega_weights,
    slope_decomposition,
)
from bcconverse.probability import divergence_y_given_x

from oracles import info_triple, omega_point, omega_sum

TOL = 1e-10

BSC_PAIR = ChannelPair.from_arrays(bsc(0.1), bsc(0.2))
ID_USELESS = ChannelPair.from_arrays(identity(), useless())
UNIFORM = ChannelPair.from_arrays(useless(), useless())


def random_joint(rng, nu=3):
    q = rng.random((nu, 2, 2, 2)) ** 2
    return q / q.sum()


# -- tilted weight -------------------------------------------------------

def test_weight_structured_constant_u_useless_w2():
    ep = ExponentParams(0.7, 1.3, 0.6, 0.3, 1.0)
    q = structured_joint(np.array([[0.3, 0.7]]), ID_USELESS)
    qy = q.sum(axis=(0, 1, 3))
    for x, z in itertools.product(range(2), range(2)):
        want = (0.6 * 0.3 + 0.4) * math.log(1.0 / qy[x])
        assert abs(omega_weight(q, ID_USELESS, ep, (0, x, x, z)) - want) <= TOL


def test_weight_uniform_joint_uniform_channels_is_zero():
    q = np.full((3, 2, 2, 2), 1 / 24)
    ep = ExponentParams(2.0, 0.5, 0.4, 0.1, 1.0)
    assert np.max(np.abs(omega_weights(q, UNIFORM, ep))) <= TOL


def test_weight_random_joint_matches_conditional_ratio_form():
    rng = np.random.default_rng(0)
    w1, w2 = bsc(0.1), bsc(0.2)
    for _ in range(5):
        q = random_joint(rng)
        a, b, g, m = rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(), rng.uniform(0, 0.5)
        ep = ExponentParams(a, b, g, m, 1.0)
        got = omega_weights(q, BSC_PAIR, ep)
        for pt in itertools.product(range(3), range(2), range(2), range(2)):
            assert abs(got[pt] - omega_point(q, w1, w2, a, b, g, m, pt)) <= 1e-9


def test_weight_at_zero_mass_outcome_rejected():
    q = np.zeros((1, 2, 2, 2))
    q[0, 0, 0, 0] = 1.0
    with pytest.raises(ValueError, match="zero-mass"):
        omega_weight(q, BSC_PAIR, ExponentParams(1, 1, 0.5, 0.5, 1.0), (0, 1, 1, 1))


# -- moment functional ---------------------------------------------------

def test_functional_at_lambda_zero_is_zero():
    q = random_joint(np.random.default_rng(1))
    assert omega_functional(q, BSC_PAIR, ExponentParams(1, 1, 0.5, 0.2, 0.0)) == 0.0


def test_functional_on_structured_joint_ignores_alpha_beta():
    r = np.array([[0.2, 0.1], [0.3, 0.4], [0.0, 0.0]])
    q = structured_joint(r, BSC_PAIR)
    vals = [omega_functional(q, BSC_PAIR, ExponentParams(a, b, 0.7, 0.2, 0.5)) for a, b in [(0.1, 5), (3, 3), (40, 0.01)]]
    assert max(vals) - min(vals) <= TOL


def test_functional_random_joint_matches_direct_sum():
    rng = np.random.default_rng(2)
    w1, w2 = bsc(0.1), bsc(0.2)
    for _ in range(5):
        q = random_joint(rng)
        args = (0.8, 1.7, 0.35, 0.45)
        got = omega_functional(q, BSC_PAIR, ExponentParams(*args, 0.5))
        assert abs(got - omega_sum(q, w1, w2, *args, 0.5)) <= 1e-9


def test_functional_rejects_joint_without_live_mass():
    q = np.zeros((1, 2, 2, 2))
    q[0, 0, 1, 0] = 1.0
    with pytest.raises(ValueError, match="no mass"):
        omega_functional(q, ID_USELESS, ExponentParams(1, 1, 0.5, 0.5, 1.0))


def test_functional_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        omega_functional(np.full((1, 3, 2, 2), 1 / 12), BSC_PAIR, ExponentParams(1, 1, 0.5, 0.5, 1.0))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    params = [ExponentParams(0.5, 2.0, 0.3, 0.4, 0.7), ExponentParams(0.1, 0.1, 1.0, 0.0, 2.0)]
    tilt = _Tilt(BSC_PAIR, params, 3)
    for j in range(2):
        q = random_joint(rng).ravel()
        _, g = tilt.value_and_grad(q[None], np.array([j]))
        for _ in range(5):
            # relative perturbations keep tiny atoms positive; the sum stays 1
            n = rng.normal(size=q.size)
            d = q * (n - q @ n)
            h = 1e-6
            fp = tilt.value((q + h * d).reshape(1, 3, 2, 2, 2), np.array([j]))[0]
            fm = tilt.value((q - h * d).reshape(1, 3, 2, 2, 2), np.array([j]))[0]
            assert abs((fp - fm) / (2 * h) - g[0] @ d) <= 1e-6 * max(1.0, abs(g[0] @ d))


# -- slope ---------------------------------------------------------------

def test_slope_on_structured_joint_is_weighted_information():
    r = np.array([[0.25, 0.05], [0.1, 0.6], [0.0, 0.0]])
    q = structured_joint(r, BSC_PAIR)
    g, m = 0.65, 0.3
    a, b, c = info_triple(q)
    want = g * (m * a + (1 - m) * b) + (1 - g) * c
    assert abs(omega_slope_at_zero(q, BSC_PAIR, ExponentParams(2, 3, g, m)) - want) <= TOL


def test_slope_uniform_everything_is_zero():
    q = np.full((3, 2, 2, 2), 1 / 24)
    assert abs(omega_slope_at_zero(q, UNIFORM, ExponentParams(1, 1, 0.5, 0.5))) <= TOL


def test_slope_matches_finite_difference():
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = random_joint(rng)
        ep = ExponentParams(rng.uniform(0.1, 4), rng.uniform(0.1, 4), rng.uniform(), rng.uniform(0, 0.5))
        fd = omega_functional(q, BSC_PAIR, ep.with_lam(1e-6)) / 1e-6
        assert abs(fd - omega_slope_at_zero(q, BSC_PAIR, ep)) <= 1e-4


def test_slope_decomposition_terms_sum_to_exact_slope():
    rng = np.random.default_rng(5)
    q = random_joint(rng)
    ep = ExponentParams(1.5, 0.5, 0.4, 0.2)
    dec = slope_decomposition(q, BSC_PAIR, ep)
    assert abs(sum(dec.terms.values()) - dec.exact) <= 1e-9
    want_gap = -(1 - ep.gamma) * divergence_y_given_x(JointDistUXYZ(q), BSC_PAIR.w1)
    assert abs(dec.difference - want_gap) <= 1e-9
    assert dec.difference < 0


def test_slope_decomposition_forms_agree_when_gamma_is_one():
    q = random_joint(np.random.default_rng(6))
    dec = slope_decomposition(q, BSC_PAIR, ExponentParams(1.0, 1.0, 1.0, 0.3))
    assert abs(dec.difference) <= TOL


# -- convexity in lambda -------------------------------------------------

def test_convexity_check_passes_on_random_joints():
    rng = np.random.default_rng(7)
    grid = np.geomspace(1e-3, 4.0, 12)
    for _ in range(10):
        rep = convexity_check(random_joint(rng), BSC_PAIR, ExponentParams(1.0, 2.0, 0.5, 0.25), grid)
        assert rep.passed and not rep.violations
        assert np.all(rep.curvature >= 0)


def test_point_mass_gives_linear_functional():
    q = np.zeros((1, 2, 2, 2))
    q[0, 1, 1, 0] = 1.0
    ep = ExponentParams(1.0, 1.0, 0.5, 0.25)
    rep = convexity_check(q, BSC_PAIR, ep, np.linspace(0.1, 2.0, 7))
    assert np.max(np.abs(rep.second_differences)) <= 1e-9
    assert np.max(np.abs(rep.curvature)) <= TOL


def test_curvature_matches_second_difference():
    rng = np.random.default_rng(8)
    q = random_joint(rng)
    ep = ExponentParams(0.6, 0.9, 0.8, 0.1, 0.5)
    h = 1e-4
    f = [omega_functional(q, BSC_PAIR, ep.with_lam(0.5 + k * h)) for k in (-1, 0, 1)]
    fd = (f[0] - 2 * f[1] + f[2]) / h**2
    assert abs(fd - omega_curvature(q, BSC_PAIR, ep)) <= 1e-4 * max(1.0, abs(fd))


def test_convexity_needs_five_points():
    with pytest.raises(ValueError):
        convexity_check(np.full((1, 2, 2, 2), 1 / 8), BSC_PAIR, ExponentParams(1, 1, 0, 0), [0.1, 0.2, 0.3])


# -- boundedness ---------------------------------------------------------

def test_large_lambda_times_alpha_plus_beta_is_unbounded():
    shape = (3, 2, 2, 2)
    assert not omega_is_bounded(ExponentParams(1.0, 1.0, 0.5, 0.25, 1.0), shape)
    assert omega_is_bounded(ExponentParams(1.0, 1.0, 0.5, 0.25, 0.25), shape)


def test_unbounded_parameters_blow_up_along_a_vanishing_atom():
    ep = ExponentParams(1.0, 1.0, 0.5, 0.25, 1.0)
    vals = []
    for eps in (1e-2, 1e-4, 1e-6, 1e-8):
        q = np.full((3, 2, 2, 2), 1.0)
        q[0, 0, 0, 0] = eps
        vals.append(omega_functional(q / q.sum(), BSC_PAIR, ep))
    assert all(b > a + 1.0 for a, b in zip(vals, vals[1:]))


def test_unbounded_result_reports_infinite_value_and_minus_infinite_exponent():
    ep = ExponentParams(4.0, 4.0, 0.5, 0.25, 1.0)
    om = omega_max(BSC_PAIR, ep)
    assert not om.bounded and om.value == math.inf
    assert exponent_at_params(0.5, 0.5, ep, om) == -math.inf


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([2.0**k for k in range(-6, 7, 2)]),
    st.sampled_from([2.0**k for k in range(-6, 7, 2)]),
    st.floats(0.0, 1.0),
    st.floats(0.0, 0.5),
    st.sampled_from([2.0**k for k in range(-10, 5, 2)]),
)
def test_bounded_parameters_are_not_exceeded_by_random_joints(a, b, g, m, lam):
    ep = ExponentParams(a, b, g, m, lam)
    if not omega_is_bounded(ep, (3, 2, 2, 2)):
        return
    rng = np.random.default_rng(9)
    om = omega_max(BSC_PAIR, ep, OptimizerBudget(starts=8, max_iter=500))
    for _ in range(20):
        q = rng.dirichlet(np.full(24, 0.5)).reshape(3, 2, 2, 2)
        assert omega_functional(q, BSC_PAIR, ep) <= om.value + 1e-9


# -- maximization over q -------------------------------------------------

def test_max_at_lambda_zero_is_zero():
    assert omega_max(BSC_PAIR, ExponentParams(1, 1, 0.5, 0.5, 0.0)).value == 0.0


def test_max_is_at_least_lambda_times_hyperplane_value():
    for g, m, lam in [(0.0, 0.0, 0.5), (0.5, 0.25, 0.1), (1.0, 0.5, 0.05)]:
        ep = ExponentParams(0.25, 0.25, g, m, lam)
        c, _ = hyperplane_value(HyperplaneParams(g, m), BSC_PAIR)
        assert omega_max(BSC_PAIR, ep).value >= lam * c - TOL


def _lattice_points(resolution):
    n = resolution
    bars = np.array(list(itertools.combinations(range(n + 7), 7)))
    edges = np.concatenate([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), n + 7)], axis=1)
    return (np.diff(edges, axis=1) - 1) / n


def _lattice_oracle(ch, a, b, g, m, lam, resolution):
    """Score every resolution-h point of the |U| = 1 joint simplex with
    conditional-ratio formulas (no shared code with the package)."""
    w1 = ch.w1.rows[None, :, :, None]
    w2 = ch.w2.rows[None, :, None, :]
    q = _lattice_points(resolution).reshape(-1, 2, 2, 2)  # point, x, y, z
    live = (q > 0) & (w1 > 0) & (w2 > 0)
    q_xz = q.sum(axis=2, keepdims=True)
    q_xy = q.sum(axis=3, keepdims=True)
    q_y = q.sum(axis=(1, 3), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        # with |U| = 1 the ratio q_{Z|U} / q_Z is identically 1
        om = (
            a * np.log(w1 * q_xz / q)
            + b * np.log(w2 * q_xy / q)
            + g * m * np.log(w1 / q_y)
            + (1 - g) * np.log(w1 / q_y)
        )
        terms = np.where(live, q * np.exp(lam * np.where(live, om, 0.0)), 0.0)
    totals = terms.reshape(len(q), -1).sum(axis=1)
    return float(np.log(totals[totals > 0]).max())


def test_max_with_trivial_auxiliary_beats_lattice_oracle():
    for g, lam in [(0.0, 0.25), (0.0, 0.5), (0.5, 0.25), (1.0, 0.5)]:
        ep = ExponentParams(0.25, 0.25, g, 0.25, lam)
        oracle = _lattice_oracle(ID_USELESS, 0.25, 0.25, g, 0.25, lam, 16)
        got = omega_max(ID_USELESS, ep, nu=1)
        assert got.bounded and math.isfinite(got.value)
        assert got.value >= oracle - 1e-9


def test_lattice_mode_is_flagged_and_not_worse():
    ep = ExponentParams(0.25, 0.25, 0.5, 0.25, 0.5)
    plain = omega_max(ID_USELESS, ep, nu=1)
    lat = omega_max(ID_USELESS, ep, nu=1, lattice_resolution=8)
    assert lat.certified and not plain.certified
    assert lat.value >= plain.value - 1e-9
    assert lattice_size(8, 8) == math.comb(15, 7)


# -- exponent at fixed parameters ----------------------------------------

def _fixed_omega(ep, value):
    return OmegaResult(value, JointDistUXYZ(np.full((1, 2, 2, 2), 1 / 8)), True, True, ep)


def test_exponent_at_origin_is_nonpositive():
    ep = ExponentParams(1, 1, 0.5, 0.25, 0.25)
    om = omega_max(BSC_PAIR, ep)
    assert exponent_at_params(0.0, 0.0, ep, om) == pytest.approx(-om.value / ep.denominator, abs=TOL)
    assert exponent_at_params(0.0, 0.0, ep, om) <= 0.0


def test_exponent_is_affine_in_rates():
    ep = ExponentParams(1.0, 2.0, 0.4, 0.3, 0.5)
    om = _fixed_omega(ep, 0.2)
    d = 0.013
    base = exponent_at_params(0.2, 0.1, ep, om)
    a1, a2 = ep.rate_coefficients
    assert abs(exponent_at_params(0.2 + d, 0.1, ep, om) - base - ep.lam * a1 * d / ep.denominator) <= 1e-14
    assert abs(exponent_at_params(0.2, 0.1 + d, ep, om) - base - ep.lam * a2 * d / ep.denominator) <= 1e-14


def test_exponent_vanishes_as_lambda_shrinks():
    vals = []
    for lam in (1e-1, 1e-3, 1e-5):
        ep = ExponentParams(1.0, 1.0, 0.5, 0.25, lam)
        vals.append(abs(exponent_at_params(0.6, 0.3, ep, omega_max(BSC_PAIR, ep))))
    assert vals[-1] <= 1e-4 and vals[0] > vals[-1]


def test_denominator_formula():
    ep = ExponentParams(2.0, 3.0, 0.5, 0.2, 0.1)
    assert ep.denominator == pytest.approx(1 + 0.1 * (1 + 2 + 3 + (2 - 0.6) * 0.5), abs=1e-15)


def test_mismatched_omega_rejected():
    ep = ExponentParams(1, 1, 0.5, 0.25, 0.5)
    with pytest.raises(ValueError, match="different parameters"):
        exponent_at_params(0.1, 0.1, ep, _fixed_omega(ep.with_lam(0.25), 0.0))


def test_parameter_ranges_validated():
    for bad in [(0, 1, 0.5, 0.2, 1), (1, 1, 1.5, 0.2, 1), (1, 1, 0.5, 0.6, 1), (1, 1, 0.5, 0.2, -1)]:
        with pytest.raises(ValueError):
            ExponentParams(*bad)


# -- outer search --------------------------------------------------------

SMALL = ExponentSearch(grid=(17, 9))


def test_exponent_at_origin_is_zero():
    assert exponent(0.0, 0.0, ID_USELESS, SMALL)[0] == 0.0


def test_exponent_deep_inside_is_zero():
    assert exponent(math.log(2) / 2, 0.0, ID_USELESS, SMALL)[0] <= 1e-4


def test_exponent_outside_is_positive_and_attained():
    f, ep = exponent(math.log(2) + 0.1, 0.0, ID_USELESS, SMALL)
    assert f > 1e-6
    om = omega_max(ID_USELESS, ep, OptimizerBudget(starts=32, max_iter=1000))
    # a fresh maximization can only find a larger moment value, hence a smaller exponent
    assert exponent_at_params(math.log(2) + 0.1, 0.0, ep, om) <= f + 1e-9


def test_exponent_grows_with_distance_outside():
    a = exponent(math.log(2) + 0.05, 0.0, ID_USELESS, SMALL)[0]
    b = exponent(math.log(2) + 0.2, 0.0, ID_USELESS, SMALL)[0]
    assert b > a > 0


def test_negative_rates_rejected():
    with pytest.raises(ValueError):
        exponent(-0.1, 0.0, ID_USELESS, SMALL)
