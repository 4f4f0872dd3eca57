import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltadesign import (DesignSpace, DiscriminationProblem, ExactDesign, InvalidArgument,
                         NotFound, builtin_pair, custom_model, encompassing_mean, get_model,
                         mean_vector, model_names)
from deltadesign.models import (ENZYME_SE0, ENZYME_SE1, ENZYME_THETA0, ENZYME_THETA1,
                                NumericDomainError)
from oracles import central_difference


SAMPLERS = {
    "linear": (lambda r: r.uniform(-3, 3, 1), lambda r: r.uniform(-2, 2, (1, 1))),
    "quadratic": (lambda r: r.uniform(-3, 3, 1), lambda r: r.uniform(-2, 2, (1, 1))),
    "exponential": (lambda r: r.uniform(-2, 2, 1), lambda r: r.uniform(0.5, 2, (1, 1))),
    "competitive": (lambda r: np.asarray(ENZYME_THETA0) * r.uniform(0.5, 1.5, 3),
                    lambda r: np.column_stack([r.uniform(0, 30, 1), r.uniform(0, 40, 1)])),
    "noncompetitive": (lambda r: np.asarray(ENZYME_THETA1) * r.uniform(0.5, 1.5, 3),
                       lambda r: np.column_stack([r.uniform(0, 30, 1), r.uniform(0, 40, 1)])),
}


@pytest.mark.parametrize("name", sorted(SAMPLERS))
def test_gradient_matches_finite_differences(name):
    model = get_model(name)
    rng = np.random.default_rng(11)
    draw_theta, draw_x = SAMPLERS[name]
    worst = 0.0
    for _ in range(100):
        theta, X = draw_theta(rng), draw_x(rng)
        an = model.gradient(theta, X)
        fd = central_difference(model, theta, X)
        worst = max(worst, float(np.max(np.abs(an - fd) / np.maximum(np.abs(an), 1.0))))
    assert worst < 1e-5


def test_builtin_registry():
    assert {"linear", "quadratic", "exponential", "competitive", "noncompetitive"} <= set(model_names())
    with pytest.raises(NotFound):
        get_model("no-such-model")


def test_gradient_is_vectorised_over_parameter_batches():
    model = get_model("competitive")
    X = builtin_pair("enzyme").space.points[:7]
    thetas = np.asarray(ENZYME_THETA0) * np.array([[1.0, 1.0, 1.0], [1.1, 0.9, 1.2]])
    g = model.gradient(thetas, X)
    assert g.shape == (2, 7, 3)
    np.testing.assert_allclose(g[1], model.gradient(thetas[1], X))


def test_motivating_means_agree_at_one(motivating):
    d = ExactDesign({0: 1})
    assert motivating.space.points[0, 0] == 1.0
    v0 = mean_vector(motivating.model0, motivating.theta0, d, motivating.space)
    v1 = mean_vector(motivating.model1, motivating.theta1, d, motivating.space)
    assert v0[0] == pytest.approx(math.e, rel=1e-15)
    assert v1[0] == pytest.approx(v0[0], rel=1e-15)


def test_linear_model_zero_parameter_gives_zero_vector(motivating):
    d = ExactDesign({3: 2, 50: 1, 100: 4})
    v = mean_vector(get_model("linear"), [0.0], d, motivating.space)
    assert v.shape == (7,)
    assert np.all(v == 0.0)


def test_competitive_hand_value():
    space = DesignSpace([[30.0, 0.0]])
    v = mean_vector(get_model("competitive"), [7.298, 4.386, 2.582], ExactDesign({0: 1}), space)
    assert v[0] == pytest.approx(6.367126155993718, rel=1e-13)


def test_mean_vector_expands_replications_in_index_order():
    space = DesignSpace([[1.0], [2.0], [3.0]])
    d = ExactDesign({2: 1, 0: 2})
    v = mean_vector(get_model("linear"), [1.5], d, space)
    np.testing.assert_array_equal(v, [1.5, 1.5, 4.5])
    assert v.size == d.n


def test_builtin_pairs(motivating, enzyme):
    assert len(motivating.space) == 101
    np.testing.assert_allclose(motivating.space.points[:, 0], np.round(np.linspace(1, 2, 101), 2))
    np.testing.assert_array_equal(enzyme.theta0, [7.298, 4.386, 2.582])
    np.testing.assert_array_equal(enzyme.halfwidth0, [0.114, 0.233, 0.145])
    np.testing.assert_array_equal(enzyme.theta1, [8.696, 8.066, 12.057])
    np.testing.assert_array_equal(enzyme.halfwidth1, [0.222, 0.488, 0.671])
    assert tuple(ENZYME_SE0) == (0.114, 0.233, 0.145)
    assert tuple(ENZYME_SE1) == (0.222, 0.488, 0.671)
    assert len(enzyme.space) == 31 * 41
    assert len(builtin_pair("enzyme", grid=(7, 9)).space) == 63
    with pytest.raises(NotFound):
        builtin_pair("unknown")


def test_encompassing_reductions():
    theta = [7.298, 4.386, 2.582]
    for x in ([30.0, 0.0], [12.0, 7.0], [0.0, 40.0]):
        comp = get_model("competitive").mean(np.array(theta), np.array([x]))[0]
        assert encompassing_mean(theta, 1.0, x) == pytest.approx(comp, abs=1e-12)
    theta1 = [8.696, 8.066, 12.057]
    non = get_model("noncompetitive").mean(np.array(theta1), np.array([[10.0, 5.0]]))[0]
    assert encompassing_mean(theta1, 0.0, [10.0, 5.0]) == pytest.approx(non, abs=1e-12)


def test_encompassing_hand_value():
    # x2 = 0 removes every lambda term
    assert encompassing_mean([7.425, 4.681, 3.058], 0.964, [30.0, 0.0]) == pytest.approx(
        6.422825178051383, rel=1e-13)


def test_encompassing_random_interpolation():
    rng = np.random.default_rng(5)
    comp, non = get_model("competitive"), get_model("noncompetitive")
    for _ in range(20):
        theta = rng.uniform(0.5, 15.0, 3)
        x = np.array([rng.uniform(0, 30), rng.uniform(0, 40)])
        assert abs(encompassing_mean(theta, 1.0, x) - comp.mean(theta, x[None])[0]) <= 1e-12
        assert abs(encompassing_mean(theta, 0.0, x) - non.mean(theta, x[None])[0]) <= 1e-12
    with pytest.raises(NumericDomainError):
        encompassing_mean([1.0, 1.0, 0.0], 0.5, [1.0, 1.0])


def test_enzyme_point_with_zero_substrate_is_kept(enzyme):
    i = enzyme.space.index_of([0.0, 20.0])
    X = enzyme.space.points[i:i + 1]
    assert enzyme.model0.mean(enzyme.theta0, X)[0] == 0.0
    assert np.all(enzyme.model0.gradient(enzyme.theta0, X) == 0.0)


def _saturation(theta, X):
    theta = np.asarray(theta)
    t1, t2 = theta[..., 0:1], theta[..., 1:2]
    out = t1 * X[:, 0] / (t2 + X[:, 0])
    return out if theta.ndim > 1 else out.reshape(-1)


def test_custom_model_with_numeric_gradient():
    model = custom_model("sat", 2, [0, 0], [10, 10], _saturation)
    assert model.numeric_gradient
    X = np.array([[1.0], [3.0]])
    theta = np.array([2.0, 1.5])
    np.testing.assert_allclose(model.gradient(theta, X), central_difference(model, theta, X),
                               rtol=1e-6)


def test_problem_validation(motivating):
    with pytest.raises(InvalidArgument):
        DiscriminationProblem(motivating.model0, motivating.model1, motivating.space,
                              [math.e], [1.0], [0.0], [1.0])
    with pytest.raises(InvalidArgument):
        DiscriminationProblem(motivating.model0, motivating.model1, motivating.space,
                              [math.e, 1.0], [1.0], [1.0], [1.0])


def test_space_grid_and_lookup():
    space = DesignSpace.grid([0.0, 1.0], [10.0, 20.0, 30.0])
    assert len(space) == 6 and space.dim == 2
    np.testing.assert_array_equal(space.points[1], [0.0, 20.0])
    assert space.index_of([1.0, 30.0]) == 5
    with pytest.raises(NotFound):
        space.index_of([0.5, 10.0])
    bigger = space.with_points([[0.5, 10.0], [1.0, 30.0]])
    assert len(bigger) == 7
    with pytest.raises(InvalidArgument):
        DesignSpace([[0.0], [0.0]])


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.integers(0, 20), st.integers(1, 5), min_size=1, max_size=6),
       st.dictionaries(st.integers(0, 20), st.integers(1, 5), min_size=1, max_size=6),
       st.integers(1, 4))
def test_exact_design_algebra(a, b, s):
    with pytest.raises(InvalidArgument):
        ExactDesign({})
    da, db = ExactDesign(a), ExactDesign(b)
    assert (da + db).n == da.n + db.n
    assert da.replicate(s).n == s * da.n
    np.testing.assert_array_equal((da + db).count_vector(21), da.count_vector(21) + db.count_vector(21))
    idx = da.indices()
    assert list(idx) == sorted(idx) and idx.size == da.n
    assert ExactDesign.from_indices(idx) == da
    assert all(c > 0 for c in da.counts.values())


def test_identical_nominal_models_rejected_by_default():
    space = DesignSpace([1.0, 1.5, 2.0])
    args = (get_model("exponential"), get_model("exponential"), space, [1.0], [1.0], [0.5], [0.5])
    with pytest.raises(InvalidArgument):
        DiscriminationProblem(*args)
    assert DiscriminationProblem(*args, require_discriminable=False).swapped().require_discriminable is False
