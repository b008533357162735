import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from completecase.errors import ArgumentError
from completecase.model import Family, MeanModelSpec, mean_gradient, mean_value, model_from_key

LINEAR = MeanModelSpec(Family.LINEAR, True, 1)
LOGISTIC = MeanModelSpec(Family.SCALED_LOGISTIC, True, 1, scale=5.0)


def fd_gradient(spec, beta, x, z, h=1e-6):
    beta = np.asarray(beta, dtype=float)
    out = np.empty_like(beta)
    for k in range(beta.size):
        up, dn = beta.copy(), beta.copy()
        up[k] += h
        dn[k] -= h
        out[k] = (mean_value(spec, up, x, z) - mean_value(spec, dn, x, z)) / (2 * h)
    return out


def test_linear_mean_at_simulation_truth():
    assert mean_value(LINEAR, [0.5, 1, -2], 0.0, [0.0]) == 0.5
    assert mean_value(LINEAR, [0.5, 1, -2], 1.0, [1.0]) == pytest.approx(-0.5)


def test_logistic_at_zero_is_half():
    for x, z in [(0.0, 0.0), (2.7, -1.3), (-40.0, 8.0)]:
        assert mean_value(LOGISTIC, [0, 0, 0], x, [z]) == 0.5


def test_gradients_closed_form():
    np.testing.assert_array_equal(mean_gradient(LINEAR, [9, 9, 9], 2.0, [3.0]), [1, 2, 3])
    np.testing.assert_allclose(mean_gradient(LOGISTIC, [0, 0, 0], 2.0, [3.0]), [1.25, 2.5, 3.75])


def test_logistic_gradient_matches_finite_differences():
    beta = [0.005, 0.01, -0.02]
    analytic = mean_gradient(LOGISTIC, beta, 1.5, [0.7])
    numeric = fd_gradient(LOGISTIC, beta, 1.5, [0.7])
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6)


def test_no_intercept_layout():
    spec = model_from_key("linear_no_intercept")
    assert spec.n_params == 2
    assert spec.param_names == ["b1", "b2"]
    assert mean_value(spec, [1, -2], 1.0, [1.0]) == -1.0
    np.testing.assert_array_equal(mean_gradient(spec, [1, -2], 4.0, [5.0]), [4, 5])


def test_parameter_count_and_keys():
    assert MeanModelSpec(Family.LINEAR, True, 7).n_params == 9
    assert MeanModelSpec(Family.LINEAR, True, 0).n_params == 2
    assert model_from_key("logistic5").scale == 5.0
    for key in ("linear", "logistic5", "linear_no_intercept"):
        assert model_from_key(key).key == key
    with pytest.raises(ArgumentError):
        model_from_key("probit")


@pytest.mark.parametrize(
    "call",
    [
        lambda: mean_value(LINEAR, [0.5, 1], 0.0, [0.0]),
        lambda: mean_value(LINEAR, [0.5, 1, -2], 0.0, [0.0, 1.0]),
        lambda: mean_gradient(LOGISTIC, [0, 0, 0], 0.0, []),
        lambda: MeanModelSpec(Family.SCALED_LOGISTIC, True, 1, scale=0.0),
        lambda: MeanModelSpec(Family.LINEAR, True, -1),
    ],
)
def test_dimension_errors(call):
    with pytest.raises(ArgumentError):
        call()


finite = st.floats(-3, 3, allow_nan=False)
specs = st.sampled_from(
    [
        LINEAR,
        LOGISTIC,
        MeanModelSpec(Family.LINEAR, False, 2),
        MeanModelSpec(Family.SCALED_LOGISTIC, False, 2, scale=2.0),
        MeanModelSpec(Family.SCALED_LOGISTIC, True, 0, scale=1.0),
    ]
)


@settings(max_examples=200, deadline=None)
@given(spec=specs, data=st.data())
def test_gradient_matches_finite_differences_everywhere(spec, data):
    beta = data.draw(st.lists(finite, min_size=spec.n_params, max_size=spec.n_params))
    x = data.draw(finite)
    z = data.draw(st.lists(finite, min_size=spec.p, max_size=spec.p))
    analytic = mean_gradient(spec, beta, x, z)
    numeric = fd_gradient(spec, beta, x, z)
    scale = max(1.0, np.max(np.abs(analytic)))
    np.testing.assert_allclose(analytic / scale, numeric / scale, atol=1e-5)


@settings(max_examples=200, deadline=None)
@given(b0=finite, b1=st.floats(0.01, 3), z=finite, x1=finite, x2=finite)
def test_logistic_bounded_and_monotone(b0, b1, z, x1, x2):
    lo, hi = sorted((x1, x2))
    m_lo = mean_value(LOGISTIC, [b0, b1, -0.5], lo, [z])
    m_hi = mean_value(LOGISTIC, [b0, b1, -0.5], hi, [z])
    assert 0 <= m_lo <= 1 and 0 <= m_hi <= 1
    assert m_lo <= m_hi
