import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdsim.common.errors import DegenerateNuError, NuPositivityError, IncompatibleNuError, \
    CrossingInconsistencyError, DomainError
from bdsim.similarity.methods.model import ConstantRates, StateWindow, TableRates, GeometricRatioRates
from bdsim.similarity.methods.transform import build_nu_recurrence, build_nu_constant_ratio, transform_process, \
    predict_transition, predict_fpt, predict_crossing, NuSequence, INCREASING, DECREASING

EPS = np.finfo(float).eps


def safe_increment(spec, window):
    """d_0 keeping nu_n > 0.5 on the lower part of the window when nu_0 = 1 and d_0 > 0"""
    ratios = spec.ratios(window.states)
    increment = 1.0
    total = 0.0
    for n in range(0, window.n_min, -1):
        increment /= ratios[n - window.n_min]
        total += increment
    return 0.5 / total


def test_recurrence_constant_rates():
    nu = build_nu_recurrence(ConstantRates(1, 2), StateWindow(-2, 2), nu_0=2, d_0=1)
    assert list(nu.values) == [1.25, 1.5, 2, 3, 5]
    assert nu.direction == INCREASING
    assert nu.origin_params == {'nu_0': 2.0, 'd_0': 1.0}


def test_recurrence_rejects_zero_increment():
    with pytest.raises(DegenerateNuError):
        build_nu_recurrence(ConstantRates(1, 2), StateWindow(-2, 2), nu_0=1, d_0=0)


def test_recurrence_positivity_violation():
    with pytest.raises(NuPositivityError) as excinfo:
        build_nu_recurrence(ConstantRates(2, 1), StateWindow(0, 4), nu_0=1, d_0=-0.9)
    assert excinfo.value.state == 2, 'nu_2 = 1 - 0.9 - 0.45 is the first nonpositive value'


def test_recurrence_decreasing():
    nu = build_nu_recurrence(ConstantRates(2, 1), StateWindow(-3, 3), nu_0=1, d_0=-0.25)
    assert nu.direction == DECREASING
    assert np.all(np.diff(nu.values) < 0)


@settings(max_examples=100, deadline=None)
@given(
    births=st.lists(st.floats(0.1, 10), min_size=21, max_size=21),
    deaths=st.lists(st.floats(0.1, 10), min_size=21, max_size=21),
)
def test_recurrence_residual(births, deaths):
    window = StateWindow(-10, 10)
    spec = TableRates(window, births, deaths)
    nu = build_nu_recurrence(spec, window, nu_0=1.0, d_0=safe_increment(spec, window))
    residuals = np.abs(nu.residuals(spec))
    assert np.all(residuals <= nu.residual_tolerances(spec)), f'Max residual {residuals.max()}'
    assert np.all(nu.increments > 0), 'All increments share the sign of d_0'


@pytest.mark.parametrize('c, beta', [(2.0, 1.5), (0.5, 1.5), (4.0, 0.25)])
def test_closed_form_matches_recurrence(c, beta):
    window = StateWindow(-20, 19)
    births = np.linspace(0.5, 3, window.width)
    spec = GeometricRatioRates(window, births, ratio=c)
    recurrence = build_nu_recurrence(spec, window, nu_0=1 + beta, d_0=beta * (c - 1))
    closed_form = build_nu_constant_ratio(c, beta, window)
    np.testing.assert_allclose(recurrence.values, closed_form.values, rtol=4 * EPS, atol=0)


def test_constant_ratio_examples():
    nu = build_nu_constant_ratio(2, 1, StateWindow(-2, 2))
    assert list(nu.values) == [1.25, 1.5, 2, 3, 5]
    nu = build_nu_constant_ratio(0.5, 3, StateWindow(-2, 2))
    assert nu[0] == 4
    assert nu.direction == DECREASING and np.all(np.diff(nu.values) < 0)


def test_constant_ratio_rejects_equal_rates():
    with pytest.raises(DegenerateNuError, match='does not admit a positive non-constant solution'):
        build_nu_constant_ratio(1, 1, StateWindow(-2, 2))


@pytest.mark.parametrize('c, beta', [(0, 1), (-2, 1), (2, 0), (2, -1)])
def test_constant_ratio_rejects_parameters(c, beta):
    with pytest.raises(ValueError):
        build_nu_constant_ratio(c, beta, StateWindow(-2, 2))


def test_constant_ratio_far_tail_stays_monotone():
    # 1 + 2^n rounds to 1 for n < -53, increments keep the direction
    nu = build_nu_constant_ratio(2, 1, StateWindow(-80, 5))
    assert nu.values[0] == 1.0
    assert np.all(nu.increments > 0)


def test_from_values_needs_monotone_values():
    window = StateWindow(0, 3)
    assert NuSequence.from_values(window, [1, 2, 4, 8]).is_increasing
    with pytest.raises(DegenerateNuError):
        NuSequence.from_values(window, [1, 2, 2, 3])
    with pytest.raises(NuPositivityError):
        NuSequence.from_values(window, [-1, 2, 3, 4])


def test_transform_constant_rates():
    spec = ConstantRates(1, 2)
    process = transform_process(spec, build_nu_constant_ratio(2, 1, StateWindow(-5, 5)))
    assert process.window == StateWindow(-4, 4)
    assert process.spec.rates_at(0) == (1.5, 1.5)

    c, beta = 2, 1
    for n in process.window.states:
        expected_birth = (1 + beta * c ** (n + 1)) / (1 + beta * c ** n)
        expected_death = 2 * (1 + beta * c ** (n - 1)) / (1 + beta * c ** n)
        birth, death = process.spec.rates_at(n)
        assert birth == pytest.approx(expected_birth, rel=1e-15)
        assert death == pytest.approx(expected_death, rel=1e-15)
    assert process.exit_rate_defect().max() <= 8 * EPS


def test_transform_preserves_exit_rates_for_tables():
    rng = np.random.default_rng(7)
    window = StateWindow(-15, 15)
    spec = TableRates(window, rng.uniform(0.5, 3, window.width), rng.uniform(0.5, 3, window.width))
    process = transform_process(spec, build_nu_recurrence(spec, window, 1.0, safe_increment(spec, window)))
    assert process.exit_rate_defect().max() < 1e-13
    assert np.all(process.spec.births > 0) and np.all(process.spec.deaths > 0)


def test_transform_rejects_incompatible_nu():
    window = StateWindow(-3, 3)
    values = 1 + 2.0 ** window.states
    values[4] *= 1.01
    with pytest.raises(IncompatibleNuError) as excinfo:
        transform_process(ConstantRates(1, 2), NuSequence.from_values(window, values))
    assert 1 in excinfo.value.states


def test_transform_checks_values_not_increments():
    window = StateWindow(-3, 3)
    valid = build_nu_constant_ratio(2, 1, window)
    values = valid.values.copy()
    values[window.index(1)] *= 1.5
    nu = NuSequence(window=window, values=values, increments=valid.increments, direction=INCREASING)
    with pytest.raises(IncompatibleNuError) as excinfo:
        transform_process(ConstantRates(1, 2), nu)
    assert excinfo.value.states == [0, 1, 2]


@settings(max_examples=50, deadline=None)
@given(
    births=st.lists(st.floats(0.1, 10), min_size=41, max_size=41),
    deaths=st.lists(st.floats(0.1, 10), min_size=41, max_size=41),
)
def test_recurrence_values_pass_residual_check(births, deaths):
    window = StateWindow(-20, 20)
    spec = TableRates(window, births, deaths)
    process = transform_process(spec, build_nu_recurrence(spec, window, 1.0, safe_increment(spec, window)))
    assert process.exit_rate_defect().max() <= 16 * EPS


def test_predict_transition():
    nu = build_nu_constant_ratio(2, 1, StateWindow(-2, 2))
    assert predict_transition(nu, 0, 1, 0.2) == pytest.approx(0.3)
    assert predict_transition(nu, 1, 1, 0.37) == 0.37
    assert predict_transition(nu, 0, 0, 1.0) == 1.0
    assert predict_transition(nu, 0, 1, 0.0) == 0.0
    with pytest.raises(ValueError):
        predict_transition(nu, 0, 1, 1.5)


def test_predict_fpt():
    nu = build_nu_constant_ratio(2, 1, StateWindow(-2, 2))
    assert predict_fpt(nu, 0, 1, 0.4) == pytest.approx(0.6)
    assert predict_fpt(nu, 0, 1, 0.0) == 0.0
    assert predict_fpt(nu, 0, 2, 0.1) > 0.1, 'Increasing nu and s > k enlarge the density'
    assert predict_fpt(nu, 0, -1, 0.1) < 0.1, 'Increasing nu and s < k shrink the density'
    with pytest.raises(DomainError):
        predict_fpt(nu, 1, 1, 0.4)


def test_predict_crossing():
    nu = build_nu_constant_ratio(2, 1, StateWindow(-2, 2))
    assert predict_crossing(nu, 0, 1, 0.5) == pytest.approx(0.75)
    assert predict_crossing(nu, 0, 1, 0.0) == 0.0
    assert predict_crossing(nu, 0, -1, 1.0) != 1.0, 'P and P~ cannot both be 1'
    with pytest.raises(CrossingInconsistencyError):
        predict_crossing(nu, 0, 2, 0.5)
