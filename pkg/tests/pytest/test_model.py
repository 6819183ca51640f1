import numpy as np
import pytest

from bdsim.common.errors import OutOfDomainError, RateValidationError
from bdsim.similarity.methods.model import StateWindow, ConstantRates, TableRates, GeometricRatioRates, \
    rates_at, validate_spec


def test_state_window():
    window = StateWindow(-2, 2)
    assert window.width == 5
    assert list(window.states) == [-2, -1, 0, 1, 2]
    assert 2 in window and 3 not in window
    assert window.is_interior(1) and not window.is_interior(2)
    assert window.interior() == StateWindow(-1, 1)
    assert window.widened(2) == StateWindow(-4, 4)
    assert str(window) == '[-2, 2]'
    with pytest.raises(OutOfDomainError):
        window.index(3)
    with pytest.raises(ValueError):
        StateWindow(0, 1)


def test_rates_at_constant():
    assert rates_at(ConstantRates(1, 2), 17) == (1, 2), 'Constant rates are state independent'


def test_rates_at_table():
    spec = TableRates.from_rows([(n, 1.5, 1.5) for n in range(-2, 3)])
    assert rates_at(spec, 0) == (1.5, 1.5)
    with pytest.raises(OutOfDomainError):
        rates_at(spec, 5)


def test_single_state_table_is_rejected():
    with pytest.raises(ValueError, match='at least 3 states'):
        TableRates.from_rows([(0, 1.5, 1.5)])


def test_rates_at_repeatable():
    rng = np.random.default_rng(0)
    spec = TableRates(StateWindow(-5, 5), rng.uniform(0.5, 2, 11), rng.uniform(0.5, 2, 11))
    for n in spec.window.states:
        first = rates_at(spec, n)
        assert first == rates_at(spec, n)
        assert first[0] > 0 and first[1] > 0


def test_validate_constant():
    spec = ConstantRates(1, 2)
    assert validate_spec(spec, StateWindow(-10, 10)) is spec


def test_validate_zero_death_rate():
    rows = [(n, 1.0, 0.0 if n == 3 else 1.0) for n in range(-5, 6)]
    with pytest.raises(RateValidationError) as excinfo:
        TableRates.from_rows(rows)
    assert excinfo.value.states == [3], 'Error should name the absorbing state'


def test_validate_negative_birth_rate():
    rows = [(n, -0.5 if n == -1 else 1.0, 1.0) for n in range(-5, 6)]
    with pytest.raises(RateValidationError) as excinfo:
        TableRates.from_rows(rows)
    assert excinfo.value.states == [-1]


def test_validate_window_outside_table():
    spec = TableRates.from_rows([(n, 1.0, 1.0) for n in range(-2, 3)])
    with pytest.raises(OutOfDomainError):
        validate_spec(spec, StateWindow(-3, 3))


def test_constant_rates_need_positive_values():
    with pytest.raises(RateValidationError):
        ConstantRates(0, 1)


def test_table_rows_need_contiguous_states():
    with pytest.raises(ValueError):
        TableRates.from_rows([(0, 1, 1), (1, 1, 1), (3, 1, 1)])


def test_table_is_immutable():
    spec = TableRates.from_rows([(n, 1.0, 2.0) for n in range(-2, 3)])
    with pytest.raises(ValueError):
        spec.births[0] = 5


def test_geometric_ratio_rates():
    spec = GeometricRatioRates.from_rows([(n, 1.0 + 0.1 * n) for n in range(-3, 4)], ratio=2)
    births, deaths = spec.rates([0, 1])
    assert list(births) == [1.0, 1.1]
    assert list(deaths) == [2.0, 2.2]
    assert list(spec.ratios([-3, 3])) == [2.0, 2.0]
    assert spec.domain == StateWindow(-3, 3)
    with pytest.raises(RateValidationError):
        GeometricRatioRates.from_rows([(n, 1.0) for n in range(3)], ratio=0)
