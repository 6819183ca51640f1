import numpy as np
import pytest

from bdsim.common.errors import GridMismatchError, RenewalOrderingError, OutOfDomainError, WindowTooSmallError
from bdsim.similarity.methods.analytic import transition_prob_const, fpt_density_const_grid
from bdsim.similarity.methods.model import ConstantRates, StateWindow, TableRates
from bdsim.similarity.methods.solver import build_generator, solve_forward, fpt_numeric, convolve_renewal, \
    auto_window, time_grid, crossing_from_fpt, FPTDensity, _clamp_undershoot
from bdsim.similarity.methods.transform import build_nu_constant_ratio, build_nu_recurrence, transform_process


def safe_increment(spec, window):
    ratios = spec.ratios(window.states)
    increment, total = 1.0, 0.0
    for n in range(0, window.n_min, -1):
        increment /= ratios[n - window.n_min]
        total += increment
    return 0.5 / total


@pytest.fixture(scope='module')
def constant_rates():
    return ConstantRates(1, 2)


@pytest.fixture(scope='module')
def transformed_constant_rates(constant_rates):
    return transform_process(constant_rates, build_nu_constant_ratio(2, 1, StateWindow(-61, 61)))


def test_generator_column_sums():
    rng = np.random.default_rng(3)
    window = StateWindow(-6, 6)
    spec = TableRates(window, rng.uniform(0.5, 2, window.width), rng.uniform(0.5, 2, window.width))
    sums = build_generator(spec, window).column_sums()
    np.testing.assert_allclose(sums[1:-1], 0, atol=1e-15)
    assert sums[0] == pytest.approx(-spec.deaths[0])
    assert sums[-1] == pytest.approx(-spec.births[-1])


def test_generator_three_states():
    spec = TableRates.from_rows([(-1, 1.0, 2.0), (0, 3.0, 4.0), (1, 5.0, 6.0)])
    generator = build_generator(spec, spec.domain)
    expected = np.array([
        [-3.0, 4.0, 0.0],
        [1.0, -7.0, 6.0],
        [0.0, 3.0, -11.0],
    ])
    np.testing.assert_array_equal(generator.matrix.toarray(), expected)
    assert generator.lower_outflow == 2.0
    assert generator.upper_outflow == 5.0


@pytest.mark.parametrize('t', [0.5, 1, 2])
def test_solver_matches_closed_form(constant_rates, t):
    window = StateWindow(-40, 40)
    result = solve_forward(constant_rates, window, 0, [0, t])
    expected = [transition_prob_const(1, 2, 0, n, t) for n in window.states]
    np.testing.assert_allclose(result.values[-1], expected, rtol=0, atol=1e-8)


def test_solver_mass_accounting(constant_rates):
    window = StateWindow(-40, 40)
    result = solve_forward(constant_rates, window, 3, time_grid(2, 50))
    assert np.all(np.abs(result.mass() - 1) < 1e-12)
    assert np.all(np.diff(result.deficit) >= 0)
    expected = np.zeros(window.width)
    expected[window.index(3)] = 1
    np.testing.assert_array_equal(result.values[0], expected)


def test_solver_small_window_loses_mass(constant_rates):
    result = solve_forward(constant_rates, StateWindow(-3, 3), 0, [0, 5])
    assert result.deficit[-1] > 0.5
    assert result.lower_deficit[-1] > result.upper_deficit[-1], 'Drift is downwards with mu > lambda'
    assert abs(result.mass()[-1] - 1) < 1e-9


def test_chapman_kolmogorov(constant_rates):
    window = StateWindow(-60, 60)
    result = solve_forward(constant_rates, window, 0, [0, 1, 2])
    at_one = result.values[1]
    for n in range(-5, 6):
        # translation invariance: p_{m,n}(1) = p_{0,n-m}(1)
        composed = sum(at_one[window.index(m)] * at_one[window.index(n - m)]
                       for m in range(-30, 31))
        assert composed == pytest.approx(result.column(n)[2], abs=1e-7)


@pytest.mark.parametrize('seed', range(20))
def test_transformed_tables_are_similar(seed):
    rng = np.random.default_rng(seed)
    window = StateWindow(-20, 20)
    spec = TableRates(window, rng.uniform(1, 1.5, window.width), rng.uniform(1, 1.5, window.width))
    nu = build_nu_recurrence(spec, window, 1.0, safe_increment(spec, window))
    process = transform_process(spec, nu)
    solve_window = process.window
    k = 0
    for t in [0.5, 1]:
        original = solve_forward(spec, solve_window, k, [0, t])
        transformed = solve_forward(process.spec, solve_window, k, [0, t])
        ratios = np.array([nu.ratio(k, n) for n in solve_window.states])
        residual = np.abs(transformed.values[-1] - ratios * original.values[-1])
        assert residual.max() < 1e-8


@pytest.mark.parametrize('s', [2, -2])
def test_fpt_matches_closed_form(constant_rates, s):
    times = time_grid(10, 201)
    result = fpt_numeric(constant_rates, StateWindow(-60, 60), 0, s, times)
    expected = fpt_density_const_grid(1, 2, 0, s, times)
    np.testing.assert_allclose(result.density, expected, rtol=0, atol=1e-6)
    np.testing.assert_allclose(result.cumulative()[-1], result.absorbed_mass[-1], atol=1e-3)


def test_fpt_absorbed_mass_reaches_crossing_probability(constant_rates):
    result = fpt_numeric(constant_rates, StateWindow(-500, 5), 0, 1, time_grid(200, 401))
    assert result.absorbed_mass[-1] == pytest.approx(0.5, abs=1e-4)
    assert result.censored_mass == pytest.approx(0.5, abs=1e-4)
    estimate = crossing_from_fpt(result)
    assert estimate.provenance == 'numeric' and estimate.censored_note
    assert estimate.horizon == 200


def test_fpt_far_edge_too_close(constant_rates):
    with pytest.raises(WindowTooSmallError):
        fpt_numeric(constant_rates, StateWindow(-4, 5), 0, 1, time_grid(10, 20))


@pytest.mark.parametrize('k', [-2, 0])
@pytest.mark.parametrize('s', [1, 3])
def test_fpt_transformed_identity(constant_rates, transformed_constant_rates, k, s):
    process = transformed_constant_rates
    times = time_grid(10, 200)
    original = fpt_numeric(constant_rates, process.window, k, s, times)
    transformed = fpt_numeric(process.spec, process.window, k, s, times)
    ratio = process.nu.ratio(k, s)
    residual = np.abs(transformed.density - ratio * original.density)
    assert residual.max() < 1e-6
    assert np.all(transformed.density[1:] > original.density[1:]), 'Increasing nu and s > k enlarge the density'


@pytest.mark.parametrize('seed', range(5))
def test_fpt_transformed_identity_tables(seed):
    rng = np.random.default_rng(100 + seed)
    window = StateWindow(-40, 40)
    spec = TableRates(window, rng.uniform(1, 1.5, window.width), rng.uniform(1, 1.5, window.width))
    nu = build_nu_recurrence(spec, window, 1.0, safe_increment(spec, window))
    process = transform_process(spec, nu)
    times = time_grid(1, 200)
    for k in [-2, 0]:
        for s in [1, 3]:
            original = fpt_numeric(spec, process.window, k, s, times)
            transformed = fpt_numeric(process.spec, process.window, k, s, times)
            ratio = nu.ratio(k, s)
            residual = np.abs(transformed.density - ratio * original.density)
            assert residual.max() < 1e-6, f'k={k}, s={s}'
            visible = original.density > 1e-12
            assert np.all(transformed.density[visible] > original.density[visible])


@pytest.mark.parametrize('k, s', [(0, -1), (2, -1)])
def test_fpt_transformed_below_start_shrinks_density(constant_rates, transformed_constant_rates, k, s):
    process = transformed_constant_rates
    times = time_grid(10, 200)
    original = fpt_numeric(constant_rates, process.window, k, s, times)
    transformed = fpt_numeric(process.spec, process.window, k, s, times)
    visible = original.density > 1e-12
    assert visible.sum() > 100
    assert np.all(transformed.density[visible] < original.density[visible]), 'Increasing nu and s < k'


def test_halving_tolerance_changes_little(constant_rates):
    window = StateWindow(-30, 30)
    times = time_grid(1, 50)
    coarse = solve_forward(constant_rates, window, 0, times, rel_tol=1e-8)
    fine = solve_forward(constant_rates, window, 0, times, rel_tol=5e-9)
    assert np.abs(coarse.values - fine.values).max() < 1e-8


def test_undershoot_is_clamped_and_reported():
    values = np.array([[1.0, 0.0], [0.5, -1e-15]])
    clamped, undershoot = _clamp_undershoot(values)
    assert undershoot == -1e-15
    assert clamped.min() == 0
    with pytest.warns(UserWarning, match='Clamped negative probabilities'):
        clamped, undershoot = _clamp_undershoot(np.array([[1.0, -1e-9]]))
    assert undershoot == -1e-9
    assert clamped[0, 1] == 0


@pytest.mark.parametrize('k, s, n', [(0, 1, 2), (0, -1, -3)])
@pytest.mark.parametrize('use_transformed', [False, True])
def test_renewal_identity(constant_rates, transformed_constant_rates, k, s, n, use_transformed):
    spec = transformed_constant_rates.spec if use_transformed else constant_rates
    window = StateWindow(-30, 30)
    times = time_grid(1, 4001)
    g = fpt_numeric(spec, window, k, s, times)
    p_s = solve_forward(spec, window, s, times)
    p_k = solve_forward(spec, window, k, times)
    assert convolve_renewal(g, p_s, n, 1.0) == pytest.approx(p_k.column(n)[-1], abs=1e-6)


def test_renewal_with_zero_density(constant_rates):
    window = StateWindow(-10, 10)
    times = time_grid(1, 11)
    g = FPTDensity(k=0, s=1, times=times, density=np.zeros(11), absorbed_mass=np.zeros(11), censored_mass=1.0)
    p = solve_forward(constant_rates, window, 1, times)
    assert convolve_renewal(g, p, 2, 1.0) == 0
    assert convolve_renewal(g, p, 2, 0.0) == 0


def test_renewal_errors(constant_rates):
    window = StateWindow(-10, 10)
    times = time_grid(1, 11)
    g = fpt_numeric(constant_rates, window, 0, 1, times)
    with pytest.raises(RenewalOrderingError):
        convolve_renewal(g, solve_forward(constant_rates, window, 1, times), 0, 1.0)
    with pytest.raises(GridMismatchError):
        convolve_renewal(g, solve_forward(constant_rates, window, 0, times), 2, 1.0)
    with pytest.raises(GridMismatchError):
        convolve_renewal(g, solve_forward(constant_rates, window, 1, time_grid(1, 21)), 2, 1.0)
    with pytest.raises(GridMismatchError):
        convolve_renewal(g, solve_forward(constant_rates, window, 1, times), 2, 0.55)


def test_auto_window(constant_rates):
    window = auto_window(constant_rates, 0, 2)
    assert window.is_interior(0)
    assert solve_forward(constant_rates, window, 0, [0, 2]).deficit[-1] < 1e-10


def test_auto_window_limited_by_table():
    spec = TableRates.from_rows([(n, 1.0, 1.0) for n in range(-5, 6)])
    with pytest.raises(WindowTooSmallError):
        auto_window(spec, 0, 5)


def test_solver_argument_errors(constant_rates):
    window = StateWindow(-10, 10)
    with pytest.raises(ValueError):
        solve_forward(constant_rates, window, 0, [0, 1], rel_tol=1e-3)
    with pytest.raises(OutOfDomainError):
        solve_forward(constant_rates, window, 10, [0, 1])
    with pytest.raises(ValueError):
        solve_forward(constant_rates, window, 0, [0.5, 1])
    with pytest.raises(ValueError):
        solve_forward(constant_rates, window, 0, [0, 1, 1])
