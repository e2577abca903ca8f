import numpy as np
import pytest

from tabdiffuse.baselines import BASELINE_KINDS, BaselineError, baseline_impute


CONTEXT = np.array([[1.0, 10.0], [2.0, 10.0], [3.0, 40.0]])


def masked(x, missing_cells):
    m = np.ones_like(x, dtype=bool)
    for i, j in missing_cells:
        m[i, j] = False
    return m


def test_mean_fill_from_context():
    x = np.array([[5.0, 0.0], [0.0, 7.0]])
    m = masked(x, [(0, 1), (1, 0)])
    out = baseline_impute("mean", x, m, CONTEXT)
    assert out[0, 1] == pytest.approx(20.0)  # context column mean, not test mean
    assert out[1, 0] == pytest.approx(2.0)
    assert out[0, 0] == 5.0 and out[1, 1] == 7.0  # known untouched


def test_median_and_mode():
    x = np.zeros((1, 2))
    m = masked(x, [(0, 0), (0, 1)])
    assert baseline_impute("median", x, m, CONTEXT)[0, 0] == 2.0
    out = baseline_impute("mode", x, m, CONTEXT)
    assert out[0, 1] == 10.0  # most frequent
    tie_ctx = np.array([[3.0], [1.0], [3.0], [1.0]])
    tie = baseline_impute("mode", np.zeros((1, 1)), np.zeros((1, 1), dtype=bool), tie_ctx)
    assert tie[0, 0] == 1.0  # tie resolves to the smallest value


def test_constants():
    x = np.full((2, 2), 9.0)
    m = masked(x, [(0, 0), (1, 1)])
    assert baseline_impute("const0", x, m, CONTEXT[:, :2])[0, 0] == 0.0
    assert baseline_impute("const1", x, m, CONTEXT[:, :2])[1, 1] == 1.0


def test_locf_carries_down():
    x = np.array([[5.0], [99.0], [99.0]])
    m = np.array([[True], [False], [False]])
    out = baseline_impute("locf", x, m, np.array([[7.0], [7.0]]))
    np.testing.assert_array_equal(out[:, 0], [5.0, 5.0, 5.0])


def test_locf_leading_gap_uses_context_mean():
    x = np.array([[99.0], [3.0], [99.0]])
    m = np.array([[False], [True], [False]])
    out = baseline_impute("locf", x, m, np.array([[10.0], [20.0]]))
    np.testing.assert_array_equal(out[:, 0], [15.0, 3.0, 3.0])


def test_nocb_carries_up():
    x = np.array([[99.0], [99.0], [5.0]])
    m = np.array([[False], [False], [True]])
    out = baseline_impute("nocb", x, m, np.array([[7.0], [7.0]]))
    np.testing.assert_array_equal(out[:, 0], [5.0, 5.0, 5.0])


def test_nocb_rejects_fully_missing_column():
    x = np.zeros((3, 2))
    m = np.ones((3, 2), dtype=bool)
    m[:, 1] = False  # whole-column mask, as in the MAR setting
    with pytest.raises(BaselineError):
        baseline_impute("nocb", x, m, CONTEXT)
    # locf falls back to the context mean instead of failing
    out = baseline_impute("locf", x, m, CONTEXT)
    np.testing.assert_allclose(out[:, 1], 20.0)


@pytest.mark.parametrize("kind", BASELINE_KINDS)
def test_known_entries_always_exact(kind):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(10, 3))
    m = rng.random((10, 3)) > 0.4
    m[0, :] = True  # give nocb/locf at least one anchor per column
    m[-1, :] = True
    ctx = rng.normal(size=(20, 3))
    out = baseline_impute(kind, x, m, ctx)
    np.testing.assert_array_equal(out[m], x[m])


def test_statistics_ignore_test_values():
    x_a = np.array([[0.0, 1.0]])
    x_b = np.array([[1000.0, 1.0]])
    m = np.array([[False, True]])
    ctx = np.array([[5.0, 0.0], [7.0, 0.0]])
    out_a = baseline_impute("mean", x_a, m, ctx)
    out_b = baseline_impute("mean", x_b, m, ctx)
    assert out_a[0, 0] == out_b[0, 0] == 6.0


def test_unknown_kind_and_shape_checks():
    with pytest.raises(ValueError):
        baseline_impute("knn", np.zeros((2, 2)), np.ones((2, 2), dtype=bool), CONTEXT)
    with pytest.raises(ValueError):
        baseline_impute("mean", np.zeros((2, 2)), np.ones((3, 2), dtype=bool), CONTEXT)
    with pytest.raises(ValueError):
        baseline_impute("mean", np.zeros((2, 3)), np.ones((2, 3), dtype=bool), CONTEXT)
