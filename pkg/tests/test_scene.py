"""Forward model, Gaussian likelihood and dataset simulation / I/O."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rbspade.calibration import synth_calibration
from rbspade.errors import DomainError, InputError
from rbspade.scene import (Dataset, SceneParams, dataset_log_likelihood, log_likelihood,
                           mixture_model, model_intensity, read_dataset, simulate_dataset,
                           trial_rng, write_dataset)

CAL1 = synth_calibration(330.0, 1.0, 40.0, variances=[1e-4, 2e-4, 3e-4, 4e-4], step=5.0)
CAL2 = synth_calibration(320.0, 0.9, 40.0, variances=[1e-4, 2e-4, 3e-4, 4e-4], step=5.0,
                         source_id="src2")


def test_model_is_weighted_sum_of_shifted_curves():
    p = SceneParams(0.3, -2.0, 18.0)
    expect = 0.3 * CAL1(-11.0) + 0.7 * CAL2(7.0)
    np.testing.assert_allclose(model_intensity(CAL1, CAL2, p), expect, rtol=1e-14)
    assert p.positions == (-11.0, 7.0)


def test_model_limits():
    np.testing.assert_allclose(model_intensity(CAL1, CAL2, SceneParams(1.0, 5.0, 30.0)),
                               CAL1(-10.0))
    np.testing.assert_allclose(model_intensity(CAL1, CAL2, SceneParams(0.0, 5.0, 30.0)),
                               CAL2(20.0))


def test_mixture_model_broadcasts():
    q = np.array([0.2, 0.5])[:, None]
    x = np.linspace(-5, 5, 3)[None, :]
    out = mixture_model(CAL1, CAL2, q, x, 10.0)
    assert out.shape == (2, 3, 4)
    np.testing.assert_allclose(out[1, 2], model_intensity(CAL1, CAL2, SceneParams(0.5, 5.0, 10.0)))


def test_model_outside_domain():
    with pytest.raises(DomainError):
        model_intensity(CAL1, CAL2, SceneParams(0.5, 995.0, 20.0))


@pytest.mark.parametrize("kw", [dict(q=1.2, x_c=0.0), dict(q=0.5, x_c=0.0, d=-1.0),
                                dict(q=0.5, x_c=float("nan"))])
def test_scene_validation(kw):
    with pytest.raises(InputError):
        SceneParams(**kw)


def test_log_likelihood_matches_scipy_density():
    v = np.array([0.1, 0.2, 0.05, 0.3])
    x = np.array([0.3, -0.1, 0.7, 1.2])
    m = np.array([0.2, 0.0, 0.5, 1.0])
    ref = stats.multivariate_normal(m, np.diag(v)).logpdf(x)
    assert log_likelihood(x, m, v) == pytest.approx(ref, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_sufficient_statistics_match_per_sample_sum(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.1, 2.0, 4)
    data = Dataset(rng.normal(size=(n, 4)))
    m = rng.normal(size=4)
    direct = float(np.sum(log_likelihood(data.samples, m, v)))
    assert dataset_log_likelihood(data, m, v) == pytest.approx(direct, rel=1e-10, abs=1e-9)


def test_dataset_log_likelihood_over_model_grid():
    data = Dataset(np.ones((3, 4)))
    models = np.zeros((2, 5, 4))
    out = dataset_log_likelihood(data, models, np.ones(4))
    assert out.shape == (2, 5)


@pytest.mark.parametrize("v", [[1, 1, 1], [1, 1, 1, 0], [1, 1, 1, -1]])
def test_variance_validation(v):
    with pytest.raises(InputError):
        log_likelihood(np.zeros(4), np.zeros(4), v)


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.zeros((0, 4)))
    with pytest.raises(InputError):
        Dataset(np.zeros((3, 3)))
    with pytest.raises(InputError):
        Dataset(np.array([[0, 0, np.inf, 0]]))
    d = Dataset(np.arange(4.0))
    assert len(d) == 1
    with pytest.raises(ValueError):
        d.samples[0, 0] = 1.0


def test_chunks_are_disjoint_and_cover():
    d = Dataset(np.arange(4 * 23.0).reshape(23, 4))
    parts = d.chunks(5)
    assert [len(p) for p in parts] == [5, 5, 5, 5, 3]
    np.testing.assert_array_equal(np.vstack([p.samples for p in parts]), d.samples)
    with pytest.raises(InputError):
        d.chunks(0)


def test_simulation_reproducible_and_seed_sensitive():
    p = SceneParams(0.5, 0.0, 20.0)
    a = simulate_dataset(CAL1, CAL2, p, CAL1.variances, 50, seed=7)
    b = simulate_dataset(CAL1, CAL2, p, CAL1.variances, 50, seed=7)
    c = simulate_dataset(CAL1, CAL2, p, CAL1.variances, 50, seed=8)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.metadata["seed"] == 7 and a.metadata["params"]["d"] == 20.0


def test_simulation_moments():
    p = SceneParams(0.4, 3.0, 25.0)
    v = CAL1.variances
    data = simulate_dataset(CAL1, CAL2, p, v, 20000, seed=11)
    m = model_intensity(CAL1, CAL2, p)
    se = np.sqrt(v / len(data))
    assert np.all(np.abs(data.mean - m) < 5 * se)
    np.testing.assert_allclose(data.samples.var(axis=0), v, rtol=0.05)


def test_simulation_needs_seed_and_samples():
    p = SceneParams(0.5, 0.0)
    with pytest.raises(InputError):
        simulate_dataset(CAL1, CAL2, p, CAL1.variances, 0, seed=1)
    with pytest.raises(InputError):
        trial_rng(None)


def test_trial_streams_are_distinct():
    a = trial_rng(5, 0, 0).standard_normal(4)
    b = trial_rng(5, 0, 1).standard_normal(4)
    c = trial_rng(5, 1, 0).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, trial_rng(5, 0, 0).standard_normal(4))


def test_dataset_round_trip(tmp_path):
    data = simulate_dataset(CAL1, CAL2, SceneParams(0.5, 0.0, 10.0), CAL1.variances, 17, 3)
    path = tmp_path / "d.csv"
    side = write_dataset(data, path)
    assert json.loads(side.read_text())["n"] == 17
    back = read_dataset(path)
    np.testing.assert_array_equal(back.samples, data.samples)
    assert back.metadata == data.metadata


@pytest.mark.parametrize("body, fragment", [
    ("", "empty"),
    ("a,b,c,d\n", "header"),
    ("I0,I1,I2,I3\n", "no samples"),
    ("I0,I1,I2,I3\n1,2,3\n", "row 2"),
    ("I0,I1,I2,I3\n1,2,3,x\n", "row 2"),
])
def test_dataset_read_errors(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(InputError) as exc:
        read_dataset(path)
    assert fragment in str(exc.value)
