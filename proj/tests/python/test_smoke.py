import math

import numpy as np
import pytest

import scotoma


def small_config(**kw):
    cfg = {"p": 4, "n_train_pairs": 12, "n_unpaired": 6, "n_test_pairs": 8, "seed": 5}
    cfg.update(kw)
    return cfg


def test_score_matches_projection():
    beta = np.array([3.0, 4.0])
    xi, xj = np.array([1.0, 2.0]), np.array([0.0, 0.0])
    expected = ((0.6 * 1 + 0.8 * 2)) ** 2
    assert scotoma.score(beta, xi, xj) == pytest.approx(expected)
    s = scotoma.score_matrix(beta, np.array([[1.0, 2.0]]), np.array([[0.0, 0.0], [1.0, 2.0]]))
    assert s.shape == (1, 2)
    assert s[0, 1] == 0.0


def test_normalize_weights_sign():
    w = scotoma.normalize_weights(np.array([-2.0, 1.0]))
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert w[0] > 0


def test_greedy_match_scores():
    scores = np.array([[1.0, 9.0], [2.0, 3.0]])
    assert [(c, t) for c, t, _ in scotoma.greedy_match_scores(scores)] == [(0, 0), (1, 1)]
    assert len(scotoma.greedy_match_scores(scores, epsilon=2.0)) == 1
    assert len(scotoma.greedy_match_scores(scores, max_pairs=1)) == 1


def test_subspace_dist():
    assert scotoma.subspace_dist(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)
    c = math.cos(0.3)
    s = math.sin(0.3)
    assert scotoma.subspace_dist(np.array([1.0, 0.0]), np.array([c, s])) == pytest.approx(s)


def test_eigvec_single_axis():
    controls = np.array([[0.0, 0.0], [10.0, 0.0]])
    treatments = np.array([[0.0, 1.0], [10.0, -1.0]])
    sol = scotoma.top_generalized_eigvec(controls, treatments, 0.01)
    assert abs(sol["beta"][0]) == pytest.approx(1.0, abs=1e-6)


def test_random_matching_stats():
    s = scotoma.random_matching_stats(10, 20000, seed=2)
    assert s["mean_accuracy"] == pytest.approx(0.1, abs=4 * s["se_accuracy"] + 1e-3)


def test_generate_fit_match_roundtrip():
    g = scotoma.generate(small_config())
    d = g["dataset"]
    assert d.dims["paired"] == 12
    assert d.dims["object_control"] == 8
    assert len(g["truth"]) == 8
    assert g["true_beta"] is not None

    again = scotoma.parse_dataset(d.to_csv())
    assert again.dims == d.dims
    np.testing.assert_array_equal(again.paired_controls, d.paired_controls)

    initial = scotoma.fit(d, mode="initial")
    assert np.linalg.norm(initial["beta"]) == pytest.approx(1.0)

    res = scotoma.fit(d, tau1=3, delta0=0.0)
    assert res["n_paired"] == 12 + 6
    assert res["stop_reason"] == "pools_exhausted"
    acc = scotoma.matching_accuracy(res["matching"]["pairs"], g["truth"])
    assert 0.0 <= acc <= 1.0

    m = scotoma.match_objects(d, res["beta"], epsilon=math.inf)
    assert len(m["pairs"]) == 8

    st = scotoma.fit(d, mode="self_taught", tau1=3, tau2=2)
    assert st["n_paired"] >= res["n_paired"]


def test_errors_are_typed():
    with pytest.raises(scotoma.ConfigError):
        scotoma.generate({"p": 4, "bogus": 1})
    with pytest.raises(scotoma.ConfigError):
        scotoma.fit(scotoma.generate(small_config())["dataset"], mode="nope")
    with pytest.raises(scotoma.DataError):
        scotoma.parse_dataset("")
    with pytest.raises(scotoma.ScotomaError):
        scotoma.load_dataset("/nonexistent/file.csv")
