import numpy as np
import pytest

from safeguard.frontend import frontend_predict
from safeguard.propagation import propagate_exact_batch
from safeguard.synthetic import (CONCEPT_TRIPLES, SyntheticConfig, generate,
                                 oracle_concept_probs, oracle_frontend,
                                 read_dataset, write_dataset)


def _parity(x):
    return np.stack([x[:, a] ^ x[:, b] ^ x[:, c]
                     for a, b, c in CONCEPT_TRIPLES], axis=1)


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(n=0, noise=0.25)
    with pytest.raises(ValueError):
        SyntheticConfig(n=10, noise=1.5)


def test_noiseless_concepts_are_exact_parities():
    ds = generate(SyntheticConfig(n=5000, noise=0.0, seed=1))
    assert np.array_equal(ds.concepts, _parity(ds.features))


def test_label_probability_at_reference_corner():
    # c = (0,0,0) has label probability sigmoid(-2)
    f = oracle_frontend()
    assert frontend_predict(f, np.array([0, 0, 0])) == pytest.approx(0.11920, abs=1e-5)


def test_reproducible_bit_exact():
    a = generate(SyntheticConfig(n=3000, noise=0.25, seed=42))
    b = generate(SyntheticConfig(n=3000, noise=0.25, seed=42))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.concepts, b.concepts)
    assert np.array_equal(a.labels, b.labels)
    c = generate(SyntheticConfig(n=3000, noise=0.25, seed=43))
    assert not np.array_equal(a.labels, c.labels)


def test_feature_marginals_and_flip_rate():
    n = 100_000
    ds = generate(SyntheticConfig(n=n, noise=0.25, seed=7))
    se_feat = 3 * np.sqrt(0.7 * 0.3 / n)
    assert abs(ds.features.mean() - 0.7) < se_feat
    flips = (ds.concepts ^ _parity(ds.features)).mean()
    se_flip = 3 * np.sqrt(0.25 * 0.75 / (n * 3))
    assert abs(flips - 0.25) < se_flip


def test_oracle_probs_reference_values():
    x = np.array([1, 1, 0, 0, 0], dtype=np.int8)
    # parities of (x1,x2,x4), (x1,x2,x3), (x1,x2,x5) are all 0
    assert np.allclose(oracle_concept_probs(x, 0.0), [0.0, 0.0, 0.0])
    assert np.allclose(oracle_concept_probs(x, 0.25), [0.25, 0.25, 0.25])
    x2 = np.array([1, 0, 0, 0, 0], dtype=np.int8)
    assert np.allclose(oracle_concept_probs(x2, 0.0), [1.0, 1.0, 1.0])
    assert np.allclose(oracle_concept_probs(x2, 0.25), [0.75, 0.75, 0.75])
    # noise 0.5 erases all information
    assert np.allclose(oracle_concept_probs(x2, 0.5), [0.5, 0.5, 0.5])


def test_oracle_probs_match_empirical_concept_rates():
    n = 200_000
    ds = generate(SyntheticConfig(n=n, noise=0.25, seed=3))
    q = oracle_concept_probs(ds.features, 0.25)
    for k in range(3):
        for val in (0.25, 0.75):
            mask = q[:, k] == val
            rate = ds.concepts[mask, k].mean()
            se = 3 * np.sqrt(val * (1 - val) / mask.sum())
            assert abs(rate - val) < se


def test_oracle_scores_are_calibrated():
    # binned empirical label rate tracks the propagated score
    n = 100_000
    ds = generate(SyntheticConfig(n=n, noise=0.25, seed=11))
    q = oracle_concept_probs(ds.features, 0.25)
    scores = propagate_exact_batch(oracle_frontend(), q)
    for val in np.unique(scores.round(12)):
        mask = np.isclose(scores, val)
        cnt = int(mask.sum())
        if cnt < 500:
            continue
        rate = ds.labels[mask].mean()
        se = 3 * np.sqrt(val * (1 - val) / cnt)
        assert abs(rate - val) < se


def test_dataset_roundtrip(tmp_path):
    ds = generate(SyntheticConfig(n=500, noise=0.25, seed=9))
    path = tmp_path / "data.csv"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.concepts, ds.concepts)
    assert np.array_equal(back.labels, ds.labels)
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,x3,x4,x5,c1,c2,c3,y"


def test_read_dataset_rejects_bad_input(tmp_path):
    bad_header = tmp_path / "bad1.csv"
    bad_header.write_text("a,b,c\n")
    with pytest.raises(ValueError, match="header"):
        read_dataset(bad_header)
    bad_fields = tmp_path / "bad2.csv"
    bad_fields.write_text("x1,x2,x3,x4,x5,c1,c2,c3,y\n1,0,1\n")
    with pytest.raises(ValueError, match="line 2"):
        read_dataset(bad_fields)
    non_int = tmp_path / "bad3.csv"
    non_int.write_text("x1,x2,x3,x4,x5,c1,c2,c3,y\n1,0,1,0,1,0,1,0,0.5\n")
    with pytest.raises(ValueError, match="non-integer"):
        read_dataset(non_int)
