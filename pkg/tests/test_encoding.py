import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcbm.encoding import (
    BinningScheme,
    Dataset,
    DecodingError,
    EncodingError,
    FeatureBinning,
    build_target,
    decode_samples,
    encode_event,
    encode_indices,
    fit_binning,
    marginals,
    rebin_counts,
)
from qcbm.simulator import ConfigurationError, ShotHistogram, index_to_bitstring


def scheme_for(qs, lo=0.0):
    return BinningScheme([FeatureBinning(f"f{j}", q, lo + np.arange(2**q + 1) * 1.5) for j, q in enumerate(qs)])


def test_equal_width_edges_are_integers():
    data = Dataset(np.linspace(0, 16, 1001), ["x"])
    scheme = fit_binning(data, [4])
    np.testing.assert_allclose(scheme.features[0].edges, np.arange(17))
    assert len(scheme.features[0].edges) == 17


def test_quantile_duplicate_edges_rejected():
    data = Dataset(np.r_[np.zeros(99), 1.0], ["x"])
    with pytest.raises(ConfigurationError, match="x"):
        fit_binning(data, [2], "quantile")


def test_constant_feature_rejected():
    with pytest.raises(ConfigurationError):
        fit_binning(Dataset(np.ones((10, 1)), ["flat"]), [3])


def test_quantile_bins_are_balanced():
    data = Dataset(np.random.default_rng(0).exponential(size=(4000, 1)), ["x"])
    scheme = fit_binning(data, [2], "quantile")
    counts = rebin_counts(data, scheme)
    assert counts.min() >= 995 and counts.max() <= 1005


def test_edges_cover_range():
    values = np.random.default_rng(1).normal(size=(500, 2))
    scheme = fit_binning(Dataset(values, ["a", "b"]), [3, 2])
    for j, f in enumerate(scheme.features):
        assert f.edges[0] == values[:, j].min() and f.edges[-1] == values[:, j].max()


def test_encode_concatenates_big_endian():
    scheme = scheme_for([4, 4])
    e = scheme.features[0].edges
    assert encode_event([e[3] + 0.1, e[12] + 0.1], scheme) == "00111100"
    assert encode_event([e[0], e[0]], scheme) == "00000000"


def test_last_edge_closes_last_bin():
    scheme = scheme_for([4])
    assert encode_event([scheme.features[0].edges[-1]], scheme) == "1111"


def test_out_of_range_names_feature_and_value():
    scheme = scheme_for([2, 2])
    with pytest.raises(EncodingError, match=r"f1.*-3\.0"):
        encode_event([0.5, -3.0], scheme)


def test_point_mass_target():
    scheme = scheme_for([2, 2])
    target = build_target(Dataset(np.array([[1.6, 4.6]]), ["f0", "f1"]), scheme)
    assert target.to_dict() == {"0111": 1.0}


def test_independent_uniform_target_is_near_uniform():
    rng = np.random.default_rng(7)
    data = Dataset(rng.uniform(0, 24, size=(10**6, 2)), ["f0", "f1"])
    target = build_target(data, scheme_for([4, 4])).probabilities
    assert 0.5 * np.abs(target - 1 / 256).sum() < 0.02


def test_identical_features_stay_on_diagonal():
    x = np.random.default_rng(2).uniform(0, 6, 5000)
    target = build_target(Dataset(np.column_stack([x, x]), ["f0", "f1"]), scheme_for([2, 2]))
    assert all(k[:2] == k[2:] for k in target.to_dict())


def test_decode_lands_in_bins():
    scheme = scheme_for([4, 4])
    data = decode_samples({"00111100": 5}, scheme, seed=0)
    e0, e1 = scheme.features[0].edges, scheme.features[1].edges
    assert np.all((data.values[:, 0] >= e0[3]) & (data.values[:, 0] < e0[4]))
    assert np.all((data.values[:, 1] >= e1[12]) & (data.values[:, 1] < e1[13]))


def test_point_mass_histogram_expands_rows():
    scheme = scheme_for([3, 3])
    data = decode_samples(ShotHistogram.from_dict({"101010": 8192}, 6), scheme, seed=1)
    assert data.num_events == 8192
    assert set(encode_indices(data.values, scheme)) == {0b101010}


@pytest.mark.parametrize("bad", [{"0101": 3}, {"01x": 1}, {"010": -1}])
def test_malformed_histograms(bad):
    with pytest.raises(DecodingError):
        decode_samples(bad, scheme_for([1, 2]), seed=0)


def test_empty_histogram():
    with pytest.raises(DecodingError):
        decode_samples(np.zeros(8, dtype=int), scheme_for([1, 2]))


@pytest.mark.parametrize("qs", [[1], [2, 3], [4, 4], [3, 3, 3], [6, 6], [4, 4, 4], [12]])
def test_roundtrip_every_bitstring(qs):
    scheme = scheme_for(qs)
    n = scheme.num_qubits
    data = decode_samples(np.ones(2**n, dtype=int), scheme, seed=3, shuffle=False)
    np.testing.assert_array_equal(encode_indices(data.values, scheme), np.arange(2**n))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2**20))
def test_decode_then_rebin_reproduces_histogram(qs, seed):
    scheme = scheme_for(qs)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(2000, rng.dirichlet(np.ones(2**scheme.num_qubits)))
    np.testing.assert_array_equal(rebin_counts(decode_samples(counts, scheme, seed=seed), scheme), counts)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2**20))
def test_marginals_match_direct_binning(qs, seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(3000, len(qs)))
    data = Dataset(values, [f"f{j}" for j in range(len(qs))])
    scheme = fit_binning(data, qs)
    target = build_target(data, scheme).probabilities
    for j, (feat, m) in enumerate(zip(scheme.features, marginals(target, scheme))):
        direct = np.searchsorted(feat.edges, values[:, j], side="right") - 1
        direct = np.minimum(direct, feat.num_bins - 1)
        # summing count/M over the other features is exact at the count level
        np.testing.assert_array_equal(np.rint(m * 3000), np.bincount(direct, minlength=feat.num_bins))
        np.testing.assert_allclose(m * 3000, np.rint(m * 3000), atol=1e-9)


def test_marginals_and_target_sum_to_one():
    data = Dataset(np.random.default_rng(4).normal(size=(777, 2)), ["a", "b"])
    scheme = fit_binning(data, [3, 2])
    target = build_target(data, scheme)
    assert abs(target.probabilities.sum() - 1) < 1e-12
    assert all(len(k) == 5 for k in target.to_dict())
    for m in marginals(target.probabilities, scheme):
        assert abs(m.sum() - 1) < 1e-12


def test_scheme_dict_roundtrip():
    scheme = scheme_for([2, 3])
    assert BinningScheme.from_dict(scheme.to_dict()) == scheme


@pytest.mark.parametrize("values", [np.array([[np.nan]]), np.zeros((0, 1))])
def test_dataset_validation(values):
    with pytest.raises(ValueError):
        Dataset(values, ["x"])


def test_bitstrings_have_q_characters():
    assert index_to_bitstring(5, 6) == "000101"
