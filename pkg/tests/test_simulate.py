import io
import math

import mpmath
import numpy as np
import pytest

from indhet.simulate import (CesParams, CobbDouglasScenario, MonteCarloRow, aggregate_rows,
                             ces_output, dataset_filenames, derive_seed, gen_ces,
                             gen_cobb_douglas, read_dataset, run_monte_carlo, run_seeds,
                             simulate_run, splitmix64, write_dataset, write_dataset_pair)


def test_splitmix_reference_values():
    # published first outputs of splitmix64 seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & (2**64 - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_run_seeds_distinct_and_stable():
    seeds = [s for i in range(1, 101) for s in run_seeds(42, i)]
    assert len(set(seeds)) == 200
    assert all(0 <= s < 2**63 for s in seeds)
    assert run_seeds(42, 7) == (derive_seed(42, 14), derive_seed(42, 15))


def test_ces_closed_form_against_mpmath():
    p = CesParams()
    K, L = 0.3, 0.8
    mpmath.mp.dps = 40
    ref = mpmath.e ** mpmath.mpf("1.0564") * (
        mpmath.mpf("0.4064") * mpmath.mpf(K) ** mpmath.mpf("-0.6042")
        + mpmath.mpf("0.5936") * mpmath.mpf(L) ** mpmath.mpf("-0.6042")
    ) ** (-mpmath.mpf("0.8222") / mpmath.mpf("0.6042"))
    assert float(ces_output(K, L, p)) == pytest.approx(float(ref), rel=1e-13)


def test_ces_delta_one_depends_only_on_capital():
    p = CesParams(delta=1.0)
    K = np.array([0.2, 0.5, 0.9])
    a = ces_output(K, np.array([0.1, 0.1, 0.1]), p)
    b = ces_output(K, np.array([0.9, 0.4, 0.7]), p)
    assert np.array_equal(a, b)
    assert np.allclose(a, p.gamma * K**p.upsilon, rtol=1e-13)


def test_ces_sample_shapes_and_noise():
    s = gen_ces(CesParams(sample_size=20000, seed=3))
    assert s.K.min() > 0 and s.K.max() <= 1 and s.L.min() > 0
    u = np.log(s.y / s.y_det)
    assert abs(u.mean()) < 4 * 0.1 / math.sqrt(20000)
    assert u.std() == pytest.approx(0.1, rel=0.03)
    noiseless = gen_ces(CesParams(sigma_u=0.0, sample_size=10, seed=3))
    assert np.array_equal(noiseless.y, noiseless.y_det)


def test_ces_param_validation():
    with pytest.raises(ValueError):
        CesParams(delta=0.0)
    with pytest.raises(ValueError):
        CesParams(rho=0.0)


def test_cobb_douglas_value_against_mpmath():
    d = gen_cobb_douglas(CobbDouglasScenario("high", n=5, seed=1))
    mpmath.mp.dps = 40
    for a, k, l, y in zip(d.A, d.K, d.L, d.Y):
        ref = mpmath.mpf(a) * mpmath.mpf(k) ** mpmath.mpf("0.33") * mpmath.mpf(l) ** mpmath.mpf("0.66")
        assert y == pytest.approx(float(ref), rel=1e-13)


def test_high_regime_ranges():
    d = gen_cobb_douglas(CobbDouglasScenario("high", n=1000, seed=2))
    assert 2900 <= d.K.min() and d.K.max() <= 3100
    assert 120 <= d.L.min() and d.L.max() <= 130
    assert 1.5 <= d.A.min() and d.A.max() <= 2.5


def test_low_regime_moments():
    d = gen_cobb_douglas(CobbDouglasScenario("low", n=100_000, seed=3))
    assert d.K.mean() == pytest.approx(3000, abs=1.0)
    assert d.L.mean() == pytest.approx(125, abs=0.1)
    assert np.log(d.K).std() == pytest.approx(0.01344, rel=0.02)
    assert np.log(d.L).std() == pytest.approx(0.01661, rel=0.02)
    assert np.log(d.A).std() == pytest.approx(0.5, rel=0.02)


def test_regime_validation():
    with pytest.raises(ValueError):
        CobbDouglasScenario("medium")


def test_dataset_roundtrip_is_exact(tmp_path):
    d = gen_cobb_douglas(CobbDouglasScenario("low", n=100, seed=4))
    path = tmp_path / "x.csv"
    write_dataset(path, d)
    lines = path.read_text().splitlines()
    assert lines[0] == "K,L,Y" and len(lines) == 101
    K, L, Y = read_dataset(path)
    assert np.array_equal(K, d.K) and np.array_equal(L, d.L) and np.array_equal(Y, d.Y)


def test_dataset_pair_names(tmp_path):
    assert dataset_filenames(3) == ("3-high_heterogeneity_data.csv", "3-low_heterogeneity_data.csv")
    d = gen_cobb_douglas(CobbDouglasScenario("high", n=3))
    paths = write_dataset_pair(3, tmp_path / "out", d, d)
    assert [p.name for p in paths] == list(dataset_filenames(3))


def test_write_dataset_to_stream():
    buf = io.StringIO()
    write_dataset(buf, gen_cobb_douglas(CobbDouglasScenario("high", n=2)))
    assert buf.getvalue().count("\n") == 3


def test_generation_is_deterministic():
    a = gen_cobb_douglas(CobbDouglasScenario("low", seed=9))
    b = gen_cobb_douglas(CobbDouglasScenario("low", seed=9))
    assert np.array_equal(a.Y, b.Y)
    assert np.array_equal(gen_ces().y, gen_ces().y)


def test_aggregate_counts():
    rows = [MonteCarloRow(1, 0, 0, 0.1, 0.2, 0.9, 0.5, 1.0, 2.0),
            MonteCarloRow(2, 0, 0, 0.3, 0.2, 0.9, 0.5, 3.0, 2.0)]
    agg = aggregate_rows(rows)
    assert agg["me_high_gt_low"] == 2
    assert agg["gini_high_gt_low"] == 1
    assert agg["gini_agrees_with_me"] == 1
    assert agg["hmax_high_gt_low"] == 1
    assert agg["gini_high"]["mean"] == pytest.approx(0.2)
    assert aggregate_rows([]) == {}


def test_monte_carlo_independent_of_workers_and_order(tmp_path):
    serial = run_monte_carlo(pairs=4, n=30)
    parallel = run_monte_carlo(pairs=4, n=30, workers=2, outdir=tmp_path)
    assert serial.rows == parallel.rows
    assert serial.rows[2] == simulate_run(3, n=30)
    assert len(list(tmp_path.iterdir())) == 8


def test_monte_carlo_requires_pairs():
    with pytest.raises(ValueError):
        run_monte_carlo(pairs=0)
