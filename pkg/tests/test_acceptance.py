"""Acceptance criteria, each at its stated tolerance, one PASS/FAIL line apiece."""

import json
import math
import time

import numpy as np
import pytest

from indhet.cli import main
from indhet.entropy import me_report, shannon_entropy
from indhet.ingest import FirmObservation
from indhet.meregress import (BasisSpec, design_matrix, empirical_moments, fit_me_regression,
                              gram_error, moment_jacobian, moment_residual, predict,
                              scale_to_unit, to_polar)
from indhet.simulate import CesParams, gen_ces, run_monte_carlo
from indhet.zonotope import (GeneratorSet, diagonal, gini_volume, normalization_bias_report,
                             tangent_angles, zonotope_volume)

from conftest import stylized_panel
from oracles import hit_or_miss_volume

CES_SEEDS = range(1, 11)
CES_FLOOR = 0.98 - 0.01
CES_POLAR_FLOOR = 0.97 - 0.01


def _cli_json(argv, capsys):
    code = main(argv)
    out, _ = capsys.readouterr()
    return code, json.loads(out)


def test_criterion_1_ces_r_squared(tmp_path, capsys, verdict):
    rows = []
    slowest = 0.0
    for seed in CES_SEEDS:
        data = tmp_path / f"ces{seed}.csv"
        assert main(["simulate", "ces", "-T", "2000", "--seed", str(seed), "--output", str(data)]) == 0
        capsys.readouterr()
        result = {}
        for rep, extra in (("cartesian", []), ("polar", ["--polar"])):
            t0 = time.perf_counter()
            code, out = _cli_json(["fit", "--input", str(data), "--order-k", "3", "--order-l", "3",
                                   "--reference-column", "y_det", *extra], capsys)
            slowest = max(slowest, time.perf_counter() - t0)
            assert code == 0 and out["report"]["converged"]
            result[rep] = (out["reference_r_squared"], out["report"]["r_squared"])
        # the true surface bounds what any fit can reach against noisy y
        table = np.loadtxt(data, delimiter=",", skiprows=1)
        y, y_det = table[:, 2], table[:, 3]
        ceiling = 1 - ((y - y_det) ** 2).sum() / ((y - y.mean()) ** 2).sum()
        rows.append((seed, result["cartesian"], result["polar"], ceiling))

    cart = [r[1][0] for r in rows]
    polar = [r[2][0] for r in rows]
    noisy_cart = [r[1][1] for r in rows]
    noisy_polar = [r[2][1] for r in rows]
    ceilings = [r[3] for r in rows]
    with capsys.disabled():
        print("\n  seed  R2_cart(CES)  R2_polar(CES)  R2_cart(noisy y)  R2_polar(noisy y)  noise ceiling")
        for (seed, (c, nc), (p, npol), ceil) in rows:
            print(f"  {seed:4d}  {c:12.5f}  {p:13.5f}  {nc:16.5f}  {npol:17.5f}  {ceil:13.5f}")
    ok = (min(cart) >= CES_FLOOR and min(polar) >= CES_POLAR_FLOOR and slowest < 60
          and all(n <= c for n, c in zip(noisy_cart, ceilings)))
    verdict(
        "1 CES R^2",
        ok,
        f"vs CES function min cartesian {min(cart):.4f} (>= {CES_FLOOR:.2f}), "
        f"min polar {min(polar):.4f} (>= {CES_POLAR_FLOOR:.2f}); "
        f"vs noisy y cartesian {min(noisy_cart):.4f}-{max(noisy_cart):.4f}, "
        f"polar {min(noisy_polar):.4f}-{max(noisy_polar):.4f}, "
        f"noise ceiling {min(ceilings):.4f}-{max(ceilings):.4f}; slowest fit {slowest:.2f}s",
    )


@pytest.mark.xfail(strict=True, reason="sigma_u = 0.1 noise caps R^2 against the noisy sample near 0.95")
def test_criterion_1_literal_noisy_sample(capsys, verdict):
    """The fit's own R^2 against its noisy sample, read literally."""
    worst = {}
    for rep in ("cartesian", "polar"):
        vals = []
        for seed in CES_SEEDS:
            s = gen_ces(CesParams(sample_size=2000, seed=seed))
            sample = scale_to_unit(s.K, s.L, s.y)
            if rep == "polar":
                sample = to_polar(sample)
            _, fit = fit_me_regression(sample, BasisSpec(3, 3))
            vals.append(fit.r_squared)
        worst[rep] = min(vals)
    verdict("1b CES R^2 against noisy sample (literal reading)",
            worst["cartesian"] >= CES_FLOOR and worst["polar"] >= CES_POLAR_FLOOR,
            f"min cartesian {worst['cartesian']:.4f} (>= {CES_FLOOR:.2f}), "
            f"min polar {worst['polar']:.4f} (>= {CES_POLAR_FLOOR:.2f}); unattainable at sigma_u = 0.1")


def test_criterion_2_monte_carlo_separation(verdict):
    t0 = time.perf_counter()
    report = run_monte_carlo(pairs=100, n=100, master_seed=42, workers=1)
    elapsed = time.perf_counter() - t0
    agg = report.aggregate
    ok = agg["me_high_gt_low"] >= 90 and agg["gini_agrees_with_me"] < 50 and elapsed < 600
    verdict(
        "2 Monte Carlo separation",
        ok,
        f"normalized ME high>low in {agg['me_high_gt_low']}/100 (>= 90); "
        f"Gini agrees with ME in {agg['gini_agrees_with_me']}/100 (< 50); "
        f"mean h_norm high {agg['me_high']['mean']:.4f} low {agg['me_low']['mean']:.4f}; "
        f"mean gini high {agg['gini_high']['mean']:.3e} low {agg['gini_low']['mean']:.3e}; "
        f"{elapsed:.1f}s",
    )


def test_criterion_3_bias_arithmetic(verdict):
    r = normalization_bias_report(500, 100, 1000)
    ok = f"{r.biased_ratio:.5f}" == "0.50000" and f"{r.adjusted_ratio:.5f}" == "0.55556"
    verdict("3 bias arithmetic", ok,
            f"biased {r.biased_ratio:.5f}, adjusted {r.adjusted_ratio:.5f}")


def test_criterion_4_stylized_entropy_and_volume(verdict):
    h = shannon_entropy([1 / 3, 1 / 3, 1 / 3])
    m = gini_volume(GeneratorSet.from_observations(stylized_panel(2023)))
    ok = abs(h - math.log(3)) <= 1e-12 and m.volume.value == 0.0 and m.gini == 0.0
    verdict("4 stylized entropy", ok,
            f"H(uniform 3) = {h:.15f} (ln 3 = {math.log(3):.15f}); "
            f"2023 table volume {m.volume.value}, gini {m.gini}")


def test_criterion_5_zonotope_oracle(verdict):
    rng = np.random.default_rng(20240501)
    worst = 0.0
    gini_ok = True
    min_fill = 1.0
    for i in range(200):
        d = 2 + i % 2
        n = int(rng.integers(d, 13))
        A = rng.random((n, d))
        exact = zonotope_volume(GeneratorSet(A)).value
        est, fill = hit_or_miss_volume(A, 10**6, rng)
        worst = max(worst, abs(est - exact) / exact)
        min_fill = min(min_fill, fill)
        g = gini_volume(GeneratorSet(A)).gini
        gini_ok &= 0.0 <= g <= 1.0
    verdict("5 zonotope oracle", worst <= 0.02 and gini_ok,
            f"200 sets, worst relative error {worst:.4%} (<= 2%), "
            f"smallest hit fraction {min_fill:.4f}, gini in [0,1]: {gini_ok}")


def test_criterion_6_property_suites(verdict):
    rng = np.random.default_rng(6)
    failures = []

    for _ in range(50):
        d = int(rng.integers(2, 4))
        A = rng.random((int(rng.integers(1, 10)), d)) * 10
        c = float(rng.uniform(0.1, 10))
        a, b = gini_volume(GeneratorSet(A)), gini_volume(GeneratorSet(A * c))
        if not math.isclose(b.volume.value, a.volume.value * c**d, rel_tol=1e-9, abs_tol=1e-300):
            failures.append("scaling volume")
        if not math.isclose(b.gini, a.gini, rel_tol=1e-9, abs_tol=1e-300):
            failures.append("scaling gini")
        p = gini_volume(GeneratorSet(A[rng.permutation(len(A))]))
        if p.volume.value != a.volume.value or p.gini != a.gini:
            failures.append("permutation")
        if A.shape[1] == 3:
            t = tangent_angles(GeneratorSet(A, n_inputs=2))
            norm2 = math.fsum(x * x for x in diagonal(GeneratorSet(A)))
            for lab in t.angles:
                lhs = t.parallel_norms[lab] ** 2 + t.perp_norms[lab] ** 2
                if not math.isclose(lhs, norm2, rel_tol=1e-9):
                    failures.append("pythagoras")

    for seed in range(20):
        r = np.random.default_rng(seed)
        n = int(r.integers(5, 200))
        K, L, Y = r.uniform(1, 100, (3, n))
        rep = me_report([FirmObservation(y, k, l) for k, l, y in zip(K, L, Y)], seed=seed)
        if abs(math.fsum(row.weight for row in rep.rows) - 1.0) > 1e-12:
            failures.append("weights")

    if gram_error(10) > 1e-10:
        failures.append("gram")

    for seed in range(10):
        r = np.random.default_rng(seed)
        spec = BasisSpec(3, 3)
        X = design_matrix(r.random(80), r.random(80), spec)
        s, target = r.normal(0, 0.3, spec.size), r.random(spec.size)
        J = moment_jacobian(s, X)
        fd = np.column_stack([
            (moment_residual(s + e, X, target) - moment_residual(s - e, X, target)) / 2e-6
            for e in np.eye(spec.size) * 1e-6
        ])
        if np.abs(fd - J).max() > 1e-4 * np.abs(J).max():
            failures.append("jacobian")

        K, L = r.uniform(1, 5, (2, 300))
        sample = scale_to_unit(K, L, K**0.3 * L**0.6 * r.lognormal(0, 0.2, 300))
        coeffs, fit = fit_me_regression(sample, spec, tol=1e-8)
        y_hat = predict(coeffs, K, L).y
        model = design_matrix(sample.u, sample.v, spec).T @ y_hat / 300
        resid = np.abs(model - empirical_moments(sample, spec).values.ravel()).max()
        if not (fit.converged and resid <= 1e-8):
            failures.append("moment residual")

    verdict("6 property suites", not failures,
            "scaling, permutation, Pythagoras, weights, Gram, Jacobian, moment residual"
            + ("" if not failures else f"; failed: {sorted(set(failures))}"))


def test_criterion_7_stylized_pipeline(stylized_survey, tmp_path, capsys, verdict):
    clean = tmp_path / "clean.csv"
    codes = [main(["preprocess", "--input", str(stylized_survey), "--output", str(clean)])]
    out = tmp_path / "metrics.json"
    codes.append(main(["metrics", "all", "--input", str(clean), "--output", str(out)]))
    codes.append(main(["summary", "--input", str(clean)]))
    capsys.readouterr()
    data = json.loads(out.read_text())
    ok = codes == [0, 0, 0] and sorted(data) == ["10:Stylland:2006", "10:Stylland:2023"]
    verdict("7 stylized pipeline", ok,
            f"preprocess/metrics/summary exit codes {codes}; "
            "survey-microdata country values are out of scope (proprietary data)")
