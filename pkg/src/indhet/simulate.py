"""Synthetic production data and the Gini-volume vs normalized-ME Monte Carlo."""

from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .entropy import DEFAULT_BINS, DEFAULT_CLUSTERS, DEFAULT_SEED, me_report
from .ingest import FirmObservation
from .zonotope import GeneratorSet, gini_volume

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output step for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, stream: int) -> int:
    """Independent 63-bit seed for ``stream`` under ``master_seed``."""
    return splitmix64((master_seed & _MASK64) ^ splitmix64(stream)) >> 1


def run_seeds(master_seed: int, run_index: int) -> tuple[int, int]:
    """(high, low) dataset seeds for a 1-based run index."""
    return derive_seed(master_seed, 2 * run_index), derive_seed(master_seed, 2 * run_index + 1)


# --------------------------------------------------------------------- CES

@dataclass(frozen=True)
class CesParams:
    gamma: float = math.exp(1.0564)
    delta: float = 0.4064
    upsilon: float = 0.8222
    rho: float = 0.6042
    sigma_u: float = 0.1
    sample_size: int = 2000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.rho == 0:
            raise ValueError("rho must be nonzero")
        if self.sigma_u < 0:
            raise ValueError("sigma_u must be >= 0")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


@dataclass(frozen=True)
class CesSample:
    K: np.ndarray
    L: np.ndarray
    y: np.ndarray
    y_det: np.ndarray  # noiseless CES value at (K, L)


def ces_output(K, L, params: CesParams) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    p = params
    inner = p.delta * K ** (-p.rho) + (1 - p.delta) * L ** (-p.rho)
    return p.gamma * inner ** (-p.upsilon / p.rho)


def gen_ces(params: CesParams | None = None) -> CesSample:
    """K, L ~ U(0, 1], y = CES(K, L) * exp(u), u ~ N(0, sigma_u^2)."""
    params = params or CesParams()
    rng = np.random.default_rng(params.seed)
    T = params.sample_size
    # 1 - U[0, 1) keeps inputs strictly positive
    K = 1.0 - rng.random(T)
    L = 1.0 - rng.random(T)
    u = rng.normal(0.0, params.sigma_u, T) if params.sigma_u > 0 else np.zeros(T)
    det = ces_output(K, L, params)
    return CesSample(K, L, det * np.exp(u), det)


# ------------------------------------------------------------ Cobb-Douglas

SIGMA_K = 0.01344
SIGMA_L = 0.01661


@dataclass(frozen=True)
class CobbDouglasScenario:
    regime: str
    n: int = 100
    alpha: float = 0.33
    beta: float = 0.66
    seed: int = DEFAULT_SEED
    # low regime log-normal scales and TFP log-sd
    sigma_k: float = SIGMA_K
    sigma_l: float = SIGMA_L
    sigma_a: float = 0.5

    def __post_init__(self):
        if self.regime not in ("high", "low"):
            raise ValueError(f"regime must be 'high' or 'low', got {self.regime!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class Dataset:
    K: np.ndarray
    L: np.ndarray
    Y: np.ndarray
    A: np.ndarray

    def observations(self) -> list[FirmObservation]:
        return [FirmObservation(y, k, l) for y, k, l in zip(self.Y.tolist(), self.K.tolist(), self.L.tolist())]


def gen_cobb_douglas(scenario: CobbDouglasScenario) -> Dataset:
    """Y = A K^alpha L^beta under the high (uniform) or low (log-normal) regime."""
    rng = np.random.default_rng(scenario.seed)
    n = scenario.n
    if scenario.regime == "high":
        K = rng.uniform(2900, 3100, n)
        L = rng.uniform(120, 130, n)
        A = rng.uniform(1.5, 2.5, n)
    else:
        sk, sl = scenario.sigma_k, scenario.sigma_l
        K = rng.lognormal(math.log(3000) - sk**2 / 2, sk, n)
        L = rng.lognormal(math.log(125) - sl**2 / 2, sl, n)
        A = np.exp(rng.normal(0.0, scenario.sigma_a, n))
    return Dataset(K, L, A * K**scenario.alpha * L**scenario.beta, A)


# ---------------------------------------------------------------- file I/O

def dataset_filenames(run_index: int) -> tuple[str, str]:
    return f"{run_index}-high_heterogeneity_data.csv", f"{run_index}-low_heterogeneity_data.csv"


@contextmanager
def _text_out(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _write_columns(target, header, columns) -> None:
    with _text_out(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*(c.tolist() for c in columns)):
            w.writerow([f"{x:.17g}" for x in row])


def write_dataset(target, data: Dataset) -> None:
    """Header ``K,L,Y``; 17 significant digits so values round-trip."""
    _write_columns(target, ["K", "L", "Y"], (data.K, data.L, data.Y))


def read_dataset(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def write_dataset_pair(run_index: int, directory, high: Dataset, low: Dataset) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = dataset_filenames(run_index)
    paths = (directory / names[0], directory / names[1])
    write_dataset(paths[0], high)
    write_dataset(paths[1], low)
    return paths


def write_ces(target, sample: CesSample) -> None:
    _write_columns(target, ["K", "L", "y", "y_det"], (sample.K, sample.L, sample.y, sample.y_det))


# ------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MonteCarloRow:
    run: int
    seed_high: int
    seed_low: int
    gini_high: float
    gini_low: float
    me_high: float  # normalized ME (H*/H_max)
    me_low: float
    hmax_high: float
    hmax_low: float


MC_CSV_HEADER = tuple(MonteCarloRow.__dataclass_fields__)


@dataclass
class MonteCarloReport:
    rows: list[MonteCarloRow]
    master_seed: int
    n: int
    clusters: int
    bins: int
    aggregate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "pairs": len(self.rows),
            "n": self.n,
            "clusters": self.clusters,
            "bins": self.bins,
            "aggregate": self.aggregate,
            "runs": [asdict(r) for r in self.rows],
        }

    csv_header = MC_CSV_HEADER

    def csv_rows(self):
        for r in self.rows:
            yield tuple(getattr(r, f) for f in MC_CSV_HEADER)


def _summary(values: list[float]) -> dict:
    return {
        "mean": math.fsum(values) / len(values),
        "std": statistics.pstdev(values) if len(values) > 1 else 0.0,
    }


def aggregate_rows(rows: list[MonteCarloRow]) -> dict:
    """Means, standard deviations and directional counts over runs."""
    if not rows:
        return {}
    out = {f: _summary([getattr(r, f) for r in rows])
           for f in ("gini_high", "gini_low", "me_high", "me_low", "hmax_high", "hmax_low")}

    def sign(x):
        return (x > 0) - (x < 0)

    out["me_high_gt_low"] = sum(r.me_high > r.me_low for r in rows)
    out["hmax_high_gt_low"] = sum(r.hmax_high > r.hmax_low for r in rows)
    out["gini_high_gt_low"] = sum(r.gini_high > r.gini_low for r in rows)
    out["gini_agrees_with_me"] = sum(
        sign(r.gini_high - r.gini_low) == sign(r.me_high - r.me_low) for r in rows
    )
    return out


def simulate_run(run_index: int, master_seed: int = DEFAULT_SEED, n: int = 100,
                 clusters: int = DEFAULT_CLUSTERS, bins: int = DEFAULT_BINS,
                 cluster_seed: int = DEFAULT_SEED, outdir=None) -> MonteCarloRow:
    seed_high, seed_low = run_seeds(master_seed, run_index)
    high = gen_cobb_douglas(CobbDouglasScenario("high", n=n, seed=seed_high))
    low = gen_cobb_douglas(CobbDouglasScenario("low", n=n, seed=seed_low))
    if outdir is not None:
        write_dataset_pair(run_index, outdir, high, low)
    scores = []
    for data in (high, low):
        panel = data.observations()
        gini = gini_volume(GeneratorSet.from_observations(panel), "exact").gini
        me = me_report(panel, k=clusters, seed=cluster_seed, bins=bins)
        scores.append((gini, me.h_norm, me.h_max))
    (gh, mh, hh), (gl, ml, hl) = scores
    return MonteCarloRow(run_index, seed_high, seed_low, gh, gl, mh, ml, hh, hl)


def _run_star(args):
    return simulate_run(*args)


def run_monte_carlo(pairs: int = 100, n: int = 100, master_seed: int = DEFAULT_SEED,
                    clusters: int = DEFAULT_CLUSTERS, bins: int = DEFAULT_BINS,
                    cluster_seed: int = DEFAULT_SEED, outdir=None,
                    workers: int = 1) -> MonteCarloReport:
    """Score ``pairs`` high/low dataset pairs with Gini volume and normalized ME.

    Run i (1-based) draws its datasets from seeds derived from
    ``master_seed`` and i alone, so results do not depend on ``workers``.
    The clustering seed is shared by every run.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    jobs = [(i, master_seed, n, clusters, bins, cluster_seed, outdir) for i in range(1, pairs + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_star, jobs))
    else:
        rows = [_run_star(j) for j in jobs]
    rows.sort(key=lambda r: r.run)
    report = MonteCarloReport(rows, master_seed, n, clusters, bins)
    report.aggregate = aggregate_rows(rows)
    return report
