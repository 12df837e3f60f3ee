"""Maximum-entropy regression functions y(K, L) = exp[sum S_ab phi_a(K) phi_b(L)].

Coefficients S are chosen so the model's basis moments
(1/T) sum phi_a(K_t) phi_b(L_t) y(K_t, L_t) equal the empirical ones
(1/T) sum phi_a(K_t) phi_b(L_t) y_t.  Inputs are min-max scaled to [0, 1]
and phi is the orthonormal shifted Legendre family on [0, 1].

The moment residual is the gradient of the convex function
F(S) = mean(exp(Phi S)) - S . nu_hat, so its Jacobian
Phi^T diag(exp(Phi S)) Phi / T is positive definite whenever the design
has full column rank, and damped Newton converges from the log-linear
least-squares start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DegenerateVariance, NotConverged, OutOfDomain, SingularJacobian

log = logging.getLogger(__name__)

GRAM_NODES = 64
GRAM_TOL = 1e-10


def legendre_unit(u, m: int) -> np.ndarray:
    """Orthonormal shifted Legendre polynomial of degree ``m`` on [0, 1].

    Three-term recurrence on x = 2u - 1, scaled by sqrt(2m + 1).
    """
    x = 2.0 * np.asarray(u, dtype=float) - 1.0
    p_prev = np.ones_like(x)
    if m == 0:
        return p_prev
    p = x.copy()
    for n in range(1, m):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
    return math.sqrt(2 * m + 1) * p


@dataclass(frozen=True)
class BasisSpec:
    order_k: int = 3
    order_l: int = 3
    family: str = "shifted-legendre-orthonormal"

    def __post_init__(self):
        if self.order_k < 0 or self.order_l < 0:
            raise ValueError("basis orders must be >= 0")
        if self.family != "shifted-legendre-orthonormal":
            raise ValueError(f"unsupported basis family {self.family!r}")
        err = gram_error(max(self.order_k, self.order_l))
        if err > GRAM_TOL:
            raise ValueError(f"basis fails orthonormality check (error {err:.2e})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.order_k + 1, self.order_l + 1)

    @property
    def size(self) -> int:
        return (self.order_k + 1) * (self.order_l + 1)


def gram_matrix(max_order: int, nodes: int = GRAM_NODES) -> np.ndarray:
    """Gram matrix of phi_0..phi_max on [0, 1] by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    u, w = (x + 1) / 2, w / 2
    vals = np.array([legendre_unit(u, m) for m in range(max_order + 1)])
    return (vals * w) @ vals.T


def gram_error(max_order: int, nodes: int = GRAM_NODES) -> float:
    return float(np.max(np.abs(gram_matrix(max_order, nodes) - np.eye(max_order + 1))))


def basis_eval(spec: BasisSpec, u: float, m: int) -> float:
    if not 0.0 <= u <= 1.0:
        raise OutOfDomain(f"u={u} outside [0, 1]")
    if not 0 <= m <= max(spec.order_k, spec.order_l):
        raise OutOfDomain(f"basis index {m} exceeds the configured orders")
    return float(legendre_unit(u, m))


def design_matrix(u, v, spec: BasisSpec) -> np.ndarray:
    """T x (N_k+1)(N_l+1) tensor basis, column a*(N_l+1)+b = phi_a(u) phi_b(v)."""
    pu = [legendre_unit(u, a) for a in range(spec.order_k + 1)]
    pv = [legendre_unit(v, b) for b in range(spec.order_l + 1)]
    return np.column_stack([pa * pb for pa in pu for pb in pv])


@dataclass(frozen=True)
class UnitScaler:
    """Min-max map of (K, L) onto [0, 1]^2; constant dimensions go to 0.5."""

    k_min: float
    k_max: float
    l_min: float
    l_max: float

    @staticmethod
    def _fwd(x, lo, hi):
        x = np.asarray(x, dtype=float)
        if hi > lo:
            return (x - lo) / (hi - lo)
        return np.full_like(x, 0.5)

    @staticmethod
    def _inv(u, lo, hi):
        u = np.asarray(u, dtype=float)
        if hi > lo:
            return lo + u * (hi - lo)
        return np.full_like(u, lo)

    def transform(self, K, L):
        return self._fwd(K, self.k_min, self.k_max), self._fwd(L, self.l_min, self.l_max)

    def inverse(self, u, v):
        return self._inv(u, self.k_min, self.k_max), self._inv(v, self.l_min, self.l_max)

    def to_dict(self) -> dict:
        return {"K": [self.k_min, self.k_max], "L": [self.l_min, self.l_max]}


@dataclass(frozen=True)
class ScaledSample:
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    scaler: UnitScaler
    representation: str = "cartesian"

    @property
    def size(self) -> int:
        return self.y.size


def scale_to_unit(K, L, y) -> ScaledSample:
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    y = np.asarray(y, dtype=float)
    if K.size == 0 or not (K.shape == L.shape == y.shape):
        raise ValueError("K, L, y must be nonempty and equally shaped")
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(L))):
        raise ValueError("K and L must be finite")
    scaler = UnitScaler(float(K.min()), float(K.max()), float(L.min()), float(L.max()))
    u, v = scaler.transform(K, L)
    return ScaledSample(u, v, y, scaler)


def polar_transform(k, l):
    """Scaled (K, L) -> (r, t) in [0, 1]^2; the origin maps to (0, 0)."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    r = np.sqrt(k * k + l * l) / math.sqrt(2.0)
    t = np.arctan2(l, k) / (math.pi / 2)  # atan2(0, 0) == 0
    return r, t


def to_polar(sample: ScaledSample) -> ScaledSample:
    if sample.representation == "polar":
        return sample
    r, t = polar_transform(sample.u, sample.v)
    return replace(sample, u=r, v=t, representation="polar")


@dataclass(frozen=True)
class MomentMatrix:
    values: np.ndarray
    sample_size: int


def empirical_moments(sample: ScaledSample, spec: BasisSpec) -> MomentMatrix:
    X = design_matrix(sample.u, sample.v, spec)
    nu = X.T @ sample.y / sample.size
    return MomentMatrix(nu.reshape(spec.shape), sample.size)


def moment_residual(s_flat, design, target) -> np.ndarray:
    """Model moments minus empirical moments for flattened coefficients."""
    mu = np.exp(design @ s_flat)
    return design.T @ mu / design.shape[0] - target


def moment_jacobian(s_flat, design) -> np.ndarray:
    mu = np.exp(design @ s_flat)
    return (design * mu[:, None]).T @ design / design.shape[0]


@dataclass(frozen=True)
class MECoefficients:
    s: np.ndarray
    basis: BasisSpec
    scaler: UnitScaler
    representation: str = "cartesian"
    c: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "orders": [self.basis.order_k, self.basis.order_l],
            "representation": self.representation,
            "bounds": self.scaler.to_dict(),
            "s": self.s.ravel().tolist(),
        }
        if self.c is not None:
            out["c"] = self.c.ravel().tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MECoefficients":
        spec = BasisSpec(*data["orders"])
        b = data["bounds"]
        scaler = UnitScaler(b["K"][0], b["K"][1], b["L"][0], b["L"][1])
        c = np.array(data["c"]).reshape(spec.shape) if data.get("c") is not None else None
        return cls(np.array(data["s"], dtype=float).reshape(spec.shape), spec, scaler,
                   data["representation"], c)


@dataclass(frozen=True)
class FitReport:
    r_squared: float | None  # None when the sample output is constant
    moment_residual_norm: float
    iterations: int
    converged: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "r_squared": self.r_squared,
            "moment_residual_norm": self.moment_residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
        }


def _newton(residual, jacobian, x0, tol, max_iter, damping, max_retries=8):
    """Damped Newton on residual(x) = 0, backtracking on the sup-norm.

    Returns (x, sup-norm, iterations, converged).
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = float(np.max(np.abs(r)))
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return x, norm, it - 1, True
        J = jacobian(x)
        lam = damping
        for retry in range(max_retries + 1):
            try:
                A = J + lam * np.eye(J.shape[0]) if lam else J
                step = np.linalg.solve(A, r)
                if np.all(np.isfinite(step)):
                    break
            except np.linalg.LinAlgError:
                pass
            lam = max(lam * 10.0, 1e-10 * max(1.0, float(np.max(np.abs(np.diag(J))))))
        else:
            raise SingularJacobian(max_retries)

        t = 1.0
        while True:
            trial = x - t * step
            with np.errstate(over="ignore", invalid="ignore"):
                r_trial = residual(trial)
            n_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(n_trial) and n_trial < norm:
                break
            t *= 0.5
            if t < 1e-10:
                return x, norm, it, norm <= tol
        x, r, norm = trial, r_trial, n_trial
    return x, norm, it, norm <= tol


def fit_me_regression(
    sample: ScaledSample,
    spec: BasisSpec | None = None,
    max_iter: int = 200,
    tol: float = 1e-8,
    damping: float = 0.0,
    strict: bool = False,
) -> tuple[MECoefficients, FitReport]:
    """Match the exponential-form surface's basis moments to the sample's.

    Starts from least squares of ln y on the tensor basis (positive y only)
    and refines with damped Newton.  The reported residual is recomputed
    through :func:`predict` as an independent check.
    """
    spec = spec or BasisSpec()
    if sample.size <= spec.size:
        raise ValueError(f"need more than {spec.size} observations for orders {spec.shape}")
    X = design_matrix(sample.u, sample.v, spec)
    y = sample.y
    target = X.T @ y / sample.size

    pos = y > 0
    if pos.sum() < spec.size:
        raise ValueError("too few positive outputs to initialize the fit")
    s0, *_ = np.linalg.lstsq(X[pos], np.log(y[pos]), rcond=None)

    s, _, iters, converged = _newton(
        lambda s: moment_residual(s, X, target),
        lambda s: moment_jacobian(s, X),
        s0, tol, max_iter, damping,
    )
    coeffs = MECoefficients(s.reshape(spec.shape), spec, sample.scaler, sample.representation)

    y_hat = _surface(coeffs, sample.u, sample.v)
    check = design_matrix(sample.u, sample.v, spec).T @ y_hat / sample.size
    resid = float(np.max(np.abs(check - empirical_moments(sample, spec).values.ravel())))
    try:
        r2 = r_squared(y, y_hat)
    except DegenerateVariance:
        r2 = None
    report = FitReport(r2, resid, iters, converged and resid <= tol, tol)
    if not report.converged:
        log.warning("ME regression did not converge: residual %.3g > tol %.3g", resid, tol)
        if strict:
            raise NotConverged(f"moment residual {resid:.3g} > {tol:.3g}", (coeffs, report))
    return coeffs, report


def _surface(coeffs: MECoefficients, u, v) -> np.ndarray:
    """exp-form surface at unit-square coordinates in the fit's representation."""
    X = design_matrix(u, v, coeffs.basis)
    return np.exp(X @ coeffs.s.ravel())


class Prediction(NamedTuple):
    y: np.ndarray
    clamped: np.ndarray


def predict(coeffs: MECoefficients, K, L) -> Prediction:
    """Evaluate the fitted surface at raw (K, L).

    Points outside the stored scaling bounds are clamped onto them and
    flagged in ``clamped``.
    """
    u, v = coeffs.scaler.transform(K, L)
    u, v = np.atleast_1d(u), np.atleast_1d(v)
    clamped = (u < 0) | (u > 1) | (v < 0) | (v > 1)
    u, v = np.clip(u, 0, 1), np.clip(v, 0, 1)
    if coeffs.representation == "polar":
        u, v = polar_transform(u, v)
    return Prediction(_surface(coeffs, u, v), clamped)


@dataclass(frozen=True)
class DensityFit:
    c: np.ndarray
    iterations: int
    converged: bool
    moment_residual_norm: float
    nodes: int

    def integral(self) -> float:
        u, v, w = _tensor_quadrature(self.nodes)
        spec = BasisSpec(self.c.shape[0] - 1, self.c.shape[1] - 1)
        return float(w @ np.exp(design_matrix(u, v, spec) @ self.c.ravel()))


def _tensor_quadrature(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = (x + 1) / 2, w / 2
    uu, vv = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w)
    return uu.ravel(), vv.ravel(), ww.ravel()


def fit_me_density(
    sample: ScaledSample,
    spec: BasisSpec | None = None,
    nodes: int = 32,
    max_iter: int = 200,
    tol: float = 1e-8,
    strict: bool = False,
) -> DensityFit:
    """Maximum-entropy density f(u, v) = exp[sum C_ab phi_a(u) phi_b(v)] on [0, 1]^2.

    Since phi_0 = 1, the (0, 0) moment constraint fixes the integral at 1,
    so C_00 carries the normalization.
    """
    spec = spec or BasisSpec()
    if sample.size <= spec.size:
        raise ValueError(f"need more than {spec.size} observations for orders {spec.shape}")
    target = design_matrix(sample.u, sample.v, spec).mean(axis=0)
    u, v, w = _tensor_quadrature(nodes)
    Q = design_matrix(u, v, spec)

    def residual(c):
        return Q.T @ (w * np.exp(Q @ c)) - target

    def jacobian(c):
        return (Q * (w * np.exp(Q @ c))[:, None]).T @ Q

    c, norm, iters, converged = _newton(residual, jacobian, np.zeros(spec.size), tol, max_iter, 0.0)
    fit = DensityFit(c.reshape(spec.shape), iters, converged, norm, nodes)
    if not converged:
        log.warning("ME density did not converge: residual %.3g > tol %.3g", norm, tol)
        if strict:
            raise NotConverged(f"density moment residual {norm:.3g} > {tol:.3g}", fit)
    return fit


def density(c: np.ndarray, u, v) -> np.ndarray:
    spec = BasisSpec(c.shape[0] - 1, c.shape[1] - 1)
    return np.exp(design_matrix(np.atleast_1d(u), np.atleast_1d(v), spec) @ c.ravel())


def r_squared(y, y_hat) -> float:
    """1 - SSR / (sum y^2 - T ybar^2).

    The denominator is evaluated in its centered form sum (y - ybar)^2,
    which is algebraically identical and exactly zero for constant y.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.size < 2:
        raise ValueError("y and y_hat need equal length >= 2")
    T = y.size
    ybar = math.fsum(y.tolist()) / T
    denom = math.fsum(((y - ybar) ** 2).tolist())
    if denom <= 0:
        raise DegenerateVariance("output has no variance")
    return 1.0 - math.fsum(((y - y_hat) ** 2).tolist()) / denom
