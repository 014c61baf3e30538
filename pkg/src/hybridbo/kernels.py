"""Mixed-input covariance kernels.

Encoded points are pairs ``(cat, con)`` of 1-D arrays; batches are pairs of
2-D arrays.  Kernels on each block combine into one mixed covariance through
a sum, a product, or both.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

SQRT5 = math.sqrt(5.0)


class CatKernel(str, enum.Enum):
    MATERN52 = "matern52"
    MLP = "mlp"
    MLP_PLUS_MATERN52 = "mlp+matern52"


class ConKernel(str, enum.Enum):
    MATERN52 = "matern52"


class Composition(str, enum.Enum):
    SUM = "sum"
    PRODUCT = "product"
    SUM_PLUS_PRODUCT = "sum+product"


@dataclass(frozen=True)
class KernelSpec:
    cat_kernel: CatKernel
    con_kernel: ConKernel = ConKernel.MATERN52
    composition: Composition = Composition.SUM

    @property
    def name(self) -> str:
        for name, spec in DEFAULT_KERNELS.items():
            if spec == self:
                return name
        return f"{self.cat_kernel.value}|{self.con_kernel.value}|{self.composition.value}"

    def param_names(self) -> tuple[str, ...]:
        names = []
        if self.cat_kernel in (CatKernel.MLP, CatKernel.MLP_PLUS_MATERN52):
            names += ["mlp_var", "mlp_bias", "mlp_weight"]
        if self.cat_kernel in (CatKernel.MATERN52, CatKernel.MLP_PLUS_MATERN52):
            names.append("ell_cat")
        names += ["ell_con", "amplitude", "nugget"]
        return tuple(names)

    @property
    def n_params(self) -> int:
        return len(self.param_names())


DEFAULT_KERNELS: dict[str, KernelSpec] = {
    "matern+matern": KernelSpec(CatKernel.MATERN52, ConKernel.MATERN52, Composition.SUM),
    "mlp+matern": KernelSpec(CatKernel.MLP, ConKernel.MATERN52, Composition.SUM),
    "mlpmatern+matern": KernelSpec(
        CatKernel.MLP_PLUS_MATERN52, ConKernel.MATERN52, Composition.SUM
    ),
    "mlp*matern": KernelSpec(CatKernel.MLP, ConKernel.MATERN52, Composition.PRODUCT),
    "mlp+matern+prod": KernelSpec(
        CatKernel.MLP, ConKernel.MATERN52, Composition.SUM_PLUS_PRODUCT
    ),
}


def kernel_by_name(name: str) -> KernelSpec:
    try:
        return DEFAULT_KERNELS[name]
    except KeyError:
        valid = ", ".join(DEFAULT_KERNELS)
        raise ValueError(f"unknown kernel {name!r}; valid names: {valid}") from None


@dataclass(frozen=True)
class KernelParams:
    """Kernel hyperparameters; all strictly positive."""

    ell_cat: float = 1.0
    ell_con: float = 0.5
    mlp_var: float = 1.0
    mlp_bias: float = 1.0
    mlp_weight: float = 1.0
    amplitude: float = 1.0
    nugget: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"kernel parameter {f.name} must be positive, got {v}")

    def to_log(self, spec: KernelSpec) -> np.ndarray:
        return np.log([getattr(self, n) for n in spec.param_names()])

    @classmethod
    def from_log(
        cls, spec: KernelSpec, theta: np.ndarray, base: "KernelParams | None" = None
    ) -> "KernelParams":
        values = dict(zip(spec.param_names(), np.exp(np.asarray(theta, dtype=float))))
        return replace(base or cls(), **{k: float(v) for k, v in values.items()})

    def as_dict(self, spec: KernelSpec | None = None) -> dict[str, float]:
        names = spec.param_names() if spec else [f.name for f in fields(self)]
        return {n: getattr(self, n) for n in names}


# -- scalar kernels -------------------------------------------------------------


def matern52(u, v, ell: float) -> float:
    """Matern kernel with smoothness 5/2 and unit amplitude."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if ell <= 0:
        raise ValueError("lengthscale must be positive")
    a = SQRT5 * float(np.linalg.norm(u - v)) / ell
    return (1.0 + a + a * a / 3.0) * math.exp(-a)


def mlp_arcsine(u, v, var: float, bias: float, weight: float) -> float:
    """Arc-sine (infinite MLP) kernel."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    num = weight * float(u @ v) + bias
    den = math.sqrt(weight * float(u @ u) + bias + 1.0) * math.sqrt(
        weight * float(v @ v) + bias + 1.0
    )
    z = num / den
    if not -1.0 <= z <= 1.0:
        raise ArithmeticError(f"arc-sine argument {z} outside [-1, 1]")
    return var * (2.0 / math.pi) * math.asin(z)


def _block_values(spec: KernelSpec, params: KernelParams, p, q) -> tuple[float, float]:
    pc, pn = (np.asarray(a, dtype=float) for a in p)
    qc, qn = (np.asarray(a, dtype=float) for a in q)
    if spec.cat_kernel is CatKernel.MATERN52:
        kc = matern52(pc, qc, params.ell_cat)
    else:
        kc = mlp_arcsine(pc, qc, params.mlp_var, params.mlp_bias, params.mlp_weight)
        if spec.cat_kernel is CatKernel.MLP_PLUS_MATERN52:
            kc += matern52(pc, qc, params.ell_cat)
    kn = matern52(pn, qn, params.ell_con)
    return kc, kn


def _combine(composition: Composition, kc, kn):
    if composition is Composition.SUM:
        return kc + kn
    if composition is Composition.PRODUCT:
        return kc * kn
    return kc + kn + kc * kn


def compose(spec: KernelSpec, params: KernelParams, p, q) -> float:
    """Mixed covariance between encoded points ``p = (cat, con)`` and ``q``."""
    kc, kn = _block_values(spec, params, p, q)
    return params.amplitude * _combine(spec.composition, kc, kn)


# -- batched kernels with log-parameter gradients ------------------------------


def _dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def _inner(a: np.ndarray, b: np.ndarray, same: bool):
    aa = np.einsum("ij,ij->i", a, a)
    return a @ b.T, aa, aa if same else np.einsum("ij,ij->i", b, b)


def _cached(cache: dict | None, key: str, make):
    if cache is None:
        return make()
    if key not in cache:
        cache[key] = make()
    return cache[key]


def _matern_block(r: np.ndarray, ell: float, grad: bool):
    a = SQRT5 * r / ell
    e = np.exp(-a)
    k = (1.0 + a + a * a / 3.0) * e
    if not grad:
        return k, None
    # d k / d log(ell)
    return k, (a * a / 3.0) * (1.0 + a) * e


def _mlp_block(inner, params: KernelParams, grad: bool):
    w, bias, var = params.mlp_weight, params.mlp_bias, params.mlp_var
    ab, aa, bb = inner
    A = w * aa + bias + 1.0
    B = w * bb + bias + 1.0
    sq = np.sqrt(np.outer(A, B))
    z = (w * ab + bias) / sq
    if np.any(np.abs(z) > 1.0):
        raise ArithmeticError("arc-sine argument outside [-1, 1]")
    base = (2.0 / math.pi) * np.arcsin(z)
    k = var * base
    if not grad:
        return k, None
    dk_dz = var * (2.0 / math.pi) / np.sqrt(np.maximum(1.0 - z * z, 1e-300))
    half_z = 0.5 * z
    dz_dw = ab / sq - half_z * (aa[:, None] / A[:, None] + bb[None, :] / B[None, :])
    dz_db = 1.0 / sq - half_z * (1.0 / A[:, None] + 1.0 / B[None, :])
    return k, {
        "mlp_var": k,
        "mlp_bias": dk_dz * dz_db * bias,
        "mlp_weight": dk_dz * dz_dw * w,
    }


def cross_cov(
    spec: KernelSpec,
    params: KernelParams,
    A: tuple[np.ndarray, np.ndarray],
    B: tuple[np.ndarray, np.ndarray],
    grad: bool = False,
    cache: dict | None = None,
):
    """Covariance matrix between batches ``A`` and ``B`` (noise-free).

    With ``grad=True`` also returns ``{param_name: dK/dlog(param)}`` for the
    parameters of ``spec`` except the nugget.  ``cache`` may hold the
    parameter-free distances and inner products across calls on the same
    ``A`` and ``B``; pass a fresh dict per pair.
    """
    ac, an = A
    bc, bn = B
    same = A is B
    grads: dict[str, np.ndarray] = {}

    if spec.cat_kernel is CatKernel.MATERN52:
        r_cat = _cached(cache, "r_cat", lambda: _dist(ac, bc))
        kc, g = _matern_block(r_cat, params.ell_cat, grad)
        cat_grads = {"ell_cat": g}
    else:
        inner = _cached(cache, "inner_cat", lambda: _inner(ac, bc, same))
        kc, cat_grads = _mlp_block(inner, params, grad)
        if spec.cat_kernel is CatKernel.MLP_PLUS_MATERN52:
            r_cat = _cached(cache, "r_cat", lambda: _dist(ac, bc))
            km, g = _matern_block(r_cat, params.ell_cat, grad)
            kc = kc + km
            if grad:
                cat_grads["ell_cat"] = g
    kn, gn = _matern_block(_cached(cache, "r_con", lambda: _dist(an, bn)), params.ell_con, grad)

    raw = _combine(spec.composition, kc, kn)
    K = params.amplitude * raw
    if not grad:
        return K
    if spec.composition is Composition.SUM:
        dc, dn = 1.0, 1.0
    elif spec.composition is Composition.PRODUCT:
        dc, dn = kn, kc
    else:
        dc, dn = 1.0 + kn, 1.0 + kc
    for name, g in cat_grads.items():
        grads[name] = params.amplitude * dc * g
    grads["ell_con"] = params.amplitude * dn * gn
    grads["amplitude"] = K
    return K, grads


def prior_variance(
    spec: KernelSpec, params: KernelParams, X: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    """Diagonal ``k(x, x)`` for each row of ``X``."""
    xc, xn = X
    n = xc.shape[0]
    if spec.cat_kernel is CatKernel.MATERN52:
        kc = np.ones(n)
    else:
        w, bias = params.mlp_weight, params.mlp_bias
        xx = np.einsum("ij,ij->i", xc, xc)
        num = w * xx + bias
        kc = params.mlp_var * (2.0 / math.pi) * np.arcsin(num / (num + 1.0))
        if spec.cat_kernel is CatKernel.MLP_PLUS_MATERN52:
            kc = kc + 1.0
    return params.amplitude * _combine(spec.composition, kc, np.ones(n))


def gram(
    points: tuple[np.ndarray, np.ndarray], spec: KernelSpec, params: KernelParams
) -> np.ndarray:
    """Noise-free Gram matrix; symmetric by construction."""
    K = cross_cov(spec, params, points, points)
    return 0.5 * (K + K.T)


class CholeskyError(np.linalg.LinAlgError):
    pass


def jittered_cholesky(K: np.ndarray, nugget: float, max_tries: int = 6):
    """Cholesky of ``K + nugget*I``, escalating the nugget tenfold on failure.

    Returns ``(L, effective_nugget)``.
    """
    n = K.shape[0]
    eye = np.eye(n)
    for _ in range(max_tries + 1):
        try:
            return np.linalg.cholesky(K + nugget * eye), nugget
        except np.linalg.LinAlgError:
            nugget *= 10.0
    raise CholeskyError(f"Cholesky failed with nugget up to {nugget / 10.0:.3g}")
