"""From-scratch one-class SVM with an RBF kernel.

Training solves the standard one-class dual

    minimize    0.5 * a' Q a
    subject to  0 <= a_i <= 1/(nu * n),  sum(a) = 1,   Q_ij = K(x_i, x_j)

with sequential pairwise updates on the maximal violating pair, which
preserves both the simplex constraint and the box bounds. Pair selection
is deterministic, so training is reproducible bit for bit.

The kernel parameter is interpreted either as the exponent coefficient
(mode "gamma", K = exp(-g * ||x-y||^2)) or as the width (mode "sigma",
K = exp(-||x-y||^2 / (2 s^2))); "gamma" is the default because a width
of 0.01 on unit-scaled data would zero out every off-diagonal kernel
value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import SolverNotConverged, TooFewSamples, VersionMismatch
from .records import FeatureVector, SourceId

KERNEL_MODES = ("gamma", "sigma")

# Alphas below this are treated as zero when extracting support vectors.
SV_ALPHA_MIN = 1e-8

# The dual is solved to a KKT tolerance of 1e-6, so decision values closer
# to the boundary than that are numerical noise; they snap to exactly 0,
# which the sign convention reads as normal.
DECISION_TOL = 1e-6


def rbf_kernel(x: Sequence[float], y: Sequence[float], sigma: float) -> float:
    """Gaussian kernel exp(-||x-y||^2 / (2 sigma^2)); always in (0, 1]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValueError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    d2 = float(np.sum((xa - ya) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


def kernel_coef(kernel_value: float, kernel_mode: str) -> float:
    """Exponent coefficient g so that K = exp(-g * ||x-y||^2)."""
    if kernel_value <= 0:
        raise ValueError("kernel value must be positive")
    if kernel_mode == "gamma":
        return kernel_value
    if kernel_mode == "sigma":
        return 1.0 / (2.0 * kernel_value * kernel_value)
    raise ValueError(f"kernel_mode must be one of {KERNEL_MODES}")


def _kernel_matrix(X: np.ndarray, Y: np.ndarray, coef: float) -> np.ndarray:
    sq = X @ Y.T
    sq *= -2.0
    sq += np.sum(X * X, axis=1)[:, None]
    sq += np.sum(Y * Y, axis=1)[None, :]
    np.maximum(sq, 0.0, out=sq)
    sq *= -coef
    return np.exp(sq, out=sq)


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray  # (m, d)
    alphas: np.ndarray  # (m,)
    rho: float
    kernel_value: float
    kernel_mode: str
    nu: float
    n_train: int
    scope: Optional[SourceId] = None

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=float)
        al = np.asarray(self.alphas, dtype=float)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alphas", al)
        if sv.ndim != 2 or al.ndim != 1 or sv.shape[0] != al.shape[0]:
            raise ValueError("support_vectors and alphas must align")
        if self.kernel_mode not in KERNEL_MODES:
            raise ValueError(f"kernel_mode must be one of {KERNEL_MODES}")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        upper = 1.0 / (self.nu * self.n_train)
        if np.any(al <= 0) or np.any(al > upper * (1 + 1e-9)):
            raise ValueError("alphas must lie in (0, 1/(nu*n)]")
        if abs(float(al.sum()) - 1.0) > 1e-6:
            raise ValueError("alphas must sum to 1")

    @property
    def coef(self) -> float:
        return kernel_coef(self.kernel_value, self.kernel_mode)


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.asarray(samples, dtype=float)
    rows = [s.values if isinstance(s, FeatureVector) else s for s in samples]
    return np.asarray(rows, dtype=float)


def _solve_dual(
    Q: np.ndarray, nu: float, tol: float, max_iter: int
) -> tuple[np.ndarray, np.ndarray]:
    """Maximal-violating-pair descent on the one-class dual.

    Returns (alpha, gradient) where gradient = Q @ alpha.
    """
    n = Q.shape[0]
    C = 1.0 / (nu * n)
    alpha = np.full(n, 1.0 / n)
    G = Q @ alpha
    diag = np.diag(Q)
    for _ in range(max_iter):
        can_up = alpha < C - 1e-12
        can_dn = alpha > 1e-12
        if not can_up.any() or not can_dn.any():
            return alpha, G
        gi = np.where(can_up, G, np.inf)
        gj = np.where(can_dn, G, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        violation = G[j] - G[i]
        if violation <= tol:
            return alpha, G
        eta = max(diag[i] + diag[j] - 2.0 * Q[i, j], 1e-12)
        delta = min(violation / eta, C - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        G += delta * (Q[:, i] - Q[:, j])
    raise SolverNotConverged(
        f"dual not converged after {max_iter} pair updates (violation {violation:.3e})"
    )


def _compute_rho(alpha: np.ndarray, G: np.ndarray, C: float) -> float:
    """Decision offset: average gradient over free support vectors, falling
    back to the midpoint of the KKT interval when none are free."""
    free = (alpha > SV_ALPHA_MIN) & (alpha < C - 1e-12)
    if free.any():
        return float(G[free].mean())
    lower = G[alpha >= C - 1e-12]
    upper = G[alpha <= SV_ALPHA_MIN]
    lb = float(lower.max()) if lower.size else -math.inf
    ub = float(upper.min()) if upper.size else math.inf
    if math.isinf(lb):
        return ub
    if math.isinf(ub):
        return lb
    return 0.5 * (lb + ub)


def train(
    samples,
    nu: float,
    kernel: float,
    kernel_mode: str = "gamma",
    tol: float = 1e-6,
    max_iter: Optional[int] = None,
    scope: Optional[SourceId] = None,
) -> OcsvmModel:
    """Train a one-class SVM on already-scaled samples."""
    X = _as_matrix(samples)
    n = X.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    coef = kernel_coef(kernel, kernel_mode)
    if max_iter is None:
        max_iter = 10 * n * n
    Q = _kernel_matrix(X, X, coef)
    alpha, G = _solve_dual(Q, nu, tol, max_iter)
    C = 1.0 / (nu * n)
    rho = _compute_rho(alpha, G, C)
    keep = alpha > SV_ALPHA_MIN
    return OcsvmModel(
        support_vectors=X[keep].copy(),
        alphas=alpha[keep].copy(),
        rho=rho,
        kernel_value=kernel,
        kernel_mode=kernel_mode,
        nu=nu,
        n_train=n,
        scope=scope,
    )


def decide(model: OcsvmModel, v) -> float:
    """Signed decision value g(v); >= 0 reads normal, < 0 anomalous."""
    return float(decide_batch(model, [v])[0])


def decide_batch(model: OcsvmModel, vectors) -> np.ndarray:
    V = _as_matrix(vectors)
    if V.ndim == 1:
        V = V[None, :]
    if V.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(
            f"dimension mismatch: model dim {model.support_vectors.shape[1]}, "
            f"input dim {V.shape[1]}"
        )
    K = _kernel_matrix(V, model.support_vectors, model.coef)
    g = K @ model.alphas - model.rho
    g[np.abs(g) <= DECISION_TOL] = 0.0
    return g


def dual_objective(model_or_alpha, samples=None, coef: Optional[float] = None) -> float:
    """0.5 * a' Q a for a trained model, or for an explicit (alpha, X, coef)."""
    if isinstance(model_or_alpha, OcsvmModel):
        m = model_or_alpha
        Q = _kernel_matrix(m.support_vectors, m.support_vectors, m.coef)
        return 0.5 * float(m.alphas @ Q @ m.alphas)
    alpha = np.asarray(model_or_alpha, dtype=float)
    X = _as_matrix(samples)
    Q = _kernel_matrix(X, X, coef)
    return 0.5 * float(alpha @ Q @ alpha)


MODEL_FORMAT_VERSION = "1"


def _scope_str(scope: Optional[SourceId]) -> str:
    return f"{scope.ip}/{scope.mac}" if scope else "-"


def save_model(model: OcsvmModel, path: str | Path) -> Path:
    path = Path(path)
    lines = [
        "OCSVM-MODEL v{v} nu={nu!r} mode={mode} kernel={k!r} dim={d} "
        "ntrain={n} scope={s}".format(
            v=MODEL_FORMAT_VERSION,
            nu=model.nu,
            mode=model.kernel_mode,
            k=model.kernel_value,
            d=model.support_vectors.shape[1],
            n=model.n_train,
            s=_scope_str(model.scope),
        ),
        repr(model.rho),
    ]
    for a, sv in zip(model.alphas, model.support_vectors):
        lines.append(" ".join([repr(float(a))] + [repr(float(x)) for x in sv]))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_model(path: str | Path) -> OcsvmModel:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("OCSVM-MODEL v"):
        raise VersionMismatch(f"not a model file: {path}")
    header = lines[0].split()
    version = header[1].lstrip("v")
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatch(f"unsupported model version {version!r} in {path}")
    fields = dict(tok.split("=", 1) for tok in header[2:])
    try:
        nu = float(fields["nu"])
        mode = fields["mode"]
        kernel = float(fields["kernel"])
        dim = int(fields["dim"])
        n_train = int(fields["ntrain"])
        scope_s = fields["scope"]
        rho = float(lines[1])
    except (KeyError, IndexError, ValueError) as exc:
        raise VersionMismatch(f"corrupt model header in {path}: {exc}") from exc
    scope = None
    if scope_s != "-":
        ip, mac = scope_s.split("/", 1)
        scope = SourceId(ip, mac)
    alphas, svs = [], []
    for line in lines[2:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise VersionMismatch(f"corrupt support-vector line in {path}")
        alphas.append(float(parts[0]))
        svs.append([float(x) for x in parts[1:]])
    if not alphas:
        raise VersionMismatch(f"model file {path} has no support vectors")
    return OcsvmModel(
        support_vectors=np.asarray(svs, dtype=float),
        alphas=np.asarray(alphas, dtype=float),
        rho=rho,
        kernel_value=kernel,
        kernel_mode=mode,
        nu=nu,
        n_train=n_train,
        scope=scope,
    )
