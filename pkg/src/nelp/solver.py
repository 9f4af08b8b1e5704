"""Weighted soft-margin SVM with a balance-coupling Laplacian penalty, trained
through its dual quadratic program.

The dual is maximized by two-coordinate ascent over the box-and-equality
feasible set, selecting the maximal KKT-violating pair each step. The coupling
enters through the operator (I + C_b K L)^-1 applied with a dense LU solve,
never an explicit inverse.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .features import apply_standardization
from .graph import PositiveNetwork

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"          # "linear" or "rbf"
    bandwidth: float = 1.0        # rbf only

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.bandwidth <= 0:
            raise ValueError("rbf bandwidth must be positive")


def gram(x: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Symmetric PSD Gram matrix over the rows of x."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "linear":
        k = x @ x.T
    else:
        sq = (x * x).sum(axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
        np.maximum(d2, 0.0, out=d2)
        k = np.exp(-d2 / (2.0 * spec.bandwidth**2))
    return (k + k.T) / 2.0


def kernel_cross(x: np.ndarray, rows: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """K(x_i, row_k) for query rows x against stored expansion rows."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if spec.kind == "linear":
        return x @ rows.T
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (rows * rows).sum(axis=1)[None, :]
        - 2.0 * (x @ rows.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / (2.0 * spec.bandwidth**2))


@dataclass
class BalanceRegularizer:
    """Symmetric 0/1 coupling over samples and its graph Laplacian."""

    b: sp.csr_matrix
    laplacian: sp.csr_matrix
    n_couplings: int

    @property
    def n(self) -> int:
        return self.b.shape[0]


def build_balance_matrix(pairs, g_p: PositiveNetwork) -> BalanceRegularizer:
    """Couple samples (u_i, u_k) and (u_j, u_k) that share their second endpoint
    when u_i and u_j are positively linked and neither sample pair is itself a
    positive link (either direction)."""
    pairs = list(pairs)
    n = len(pairs)
    by_target = {}
    for h, (a, b) in enumerate(pairs):
        if not g_p.positively_linked(a, b):
            by_target.setdefault(b, []).append((a, h))
    rows, cols = [], []
    for b in sorted(by_target):
        group = by_target[b]
        for x in range(len(group)):
            a1, h1 = group[x]
            for y in range(x + 1, len(group)):
                a2, h2 = group[y]
                if a1 != a2 and g_p.positively_linked(a1, a2):
                    rows.extend((h1, h2))
                    cols.extend((h2, h1))
    data = np.ones(len(rows))
    bmat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    bmat.sum_duplicates()
    bmat.data[:] = 1.0
    deg = np.asarray(bmat.sum(axis=1)).ravel()
    lap = sp.diags(deg) - bmat
    return BalanceRegularizer(
        b=bmat, laplacian=sp.csr_matrix(lap), n_couplings=len(rows) // 2
    )


@dataclass
class TrainingProblem:
    """l labeled rows (PS then NS) followed by mu unlabeled rows."""

    x: np.ndarray                 # (l + mu, d) standardized features
    y: np.ndarray                 # (l,) labels in {+1, -1}
    s: np.ndarray                 # (l,) per-sample cost caps
    c_b: float = 0.0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if len(self.y) != len(self.s):
            raise ValueError("y and s must have equal length")
        if len(self.y) < 2:
            raise ValueError("need at least 2 labeled samples")
        if len(self.y) > self.x.shape[0]:
            raise ValueError("labeled rows exceed feature rows")
        if not np.isin(self.y, (-1, 1)).all():
            raise ValueError("labels must be +1 or -1")
        if (self.s < 0).any():
            raise ValueError("cost caps must be nonnegative")
        if self.c_b < 0:
            raise ValueError("C_b must be nonnegative")

    @property
    def l(self) -> int:
        return len(self.y)

    @property
    def mu(self) -> int:
        return self.x.shape[0] - len(self.y)


@dataclass
class DualSolution:
    beta: np.ndarray
    alpha: np.ndarray
    b: float
    objective: float
    kkt_residual: float
    converged: bool
    iterations: int


class DualOperator:
    """Precomputed pieces shared by repeated solves over the same rows: the Gram
    matrix and, per C_b, the reduced kernel G = J K (I + C_b K L)^-1 J^T."""

    def __init__(self, x, l, kernel: KernelSpec, laplacian=None):
        self.x = np.asarray(x, dtype=float)
        self.l = int(l)
        self.kernel = kernel
        self.k = gram(self.x, kernel)
        self.laplacian = laplacian
        self._cache = {}

    def reduced(self, c_b: float):
        """(G, w) with G the l x l dual kernel and w = (I + C_b L K)^-1 [I; 0].

        The shifted solve uses the L-first operator ordering, which is the one
        the stationarity condition K((I + C_b L K) alpha - J'Y beta) = 0
        actually pins down; K G' J' stays symmetric PSD even when the Gram
        matrix is rank-deficient (always the case for a linear kernel with more
        rows than features). For invertible K it coincides with the K-first
        form.
        """
        key = float(c_b)
        if key not in self._cache:
            n, l = self.k.shape[0], self.l
            if key == 0.0 or self.laplacian is None:
                w = None
                g = self.k[:l, :l].copy()
            else:
                lap = sp.csr_matrix(self.laplacian)
                m = np.eye(n) + key * (lap @ self.k)  # = I + C_b L K
                rhs = np.zeros((n, l))
                rhs[:l, :l] = np.eye(l)
                try:
                    lu = sla.lu_factor(m)
                except np.linalg.LinAlgError:
                    log.warning("shifted operator factorization failed; adding jitter")
                    lu = sla.lu_factor(m + 1e-10 * np.eye(n))
                w = sla.lu_solve(lu, rhs)
                g = self.k[:l, :] @ w
                g = (g + g.T) / 2.0
            # Keep at most two entries (C_b = 0 is cheap to rebuild elsewhere);
            # sweeps over many C_b values must not accumulate dense blocks.
            while len(self._cache) >= 2:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = (g, w)
        return self._cache[key]

    def alpha_from_beta(self, c_b: float, y, beta):
        _, w = self.reduced(c_b)
        yb = y * beta
        if w is None:
            alpha = np.zeros(self.k.shape[0])
            alpha[: self.l] = yb
            return alpha
        return w @ yb


def _smo(q, y, s, tol, max_iter):
    """Two-coordinate ascent on max sum(beta) - 0.5 beta'Q beta subject to
    y'beta = 0 and 0 <= beta <= s, picking the maximal-KKT-violating pair."""
    l = len(y)
    beta = np.zeros(l)
    grad = -np.ones(l)  # gradient of the minimization form 0.5 b'Qb - sum(b)
    gap = np.inf
    it = 0
    sweep = max(l, 1)
    last_obj = 0.0
    while it < max_iter:
        up = ((y > 0) & (beta < s)) | ((y < 0) & (beta > 0))
        low = ((y < 0) & (beta < s)) | ((y > 0) & (beta > 0))
        if not up.any() or not low.any():
            gap = 0.0
            break
        f = -y * grad
        i = int(np.flatnonzero(up)[np.argmax(f[up])])
        j = int(np.flatnonzero(low)[np.argmin(f[low])])
        gap = f[i] - f[j]
        if gap <= tol:
            break
        eta = q[i, i] + q[j, j] - 2.0 * y[i] * y[j] * q[i, j]
        eta = max(eta, 1e-12)
        d = gap / eta
        hi_i = s[i] - beta[i] if y[i] > 0 else beta[i]
        hi_j = beta[j] if y[j] > 0 else s[j] - beta[j]
        d = min(d, hi_i, hi_j)
        beta[i] = min(max(beta[i] + y[i] * d, 0.0), s[i])
        beta[j] = min(max(beta[j] - y[j] * d, 0.0), s[j])
        grad += d * (y[i] * q[:, i] - y[j] * q[:, j])
        it += 1
        if it % sweep == 0:
            obj = beta.sum() - 0.5 * beta @ (grad + 1.0)
            if obj < last_obj - 1e-9 * max(1.0, abs(last_obj)):
                log.warning("dual objective decreased at iteration %d", it)
            last_obj = obj
    converged = gap <= tol
    return beta, grad, gap, converged, it


def _recover_bias(y, beta, s, f_vals, eps):
    free = (beta > eps) & (beta < s - eps)
    if free.any():
        return float(np.median(y[free] - f_vals[free]))
    lows, ups = [], []
    for i in range(len(y)):
        if s[i] <= eps:
            continue  # zero-cost rows constrain nothing
        at_zero = beta[i] <= eps
        at_cap = beta[i] >= s[i] - eps
        if y[i] > 0:
            if at_zero:
                lows.append(1.0 - f_vals[i])
            if at_cap:
                ups.append(1.0 - f_vals[i])
        else:
            if at_zero:
                ups.append(-1.0 - f_vals[i])
            if at_cap:
                lows.append(-1.0 - f_vals[i])
    if lows and ups:
        return float((max(lows) + min(ups)) / 2.0)
    if lows:
        return float(max(lows))
    if ups:
        return float(min(ups))
    return 0.0


def solve_dual(
    problem: TrainingProblem,
    reg: BalanceRegularizer | None = None,
    tol: float = 1e-5,
    max_sweeps: int = 10_000,
    operator: DualOperator | None = None,
) -> DualSolution:
    """Maximize the dual objective under the label-balance equality and the
    per-sample boxes; expansion coefficients follow from a linear solve against
    the shifted operator and the bias from unbounded support vectors."""
    y, s = problem.y, problem.s
    if (y > 0).sum() == 0 or (y < 0).sum() == 0:
        raise ValueError("training needs both classes present")
    if operator is None:
        lap = reg.laplacian if reg is not None else None
        if lap is not None and lap.shape[0] != problem.x.shape[0]:
            raise ValueError("regularizer size does not match sample count")
        operator = DualOperator(problem.x, problem.l, problem.kernel, lap)
    g, _ = operator.reduced(problem.c_b)
    q = g * y[:, None] * y[None, :]

    max_iter = max_sweeps * max(problem.l, 1)
    beta, grad, gap, converged, it = _smo(q, y, s, tol, max_iter)
    if not converged:
        log.warning("dual ascent stopped at iteration cap with KKT gap %.3e", gap)

    alpha = operator.alpha_from_beta(problem.c_b, y, beta)
    f_vals = g @ (y * beta)
    eps = 1e-8 * max(1.0, float(s.max()) if len(s) else 1.0)
    bias = _recover_bias(y, beta, s, f_vals, eps)
    objective = float(beta.sum() - 0.5 * beta @ (q @ beta))
    return DualSolution(
        beta=beta,
        alpha=alpha,
        b=bias,
        objective=objective,
        kkt_residual=float(max(gap, 0.0)),
        converged=converged,
        iterations=it,
    )


@dataclass
class Model:
    """Trained predictor: expansion coefficients over retained rows plus the
    standardization statistics and schema the features were produced under."""

    kernel: KernelSpec
    alpha: np.ndarray
    b: float
    rows: np.ndarray              # standardized training rows (l + mu, d)
    mean: np.ndarray
    div: np.ndarray
    schema_version: str
    feature_names: tuple
    hyperparams: dict
    stats: dict

    def decision_function(self, x_raw) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x_raw, dtype=float))
        if x.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} features, got {x.shape[1]}"
            )
        xs = apply_standardization(x, self.mean, self.div)
        return kernel_cross(xs, self.rows, self.kernel) @ self.alpha + self.b

    def predict(self, x_raw):
        """(decision values, labels); a decision below zero predicts a negative
        link, ties go to +1 (missing link)."""
        dec = self.decision_function(x_raw)
        labels = np.where(dec < 0.0, -1, 1)
        return dec, labels

    def save(self, path):
        payload = {
            "format": "nelp-model",
            "version": 1,
            "schema_version": self.schema_version,
            "feature_names": list(self.feature_names),
            "kernel": {"kind": self.kernel.kind, "bandwidth": self.kernel.bandwidth},
            "alpha": self.alpha.tolist(),
            "b": self.b,
            "rows": self.rows.tolist(),
            "mean": self.mean.tolist(),
            "div": self.div.tolist(),
            "hyperparams": self.hyperparams,
            "stats": self.stats,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "nelp-model":
            raise ValueError(f"{path} is not a model container")
        return cls(
            kernel=KernelSpec(**payload["kernel"]),
            alpha=np.array(payload["alpha"], dtype=float),
            b=float(payload["b"]),
            rows=np.array(payload["rows"], dtype=float),
            mean=np.array(payload["mean"], dtype=float),
            div=np.array(payload["div"], dtype=float),
            schema_version=payload["schema_version"],
            feature_names=tuple(payload["feature_names"]),
            hyperparams=payload["hyperparams"],
            stats=payload["stats"],
        )


@dataclass(frozen=True)
class TrainingOverrides:
    """Hyperparameter modifier producing an ablated training variant."""

    c_n: float
    weight_mode: str      # "reliability" or "uniform"
    c_b: float

    def __post_init__(self):
        if self.c_n < 0 or self.c_b < 0:
            raise ValueError("hyperparameters must be nonnegative")
        if self.weight_mode not in ("reliability", "uniform"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")


def ablation_config(c_n: float, weight_mode: str, c_b: float) -> TrainingOverrides:
    return TrainingOverrides(c_n=c_n, weight_mode=weight_mode, c_b=c_b)


def ablation_grid(c_n: float, c_b: float):
    """The trained configurations reported in the component analysis: the full
    model, each component switched off alone, and everything off."""
    return [
        ("full", ablation_config(c_n, "reliability", c_b)),
        ("equal-neg-cost", ablation_config(1.0, "reliability", c_b)),
        ("uniform-weights", ablation_config(c_n, "uniform", c_b)),
        ("no-balance-reg", ablation_config(c_n, "reliability", 0.0)),
        ("all-off", ablation_config(1.0, "uniform", 0.0)),
    ]
