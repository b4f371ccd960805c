"""Penalized least-squares surrogates and residual correction.

A surrogate is a linear-in-coefficients model f(x) = sum_j c_j b_j(x) fitted
by minimizing

    (1/L) sum_i |f(X_i) - y_i|^2 + pen * c^T R c

where ``pen`` is the penalty weight carried by the function family and R is
the family's roughness matrix.  Three basis families are provided:

* ``spline1d``  cubic B-splines on equally spaced knots with a
  second-difference (P-spline) roughness, for d = 1;
* ``rbf``       Gaussian radial basis functions on a deterministic subset of
  the training points plus an intercept, ridge roughness, for any d;
* ``poly``      raw monomials up to a total degree, ridge roughness on the
  non-constant terms.  Intercept coefficient comes first.

Outside the training range splines continue linearly (value and slope frozen
at the boundary).  The residual-correction machinery fits a second model to
(X_i, eps_i) pairs, optionally anchored toward zero on extra input points,
with the weight and penalty selected by k-fold cross validation scored on
the experimental data only.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BSpline

from .data import InputSample, PairedDataset
from .errors import (
    ConditioningError,
    DataError,
    DomainError,
    InsufficientDataError,
    RankDeficiencyError,
)

FAMILY_KINDS = ("spline1d", "rbf", "poly")

_DEGREE = 3  # cubic splines throughout


@dataclass(frozen=True)
class FunctionFamily:
    """Structural description of a basis family plus its penalty weight.

    ``size`` means: number of spline segments (``spline1d``), number of RBF
    centers (``rbf``), or total polynomial degree (``poly``).
    """

    kind: str
    size: int
    penalty: float = 0.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        min_size = 0 if self.kind == "poly" else 1
        if int(self.size) != self.size or self.size < min_size:
            raise DomainError(
                f"{self.kind} size must be an integer >= {min_size}, got {self.size}"
            )
        if not np.isfinite(self.penalty) or self.penalty < 0:
            raise DomainError(f"penalty must be finite and >= 0, got {self.penalty}")

    def with_penalty(self, penalty: float) -> "FunctionFamily":
        return replace(self, penalty=float(penalty))


def _as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to an (m, dim) array; 1-d input is a column when dim=1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim == 1:
        a = a[:, None] if dim == 1 else a[None, :]
    if a.ndim != 2 or a.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got shape {a.shape}")
    return a


class SplineBasis:
    """Clamped cubic B-spline basis with linear extension off the knot span."""

    kind = "spline1d"

    def __init__(self, knots: np.ndarray):
        self.knots = np.asarray(knots, dtype=float)
        self.n_coef = len(self.knots) - _DEGREE - 1
        self.dim = 1
        self._lo = self.knots[_DEGREE]
        self._hi = self.knots[-_DEGREE - 1]

    @classmethod
    def from_data(cls, x: np.ndarray, segments: int) -> "SplineBasis":
        x = np.asarray(x, dtype=float).ravel()
        lo, hi = float(np.min(x)), float(np.max(x))
        if not hi > lo:
            raise DataError("spline basis needs a nondegenerate input range")
        inner = np.linspace(lo, hi, segments + 1)
        knots = np.concatenate([[lo] * _DEGREE, inner, [hi] * _DEGREE])
        return cls(knots)

    def _bases(self) -> BSpline:
        return BSpline(self.knots, np.eye(self.n_coef), _DEGREE, extrapolate=False)

    def design(self, points: np.ndarray) -> np.ndarray:
        x = _as_points(points, 1).ravel()
        xc = np.clip(x, self._lo, self._hi)
        bs = self._bases()
        out = np.asarray(bs(xc))
        left = x < self._lo
        right = x > self._hi
        if left.any() or right.any():
            d = bs.derivative()
            if left.any():
                out[left] += np.outer(x[left] - self._lo, d(self._lo))
            if right.any():
                out[right] += np.outer(x[right] - self._hi, d(self._hi))
        return out

    def predict(self, coef: np.ndarray, points: np.ndarray) -> np.ndarray:
        # fold coefficients into one spline; O(m) memory for large m
        x = _as_points(points, 1).ravel()
        f = BSpline(self.knots, np.asarray(coef, dtype=float), _DEGREE, extrapolate=False)
        y = np.asarray(f(np.clip(x, self._lo, self._hi)))
        left = x < self._lo
        right = x > self._hi
        if left.any() or right.any():
            df = f.derivative()
            if left.any():
                y[left] += df(self._lo) * (x[left] - self._lo)
            if right.any():
                y[right] += df(self._hi) * (x[right] - self._hi)
        return y

    def roughness(self) -> np.ndarray:
        d2 = np.diff(np.eye(self.n_coef), n=2, axis=0)
        return d2.T @ d2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "knots": self.knots.tolist()}


class RbfBasis:
    """Intercept plus Gaussian bumps exp(-|x - c_j|^2 / (2 l^2))."""

    kind = "rbf"

    def __init__(self, centers: np.ndarray, lengthscale: float):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if not (np.isfinite(lengthscale) and lengthscale > 0):
            raise DataError(f"lengthscale must be positive, got {lengthscale}")
        self.lengthscale = float(lengthscale)
        self.n_coef = self.centers.shape[0] + 1
        self.dim = self.centers.shape[1]

    @classmethod
    def from_data(cls, points: np.ndarray, count: int) -> "RbfBasis":
        x = np.atleast_2d(np.asarray(points, dtype=float))
        uniq = np.unique(x, axis=0)
        if uniq.shape[0] < 2:
            raise DataError("rbf basis needs at least two distinct points")
        count = min(count, uniq.shape[0])
        # deterministic spread: lexicographic order, evenly strided subset
        order = np.lexsort(uniq.T[::-1])
        idx = np.round(np.linspace(0, uniq.shape[0] - 1, count)).astype(int)
        centers = uniq[order][np.unique(idx)]
        diff = centers[:, None, :] - centers[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        pos = d2[d2 > 0]
        return cls(centers, float(np.sqrt(np.median(pos))))

    def design(self, points: np.ndarray) -> np.ndarray:
        x = _as_points(points, self.dim)
        diff = x[:, None, :] - self.centers[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        out = np.empty((x.shape[0], self.n_coef))
        out[:, 0] = 1.0
        out[:, 1:] = np.exp(-d2 / (2.0 * self.lengthscale**2))
        return out

    def predict(self, coef: np.ndarray, points: np.ndarray) -> np.ndarray:
        x = _as_points(points, self.dim)
        coef = np.asarray(coef, dtype=float)
        out = np.empty(x.shape[0])
        step = max(1, 2**22 // max(self.n_coef, 1))  # cap scratch at ~32 MB
        for a in range(0, x.shape[0], step):
            out[a : a + step] = self.design(x[a : a + step]) @ coef
        return out

    def roughness(self) -> np.ndarray:
        r = np.eye(self.n_coef)
        r[0, 0] = 0.0  # intercept unpenalized
        return r

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "centers": self.centers.tolist(),
            "lengthscale": self.lengthscale,
        }


class PolyBasis:
    """Raw monomials of total degree <= degree; intercept first."""

    kind = "poly"

    def __init__(self, degree: int, dim: int):
        self.degree = int(degree)
        self.dim = int(dim)
        powers = [
            p
            for deg in range(self.degree + 1)
            for p in sorted(
                itertools.combinations_with_replacement(range(self.dim), deg)
            )
        ]
        mat = np.zeros((len(powers), self.dim), dtype=int)
        for i, combo in enumerate(powers):
            for j in combo:
                mat[i, j] += 1
        self.powers = mat
        self.n_coef = mat.shape[0]

    def design(self, points: np.ndarray) -> np.ndarray:
        x = _as_points(points, self.dim)
        return np.prod(x[:, None, :] ** self.powers[None, :, :], axis=2)

    def predict(self, coef: np.ndarray, points: np.ndarray) -> np.ndarray:
        x = _as_points(points, self.dim)
        coef = np.asarray(coef, dtype=float)
        out = np.empty(x.shape[0])
        step = max(1, 2**22 // max(self.n_coef, 1))
        for a in range(0, x.shape[0], step):
            out[a : a + step] = self.design(x[a : a + step]) @ coef
        return out

    def roughness(self) -> np.ndarray:
        r = np.eye(self.n_coef)
        r[0, 0] = 0.0
        return r

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree, "dim": self.dim}


def build_basis(family: FunctionFamily, points: np.ndarray):
    """Construct the data-dependent basis for ``family`` on ``points``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.ndim != 2:
        raise DomainError("points must be (n, d)")
    if family.kind == "spline1d":
        if x.shape[1] != 1:
            raise DomainError("spline1d requires 1-d inputs")
        return SplineBasis.from_data(x.ravel(), family.size)
    if family.kind == "rbf":
        return RbfBasis.from_data(x, family.size)
    return PolyBasis(family.size, x.shape[1])


def basis_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "spline1d":
        return SplineBasis(np.asarray(obj["knots"], dtype=float))
    if kind == "rbf":
        return RbfBasis(np.asarray(obj["centers"], dtype=float), obj["lengthscale"])
    if kind == "poly":
        return PolyBasis(obj["degree"], obj["dim"])
    raise DataError(f"unknown basis kind {kind!r}")


@dataclass
class SurrogateModel:
    """Fitted linear-basis surrogate; call it on points to predict."""

    family: FunctionFamily
    basis: object
    coef: np.ndarray
    train_size: int
    cv_score: float | None = None

    def __call__(self, points) -> np.ndarray:
        return self.basis.predict(self.coef, points)


@dataclass
class ImprovedSurrogate:
    """Base surrogate plus residual correction: m_hat(x) + m_eps(x)."""

    base: SurrogateModel
    residual: SurrogateModel
    weight: float | None = None

    def __call__(self, points) -> np.ndarray:
        return self.base(points) + self.residual(points)


def _solve_normal(gram, rhs, penalty, rough, stacked_design=None):
    """Solve (gram + penalty * rough) c = rhs with rank diagnostics."""
    a = gram + penalty * rough
    if penalty == 0.0 and stacked_design is not None:
        if np.linalg.matrix_rank(stacked_design) < gram.shape[0]:
            raise RankDeficiencyError(
                "singular least-squares system with zero penalty; "
                "use a positive penalty weight or a smaller basis"
            )
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        if penalty == 0.0:
            raise RankDeficiencyError(
                "singular least-squares system with zero penalty; "
                "use a positive penalty weight or a smaller basis"
            ) from exc
        raise ConditioningError(f"normal equations unsolvable: {exc}") from exc


def fit_penalized_ls(family: FunctionFamily, data: PairedDataset) -> SurrogateModel:
    """Fit the family to (inputs, outputs) by penalized least squares."""
    basis = build_basis(family, data.inputs)
    if family.penalty == 0.0 and data.n < basis.n_coef:
        raise InsufficientDataError(
            f"{data.n} rows cannot determine {basis.n_coef} coefficients "
            "without a positive penalty"
        )
    b = basis.design(data.inputs)
    gram = b.T @ b / data.n
    rhs = b.T @ data.outputs / data.n
    coef = _solve_normal(gram, rhs, family.penalty, basis.roughness(), b)
    return SurrogateModel(family=family, basis=basis, coef=coef, train_size=data.n)


def penalized_objective(model: SurrogateModel, points, targets) -> float:
    """The fitted criterion: mean squared error plus penalty term."""
    resid = model(points) - np.asarray(targets, dtype=float).ravel()
    pen = model.family.penalty * float(
        model.coef @ model.basis.roughness() @ model.coef
    )
    return float(np.mean(resid**2) + pen)


def _penalty_scale(gram, rough) -> float:
    tr_r = float(np.trace(rough))
    if tr_r <= 0:
        return 1.0
    return max(float(np.trace(gram)) / tr_r, np.finfo(float).tiny)


def default_gcv_grid(scale: float) -> np.ndarray:
    return scale * np.logspace(-8, 2, 21)


def fit_with_gcv(family: FunctionFamily, data: PairedDataset, grid=None):
    """Fit with the penalty weight chosen by generalized cross validation.

    Returns the fitted model; the selected weight sits in
    ``model.family.penalty`` and ``model.cv_score`` holds its GCV value.
    Ties prefer the smaller penalty.
    """
    basis = build_basis(family, data.inputs)
    b = basis.design(data.inputs)
    n = data.n
    gram = b.T @ b / n
    rhs = b.T @ data.outputs / n
    rough = basis.roughness()
    if grid is None:
        grid = default_gcv_grid(_penalty_scale(gram, rough))
    grid = np.sort(np.asarray(grid, dtype=float))
    best = None
    for pen in grid:
        a = gram + pen * rough
        try:
            coef = np.linalg.solve(a, rhs)
            tr_h = float(np.trace(np.linalg.solve(a, gram)))
        except np.linalg.LinAlgError:
            continue
        denom = 1.0 - tr_h / n
        if denom <= 1e-9:
            continue
        score = float(np.mean((data.outputs - b @ coef) ** 2)) / denom**2
        if best is None or score < best[0]:
            best = (score, pen, coef)
    if best is None:
        raise ConditioningError("GCV failed on every grid point")
    score, pen, coef = best
    return SurrogateModel(
        family=family.with_penalty(pen),
        basis=basis,
        coef=coef,
        train_size=n,
        cv_score=score,
    )


def compute_residuals(model, experimental: PairedDataset) -> np.ndarray:
    """eps_i = Y_i - m_hat(X_i) on experimental data."""
    if experimental.kind != "experimental":
        raise DataError(
            f"residuals are defined on experimental data, got kind "
            f"{experimental.kind!r}"
        )
    return experimental.outputs - model(experimental.inputs)


def fit_residual_model(
    family: FunctionFamily, experimental: PairedDataset, residuals
) -> SurrogateModel:
    """Fit the residual correction to (X_i, eps_i)."""
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.shape[0] != experimental.n:
        raise DataError(
            f"{residuals.shape[0]} residuals for {experimental.n} rows"
        )
    data = PairedDataset(
        inputs=experimental.inputs, outputs=residuals, kind="experimental"
    )
    return fit_penalized_ls(family, data)


def _extra_points(extra_inputs, dim: int) -> np.ndarray:
    pts = extra_inputs.points if isinstance(extra_inputs, InputSample) else extra_inputs
    return _as_points(pts, dim)


def fit_residual_model_weighted(
    family: FunctionFamily,
    experimental: PairedDataset,
    residuals,
    extra_inputs,
    weight: float,
) -> SurrogateModel:
    """Residual fit with zero-anchoring on extra inputs.

    Minimizes  (w/n) sum |f(X_i) - eps_i|^2
             + ((1-w)/N1) sum |f(Xtilde_j)|^2  + pen * c^T R c.
    """
    w = float(weight)
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"weight must lie in [0, 1], got {weight}")
    residuals = np.asarray(residuals, dtype=float).ravel()
    if residuals.shape[0] != experimental.n:
        raise DataError(f"{residuals.shape[0]} residuals for {experimental.n} rows")
    extra = _extra_points(extra_inputs, experimental.dim)
    if extra.shape[0] < 1:
        raise DataError("weighted fit needs at least one extra input point")
    allpts = np.vstack([experimental.inputs, extra])
    basis = build_basis(family, allpts)
    b1 = basis.design(experimental.inputs)
    b2 = basis.design(extra)
    n, n1 = experimental.n, extra.shape[0]
    gram = (w / n) * (b1.T @ b1) + ((1.0 - w) / n1) * (b2.T @ b2)
    rhs = (w / n) * (b1.T @ residuals)
    stacked = np.vstack([np.sqrt(w / n) * b1, np.sqrt((1.0 - w) / n1) * b2])
    coef = _solve_normal(gram, rhs, family.penalty, basis.roughness(), stacked)
    return SurrogateModel(family=family, basis=basis, coef=coef, train_size=n)


DEFAULT_W_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def default_penalty_grid(family: FunctionFamily, experimental, extra_inputs):
    """Zero plus a geometric sweep scaled to the design."""
    extra = _extra_points(extra_inputs, experimental.dim)
    allpts = np.vstack([experimental.inputs, extra])
    basis = build_basis(family, allpts)
    b = basis.design(allpts)
    scale = _penalty_scale(b.T @ b / b.shape[0], basis.roughness())
    return np.concatenate([[0.0], scale * np.logspace(-8, 1, 10)])


@dataclass
class WeightSelection:
    """Outcome of the joint (weight, penalty) cross validation."""

    weight: float
    penalty: float
    cv_risk: float
    model: SurrogateModel
    table: list = field(default_factory=list)


def select_weight_and_penalty(
    family: FunctionFamily,
    experimental: PairedDataset,
    residuals,
    extra_inputs,
    w_grid=None,
    penalty_grid=None,
    folds: int = 5,
    seed=0,
) -> WeightSelection:
    """Joint k-fold CV over weight and penalty grids.

    The empirical L2 risk is computed on held-out experimental points only;
    the extra inputs always participate in the anchoring term.  Ties prefer
    the smaller weight, then the smaller penalty.
    """
    residuals = np.asarray(residuals, dtype=float).ravel()
    n = experimental.n
    if residuals.shape[0] != n:
        raise DataError(f"{residuals.shape[0]} residuals for {n} rows")
    if folds < 2:
        raise DomainError(f"folds must be >= 2, got {folds}")
    if n < folds:
        raise InsufficientDataError(f"{n} experimental rows cannot fill {folds} folds")
    if w_grid is None:
        w_grid = DEFAULT_W_GRID
    w_grid = sorted(float(w) for w in w_grid)
    for w in w_grid:
        if not 0.0 <= w <= 1.0:
            raise DomainError(f"weight grid entry {w} outside [0, 1]")
    if penalty_grid is None:
        penalty_grid = default_penalty_grid(family, experimental, extra_inputs)
    penalty_grid = sorted(float(p) for p in penalty_grid)

    from .randgen import make_rng

    perm = make_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    extra = _extra_points(extra_inputs, experimental.dim)

    best = None
    table = []
    for w in w_grid:
        for pen in penalty_grid:
            fam = family.with_penalty(pen)
            sse, held = 0.0, 0
            ok = True
            for hold in parts:
                train = np.setdiff1d(perm, hold, assume_unique=True)
                sub = PairedDataset(
                    inputs=experimental.inputs[train],
                    outputs=experimental.outputs[train],
                    kind="experimental",
                )
                try:
                    m = fit_residual_model_weighted(
                        fam, sub, residuals[train], extra, w
                    )
                except (RankDeficiencyError, ConditioningError, DataError):
                    ok = False
                    break
                err = m(experimental.inputs[hold]) - residuals[hold]
                sse += float(err @ err)
                held += hold.size
            score = sse / held if ok else np.inf
            table.append((w, pen, score))
            if best is None or score < best[0]:
                best = (score, w, pen)
    score, w, pen = best
    if not np.isfinite(score):
        raise ConditioningError("every (weight, penalty) combination failed")
    model = fit_residual_model_weighted(
        family.with_penalty(pen), experimental, residuals, extra, w
    )
    model.cv_score = score
    return WeightSelection(weight=w, penalty=pen, cv_risk=score, model=model, table=table)


def improved_surrogate(base, residual_model, weight=None) -> ImprovedSurrogate:
    """Combine base and residual models; evaluation is their sum."""
    return ImprovedSurrogate(base=base, residual=residual_model, weight=weight)


# ---------------------------------------------------------------------------
# model (de)serialization


def model_to_dict(model) -> dict:
    if isinstance(model, ImprovedSurrogate):
        return {
            "type": "improved",
            "base": model_to_dict(model.base),
            "residual": model_to_dict(model.residual),
            "weight": model.weight,
        }
    return {
        "type": "surrogate",
        "family": {
            "kind": model.family.kind,
            "size": model.family.size,
            "penalty": model.family.penalty,
        },
        "basis": model.basis.to_dict(),
        "coef": np.asarray(model.coef, dtype=float).tolist(),
        "train_size": model.train_size,
        "cv_score": model.cv_score,
    }


def model_from_dict(obj: dict):
    kind = obj.get("type")
    if kind == "improved":
        return ImprovedSurrogate(
            base=model_from_dict(obj["base"]),
            residual=model_from_dict(obj["residual"]),
            weight=obj.get("weight"),
        )
    if kind != "surrogate":
        raise DataError(f"unknown model type {kind!r}")
    fam = obj["family"]
    return SurrogateModel(
        family=FunctionFamily(fam["kind"], fam["size"], fam["penalty"]),
        basis=basis_from_dict(obj["basis"]),
        coef=np.asarray(obj["coef"], dtype=float),
        train_size=int(obj.get("train_size", 0)),
        cv_score=obj.get("cv_score"),
    )


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            return model_from_dict(json.load(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from exc
