"""Gaussian class-conditional evidence models.

For each hypothesis (class) h the model holds a mean vector, a covariance
matrix and a prior. The weight of evidence of a feature subset S for h is

    woe(h | x_S) = log p(x_S | rest, h) - log p(x_S | rest, alternatives)

where the alternative density is the prior-weighted mixture over all other
classes. Positive values support h, negative values refute it.

Two covariance treatments are supported: ``independent`` ignores every
off-diagonal entry (densities factorize over features), ``dependent`` uses
the full matrix, so a subset density conditions on the remaining features
via the usual Gaussian conditioning identities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import LabeledTable
from .errors import (
    DimensionError,
    InvalidDataError,
    NoAlternativesError,
    SingularCovarianceError,
    UnderpopulatedClassError,
)

LOG_2PI = float(np.log(2.0 * np.pi))

DEFAULT_RIDGE = 1e-6


def logsumexp(a, axis=None):
    """Stable log-sum-exp; exact on single-element inputs."""
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


class Assumption(str, enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"


def _as_assumption(value) -> Assumption:
    if isinstance(value, Assumption):
        return value
    try:
        return Assumption(str(value))
    except ValueError:
        raise InvalidDataError(
            f"assumption must be 'independent' or 'dependent', got {value!r}"
        ) from None


@dataclass(frozen=True)
class Label:
    id: int
    name: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise InvalidDataError(f"label id must be >= 0, got {self.id}")
        if not self.name:
            raise InvalidDataError("label name must be non-empty")


@dataclass(frozen=True)
class ClassStats:
    """Per-class sufficient statistics: mean, covariance and prior mass."""

    mean: np.ndarray
    covariance: np.ndarray
    prior: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1:
            raise DimensionError("mean must be a vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionError(f"covariance shape {cov.shape} does not match d={d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidDataError("class statistics contain non-finite values")
        if not np.allclose(cov, cov.T, atol=1e-9, rtol=0.0):
            raise InvalidDataError("covariance must be symmetric")
        if not 0.0 < self.prior < 1.0:
            raise InvalidDataError(f"prior must be in (0, 1), got {self.prior}")
        mean = mean.copy()
        cov = cov.copy()
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class GaussianEvidenceModel:
    """Immutable fitted model: safe for unrestricted concurrent reads."""

    labels: tuple[Label, ...]
    feature_names: tuple[str, ...]
    per_class: tuple[ClassStats, ...]
    assumption: Assumption = Assumption.DEPENDENT
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "per_class", tuple(self.per_class))
        object.__setattr__(self, "assumption", _as_assumption(self.assumption))
        if len(self.labels) < 2:
            raise InvalidDataError("a model needs at least two hypotheses")
        ids = [lab.id for lab in self.labels]
        if ids != list(range(len(self.labels))):
            raise InvalidDataError(f"label ids must be dense 0..K-1, got {ids}")
        names = [lab.name for lab in self.labels]
        if len(set(names)) != len(names):
            raise InvalidDataError("label names must be unique")
        if len(self.feature_names) < 1:
            raise InvalidDataError("a model needs at least one feature")
        if len(self.per_class) != len(self.labels):
            raise InvalidDataError("per_class length must equal number of labels")
        d = len(self.feature_names)
        for stats in self.per_class:
            if stats.mean.shape[0] != d:
                raise DimensionError("all classes must share the model dimension")
        total = sum(s.prior for s in self.per_class)
        if abs(total - 1.0) > 1e-9:
            raise InvalidDataError(f"priors sum to {total}, expected 1")
        if self.ridge < 0:
            raise InvalidDataError(f"ridge must be >= 0, got {self.ridge}")
        # memo for derived per-class factorizations; values are pure functions
        # of the (immutable) statistics, so concurrent fills are benign
        object.__setattr__(self, "_derived", {})

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def priors(self) -> np.ndarray:
        return np.array([s.prior for s in self.per_class])

    def label_by_id(self, label_id: int) -> Label:
        if not 0 <= label_id < self.n_classes:
            raise InvalidDataError(f"unknown label id {label_id}")
        return self.labels[label_id]


def _label_id(model: GaussianEvidenceModel, h) -> int:
    if isinstance(h, Label):
        h = h.id
    h = int(h)
    if not 0 <= h < model.n_classes:
        raise InvalidDataError(f"unknown hypothesis id {h}")
    return h


def validate_features(model: GaussianEvidenceModel, x) -> np.ndarray:
    """Coerce an input to a finite float vector of the model's dimension."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != model.n_features:
        raise DimensionError(
            f"feature vector has shape {v.shape}, expected ({model.n_features},)"
        )
    if not np.all(np.isfinite(v)):
        raise InvalidDataError("feature vector contains non-finite values")
    return v


def _subset_indices(model: GaussianEvidenceModel, subset: Iterable[int]) -> np.ndarray:
    idx = np.asarray(sorted(set(int(i) for i in subset)), dtype=np.int64)
    if idx.size == 0:
        raise InvalidDataError("feature subset must be non-empty")
    if idx.min() < 0 or idx.max() >= model.n_features:
        raise InvalidDataError(
            f"subset {idx.tolist()} out of range for d={model.n_features}"
        )
    return idx


def _effective_cov(model: GaussianEvidenceModel, h: int) -> np.ndarray:
    cov = model.per_class[h].covariance
    if model.assumption == Assumption.INDEPENDENT:
        return np.diag(np.diag(cov))
    return cov


def fit(
    data: LabeledTable,
    assumption: Assumption | str = Assumption.DEPENDENT,
    ridge: float = DEFAULT_RIDGE,
    label_names: Sequence[str] | None = None,
) -> GaussianEvidenceModel:
    """Fit per-class Gaussians: sample means, unbiased (n-1) covariances with
    ``ridge`` added to the diagonal, priors from class frequencies.

    Every class id in 0..K-1 must be present with at least two samples.
    """
    assumption = _as_assumption(assumption)
    if ridge < 0:
        raise InvalidDataError(f"ridge must be >= 0, got {ridge}")
    X = np.asarray(data.rows, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    if X.size == 0:
        raise InvalidDataError("cannot fit on an empty table")
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("training rows contain non-finite values")
    n, d = X.shape
    k = int(y.max()) + 1
    if k < 2:
        raise InvalidDataError("need at least two classes to fit")
    if label_names is None:
        label_names = [f"class_{c}" for c in range(k)]
    if len(label_names) != k:
        raise InvalidDataError(f"{len(label_names)} label names for {k} classes")

    per_class = []
    for c in range(k):
        rows_c = X[y == c]
        if rows_c.shape[0] < 2:
            raise UnderpopulatedClassError(
                f"class {c} has {rows_c.shape[0]} sample(s); need >= 2"
            )
        mean = rows_c.mean(axis=0)
        cov = np.cov(rows_c, rowvar=False, ddof=1).reshape(d, d)
        cov = cov + ridge * np.eye(d)
        per_class.append(ClassStats(mean=mean, covariance=cov, prior=rows_c.shape[0] / n))

    labels = tuple(Label(id=c, name=str(label_names[c])) for c in range(k))
    return GaussianEvidenceModel(
        labels=labels,
        feature_names=data.feature_names,
        per_class=tuple(per_class),
        assumption=assumption,
        ridge=float(ridge),
    )


def log_density_independent(model: GaussianEvidenceModel, h, i: int, x_i: float) -> float:
    """Univariate Gaussian log density of feature ``i`` under hypothesis ``h``."""
    h = _label_id(model, h)
    if not 0 <= int(i) < model.n_features:
        raise InvalidDataError(f"feature index {i} out of range")
    stats = model.per_class[h]
    var = float(stats.covariance[i, i])
    if var <= 0.0:
        raise SingularCovarianceError(
            f"class {model.labels[h].name!r}: feature {i} has variance {var}"
        )
    delta = float(x_i) - float(stats.mean[i])
    return -0.5 * LOG_2PI - 0.5 * float(np.log(var)) - delta * delta / (2.0 * var)


def conditional_gaussian(
    model: GaussianEvidenceModel, h, subset: Iterable[int], x
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the subset's features conditioned on the rest.

    Returns (mu_S|rest, Sigma_S|rest). With the full index set this is just
    the class mean and covariance. Dependent-mode models only.
    """
    h = _label_id(model, h)
    if model.assumption != Assumption.DEPENDENT:
        raise InvalidDataError("conditional_gaussian requires a dependent-mode model")
    idx = _subset_indices(model, subset)
    x = validate_features(model, x)
    stats = model.per_class[h]
    if idx.size == model.n_features:
        return stats.mean.copy(), stats.covariance.copy()
    rest = np.setdiff1d(np.arange(model.n_features), idx)
    cov = stats.covariance
    cov_ss = cov[np.ix_(idx, idx)]
    cov_sr = cov[np.ix_(idx, rest)]
    cov_rr = cov[np.ix_(rest, rest)]
    try:
        solved = np.linalg.solve(
            cov_rr, np.column_stack([cov_sr.T, x[rest] - stats.mean[rest]])
        )
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"class {model.labels[h].name!r}: conditioning block is singular"
        ) from None
    mean_c = stats.mean[idx] + cov_sr @ solved[:, -1]
    cov_c = cov_ss - cov_sr @ solved[:, :-1]
    cov_c = 0.5 * (cov_c + cov_c.T)
    return mean_c, cov_c


def _mvn_logpdf(x_s: np.ndarray, mean: np.ndarray, cov: np.ndarray, class_name: str) -> float:
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise SingularCovarianceError(
            f"class {class_name!r}: covariance is not positive-definite"
        )
    try:
        z = np.linalg.solve(cov, x_s - mean)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"class {class_name!r}: covariance is singular"
        ) from None
    quad = float((x_s - mean) @ z)
    return -0.5 * x_s.shape[0] * LOG_2PI - 0.5 * float(logdet) - 0.5 * quad


def log_density_subset(model: GaussianEvidenceModel, h, subset: Iterable[int], x) -> float:
    """Log density of x_S given the remaining features, under hypothesis h.

    Independent mode: the sum of univariate log densities over S. Dependent
    mode: multivariate Gaussian log density at the conditional mean and
    covariance, so that the chain rule
    ``log p(x) = log p(x_S | x_rest) + log p(x_rest)`` holds exactly.
    """
    h = _label_id(model, h)
    idx = _subset_indices(model, subset)
    x = validate_features(model, x)
    if model.assumption == Assumption.INDEPENDENT:
        return float(
            sum(log_density_independent(model, h, int(i), float(x[i])) for i in idx)
        )
    mean_c, cov_c = conditional_gaussian(model, h, idx, x)
    return _mvn_logpdf(x[idx], mean_c, cov_c, model.labels[h].name)


def mixture_log_density(
    model: GaussianEvidenceModel, h, subset: Iterable[int], x, normalize: bool = True
) -> float:
    """Log of the prior-weighted alternative-class mixture density of x_S.

    With ``normalize`` (default) the mixture weights are renormalized over
    the alternatives so the result is a proper conditional density; without
    it the raw prior-weighted sum is returned (the two differ by the
    constant ``log(sum of alternative priors)``).
    """
    h = _label_id(model, h)
    alternatives = [k for k in range(model.n_classes) if k != h]
    if not alternatives:
        raise NoAlternativesError("no alternative hypotheses to mix over")
    logs = np.array(
        [
            log_density_subset(model, k, subset, x) + np.log(model.per_class[k].prior)
            for k in alternatives
        ]
    )
    out = float(logsumexp(logs))
    if normalize:
        out -= float(np.log(sum(model.per_class[k].prior for k in alternatives)))
    return out


def woe(model: GaussianEvidenceModel, h, subset: Iterable[int], x, normalize: bool = True) -> float:
    """Weight of evidence of the feature subset for hypothesis h.

    Positive supports h, negative refutes h, zero is neutral.
    """
    return log_density_subset(model, h, subset, x) - mixture_log_density(
        model, h, subset, x, normalize=normalize
    )


def _precision(model: GaussianEvidenceModel, k: int) -> np.ndarray:
    cache = model._derived  # type: ignore[attr-defined]
    key = ("precision", k)
    if key not in cache:
        try:
            lam = np.linalg.inv(model.per_class[k].covariance)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError(
                f"class {model.labels[k].name!r}: covariance is singular"
            ) from None
        lam.flags.writeable = False
        cache[key] = lam
    return cache[key]


def _cholesky(model: GaussianEvidenceModel, k: int) -> tuple[np.ndarray, float]:
    cache = model._derived  # type: ignore[attr-defined]
    key = ("cholesky", k)
    if key not in cache:
        try:
            chol = np.linalg.cholesky(model.per_class[k].covariance)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError(
                f"class {model.labels[k].name!r}: covariance is not positive-definite"
            ) from None
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        chol.flags.writeable = False
        cache[key] = (chol, logdet)
    return cache[key]


def _independent_log_densities(model: GaussianEvidenceModel, k: int, x: np.ndarray) -> np.ndarray:
    stats = model.per_class[k]
    var = np.diag(stats.covariance)
    if np.any(var <= 0):
        raise SingularCovarianceError(
            f"class {model.labels[k].name!r}: zero variance feature"
        )
    delta = x - stats.mean
    return -0.5 * LOG_2PI - 0.5 * np.log(var) - delta * delta / (2.0 * var)


def _singleton_log_densities(model: GaussianEvidenceModel, x: np.ndarray) -> np.ndarray:
    """(K, d) matrix of per-feature conditional log densities.

    Dependent mode uses the precision-matrix identities (conditional variance
    1/Lambda_ii, conditional mean mu_i - (1/Lambda_ii) sum_j Lambda_ij dx_j),
    which agree with the Schur-complement path to float precision but cost
    one cached d x d inversion per class instead of d solves per call.
    """
    out = np.empty((model.n_classes, model.n_features))
    for k in range(model.n_classes):
        if model.assumption == Assumption.INDEPENDENT:
            out[k] = _independent_log_densities(model, k, x)
            continue
        stats = model.per_class[k]
        delta = x - stats.mean
        lam = _precision(model, k)
        lam_diag = np.diag(lam)
        if np.any(lam_diag <= 0):
            raise SingularCovarianceError(
                f"class {model.labels[k].name!r}: covariance is not positive-definite"
            )
        cond_var = 1.0 / lam_diag
        cond_mean = stats.mean + delta - cond_var * (lam @ delta)
        dd = x - cond_mean
        out[k] = -0.5 * LOG_2PI - 0.5 * np.log(cond_var) - dd * dd / (2.0 * cond_var)
    return out


def per_feature_woe(model: GaussianEvidenceModel, x, h, normalize: bool = True) -> np.ndarray:
    """Vector of singleton-subset WoE values, one per feature.

    In dependent mode each feature is conditioned on all remaining features.
    """
    h = _label_id(model, h)
    x = validate_features(model, x)
    dens = _singleton_log_densities(model, x)
    return _woe_rows_from_densities(model, dens, normalize)[h]


def _woe_rows_from_densities(
    model: GaussianEvidenceModel, dens: np.ndarray, normalize: bool = True
) -> np.ndarray:
    """(K, d) per-feature WoE for every hypothesis from the density matrix."""
    log_priors = np.log(model.priors)
    rows = np.empty_like(dens)
    for h in range(model.n_classes):
        alt = [k for k in range(model.n_classes) if k != h]
        mix = logsumexp(dens[alt] + log_priors[alt, None], axis=0)
        if normalize:
            mix = mix - np.log(model.priors[alt].sum())
        rows[h] = dens[h] - mix
    return rows


def _validate_gamma(model: GaussianEvidenceModel, gamma) -> np.ndarray:
    if gamma is None:
        return np.ones(model.n_features)
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 1 or g.shape[0] != model.n_features:
        raise DimensionError(
            f"gamma has shape {g.shape}, expected ({model.n_features},)"
        )
    if not np.all(np.isfinite(g)):
        raise InvalidDataError("gamma contains non-finite values")
    if np.any(g < 0):
        raise InvalidDataError("gamma entries must be non-negative")
    return g


def total_woe(model: GaussianEvidenceModel, x, h, gamma=None) -> float:
    """Importance-weighted sum of per-feature WoE values for hypothesis h.

    ``gamma`` defaults to all ones; a zero entry discards that feature's
    evidence entirely.
    """
    g = _validate_gamma(model, gamma)
    contributions = g * per_feature_woe(model, x, h)
    return float(contributions.sum())


def classify(model: GaussianEvidenceModel, x) -> Label:
    """Hypothesis with the maximum total (unit-gamma) weight of evidence.

    Ties break to the lowest label id. Exactly the posterior argmax for two
    classes under uniform priors; an approximation for K > 2 in dependent
    mode, where per-feature WoEs do not sum to the joint log-likelihood
    ratio.
    """
    x = validate_features(model, x)
    dens = _singleton_log_densities(model, x)
    totals = _woe_rows_from_densities(model, dens).sum(axis=1)
    return model.labels[int(np.argmax(totals))]


def joint_log_likelihoods(model: GaussianEvidenceModel, x) -> np.ndarray:
    """Log joint density of x under every class (respecting the assumption)."""
    x = validate_features(model, x)
    out = np.empty(model.n_classes)
    for k in range(model.n_classes):
        if model.assumption == Assumption.INDEPENDENT:
            out[k] = _independent_log_densities(model, k, x).sum()
            continue
        chol, logdet = _cholesky(model, k)
        z = np.linalg.solve(chol, x - model.per_class[k].mean)
        out[k] = -0.5 * model.n_features * LOG_2PI - 0.5 * logdet - 0.5 * float(z @ z)
    return out


def classify_joint(model: GaussianEvidenceModel, x) -> Label:
    """Hypothesis with maximum full-vector (S = all features) WoE.

    Under uniform priors this agrees exactly with the posterior argmax for
    any K, because the alternative mixture is a monotone rearrangement of
    the joint likelihoods.
    """
    logs = joint_log_likelihoods(model, x)
    log_priors = np.log(model.priors)
    scores = np.empty(model.n_classes)
    for h in range(model.n_classes):
        alt = [k for k in range(model.n_classes) if k != h]
        scores[h] = logs[h] - (
            float(logsumexp(logs[alt] + log_priors[alt]))
            - float(np.log(model.priors[alt].sum()))
        )
    return model.labels[int(np.argmax(scores))]


def posterior(model: GaussianEvidenceModel, x) -> np.ndarray:
    """Class posterior via Bayes rule on joint log likelihoods and priors."""
    logs = joint_log_likelihoods(model, x) + np.log(model.priors)
    p = np.exp(logs - logsumexp(logs))
    return p / p.sum()
