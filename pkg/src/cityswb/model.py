"""Resilience classifiers: scaling, SMOTE, penalised logistic regression,
leave-one-out evaluation, and the statistics used for reporting."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.metrics import precision_recall_fscore_support, roc_auc_score
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import ConvergenceError, InputError, check_binary
from .features import GROUPS, FeatureMatrix
from .resilience import RecoveryLabel, encode_ordinal

logger = logging.getLogger(__name__)


# -- scaling --

class ClippedMinMaxScaler(TransformerMixin, BaseEstimator):
    """Min-max scaling fitted on training rows; later rows are clipped to [0, 1].

    Columns that are constant on the training rows are dropped
    (see ``support_``).
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.support_ = self.data_max_ > self.data_min_
        if not self.support_.any():
            raise InputError("every feature column is constant on the training rows")
        if not self.support_.all():
            logger.info("dropping %d constant columns", int((~self.support_).sum()))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=float)
        lo = self.data_min_[self.support_]
        hi = self.data_max_[self.support_]
        return np.clip((X[:, self.support_] - lo) / (hi - lo), 0.0, 1.0)


@dataclass
class ScaledFold:
    train: np.ndarray
    test: np.ndarray
    data_min: np.ndarray
    data_max: np.ndarray
    support: np.ndarray


def minmax_scale(train, test) -> ScaledFold:
    sc = ClippedMinMaxScaler().fit(train)
    return ScaledFold(sc.transform(train), sc.transform(np.atleast_2d(test)),
                      sc.data_min_, sc.data_max_, sc.support_)


# -- SMOTE --

def smote(minority, n_synthetic: int, k: int = 5, seed=0, return_provenance: bool = False):
    """Synthetic minority rows interpolated towards random near neighbours.

    Each new row is ``x + lam * (nn - x)`` with ``x`` a random minority row,
    ``nn`` one of its `k` nearest minority neighbours and ``lam ~ U[0, 1]``.
    With `return_provenance` also returns ``(base_index, neighbour_index, lam)``.
    """
    M = check_array(minority, dtype=float)
    n = len(M)
    if n < 2:
        raise InputError(f"SMOTE needs at least 2 minority rows, got {n}")
    if k > n - 1:
        warnings.warn(f"k={k} too large for {n} minority rows; using {n - 1}", stacklevel=2)
        k = n - 1
    if k < 1:
        raise InputError("k must be >= 1")
    d2 = ((M[:, None, :] - M[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    base = rng.integers(0, n, size=n_synthetic)
    pick = rng.integers(0, k, size=n_synthetic)
    lam = rng.random(n_synthetic)
    nn = neighbours[base, pick]
    out = M[base] + lam[:, None] * (M[nn] - M[base])
    if return_provenance:
        return out, (base, nn, lam)
    return out


class SMOTE(BaseEstimator):
    """Balance a binary training set by oversampling the smaller class.

    Parameters
    ----------
    k_neighbors : int, default=5
    seed : int, default=0
    """

    def __init__(self, k_neighbors=5, seed=0):
        self.k_neighbors = k_neighbors
        self.seed = seed

    def fit_resample(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = check_binary(y)
        counts = np.bincount(y, minlength=2)
        minority = int(np.argmin(counts))
        need = int(counts.max() - counts.min())
        self.provenance_ = None
        if need == 0:
            return X, y
        rows = X[y == minority]
        if len(rows) == 1:
            # a single point has no neighbours; every interpolation is the point itself
            synth = np.repeat(rows, need, axis=0)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                synth, prov = smote(rows, need, k=min(self.k_neighbors, len(rows) - 1),
                                    seed=self.seed, return_provenance=True)
            self.provenance_ = prov
        X_res = np.vstack([X, synth])
        y_res = np.r_[y, np.full(need, minority)]
        return X_res, y_res


# -- logistic regression --

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def penalized_loglik(theta, X, y, l2):
    """``sum log p(y|x) - l2/2 * |w|^2`` with ``theta = [intercept, w...]``."""
    z = theta[0] + X @ theta[1:]
    # log(1 + e^z) computed stably
    ll = np.sum(y * z - np.logaddexp(0.0, z))
    return float(ll - 0.5 * l2 * theta[1:] @ theta[1:])


def penalized_gradient(theta, X, y, l2):
    p = _sigmoid(theta[0] + X @ theta[1:])
    r = y - p
    g = np.empty_like(theta)
    g[0] = r.sum()
    g[1:] = X.T @ r - l2 * theta[1:]
    return g


def _hessian(theta, X, l2):
    p = _sigmoid(theta[0] + X @ theta[1:])
    w = p * (1.0 - p)
    Xa = np.column_stack([np.ones(len(X)), X])
    H = (Xa * w[:, None]).T @ Xa
    H[1:, 1:] += l2 * np.eye(X.shape[1])
    return H


class L2LogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression with a ridge penalty on the weights.

    Newton steps with backtracking, so the penalised log-likelihood never
    decreases between iterations; the intercept is not penalised.

    Parameters
    ----------
    l2 : float, default=1.0
    tol : float, default=1e-8
        Stop when the gradient norm is at or below this.
    max_iter : int, default=100
    """

    def __init__(self, l2=1.0, tol=1e-8, max_iter=100):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        y = check_binary(y).astype(float)
        if self.l2 < 0:
            raise InputError("l2 must be >= 0")
        theta = np.zeros(X.shape[1] + 1)
        ll = penalized_loglik(theta, X, y, self.l2)
        trace = [ll]
        for _ in range(self.max_iter):
            g = penalized_gradient(theta, X, y, self.l2)
            if np.linalg.norm(g) <= self.tol:
                break
            H = _hessian(theta, X, self.l2)
            try:
                step = np.linalg.solve(H + 1e-12 * np.eye(len(H)), g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, g, rcond=None)[0]
            # Newton decrement: the gain left is below what the objective can resolve
            if g @ step <= 4.0 * np.finfo(float).eps * max(1.0, abs(ll)):
                break
            t = 1.0
            while True:
                cand = theta + t * step
                new = penalized_loglik(cand, X, y, self.l2)
                if np.isfinite(new) and new >= ll:
                    break
                t *= 0.5
                if t < 1e-12:
                    cand, new = theta, ll
                    break
            if cand is theta:
                break
            theta, ll = cand, new
            trace.append(ll)
            if not np.all(np.isfinite(theta)):
                raise ConvergenceError("logistic regression diverged", ll, trace)
        else:
            g = penalized_gradient(theta, X, y, self.l2)
            if np.linalg.norm(g) > self.tol:
                raise ConvergenceError(
                    f"logistic regression did not converge in {self.max_iter} iterations "
                    f"(|grad| = {np.linalg.norm(g):.3g})", ll, trace)
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:].copy()
        self.classes_ = np.array([0, 1])
        self.loglik_trace_ = trace
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def fit_logistic(X, y, l2=1.0, tol=1e-8, max_iter=100) -> L2LogisticRegression:
    return L2LogisticRegression(l2=l2, tol=tol, max_iter=max_iter).fit(X, y)


# -- leave-one-out --

@dataclass
class CVReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    coefficients: pd.Series
    folds: list[dict] = field(default_factory=list)

    def metrics_frame(self, name: str | None = None) -> pd.DataFrame:
        row = {"Acc": self.accuracy, "P": self.precision, "R": self.recall,
               "F1": self.f1, "AUC": self.auc}
        return pd.DataFrame([row], index=pd.Index([name or "model"], name="feature_set"))

    def coefficient_frame(self) -> pd.DataFrame:
        coef = self.coefficients.sort_values(ascending=False, kind="stable")
        group = [c.split(".", 1)[0] if "." in c else "" for c in coef.index]
        feat = [c.split(".", 1)[-1] for c in coef.index]
        return pd.DataFrame({"feature_set": group, "feature": feat, "coef": coef.to_numpy()})

    @property
    def predictions(self) -> np.ndarray:
        return np.array([f["pred"] for f in self.folds])

    @property
    def labels(self) -> np.ndarray:
        return np.array([f["label"] for f in self.folds])


def loo_cv(X, y, feature_names=None, row_names=None, l2=1.0, k_neighbors=5,
           seed=0, oversample=True, tol=1e-8, max_iter=100) -> CVReport:
    """Leave-one-out evaluation of scale -> SMOTE -> logistic regression.

    Scaling and oversampling see only the training rows of each fold. Metrics
    come from the pooled held-out predictions (threshold 0.5) and pooled
    probabilities (AUC). Coefficients are averaged over folds; a column
    dropped as constant in a fold contributes 0 there.
    """
    X = check_array(X, dtype=float)
    y = check_binary(y)
    n, p = X.shape
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2:
        raise InputError(f"need at least 2 rows per class, got {counts.tolist()}")
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    rows = list(row_names) if row_names is not None else list(range(n))

    probs = np.empty(n)
    coefs = np.zeros((n, p))
    folds = []
    for i in range(n):
        train = np.arange(n) != i
        scaler = ClippedMinMaxScaler().fit(X[train])
        Xtr, ytr = scaler.transform(X[train]), y[train]
        n_synth = 0
        if oversample:
            sm = SMOTE(k_neighbors=k_neighbors, seed=np.random.SeedSequence([seed, i]))
            Xres, yres = sm.fit_resample(Xtr, ytr)
            n_synth = len(yres) - len(ytr)
            Xtr, ytr = Xres, yres
        clf = L2LogisticRegression(l2=l2, tol=tol, max_iter=max_iter).fit(Xtr, ytr)
        probs[i] = clf.predict_proba(scaler.transform(X[i:i + 1]))[0, 1]
        coefs[i, scaler.support_] = clf.coef_
        folds.append({"fold": i, "row": rows[i], "label": int(y[i]),
                      "prob": float(probs[i]), "pred": int(probs[i] >= 0.5),
                      "n_synthetic": int(n_synth)})

    pred = (probs >= 0.5).astype(int)
    prec, rec, f1, _ = precision_recall_fscore_support(
        y, pred, average="macro", labels=[0, 1], zero_division=0)
    return CVReport(
        accuracy=float((pred == y).mean()),
        precision=float(prec), recall=float(rec), f1=float(f1),
        auc=float(roc_auc_score(y, probs)),
        coefficients=pd.Series(coefs.mean(axis=0), index=names, name="coef"),
        folds=folds,
    )


# -- statistics --

def paired_accuracy_ttest(pred_a, pred_b, labels) -> tuple[float, bool]:
    """Two-sided paired t-test on per-row correctness of two prediction vectors.

    Returns ``(p_value, degenerate)``. When the differences have zero
    variance the test is undefined: p is 1.0 if they are all zero and 0.0
    otherwise, and `degenerate` is True.
    """
    pred_a, pred_b, labels = map(np.asarray, (pred_a, pred_b, labels))
    if not (len(pred_a) == len(pred_b) == len(labels)):
        raise InputError("prediction vectors and labels differ in length")
    d = (pred_a == labels).astype(float) - (pred_b == labels).astype(float)
    n = len(d)
    if n < 2:
        raise InputError("need at least 2 paired observations")
    sd = d.std(ddof=1)
    if sd == 0.0:
        return (1.0 if d.mean() == 0.0 else 0.0), True
    t = d.mean() / (sd / np.sqrt(n))
    return float(2.0 * stats.t.sf(abs(t), n - 1)), False


def spearman(x, y) -> tuple[float, float]:
    """Rank correlation with average ranks for ties; p from a t approximation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise InputError("spearman inputs differ in length")
    n = len(x)
    if n < 5:
        raise InputError(f"spearman needs at least 5 pairs, got {n}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InputError("spearman undefined for a constant vector")
    rx = stats.rankdata(x) - (n + 1) / 2.0
    ry = stats.rankdata(y) - (n + 1) / 2.0
    rho = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2.0 * stats.t.sf(abs(t), n - 2))


# -- tasks and feature sets --

FEATURE_SETS = {
    "demographics": ("demographics",),
    "covid": ("covid",),
    "user-interaction": ("user_interaction",),
    "post-interaction": ("post_interaction",),
    "pragmatic": ("pragmatic",),
    "liwc": ("liwc",),
    "all": GROUPS,
    "all-selected": ("covid", "pragmatic", "liwc"),
}
TASKS = ("impact", "recovery")


def task_data(fm: FeatureMatrix, task: str, feature_set: str):
    """Rows, binary labels and COVID periods for one prediction task.

    impact: 1 = Unaffected, 0 = affected; COVID features from the early
    period only. recovery: affected communities only, 1 = Recovered.
    """
    if task not in TASKS:
        raise InputError(f"unknown task {task!r}")
    if feature_set not in FEATURE_SETS:
        raise InputError(f"unknown feature set {feature_set!r}")
    labels = fm.y.astype(str)
    if task == "impact":
        sub = fm.select(FEATURE_SETS[feature_set], covid_periods=("early",))
        y = (labels == RecoveryLabel.UNAFFECTED.value).astype(int)
        return sub.X, y.to_numpy()
    keep = labels != RecoveryLabel.UNAFFECTED.value
    sub = fm.select(FEATURE_SETS[feature_set])
    y = (labels[keep] == RecoveryLabel.RECOVERED.value).astype(int)
    return sub.X.loc[keep], y.to_numpy()


def run_task(fm: FeatureMatrix, task: str, feature_set: str, **cv) -> CVReport:
    X, y = task_data(fm, task, feature_set)
    if X.shape[1] == 0:
        raise InputError(f"feature set {feature_set!r} has no columns")
    return loo_cv(X.to_numpy(), y, feature_names=list(X.columns),
                  row_names=list(X.index), **cv)


# -- BRIC --

def load_bric(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"county_fips": str})
    except (OSError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read BRIC scores {path}: {exc}") from exc
    if "county_fips" not in frame:
        raise InputError(f"{path}: missing county_fips column")
    frame["county_fips"] = frame["county_fips"].str.strip().str.zfill(5)
    return frame.set_index("county_fips").astype(float)


def bric_correlations(labels: pd.DataFrame, county_of: dict[str, str],
                      bric: pd.DataFrame) -> pd.DataFrame:
    """Spearman correlation of ordinal labels with each BRIC column.

    Labels are encoded NonRecovered=0 < Recovered=1 < Unaffected=2. Several
    communities may share one county's scores.
    """
    rows = labels[labels["community"].map(lambda c: county_of.get(c) in bric.index)]
    dropped = len(labels) - len(rows)
    if dropped:
        logger.warning("%d communities lack BRIC scores", dropped)
    ordinal = encode_ordinal(rows["label"])
    fips = rows["community"].map(county_of)
    out = []
    for domain in bric.columns:
        rho, p = spearman(ordinal, bric.loc[fips, domain].to_numpy())
        out.append({"domain": domain, "rho": rho, "p_value": p, "n": len(rows)})
    return pd.DataFrame(out)
