"""Regression baselines: regress-and-compare and pairwise relabeling.

Regress-and-compare fits one outcome regressor per treatment arm and
prescribes the arm with the smallest prediction. The relabeling
strategies reduce the m-treatment problem to binary contrasts estimated
by a treatment-effect estimator on relabeled data: one-vs-all contrasts
each arm with the pooled rest; one-vs-one fits every ordered pair and
prescribes either the arm whose worst pairwise contrast is smallest
(variant A) or the arm winning the most pairwise comparisons
(variant B). Ties always go to the lowest treatment index.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, SchemaError


class OlsRegressor:
    """Least squares with intercept; ridge fallback on singular designs.

    When the normal matrix is not positive definite, a ridge of
    1e-8 * trace(X'X)/d is added before solving.
    """

    def __init__(self):
        self.weights = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        A = np.hstack([np.ones((len(X), 1)), X])
        G = A.T @ A
        b = A.T @ y
        try:
            c = np.linalg.cholesky(G)
            w = np.linalg.solve(c.T, np.linalg.solve(c, b))
        except np.linalg.LinAlgError:
            d = max(1, X.shape[1])
            lam = 1e-8 * float(np.trace(X.T @ X)) / d
            if lam == 0.0:
                lam = 1e-8
            w = np.linalg.solve(G + lam * np.eye(G.shape[0]), b)
        self.weights = w
        return self

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(self.weights[0] + x @ self.weights[1:])

    def to_doc(self):
        return {"type": "ols", "weights": [float(w) for w in self.weights]}

    @staticmethod
    def from_doc(doc):
        r = OlsRegressor()
        r.weights = np.asarray(doc["weights"], dtype=np.float64)
        return r


class KnnRegressor:
    """k-nearest-neighbor mean outcome on standardized features.

    k defaults to floor(sqrt(n)) of the fitted sample. All points tied
    with the k-th smallest distance are included in the average, so the
    prediction does not depend on sort order among co-distant points.
    """

    def __init__(self, k=None):
        self.k = k
        self.x = None
        self.y = None
        self.center = None
        self.scale = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(X) == 0:
            raise DomainError("knn needs at least one training point")
        self.center = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
        self.scale = np.where(sd > 0, sd, 1.0)
        self.x = (X - self.center) / self.scale
        self.y = y
        if self.k is None:
            self.k = max(1, int(np.sqrt(len(X))))
        self.k = min(self.k, len(X))
        return self

    def predict(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.center) / self.scale
        dist = np.sqrt(((self.x - z) ** 2).sum(axis=1))
        boundary = np.partition(dist, self.k - 1)[self.k - 1]
        return float(self.y[dist <= boundary].mean())

    def to_doc(self):
        return {
            "type": "knn",
            "k": int(self.k),
            "center": [float(v) for v in self.center],
            "scale": [float(v) for v in self.scale],
            "x": [[float(v) for v in row] for row in self.x],
            "y": [float(v) for v in self.y],
        }

    @staticmethod
    def from_doc(doc):
        r = KnnRegressor(k=int(doc["k"]))
        r.center = np.asarray(doc["center"], dtype=np.float64)
        r.scale = np.asarray(doc["scale"], dtype=np.float64)
        r.x = np.asarray(doc["x"], dtype=np.float64)
        r.y = np.asarray(doc["y"], dtype=np.float64)
        return r


_REGRESSORS = {"ols": OlsRegressor, "knn": KnnRegressor}


def make_regressor(base, params=None):
    """Regressor factory by identifier ("ols" or "knn")."""
    if base not in _REGRESSORS:
        raise ConfigError(f"unknown regressor {base!r} (known: ols, knn)")
    params = params or {}
    if base == "knn":
        return lambda: KnnRegressor(k=params.get("k"))
    return lambda: OlsRegressor()


def regressor_from_doc(doc):
    kind = doc.get("type")
    if kind not in _REGRESSORS:
        raise SchemaError(f"unknown regressor type {kind!r}")
    return _REGRESSORS[kind].from_doc(doc)


@dataclass(frozen=True)
class RcPolicy:
    """One regressor per arm; prescribes the smallest predicted outcome."""

    regressors: tuple
    m: int
    d: int
    base: str = "ols"

    def predictions(self, x):
        return np.array([r.predict(x) for r in self.regressors])

    def prescribe(self, x):
        return int(np.argmin(self.predictions(x))) + 1


def fit_rc(ds, regressor_factory=None, base="ols"):
    """Fit regress-and-compare; every arm needs at least one subject."""
    factory = regressor_factory or make_regressor(base)
    regs = []
    for t in range(1, ds.m + 1):
        rows = np.flatnonzero(ds.T == t)
        if rows.size == 0:
            raise DomainError(f"treatment {t} has no subjects")
        regs.append(factory().fit(ds.X[rows], ds.Y[rows]))
    return RcPolicy(regressors=tuple(regs), m=ds.m, d=ds.d, base=base)


class RegressionCate:
    """Treatment-effect estimate as a difference of two arm regressors.

    Fit on relabeled data with labels in {1, 2}; predicts the label-2
    regression minus the label-1 regression.
    """

    def __init__(self, regressor_factory):
        self.factory = regressor_factory
        self.hi = None
        self.lo = None

    def fit(self, X, labels, y):
        labels = np.asarray(labels)
        for lab in (1, 2):
            if not (labels == lab).any():
                raise DomainError(f"relabeled arm {lab} has no subjects")
        self.hi = self.factory().fit(X[labels == 2], y[labels == 2])
        self.lo = self.factory().fit(X[labels == 1], y[labels == 1])
        return self

    def predict(self, x):
        return self.hi.predict(x) - self.lo.predict(x)


def make_cate(base="ols", params=None):
    """Factory (t, s) -> fresh RegressionCate, ignoring the pair labels."""
    factory = make_regressor(base, params)
    return lambda t, s=None: RegressionCate(factory)


@dataclass(frozen=True)
class OneVsAllPolicy:
    """Prescribes the arm with the smallest contrast against the rest."""

    estimators: tuple  # index t-1 -> estimator of arm t vs pooled rest
    m: int
    d: int
    base: str = "ols"

    def contrasts(self, x):
        return np.array([e.predict(x) for e in self.estimators])

    def prescribe(self, x):
        return int(np.argmin(self.contrasts(x))) + 1


def fit_1va(ds, cate_factory=None, base="ols"):
    """Fit the one-vs-all policy.

    Args:
        ds: dataset; every treatment needs at least one subject.
        cate_factory: optional hook (t, s=None) -> estimator with the
            RegressionCate fit/predict contract; tests inject oracles.
    """
    factory = cate_factory or make_cate(base)
    ests = []
    for t in range(1, ds.m + 1):
        labels = 1 + (ds.T == t).astype(np.int64)
        ests.append(factory(t).fit(ds.X, labels, ds.Y))
    return OneVsAllPolicy(estimators=tuple(ests), m=ds.m, d=ds.d, base=base)


@dataclass(frozen=True)
class OneVsOnePolicy:
    """Pairwise-contrast policy.

    Variant "A" prescribes the arm whose smallest pairwise contrast is
    smallest; variant "B" the arm that wins the most pairwise
    comparisons (contrast below zero)."""

    estimators: dict  # (t, s) -> estimator of arm t vs arm s
    m: int
    d: int
    variant: str = "A"
    base: str = "ols"

    def contrast(self, t, s, x):
        return self.estimators[(t, s)].predict(x)

    def prescribe(self, x):
        if self.variant == "A":
            worst = np.array(
                [
                    min(self.contrast(t, s, x) for s in range(1, self.m + 1) if s != t)
                    for t in range(1, self.m + 1)
                ]
            )
            return int(np.argmin(worst)) + 1
        wins = np.array(
            [
                sum(
                    1
                    for s in range(1, self.m + 1)
                    if s != t and self.contrast(t, s, x) < 0.0
                )
                for t in range(1, self.m + 1)
            ]
        )
        return int(np.argmax(wins)) + 1


def fit_1v1(ds, cate_factory=None, base="ols", variant="A"):
    """Fit a one-vs-one policy over every ordered treatment pair."""
    if variant not in ("A", "B"):
        raise ConfigError("variant must be 'A' or 'B'")
    factory = cate_factory or make_cate(base)
    ests = {}
    for t in range(1, ds.m + 1):
        for s in range(1, ds.m + 1):
            if s == t:
                continue
            rows = np.flatnonzero((ds.T == t) | (ds.T == s))
            labels = 1 + (ds.T[rows] == t).astype(np.int64)
            ests[(t, s)] = factory(t, s).fit(ds.X[rows], labels, ds.Y[rows])
    return OneVsOnePolicy(estimators=ests, m=ds.m, d=ds.d, variant=variant, base=base)


def rc_to_doc(policy):
    return {
        "kind": f"rc-{policy.base}",
        "m": int(policy.m),
        "d": int(policy.d),
        "arms": [r.to_doc() for r in policy.regressors],
    }


def rc_from_doc(doc):
    kind = doc.get("kind", "")
    if not kind.startswith("rc-"):
        raise SchemaError(f"expected an rc document, got kind {kind!r}")
    regs = tuple(regressor_from_doc(d) for d in doc["arms"])
    return RcPolicy(regressors=regs, m=int(doc["m"]), d=int(doc["d"]), base=kind[3:])


def _cate_to_doc(est):
    return {"pos": est.hi.to_doc(), "neg": est.lo.to_doc()}


def _cate_from_doc(doc):
    est = RegressionCate(None)
    est.hi = regressor_from_doc(doc["pos"])
    est.lo = regressor_from_doc(doc["neg"])
    return est


def relabel_to_doc(policy):
    if isinstance(policy, OneVsAllPolicy):
        return {
            "kind": "1va",
            "base": policy.base,
            "m": int(policy.m),
            "d": int(policy.d),
            "estimators": [_cate_to_doc(e) for e in policy.estimators],
        }
    return {
        "kind": f"1v1{policy.variant.lower()}",
        "base": policy.base,
        "m": int(policy.m),
        "d": int(policy.d),
        "estimators": [
            {"t": t, "s": s, **_cate_to_doc(e)} for (t, s), e in sorted(policy.estimators.items())
        ],
    }


def relabel_from_doc(doc):
    kind = doc.get("kind")
    m = int(doc["m"])
    d = int(doc["d"])
    base = doc.get("base", "ols")
    if kind == "1va":
        ests = tuple(_cate_from_doc(e) for e in doc["estimators"])
        if len(ests) != m:
            raise SchemaError("1va document must hold one estimator per treatment")
        return OneVsAllPolicy(estimators=ests, m=m, d=d, base=base)
    if kind in ("1v1a", "1v1b"):
        ests = {(int(e["t"]), int(e["s"])): _cate_from_doc(e) for e in doc["estimators"]}
        return OneVsOnePolicy(
            estimators=ests, m=m, d=d, variant=kind[-1].upper(), base=base
        )
    raise SchemaError(f"unknown relabeling document kind {kind!r}")
