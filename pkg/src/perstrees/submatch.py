"""Policy evaluation on data without counterfactuals via submatching.

A matched test set imputes, for each drawn test subject, the outcome
under every treatment: the received arm contributes the subject's own
outcome and every other arm the outcome of its nearest neighbor in
Mahalanobis distance. The greedy protocol draws test subjects at random
and matches each against the full sample; the optimal protocol (two
treatments only) picks the set of disjoint cross-arm pairs with the
smallest total distance. Matched subjects are flagged so training pools
can exclude them.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, ParseError, SchemaError
from .risk import PolicyScore, prescriptions
from .seeding import make_rng


@dataclass(frozen=True)
class Metric:
    """Mahalanobis distance with a fixed positive definite inverse."""

    inverse: np.ndarray

    def distance(self, a, b):
        diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
        return float(np.sqrt(max(diff @ self.inverse @ diff, 0.0)))

    def distances(self, x, X):
        """Distance from one point to every row of X."""
        diff = np.asarray(X, dtype=np.float64) - np.asarray(x, dtype=np.float64)
        sq = np.einsum("ij,jk,ik->i", diff, self.inverse, diff)
        return np.sqrt(np.clip(sq, 0.0, None))


def mahalanobis_metric(ds):
    """Metric from the sample covariance of the covariates.

    The covariance is regularized by 1e-8 * trace / d on the diagonal
    (falling back to a bare 1e-8 for identically-zero covariance), so
    the inverse exists even for degenerate samples.
    """
    if ds.n < 2:
        raise DomainError("the covariance metric needs at least two subjects")
    cov = np.cov(ds.X, rowvar=False)
    cov = np.atleast_2d(cov)
    eps = 1e-8 * float(np.trace(cov)) / ds.d
    if eps <= 0.0:
        eps = 1e-8
    return Metric(inverse=np.linalg.inv(cov + eps * np.eye(ds.d)))


@dataclass(frozen=True)
class MatchedTestSet:
    """Imputed outcomes for a set of test subjects.

    Attributes:
        drawn: test subject row indices, in draw order.
        factual_t: their received treatments.
        factual_y: their observed outcomes.
        yhat: n_test x m imputed outcomes; column t-1 of row j is the
            outcome of subject drawn[j] under treatment t.
        removed: sorted union of drawn subjects and their matches; the
            training pool must exclude these rows.
        X_test: covariate rows of the drawn subjects.
        m: number of treatments.
    """

    drawn: np.ndarray
    factual_t: np.ndarray
    factual_y: np.ndarray
    yhat: np.ndarray
    removed: np.ndarray
    X_test: np.ndarray
    m: int

    @property
    def n_test(self):
        return len(self.drawn)


def _arm_indices(ds):
    arms = [np.flatnonzero(ds.T == t) for t in range(1, ds.m + 1)]
    for t, rows in enumerate(arms, start=1):
        if rows.size == 0:
            raise DomainError(f"treatment {t} has no subjects to match against")
    return arms


def greedy_submatch(ds, n_test, metric, seed):
    """Draw test subjects and match their missing arms greedily.

    Each drawn subject's missing arms are matched against every subject
    of that arm (drawn subjects included, with replacement across test
    subjects); distance ties go to the lowest row index.
    """
    if not 1 <= n_test <= ds.n:
        raise DomainError(f"n_test must lie in 1..{ds.n}")
    arms = _arm_indices(ds)
    drawn = make_rng(seed).choice(ds.n, size=n_test, replace=False)
    yhat = np.empty((n_test, ds.m), dtype=np.float64)
    flagged = set()
    for j, i in enumerate(drawn):
        for t in range(1, ds.m + 1):
            if t == ds.T[i]:
                yhat[j, t - 1] = ds.Y[i]
                continue
            cands = arms[t - 1]
            dist = metric.distances(ds.X[i], ds.X[cands])
            match = int(cands[np.argmin(dist)])
            yhat[j, t - 1] = ds.Y[match]
            flagged.add(match)
    removed = np.array(sorted(set(drawn.tolist()) | flagged), dtype=np.int64)
    return MatchedTestSet(
        drawn=drawn.astype(np.int64),
        factual_t=ds.T[drawn],
        factual_y=ds.Y[drawn],
        yhat=yhat,
        removed=removed,
        X_test=ds.X[drawn].copy(),
        m=ds.m,
    )


def optimal_submatch(ds, n_pair, metric):
    """Minimum-total-distance disjoint cross-arm pairs (two treatments).

    Solves an assignment problem between the two arms, padded with
    zero-cost dummy partners so exactly n_pair real pairs are selected.
    Each pair contributes two test rows: each partner's missing arm is
    imputed from the other.
    """
    if ds.m != 2:
        raise DomainError("optimal submatching is defined for two treatments only")
    arm1, arm2 = _arm_indices(ds)
    n1, n2 = arm1.size, arm2.size
    if not 1 <= n_pair <= min(n1, n2):
        raise DomainError(f"n_pair must lie in 1..{min(n1, n2)}")
    cost = np.zeros((n1, n2 + n1 - n_pair), dtype=np.float64)
    for a, i in enumerate(arm1):
        cost[a, :n2] = metric.distances(ds.X[i], ds.X[arm2])
    rows, cols = linear_sum_assignment(cost)
    pairs = [
        (cost[a, b], int(arm1[a]), int(arm2[b]))
        for a, b in zip(rows, cols)
        if b < n2
    ]
    pairs.sort()
    pairs = sorted(pairs[:n_pair], key=lambda p: p[1])

    drawn, factual_t, factual_y, yhat_rows, X_rows = [], [], [], [], []
    for _, i, j in pairs:
        for subject in (i, j):
            drawn.append(subject)
            factual_t.append(int(ds.T[subject]))
            factual_y.append(float(ds.Y[subject]))
            yhat_rows.append([float(ds.Y[i]), float(ds.Y[j])])
            X_rows.append(ds.X[subject])
    removed = np.array(sorted(drawn), dtype=np.int64)
    return MatchedTestSet(
        drawn=np.array(drawn, dtype=np.int64),
        factual_t=np.array(factual_t, dtype=np.int64),
        factual_y=np.array(factual_y, dtype=np.float64),
        yhat=np.array(yhat_rows, dtype=np.float64),
        removed=removed,
        X_test=np.array(X_rows, dtype=np.float64),
        m=2,
    )


def _chosen(mts, policy):
    pres = prescriptions(policy, mts.X_test)
    return mts.yhat[np.arange(mts.n_test), pres - 1]


def matched_risk(mts, policy):
    """Mean imputed outcome under the policy's prescriptions."""
    return float(_chosen(mts, policy).mean())


def p1_hat(mts, policy):
    """Coefficient against the best single treatment; NaN if undefined."""
    chosen = _chosen(mts, policy).sum()
    best = mts.yhat.min(axis=1).sum()
    den = mts.yhat.sum(axis=0).min() - best
    if den == 0.0:
        return float("nan")
    return float(1.0 - (chosen - best) / den)


def p2_hat(mts, policy):
    """Coefficient against the historical assignment; NaN if undefined."""
    chosen = _chosen(mts, policy).sum()
    best = mts.yhat.min(axis=1).sum()
    den = mts.factual_y.sum() - best
    if den == 0.0:
        return float("nan")
    return float(1.0 - (chosen - best) / den)


def matched_metrics(mts, policy):
    """Matched risk plus both coefficients as a PolicyScore."""
    return PolicyScore(
        risk=matched_risk(mts, policy), p1=p1_hat(mts, policy), p2=p2_hat(mts, policy)
    )


def save_matched_csv(mts, path):
    """Write the matched test set (one row per test subject)."""
    header = ["subject_index", "factual_t", "factual_y"] + [
        f"yhat_{t}" for t in range(1, mts.m + 1)
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j in range(mts.n_test):
            row = [str(int(mts.drawn[j])), str(int(mts.factual_t[j])), repr(float(mts.factual_y[j]))]
            row += [repr(float(v)) for v in mts.yhat[j]]
            writer.writerow(row)


def load_matched_csv(path):
    """Read back a matched test set CSV as a dict of arrays.

    The covariates of the drawn subjects are not stored in the CSV, so
    the result supports inspection but not policy evaluation.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, header required")
        expected = ["subject_index", "factual_t", "factual_y"]
        if header[: len(expected)] != expected or len(header) == len(expected):
            raise SchemaError(f"{path}: not a matched test set file")
        rows = [r for r in reader if r]
    m = len(header) - 3
    out = {
        "drawn": np.empty(len(rows), dtype=np.int64),
        "factual_t": np.empty(len(rows), dtype=np.int64),
        "factual_y": np.empty(len(rows), dtype=np.float64),
        "yhat": np.empty((len(rows), m), dtype=np.float64),
    }
    for i, r in enumerate(rows):
        try:
            out["drawn"][i] = int(r[0])
            out["factual_t"][i] = int(r[1])
            out["factual_y"][i] = float(r[2])
            out["yhat"][i] = [float(v) for v in r[3:]]
        except ValueError:
            raise ParseError("malformed matched test set row", row=i + 2, column="") from None
    return out
