"""Reference values for the rank-sum test and logistic regression fits.

Rank-sum p-values come from scipy.stats.mannwhitneyu (asymptotic, continuity
corrected) for pooled sizes above 8 and from brute-force enumeration of rank
assignments otherwise. Logistic coefficients come from scipy.optimize on the
unpenalized negative log-likelihood.
"""
import itertools
import json
import pathlib

import numpy as np
from scipy import optimize, stats

rng = np.random.default_rng(20240611)


def exact_p(a, b, alt):
    pooled = np.concatenate([b, a])
    ranks = stats.rankdata(pooled)
    nb = len(b)
    shift = nb * (nb + 1) / 2
    u = ranks[:nb].sum() - shift
    dist = [ranks[list(c)].sum() - shift for c in itertools.combinations(range(len(pooled)), nb)]
    dist = np.array(dist)
    pg = np.mean(dist >= u - 1e-9)
    pl = np.mean(dist <= u + 1e-9)
    return float(pg) if alt == "greater" else float(min(1.0, 2 * min(pg, pl)))


ranksum = []
for i in range(50):
    na, nb = (int(x) for x in rng.integers(5, 26, size=2))
    if na + nb <= 8:
        nb += 5
    if i % 3 == 0:  # heavy ties
        a = rng.integers(0, 5, size=na).astype(float)
        b = (rng.integers(0, 5, size=nb) + (i % 2)).astype(float)
    else:
        a = rng.normal(size=na)
        b = rng.normal(loc=0.4 * (i % 4), size=nb)
    rec = {"a": a.tolist(), "b": b.tolist()}
    for alt in ("two_sided", "greater"):
        rec[alt] = float(stats.mannwhitneyu(b, a, alternative=alt.replace("_", "-"), method="asymptotic",
                                            use_continuity=True).pvalue)
    ranksum.append(rec)

exact = []
for i in range(30):
    n = int(rng.integers(2, 9))
    nb = int(rng.integers(1, n))
    vals = rng.integers(0, 4, size=n).astype(float) if i % 2 else rng.normal(size=n)
    a, b = vals[nb:], vals[:nb]
    exact.append({"a": a.tolist(), "b": b.tolist(),
                  "two_sided": exact_p(a, b, "two_sided"), "greater": exact_p(a, b, "greater")})


def nll(w, X, y, K):
    W = w.reshape(K - 1, X.shape[1] + 1)
    Z = np.hstack([np.ones((len(X), 1)), X])
    eta = np.hstack([np.zeros((len(X), 1)), Z @ W.T])
    return float(np.sum(np.logaddexp.reduce(eta, axis=1) - eta[np.arange(len(X)), y]))


logreg = []
for i, (n, p, K) in enumerate([(80, 2, 2), (120, 4, 2), (150, 3, 3), (90, 1, 3)]):
    X = rng.normal(size=(n, p))
    beta = rng.normal(size=(K - 1, p))
    eta = np.hstack([np.zeros((n, 1)), X @ beta.T])
    prob = np.exp(eta - eta.max(axis=1, keepdims=True))
    prob /= prob.sum(axis=1, keepdims=True)
    y = np.array([rng.choice(K, p=row) for row in prob])
    res = optimize.minimize(nll, np.zeros((K - 1) * (p + 1)), args=(X, y, K), method="BFGS",
                            options={"gtol": 1e-10, "maxiter": 10000})
    logreg.append({"x": X.tolist(), "y": y.tolist(), "classes": K,
                   "coef": res.x.reshape(K - 1, p + 1).tolist(), "nll": float(res.fun)})

out = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "stats_golden.json"
out.write_text(json.dumps({"ranksum": ranksum, "exact": exact, "logreg": logreg}, indent=1))
print("wrote", out)
