"""Exact interventional Shapley attribution for low-dimensional models.

With d <= 12 features every coalition can be enumerated, so the classic
combinatorial formula is evaluated exactly: the value of a coalition S is
the model output averaged over background rows with the features in S
pinned to the explained instance. Exactness buys testable axioms -
efficiency, dummy, symmetry - instead of a sampling tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import CurationError, atomic_write_text


class ShapleyError(CurationError):
    pass


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float  # mean model output over the background set
    phi: np.ndarray  # per-feature attribution
    predicted: float  # f(x)
    schema: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        names = self.schema or tuple(str(i) for i in range(len(self.phi)))
        return {
            "base_value": self.base_value,
            "predicted": self.predicted,
            "phi": {name: float(v) for name, v in zip(names, self.phi)},
        }


def _batch_predict_fn(model_or_fn):
    if callable(model_or_fn):
        return model_or_fn
    return lambda X: model_or_fn.predict_proba(X)


def explain_shapley(
    model_or_fn,
    x: np.ndarray,
    background: np.ndarray,
    schema=(),
    max_features: int = 12,
) -> ShapExplanation:
    """Exact Shapley attribution of f(x) against a background sample.

    ``model_or_fn`` is either a ClassifierModel or any callable mapping an
    (n, d) matrix to n outputs. All 2^d coalition values are computed in
    one batched model call; phi_k sums the weighted marginal contributions
    |S|! (d-|S|-1)! / d! * (v(S u {k}) - v(S)).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = x.size
    if d > max_features:
        raise ShapleyError(
            f"{d} features exceed the exact-enumeration limit of {max_features}; "
            "subsample the feature set before explaining"
        )
    if background.size == 0:
        raise ShapleyError("background set must be nonempty")
    if background.shape[1] != d:
        raise ShapleyError("background feature count does not match the instance")
    predict = _batch_predict_fn(model_or_fn)
    m = background.shape[0]
    n_sets = 1 << d
    # rows for every (coalition, background row) pair in one batch
    batch = np.tile(background, (n_sets, 1))
    for s in range(n_sets):
        block = batch[s * m : (s + 1) * m]
        for k in range(d):
            if s >> k & 1:
                block[:, k] = x[k]
    out = np.asarray(predict(batch), dtype=np.float64).reshape(n_sets, m)
    v = out.mean(axis=1)
    fact = [math.factorial(i) for i in range(d + 1)]
    denom = fact[d]
    phi = np.zeros(d)
    for s in range(n_sets):
        size = bin(s).count("1")
        for k in range(d):
            if s >> k & 1:
                continue
            weight = fact[size] * fact[d - size - 1] / denom
            phi[k] += weight * (v[s | (1 << k)] - v[s])
    return ShapExplanation(
        base_value=float(v[0]),
        phi=phi,
        predicted=float(v[n_sets - 1]),
        schema=tuple(schema),
    )


def render_explanation(explanations: list[ShapExplanation], ids=None) -> tuple[str, dict]:
    """Mean-|phi| feature ranking plus per-instance signed listings.

    Returns (plain text, JSON-ready dict).
    """
    if not explanations:
        raise ShapleyError("need at least one explanation to render")
    names = explanations[0].schema or tuple(str(i) for i in range(len(explanations[0].phi)))
    ids = list(ids) if ids is not None else [str(i) for i in range(len(explanations))]
    phis = np.stack([e.phi for e in explanations])
    mean_abs = np.abs(phis).mean(axis=0)
    # descending importance; name breaks exact ties deterministically
    ranking = sorted(zip(names, mean_abs), key=lambda t: (-t[1], t[0]))
    doc = {
        "ranking": [{"feature": n, "mean_abs_phi": float(v)} for n, v in ranking],
        "instances": [
            {"id": i, **e.to_dict()} for i, e in zip(ids, explanations)
        ],
    }
    lines = ["Feature importance (mean |phi|):"]
    for n, v in ranking:
        lines.append(f"  {n:<14}{v: .6f}")
    for i, e in zip(ids, explanations):
        lines.append(f"instance {i}: base={e.base_value:.6f} predicted={e.predicted:.6f}")
        order = sorted(zip(names, e.phi), key=lambda t: (-abs(t[1]), t[0]))
        for n, v in order:
            lines.append(f"  {n:<14}{v:+.6f}")
    return "\n".join(lines) + "\n", doc


def write_explanations(path, explanations: list[ShapExplanation], ids=None) -> None:
    _, doc = render_explanation(explanations, ids)
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
