"""Ordinary least squares on energy samples and per-trip prediction.

Road class is one-hot encoded with the alphabetically first class as the
reference level, so the design matrix keeps full rank next to the intercept.
The normal equations are solved on standardized columns; a singular or badly
conditioned system falls back to a tiny ridge penalty.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from ..errors import EncodingMismatch, InsufficientSamples
from .samples import NUMERIC_FEATURES, EnergySample

RIDGE_LAMBDA = 1e-8
MAX_CONDITION = 1e12


@dataclass
class LinearModel:
    features: list[str]  # encoded column names, intercept excluded
    coefficients: list[float]
    intercept: float
    mse: float
    numeric: list[str] = field(default_factory=list)
    road_classes: list[str] = field(default_factory=list)  # reference level first
    feature_means: dict[str, float] = field(default_factory=dict)
    default_road_class: str | None = None
    flags: list[str] = field(default_factory=list)

    def encode(self, row: Mapping) -> np.ndarray:
        vec = []
        for name in self.numeric:
            if name not in row:
                raise EncodingMismatch(f"missing feature {name!r}")
            vec.append(float(row[name]))
        if self.road_classes:
            cls = row.get("road_class")
            if cls not in self.road_classes:
                raise EncodingMismatch(f"road class {cls!r} unseen in training")
            vec += [1.0 if cls == c else 0.0 for c in self.road_classes[1:]]
        return np.array(vec)

    def predict_one(self, row: Mapping) -> float:
        return float(self.intercept + np.dot(self.coefficients, self.encode(row)))

    def to_dict(self) -> dict:
        return {
            "features": self.features,
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "mse": self.mse,
            "numeric": self.numeric,
            "road_classes": self.road_classes,
            "feature_means": self.feature_means,
            "default_road_class": self.default_road_class,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        numeric = d.get("numeric")
        if numeric is None:
            numeric = [f for f in d["features"] if not f.startswith("road_class=")]
        m = cls(
            list(d["features"]),
            [float(c) for c in d["coefficients"]],
            float(d["intercept"]),
            float(d.get("mse", 0.0)),
            list(numeric),
            list(d.get("road_classes", [])),
            {k: float(v) for k, v in d.get("feature_means", {}).items()},
            d.get("default_road_class"),
            list(d.get("flags", [])),
        )
        if len(m.coefficients) != len(m.features):
            raise EncodingMismatch("coefficient count differs from feature count")
        return m


def save_model(model: LinearModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path: str | Path) -> LinearModel:
    return LinearModel.from_dict(json.loads(Path(path).read_text()))


def _solve_normal(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients from the normal equations on scaled columns."""
    scale = np.sqrt((X**2).sum(axis=0))
    scale[scale == 0] = 1.0
    Xs = X / scale
    A = Xs.T @ Xs
    b = Xs.T @ y
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        A = A + RIDGE_LAMBDA * np.eye(A.shape[0])
        beta = scipy.linalg.solve(A, b, assume_a="pos")
    else:
        beta = scipy.linalg.solve(A, b, assume_a="sym")
    return beta / scale


def fit_ols(
    samples: Sequence[EnergySample] | Sequence[Mapping],
    features: Sequence[str] | None = None,
    use_road_class: bool = True,
    target: str = "energy_kwh",
) -> LinearModel:
    """Fit energy on the numeric ``features`` (all by default) plus road-class dummies."""
    rows = [s if isinstance(s, Mapping) else s.__dict__ for s in samples]
    numeric = list(NUMERIC_FEATURES if features is None else features)
    classes = sorted({r["road_class"] for r in rows}) if use_road_class and rows else []
    encoded = numeric + [f"road_class={c}" for c in classes[1:]]
    if len(rows) < len(encoded) + 1:
        raise InsufficientSamples(f"{len(rows)} samples for {len(encoded) + 1} parameters")
    stub = LinearModel(encoded, [0.0] * len(encoded), 0.0, 0.0, numeric, classes)
    X = np.array([np.concatenate([[1.0], stub.encode(r)]) for r in rows])
    y = np.array([float(r[target]) for r in rows])
    beta = _solve_normal(X, y)
    resid = y - X @ beta
    flags = []
    if "elevation_delta_m" in numeric and all(float(r["elevation_delta_m"]) == 0.0 for r in rows):
        flags.append("elevation_unavailable")
    counts = Counter(r["road_class"] for r in rows) if classes else Counter()
    return LinearModel(
        encoded,
        [float(b) for b in beta[1:]],
        float(beta[0]),
        float(np.mean(resid**2)),
        numeric,
        classes,
        {f: float(np.mean([float(r[f]) for r in rows])) for f in numeric},
        min(counts, key=lambda c: (-counts[c], c)) if counts else None,
        flags,
    )


def predict_trip_energy(model: LinearModel, segments: Sequence[Mapping]) -> float:
    """Sum of per-segment predictions along a trip, floored at zero."""
    total = sum(model.predict_one(s) for s in segments)
    return max(0.0, float(total))


def segment_row(model: LinearModel, distance_m: float, **known) -> dict:
    """Feature row for a segment where only some features are known; the rest take training means."""
    row = dict(model.feature_means)
    row.update(known)
    row["distance_m"] = distance_m
    if model.road_classes and "road_class" not in row:
        row["road_class"] = model.default_road_class
    return row
