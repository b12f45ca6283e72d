"""Customer taste model, quality law, utility and tariff fitting.

Prices and tastes are expressed after absorbing the tariff coefficient ``a``
into the taste parameter, so the quality law is

    s(T) = T / (T + b) + c * T

with ``T`` in Mbit/s.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares


class FitError(ValueError):
    """Raised when a tariff curve cannot be identified from the data."""


class TasteDistribution(enum.Enum):
    """Distribution of the taste parameter over [0, theta_max]."""

    UNIFORM = "uniform"


@dataclass(frozen=True)
class QualityParams:
    b: float = 0.5619
    c: float = 0.0098
    theta_max: float = 234.03
    taste: TasteDistribution = TasteDistribution.UNIFORM

    def __post_init__(self):
        if self.b < 0 or self.c < 0:
            raise ValueError(f"quality coefficients must be non-negative, got b={self.b}, c={self.c}")
        if not self.theta_max > 0:
            raise ValueError(f"theta_max must be positive, got {self.theta_max}")


@dataclass(frozen=True)
class TariffFit:
    """Least-squares fit of ``p/T = a/(T+b) + c``."""

    a: float
    b: float
    c: float
    r_coefficient: float

    def price_per_unit(self, T):
        T = np.asarray(T, dtype=float)
        return self.a / (T + self.b) + self.c

    def quality_params(self, theta_max: float) -> QualityParams:
        """Quality law with ``a`` absorbed into the taste (``c`` rescaled to ``c/a``)."""
        return QualityParams(b=self.b, c=self.c / self.a, theta_max=theta_max)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class IndifferencePoints:
    theta_none_2: float
    theta_1_2: float


def quality(T, q: QualityParams):
    """Perceived quality of throughput ``T`` (Mbit/s). Works on scalars and arrays."""
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < 0):
        raise ValueError("throughput must be non-negative")
    # T/(T+b) with b=0 is 1 for T>0 and 0 at T=0
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(T_arr > 0, T_arr / (T_arr + q.b), 0.0)
    out = frac + q.c * T_arr
    return float(out) if np.ndim(out) == 0 else out


def utility(theta, T, p, q: QualityParams):
    """Customer utility ``theta * s(T) - p``; non-positive means no purchase."""
    if np.any(np.asarray(theta) < 0):
        raise ValueError("taste must be non-negative")
    return theta * quality(T, q) - p


def indifference_points(s1: float, s2: float, p1: float, p2: float) -> IndifferencePoints:
    """Taste thresholds between abstaining/LSP2 and LSP2/LSP1.

    Raises:
        ValueError: if ``s2 <= 0`` or the qualities coincide (homogeneous
            products leave the LSP1/LSP2 threshold undefined).
    """
    if s2 <= 0:
        raise ValueError(f"s2 must be positive, got {s2}")
    if s1 == s2:
        raise ValueError("s1 == s2: LSP1/LSP2 indifference point undefined for homogeneous products")
    return IndifferencePoints(theta_none_2=p2 / s2, theta_1_2=(p1 - p2) / (s1 - s2))


def demands(s1: float, s2: float, p1: float, p2: float, theta_max: float) -> tuple[float, float]:
    """Uniform-taste demands of the two LSPs, clamped to the unit simplex."""
    if not theta_max > 0:
        raise ValueError("theta_max must be positive")
    pts = indifference_points(s1, s2, p1, p2)
    d1 = min(max((theta_max - pts.theta_1_2) / theta_max, 0.0), 1.0)
    d2 = (pts.theta_1_2 - pts.theta_none_2) / theta_max
    d2 = min(max(d2, 0.0), 1.0 - d1)
    return d1, d2


def _residuals(params, T, y):
    a, b, c = params
    return a / (T + b) + c - y


def _linear_ac(b: float, T: np.ndarray, y: np.ndarray):
    """Best (a, c) for fixed b; the model is linear in those two."""
    A = np.column_stack([1.0 / (T + b), np.ones_like(T)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    return coef, float(r @ r)


def fit_tariff(points: Iterable[Sequence[float]], n_starts: int = 24) -> TariffFit:
    """Fit the per-unit tariff law to ``(T, price_per_unit)`` pairs.

    A coarse profile over ``b`` in ``[0, max T]`` (with ``a, c`` solved
    linearly) seeds a bounded nonlinear least-squares refinement from the
    best few starts; the model is non-convex in ``b``.
    """
    data = np.asarray(list(points), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitError("expected a sequence of (T, price_per_unit) pairs")
    T, y = data[:, 0], data[:, 1]
    if np.any(T <= 0):
        raise FitError("throughputs must be positive")
    if np.unique(T).size < 3:
        raise FitError("need at least 3 distinct throughput values to identify (a, b, c)")
    if not np.all(np.isfinite(y)):
        raise FitError("non-finite prices")

    t_max = float(T.max())
    grid = np.concatenate([[0.0], np.geomspace(1e-6 * t_max, t_max, n_starts * 8)])
    profile = np.array([_linear_ac(b, T, y)[1] for b in grid])
    starts = grid[np.argsort(profile)[:n_starts]]

    best = None
    for b0 in starts:
        (a0, c0), _ = _linear_ac(b0, T, y)
        res = least_squares(
            _residuals,
            x0=[a0, b0, c0],
            args=(T, y),
            bounds=([-np.inf, 0.0, -np.inf], [np.inf, t_max, np.inf]),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        if best is None or res.cost < best.cost:
            best = res
    a, b, c = best.x
    # a ~ 0 leaves b unidentifiable: the data are flat in 1/(T+b)
    if abs(a) < 1e-12 * max(1.0, float(np.abs(y).max()) * t_max):
        raise FitError("degenerate data: no curvature to identify b")

    ss_res = 2.0 * best.cost
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    r = float(np.sqrt(min(max(r2, 0.0), 1.0)))
    return TariffFit(a=float(a), b=float(b), c=float(c), r_coefficient=r)


def load_tariff_csv(path) -> list[tuple[float, float]]:
    """Read ``T_mbps,price_per_unit`` rows."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"T_mbps", "price_per_unit"} - set(reader.fieldnames or ())
        if missing:
            raise FitError(f"tariff CSV missing columns: {sorted(missing)}")
        return [(float(row["T_mbps"]), float(row["price_per_unit"])) for row in reader]
