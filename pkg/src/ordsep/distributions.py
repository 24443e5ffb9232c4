"""Continuous CDF models on [0, 1] for p-values.

Three model families are provided:

* :class:`Uniform` -- the null p-value law.
* :class:`TwoSidedZTest` -- the law of a two-sided z-test p-value when the
  true mean differs from the hypothesised one.
* :class:`PiecewiseLinear` -- an arbitrary continuous CDF given by knots,
  the hook for user-supplied alternatives.

Models are immutable and evaluate with ``model.cdf(x)``; ``model.sample(rng,
size)`` draws from them with a :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Union

import numpy as np
from scipy.special import erfc as _erfc_vec

from .errors import ValidationError

__all__ = [
    "Uniform",
    "TwoSidedZTest",
    "PiecewiseLinear",
    "CdfModel",
    "std_normal_cdf",
    "std_normal_quantile",
    "cdf",
    "sample",
    "parse_model",
    "format_model",
]

_SQRT2 = math.sqrt(2.0)
_STD_NORMAL = NormalDist()


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF, accurate to well below 1e-12 absolute."""
    return 0.5 * math.erfc(-z / _SQRT2)


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"normal quantile needs 0 < p < 1, got {p!r}")
    # Wichura's AS241 (pure Python in the stdlib, ~1e-16 relative)
    return _STD_NORMAL.inv_cdf(p)


def _check_unit(x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"CDF argument must lie in [0, 1], got {x!r}")
    return x


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class Uniform:
    """Uniform law on [0, 1]."""

    def cdf(self, x: float) -> float:
        return _check_unit(x)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.random(size)


@dataclass(frozen=True)
class TwoSidedZTest:
    """Two-sided z-test p-value law.

    Each test averages ``N`` observations with known standard deviation
    ``sigma``; the null mean is ``mu0`` while the data really have mean
    ``muA``.  With ``mu0 == muA`` the p-value is uniform.
    """

    mu0: float
    muA: float
    sigma: float
    N: int

    def __post_init__(self):
        if not (math.isfinite(self.mu0) and math.isfinite(self.muA)):
            raise ValidationError("ztest means must be finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"ztest sigma must be positive, got {self.sigma!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"ztest N must be a positive integer, got {self.N!r}")
        if not math.isfinite(self.shift):
            raise ValidationError("ztest shift is not finite")

    @property
    def shift(self) -> float:
        """Standardised offset (mu0 - muA) * sqrt(N) / sigma."""
        return (self.mu0 - self.muA) * math.sqrt(self.N) / self.sigma

    def cdf(self, x: float) -> float:
        x = _check_unit(x)
        if x == 0.0:
            return 0.0
        if x == 1.0:
            return 1.0
        # quantile(1 - x/2) == -quantile(x/2), so the upper tail term
        # 1 - Phi(-q + shift) is Phi(q - shift); avoids cancellation.
        q = std_normal_quantile(x / 2.0)
        d = self.shift
        return _clamp(std_normal_cdf(q + d) + std_normal_cdf(q - d))

    def sample(self, rng: np.random.Generator, size=None):
        z = rng.standard_normal(size) - self.shift
        return _erfc_vec(np.abs(z) / _SQRT2)


@dataclass(frozen=True)
class PiecewiseLinear:
    """CDF interpolating linearly between knots ``(x, p)``.

    Knots must start at (0, 0), end at (1, 1), be strictly increasing in x
    and nondecreasing in p.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple((float(x), float(p)) for x, p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValidationError("piecewise-linear CDF needs at least two knots")
        if pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0):
            raise ValidationError("piecewise-linear CDF must run from (0,0) to (1,1)")
        for (x0, p0), (x1, p1) in zip(pts, pts[1:]):
            if not x1 > x0:
                raise ValidationError(f"knot x values must strictly increase ({x0} -> {x1})")
            if p1 < p0:
                raise ValidationError(f"knot p values must not decrease ({p0} -> {p1})")
        for _, p in pts:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"knot p value {p} outside [0, 1]")

    @property
    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.points])

    @property
    def ps(self) -> np.ndarray:
        return np.array([p for _, p in self.points])

    def cdf(self, x: float) -> float:
        x = _check_unit(x)
        if x == 0.0:
            return 0.0
        if x == 1.0:
            return 1.0
        return _clamp(float(np.interp(x, self.xs, self.ps)))

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return np.interp(u, self.ps, self.xs)

    @classmethod
    def from_csv(cls, path) -> "PiecewiseLinear":
        """Read knots from a CSV file with header ``x,p``."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "p"]:
                raise ValidationError(f"{path}: expected CSV header 'x,p'")
            points = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    points.append((float(row["x"]), float(row["p"])))
                except (TypeError, ValueError):
                    raise ValidationError(f"{path}:{lineno}: cannot parse row {row!r}") from None
        return cls(tuple(points))


CdfModel = Union[Uniform, TwoSidedZTest, PiecewiseLinear]


def cdf(model: CdfModel, x: float) -> float:
    """Evaluate ``model`` at ``x`` in [0, 1]."""
    return model.cdf(x)


def sample(model: CdfModel, rng: np.random.Generator, size=None):
    """Draw from ``model``; a float when ``size`` is None, else an array."""
    out = model.sample(rng, size)
    return float(out) if size is None else out


_ZTEST_KEYS = {"mu0": float, "muA": float, "sigma": float, "N": int}


def parse_model(text: str, base_dir=None) -> CdfModel:
    """Parse a model literal.

    Accepted forms are ``uniform``, ``ztest:mu0=<f>,muA=<f>,sigma=<f>,N=<int>``
    and ``pwl:@<path>`` (CSV with header ``x,p``; relative paths resolve
    against ``base_dir`` when given).  Inline knots ``pwl:0:0;0.5:0.8;1:1``
    are also accepted.
    """
    text = text.strip()
    if text == "uniform":
        return Uniform()
    if text.startswith("ztest:"):
        fields = {}
        for part in text[len("ztest:"):].split(","):
            m = re.fullmatch(r"\s*(\w+)\s*=\s*(\S+)\s*", part)
            if m is None or m.group(1) not in _ZTEST_KEYS:
                raise ValidationError(f"bad ztest field {part!r} in {text!r}")
            key, raw = m.groups()
            try:
                fields[key] = _ZTEST_KEYS[key](raw)
            except ValueError:
                raise ValidationError(f"ztest field {key}={raw!r} is not a valid number") from None
        missing = set(_ZTEST_KEYS) - set(fields)
        if missing:
            raise ValidationError(f"ztest literal missing {sorted(missing)}")
        return TwoSidedZTest(**fields)
    if text.startswith("pwl:@"):
        path = Path(text[len("pwl:@"):])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise ValidationError(f"piecewise-linear file not found: {path}")
        return PiecewiseLinear.from_csv(path)
    if text.startswith("pwl:"):
        # inline knots "x:p;x:p;..." as written by format_model
        try:
            points = [tuple(float(v) for v in knot.split(":")) for knot in text[4:].split(";")]
        except ValueError:
            raise ValidationError(f"cannot parse inline knots in {text!r}") from None
        if any(len(p) != 2 for p in points):
            raise ValidationError(f"inline knots must be x:p pairs in {text!r}")
        return PiecewiseLinear(tuple(points))
    raise ValidationError(f"unknown model literal {text!r}")


def format_model(model: CdfModel) -> str:
    """Inverse of :func:`parse_model` for the inline model forms."""
    if isinstance(model, Uniform):
        return "uniform"
    if isinstance(model, TwoSidedZTest):
        return f"ztest:mu0={model.mu0!r},muA={model.muA!r},sigma={model.sigma!r},N={model.N}"
    return "pwl:" + ";".join(f"{x!r}:{p!r}" for x, p in model.points)
