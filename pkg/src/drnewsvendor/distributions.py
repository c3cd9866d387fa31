"""Probability distributions on the unit interval.

Every offer rule in this package consumes a predictive distribution for
normalized generation through the small interface defined here: CDF,
generalized-inverse quantile, mean, partial expectations and
inverse-transform sampling. Piecewise-linear distributions built from
quantile forecasts are the production representation; Beta, Uniform01 and
Heaviside cover simulation studies and limit cases.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special

__all__ = [
    "UnitDistribution",
    "PiecewiseLinear",
    "Beta",
    "Uniform01",
    "Heaviside",
    "RngStream",
    "read_quantile_forecast",
    "standard_forecast_levels",
]

# Accuracy of the generic quadrature fallbacks; two orders below test tolerances.
QUAD_TOL = 1e-10


def _validate_prob(p, name: str):
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    return arr


def _match_input(x, out):
    """Return a bare float when the query was scalar."""
    if np.ndim(x) == 0:
        return float(out)
    return out


class UnitDistribution(ABC):
    """A probability distribution supported on [0, 1].

    Instances are immutable after construction and safe to share across
    concurrent tasks. Subclasses must provide the CDF and quantile
    function; ``mean`` and ``partial_expectations`` default to adaptive
    quadrature of the CDF and should be overridden where a closed form
    exists.
    """

    @abstractmethod
    def cdf(self, x):
        """P[omega <= x]; accepts scalars or arrays, clamps outside [0, 1]."""

    @abstractmethod
    def quantile(self, p):
        """Generalized inverse inf{x : cdf(x) >= p} for p in [0, 1]."""

    def _breakpoints(self) -> tuple[float, ...]:
        """Interior CDF discontinuities, forwarded to quadrature."""
        return ()

    def mean(self) -> float:
        """E[omega], the integral of the survival function over [0, 1]."""
        pts = list(self._breakpoints()) or None
        val, _ = integrate.quad(
            lambda x: 1.0 - float(self.cdf(x)), 0.0, 1.0,
            epsabs=QUAD_TOL, limit=200, points=pts,
        )
        return float(val)

    def partial_expectations(self, y: float) -> tuple[float, float]:
        """Expected overage and underage volumes at offer ``y``.

        Returns ``(under, over)`` where ``under = E[(y - omega)+]``
        (the integral of the CDF up to ``y``) and
        ``over = E[(omega - y)+]`` (the integral of the survival function
        above ``y``). The two are linked by ``under - over = y - mean``.
        """
        y = float(_validate_prob(y, "y"))
        pts = [b for b in self._breakpoints() if 0.0 < b < y] or None
        under, _ = integrate.quad(
            lambda x: float(self.cdf(x)), 0.0, y,
            epsabs=QUAD_TOL, limit=200, points=pts,
        )
        over = under - y + self.mean()
        return float(max(under, 0.0)), float(max(over, 0.0))

    def sample(self, rng: "RngStream", n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. values by inverse-transform sampling."""
        if n < 0:
            raise ValueError(f"sample size must be non-negative, got {n}")
        u = rng.uniform(n)
        return np.asarray(self.quantile(u), dtype=float)


class PiecewiseLinear(UnitDistribution):
    """Distribution whose quantile function linearly interpolates forecast quantiles.

    ``levels`` are strictly increasing probabilities in (0, 1) and
    ``values`` the matching non-decreasing generation fractions. The knots
    are anchored at (0, 0) and (1, 1) so the support is exactly the unit
    interval. Repeated values encode point masses; the CDF is then
    right-continuous at the atom.
    """

    def __init__(self, levels, values):
        levels = np.asarray(levels, dtype=float)
        values = np.asarray(values, dtype=float)
        if levels.ndim != 1 or levels.shape != values.shape or levels.size == 0:
            raise ValueError("levels and values must be equal-length 1-D sequences")
        if np.any(levels <= 0.0) or np.any(levels >= 1.0):
            raise ValueError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) <= 0.0):
            raise ValueError("levels must be strictly increasing")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("values must lie in [0, 1]")
        if np.any(np.diff(values) < 0.0):
            raise ValueError("values must be non-decreasing")
        self._ps = np.concatenate(([0.0], levels, [1.0]))
        self._xs = np.concatenate(([0.0], values, [1.0]))
        # exact cumulative integral of the quantile function at each knot
        seg = np.diff(self._ps) * (self._xs[:-1] + self._xs[1:]) / 2.0
        self._cum = np.concatenate(([0.0], np.cumsum(seg)))

    @property
    def levels(self) -> np.ndarray:
        return self._ps[1:-1].copy()

    @property
    def values(self) -> np.ndarray:
        return self._xs[1:-1].copy()

    def cdf(self, x):
        # np.interp on the swapped knot arrays is the right-continuous
        # inverse: at a repeated value (atom) it returns the upper level.
        arr = np.asarray(x, dtype=float)
        return _match_input(x, np.interp(arr, self._xs, self._ps))

    def quantile(self, p):
        arr = _validate_prob(p, "p")
        return _match_input(p, np.interp(arr, self._ps, self._xs))

    def mean(self) -> float:
        return float(self._cum[-1])

    def _breakpoints(self) -> tuple[float, ...]:
        # knot values are kinks (or atoms) of the CDF
        interior = np.unique(self._xs)
        return tuple(float(x) for x in interior if 0.0 < x < 1.0)

    def _quantile_integral(self, p: float) -> float:
        """Exact integral of the quantile function over [0, p]."""
        i = int(np.searchsorted(self._ps, p, side="right")) - 1
        if i >= self._ps.size - 1:
            return float(self._cum[-1])
        qp = np.interp(p, self._ps, self._xs)
        return float(self._cum[i] + (p - self._ps[i]) * (self._xs[i] + qp) / 2.0)

    def partial_expectations(self, y: float) -> tuple[float, float]:
        y = float(_validate_prob(y, "y"))
        p_star = float(self.cdf(y))
        under = y * p_star - self._quantile_integral(p_star)
        over = under - y + self.mean()
        return max(under, 0.0), max(over, 0.0)

    def __repr__(self) -> str:
        return f"PiecewiseLinear({self._ps.size - 2} knots)"


class Beta(UnitDistribution):
    """Beta(a, b) distribution via the regularized incomplete beta function."""

    def __init__(self, a: float, b: float):
        if not (a > 0.0 and b > 0.0):
            raise ValueError(f"Beta shape parameters must be positive, got a={a}, b={b}")
        self.a = float(a)
        self.b = float(b)

    def cdf(self, x):
        arr = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return _match_input(x, special.betainc(self.a, self.b, arr))

    def quantile(self, p):
        arr = _validate_prob(p, "p")
        out = special.betaincinv(self.a, self.b, arr)
        # betaincinv underflows to nan for subnormal tail probabilities,
        # where the quantile is 0 or 1 to double precision
        bad = ~np.isfinite(out)
        if np.any(bad):
            out = np.where(bad, np.where(np.asarray(arr) < 0.5, 0.0, 1.0), out)
        return _match_input(p, out)

    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def variance(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))

    def partial_expectations(self, y: float) -> tuple[float, float]:
        # E[(y-w)+] = y*I_y(a,b) - mu*I_y(a+1,b); exact, no quadrature needed
        y = float(_validate_prob(y, "y"))
        mu = self.mean()
        under = y * float(special.betainc(self.a, self.b, y)) \
            - mu * float(special.betainc(self.a + 1.0, self.b, y))
        over = under - y + mu
        return max(under, 0.0), max(over, 0.0)

    def __repr__(self) -> str:
        return f"Beta({self.a:g}, {self.b:g})"


class Uniform01(UnitDistribution):
    """Standard uniform distribution; its CDF is the identity on [0, 1]."""

    def cdf(self, x):
        arr = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return _match_input(x, arr)

    def quantile(self, p):
        arr = _validate_prob(p, "p")
        return _match_input(p, arr.astype(float))

    def mean(self) -> float:
        return 0.5

    def partial_expectations(self, y: float) -> tuple[float, float]:
        y = float(_validate_prob(y, "y"))
        return y * y / 2.0, (1.0 - y) ** 2 / 2.0

    def __repr__(self) -> str:
        return "Uniform01()"


class Heaviside(UnitDistribution):
    """Point mass at ``location``; the limit shape of fully deformed CDFs."""

    def __init__(self, location: float):
        self.location = float(_validate_prob(location, "location"))

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        return _match_input(x, (arr >= self.location).astype(float))

    def quantile(self, p):
        # inf{x in [0,1] : cdf(x) >= p} is the support bottom at p = 0
        arr = _validate_prob(p, "p")
        return _match_input(p, np.where(arr > 0.0, self.location, 0.0))

    def mean(self) -> float:
        return self.location

    def partial_expectations(self, y: float) -> tuple[float, float]:
        y = float(_validate_prob(y, "y"))
        return max(y - self.location, 0.0), max(self.location - y, 0.0)

    def _breakpoints(self) -> tuple[float, ...]:
        return (self.location,)

    def __repr__(self) -> str:
        return f"Heaviside({self.location:g})"


@dataclass
class RngStream:
    """Reproducible random stream addressed by (master_seed, stream_id).

    Equal addresses replay the identical sequence; distinct stream ids are
    statistically independent (SeedSequence spawn keys). A stream is
    single-owner: share the address, not the instance.
    """

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be a non-negative integer")
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        self._gen = np.random.default_rng(seq)

    def uniform(self, n: int) -> np.ndarray:
        return self._gen.random(int(n))

    def binomial(self, trials: int, p: float, n: int) -> np.ndarray:
        return self._gen.binomial(int(trials), float(p), size=int(n))

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        return self._gen.integers(low, high, size=int(n))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def standard_forecast_levels() -> np.ndarray:
    """The production quantile levels 0.025, 0.075, ..., 0.975."""
    return np.round(np.arange(0.025, 0.9751, 0.05), 3)


def read_quantile_forecast(path) -> PiecewiseLinear:
    """Parse a ``level,value`` quantile CSV into a PiecewiseLinear distribution."""
    path = Path(path)
    levels: list[float] = []
    values: list[float] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["level", "value"]:
            raise ValueError(f"{path}: expected header 'level,value', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {row!r}")
            try:
                levels.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric entry {row!r}") from exc
    if not levels:
        raise ValueError(f"{path}: no quantile rows")
    try:
        return PiecewiseLinear(levels, values)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def write_quantile_forecast(dist: PiecewiseLinear, path) -> None:
    """Write the inverse of :func:`read_quantile_forecast`."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "value"])
        for lvl, val in zip(dist.levels, dist.values):
            writer.writerow([repr(float(lvl)), repr(float(val))])
