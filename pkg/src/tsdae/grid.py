"""Finite time scales with isolated points.

A grid here is a strictly increasing finite set of time points.  Every
point is right-scattered inside the grid, so the delta derivative is the
exact difference quotient (f(sigma(t)) - f(t)) / mu(t) -- there is no
discretization error anywhere in this package.  The last point carries
values but no derivative: derivative-consuming operations run on indices
0..N-1 (the kappa convention).

Points may be floats or ``fractions.Fraction``; with rational points the
whole downstream analysis can run in exact arithmetic.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import GridIndexError, TsdaeError


@dataclass(frozen=True)
class TimeScaleGrid:
    """Immutable ordered grid t_0 < t_1 < ... < t_N with N >= 2.

    ``kind`` records how the grid was generated (uniform / geometric /
    explicit); it is informational only, all operations read ``points``.
    """

    points: tuple
    kind: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) < 3:
            raise TsdaeError("a grid needs at least three points (N >= 2)")
        for a, b in zip(self.points, self.points[1:]):
            if not b > a:
                raise TsdaeError("grid points must be strictly increasing")

    # -- constructors ------------------------------------------------

    @staticmethod
    def uniform(h, t0, count: int, exact: bool = False) -> "TimeScaleGrid":
        """count points t0, t0+h, ..., t0+(count-1)h."""
        if h <= 0:
            raise TsdaeError("uniform grid needs h > 0")
        if exact:
            h, t0 = Fraction(h), Fraction(t0)
        pts = tuple(t0 + k * h for k in range(count))
        return TimeScaleGrid(pts, "uniform", {"h": h, "t0": t0, "count": count})

    @staticmethod
    def geometric(q, t0, count: int, exact: bool = False) -> "TimeScaleGrid":
        """count points t0, q*t0, q^2*t0, ...; requires q > 1 and t0 > 0."""
        if not q > 1:
            raise TsdaeError("geometric grid needs q > 1")
        if not t0 > 0:
            raise TsdaeError("geometric grid needs t0 > 0")
        if exact:
            q, t0 = Fraction(q), Fraction(t0)
        pts = tuple(t0 * q**k for k in range(count))
        return TimeScaleGrid(pts, "geometric", {"q": q, "t0": t0, "count": count})

    @staticmethod
    def explicit(points, exact: bool = False) -> "TimeScaleGrid":
        if exact:
            points = [Fraction(p) for p in points]
        return TimeScaleGrid(tuple(points), "explicit", {})

    # -- structure ---------------------------------------------------

    @property
    def last_index(self) -> int:
        """N, the index of the final point."""
        return len(self.points) - 1

    @property
    def exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.points)

    def __len__(self) -> int:
        return len(self.points)

    def t(self, k: int):
        return self.points[k]

    def sigma(self, k: int):
        """Forward jump sigma(t_k) = t_{k+1}; undefined at the last point."""
        if not 0 <= k < self.last_index:
            raise GridIndexError(f"sigma leaves the working interval at index {k}")
        return self.points[k + 1]

    def rho(self, k: int):
        """Backward jump rho(t_k) = t_{k-1}; undefined at the first point."""
        if not 0 < k <= self.last_index:
            raise GridIndexError(f"rho leaves the working interval at index {k}")
        return self.points[k - 1]

    def mu(self, k: int):
        """Graininess sigma(t_k) - t_k, strictly positive inside the grid."""
        return self.sigma(k) - self.points[k]

    def nu_left(self, k: int):
        """Left graininess t_k - rho(t_k).  Provided for completeness, unused."""
        return self.points[k] - self.rho(k)

    def delta(self, samples, k: int):
        """Exact delta derivative of sampled values at index k < N.

        ``samples`` is indexable by grid index (sequence or mapping) and
        must be defined at k and k+1.
        """
        if not 0 <= k < self.last_index:
            raise GridIndexError(f"no delta derivative at index {k}")
        return (samples[k + 1] - samples[k]) / self.mu(k)

    def check_simple_useful_formula(self, samples, k: int, tol_abs: float = 1e-12) -> bool:
        """f(sigma(t)) == f(t) + mu(t) f^Delta(t) at index k.

        An identity on isolated grids; returns False only if the caller
        perturbed one of the paths.
        """
        lhs = samples[k + 1]
        rhs = samples[k] + self.mu(k) * self.delta(samples, k)
        return abs(lhs - rhs) <= tol_abs


def grid_from_descriptor(desc: dict, exact: bool = False) -> TimeScaleGrid:
    """Build a grid from its JSON descriptor (see the system-file format)."""
    kind = desc.get("kind")
    if kind == "uniform":
        return TimeScaleGrid.uniform(desc["h"], desc.get("t0", 0), desc["count"], exact)
    if kind == "geometric":
        return TimeScaleGrid.geometric(desc["q"], desc["t0"], desc["count"], exact)
    if kind == "explicit":
        return TimeScaleGrid.explicit(desc["points"], exact)
    raise TsdaeError(f"unknown grid kind {kind!r}")
