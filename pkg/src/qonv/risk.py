"""Exact optimal-risk computation on finite lattices.

For a finite input space with a known distribution, the lowest mean-squared
error any predictor can reach from features Z = phi(x) is the expected
conditional variance of the target given Z, attained by the conditional-mean
predictor. Three feature maps are compared:

  1. the approximation value g(x) alone,
  2. the neighborhood (g(x - d), g(x), g(x + d)),
  3. the neighborhood plus the coordinates themselves.

Because map 3 contains x and the target is a deterministic function of x,
its optimal risk is exactly zero, and adding features can never increase the
optimal risk, so the three risks form a non-increasing chain ending at zero.

Shifts wrap around the lattice by default so the feature maps are total
functions; clamped shifts are available for sensitivity checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RiskChainViolation

PHI_APPROX = "phi1_approx"
PHI_NEIGHBORHOOD = "phi2_neighborhood"
PHI_NEIGHBORHOOD_QUERIES = "phi3_neighborhood_and_queries"
FEATURE_MAPS = (PHI_APPROX, PHI_NEIGHBORHOOD, PHI_NEIGHBORHOOD_QUERIES)

CHAIN_SLACK = 1e-12


@dataclass(frozen=True)
class LatticeProblem:
    """A finite prediction problem: distribution, target, approximation, shift."""

    p: np.ndarray       # probability vector over the M lattice points
    f: np.ndarray       # target values in [0, 1]
    g: np.ndarray       # approximation values in [0, 1]
    delta: int = 1
    shift_mode: str = "wrap"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        f = np.asarray(self.f, dtype=np.float64)
        g = np.asarray(self.g, dtype=np.float64)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        m = p.size
        if m < 1 or f.size != m or g.size != m:
            raise ConfigurationError(
                f"p, f, g must share a positive length; got {p.size}, "
                f"{f.size}, {g.size}"
            )
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError("p must be nonnegative and sum to 1")
        for name, values in (("f", f), ("g", g)):
            if np.any(values < 0) or np.any(values > 1):
                raise ConfigurationError(f"{name} values must lie in [0, 1]")
        if int(self.delta) < 1:
            raise ConfigurationError(f"delta must be a positive integer shift")
        if self.shift_mode not in ("wrap", "clamp"):
            raise ConfigurationError(f"unknown shift mode {self.shift_mode!r}")

    @property
    def size(self) -> int:
        return self.p.size

    def shifted(self, offset: int) -> np.ndarray:
        idx = np.arange(self.size) + offset
        if self.shift_mode == "wrap":
            return idx % self.size
        return np.clip(idx, 0, self.size - 1)

    def record(self) -> str:
        """Deterministic text form, for attaching to failures."""
        lines = [
            f"M={self.size} delta={int(self.delta)} shift={self.shift_mode}",
            "p=" + " ".join(repr(float(v)) for v in self.p),
            "f=" + " ".join(repr(float(v)) for v in self.f),
            "g=" + " ".join(repr(float(v)) for v in self.g),
        ]
        return "\n".join(lines)


def feature_tuples(prob: LatticeProblem, phi: str) -> list[tuple]:
    """Feature vector of every lattice point as an exact (bitwise) tuple."""
    if phi not in FEATURE_MAPS:
        raise ConfigurationError(
            f"unknown feature map {phi!r}; expected one of {FEATURE_MAPS}"
        )
    left = prob.shifted(-int(prob.delta))
    right = prob.shifted(int(prob.delta))
    g = prob.g
    rows = []
    for x in range(prob.size):
        if phi == PHI_APPROX:
            rows.append((g[x],))
        elif phi == PHI_NEIGHBORHOOD:
            rows.append((g[left[x]], g[x], g[right[x]]))
        else:
            rows.append((g[left[x]], g[x], g[right[x]],
                         float(x), float(left[x]), float(right[x])))
    return rows


def _grouped(prob: LatticeProblem, phi: str) -> dict:
    groups: dict[tuple, list[int]] = {}
    for x, features in enumerate(feature_tuples(prob, phi)):
        groups.setdefault(features, []).append(x)
    return groups


def optimal_risk(prob: LatticeProblem, phi: str) -> float:
    """Expected conditional variance of f given phi(x): the best MSE floor."""
    risk = 0.0
    for members in _grouped(prob, phi).values():
        weight = prob.p[members].sum()
        if weight <= 0.0:
            continue
        values = prob.f[members]
        mean = float(prob.p[members] @ values) / weight
        variance = float(prob.p[members] @ ((values - mean) ** 2)) / weight
        risk += weight * variance
    return risk


def best_predictor(prob: LatticeProblem, phi: str) -> dict:
    """Conditional-mean predictor as a mapping from feature tuple to value."""
    predictor = {}
    for features, members in _grouped(prob, phi).items():
        weight = prob.p[members].sum()
        if weight <= 0.0:
            # Unobservable group; any constant in [0, 1] is optimal.
            predictor[features] = float(prob.f[members].mean())
            continue
        predictor[features] = float(prob.p[members] @ prob.f[members]) / weight
    return predictor


def predictor_risk(prob: LatticeProblem, phi: str, predictor: dict) -> float:
    """Empirical MSE of a feature-indexed predictor on the whole lattice."""
    rows = feature_tuples(prob, phi)
    errors = np.array([prob.f[x] - predictor[rows[x]] for x in range(prob.size)])
    return float(prob.p @ (errors * errors))


def verify_monotone_chain(prob: LatticeProblem):
    """Return (r1, r2, r3); raise if they fail r1 >= r2 >= r3 = 0."""
    r1 = optimal_risk(prob, PHI_APPROX)
    r2 = optimal_risk(prob, PHI_NEIGHBORHOOD)
    r3 = optimal_risk(prob, PHI_NEIGHBORHOOD_QUERIES)
    if r1 < r2 - CHAIN_SLACK or r2 < r3 - CHAIN_SLACK or r3 > CHAIN_SLACK:
        raise RiskChainViolation(
            f"risk chain violated: r1={r1!r} r2={r2!r} r3={r3!r}",
            record=prob.record() + f"\nr1={r1!r} r2={r2!r} r3={r3!r}",
        )
    return r1, r2, r3


def random_problem(rng, max_size: int = 16, min_size: int = 1,
                   levels: int = 8, shift_mode: str = "wrap") -> LatticeProblem:
    """Sample a problem with exactly representable dyadic f and g values.

    Quantizing f and g onto a small grid makes feature collisions common, so
    the conditional variances being compared are usually nontrivial.
    """
    m = int(rng.integers(min_size, max_size + 1))
    weights = rng.integers(1, 10, size=m).astype(np.float64)
    p = weights / weights.sum()
    f = rng.integers(0, levels + 1, size=m) / levels
    g = rng.integers(0, levels + 1, size=m) / levels
    delta = int(rng.integers(1, max(2, m)))
    return LatticeProblem(p=p, f=f, g=g, delta=delta, shift_mode=shift_mode)


def strict_gap_problem() -> LatticeProblem:
    """A fixed instance where the neighborhood strictly beats g(x) alone.

    With g = [0, 0, 1, 1] and f = [0, 1, 0, 1] under the uniform law and a
    shift of one, g(x) alone leaves two mixed groups (risk 1/4) while every
    neighborhood triple is distinct (risk 0).
    """
    return LatticeProblem(p=np.full(4, 0.25),
                          f=np.array([0.0, 1.0, 0.0, 1.0]),
                          g=np.array([0.0, 0.0, 1.0, 1.0]),
                          delta=1)
