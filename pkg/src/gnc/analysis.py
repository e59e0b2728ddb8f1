"""Semi-analytic models for RAC-family codes.

* ``pk_exact`` / ``pk_bounds``: probability that the k-th received packet is
  innovative, for non-overlapping and overlapping generations.
* ``psi_lambda`` and ``and_or_step``: degree distributions and one step of the
  and-or tree recursion for G-by-G decoding.
* ``alpha_star``: predicted fraction of inactivated columns in OA decoding.

L' is taken as ceil((M+S)/B), the number of generations actually formed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class AnalyticModel:
    M: int
    S: int
    B: int
    G: int

    def __post_init__(self):
        if self.M < 1 or self.B < 1 or self.S < 0:
            raise ValueError("need M >= 1, B >= 1, S >= 0")
        if self.G < self.B:
            raise ValueError("need G >= B")

    @property
    def Lprime(self) -> int:
        return math.ceil((self.M + self.S) / self.B)

    @property
    def tau(self) -> float:
        return self.M / self.Lprime

    @property
    def theta(self) -> float:
        return self.S / self.M

    @property
    def delta(self) -> float:
        return self.theta / (1 + self.theta)


# -- innovativeness -------------------------------------------------------------

def _pk(Lp: int, threshold: int, k) -> np.ndarray:
    return 1.0 - stats.binom.sf(threshold - 1, k, 1.0 / Lp)


def pk_exact(model: AnalyticModel, k):
    """p_k = 1 - Pr{Bin(k, 1/L') >= B} (non-overlapping generations)."""
    out = _pk(model.Lprime, model.B, np.asarray(k))
    return float(out) if np.ndim(out) == 0 else out


def pk_bounds(model: AnalyticModel, k):
    """(lower, upper) bounds on p_k for overlapping generations (G > B)."""
    k = np.asarray(k)
    lo = _pk(model.Lprime, model.B, k)
    hi = _pk(model.Lprime, model.G, k)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def pk_enumerate(Lp: int, B: int, k: int) -> float:
    """Brute-force 1 - E[u(n;B)]/L' over all compositions of k into L' parts."""
    expected = 0.0
    logk = math.lgamma(k + 1)
    for n in _compositions(k, Lp):
        logp = logk - sum(math.lgamma(x + 1) for x in n) - k * math.log(Lp)
        u = sum(1 for x in n if x >= B)
        expected += u * math.exp(logp)
    return 1.0 - expected / Lp


def _compositions(k: int, parts: int):
    # stars and bars
    for bars in itertools.combinations(range(k + parts - 1), parts - 1):
        prev, n = -1, []
        for b in bars:
            n.append(b - prev - 1)
            prev = b
        n.append(k + parts - 1 - prev - 1)
        yield n


# -- degree distributions --------------------------------------------------------

@dataclass
class DegreeDistributions:
    Psi: np.ndarray  # Psi[k-1] = fraction of left nodes of degree k, k = 1..L'
    B: int
    G: int

    def lambda_exact(self, x):
        """Psi'(x) / Psi'(1)."""
        x = np.asarray(x, dtype=float)
        k = np.arange(1, len(self.Psi) + 1)
        coef = k * self.Psi  # coefficient of x^(k-1)
        num = np.polynomial.polynomial.polyval(x, coef)
        return num / coef.sum()

    def lambda_asym(self, x, G: float | None = None):
        x = np.asarray(x, dtype=float)
        G = self.G if G is None else G
        r = self.B / G
        return (r + (1 - r) * x) * np.exp(-(G / self.B - 1) * (1 - x))


def psi_lambda(model: AnalyticModel) -> DegreeDistributions:
    Lp = model.Lprime
    n = model.M + model.S
    q = (model.G - model.B) / (n - model.B) if n > model.B else 0.0
    k = np.arange(1, Lp + 1)
    Psi = stats.binom.pmf(k - 1, Lp - 1, q)
    return DegreeDistributions(Psi, model.B, model.G)


def poisson_eta(tau: float, G_eff: int) -> np.ndarray:
    """eta_u for u = 0..G_eff-1; the remaining mass means "decodable"."""
    return stats.poisson.pmf(np.arange(max(G_eff, 0)), tau)


def and_or_value(z, eta: np.ndarray, G_eff: int):
    """sum_u eta_u Pr{Bin(G_eff-1, z) >= u}."""
    z = np.asarray(z, dtype=float)
    if G_eff < 1:
        return np.zeros_like(z)
    u = np.arange(len(eta))
    tail = stats.binom.sf(u[:, None] - 1, G_eff - 1, z[None, ...].reshape(1, -1))
    out = (eta[:, None] * tail).sum(axis=0)
    return out.reshape(z.shape) if z.ndim else float(out[0])


def and_or_step(dists: DegreeDistributions, G_eff: float, y_prev: float, tau: float,
                lam=None) -> float:
    """One level of the and-or recursion: y_h from y_{h-1}."""
    g = int(round(G_eff))
    z = (dists.lambda_asym if lam is None else lam)(y_prev)
    return float(and_or_value(z, poisson_eta(tau, g), g))


# -- inactivation fraction ----------------------------------------------------

@dataclass(frozen=True)
class AlphaResult:
    alpha: float | None  # None: no alpha in [0, 1] satisfied the condition
    theta: float

    @property
    def converged(self) -> bool:
        return self.alpha is not None

    @property
    def mi_fraction(self) -> float | None:
        return None if self.alpha is None else self.alpha + self.theta

    def predicted_MI(self, M: int) -> float | None:
        f = self.mi_fraction
        return None if f is None else f * M


def alpha_condition(model: AnalyticModel, alpha: float, grid: int = 1000,
                    lambda_uses_gprime: bool = False) -> bool:
    """True when f(M,S,B,G,alpha) < x on the discretized interval."""
    M, S = model.M, model.S
    hi = 1.0 - alpha * M / (M + S)
    if hi < model.delta:
        return True  # empty interval
    Gp = int(round(model.G - alpha * M / model.Lprime))
    if Gp < 1:
        return True
    dists = psi_lambda(model)
    x = np.linspace(model.delta, hi, grid)
    z = dists.lambda_asym(x, G=max(Gp, model.B) if lambda_uses_gprime else None)
    f = and_or_value(z, poisson_eta(model.tau, Gp), Gp)
    return bool(np.all(f < x))


def alpha_star(M: int, S: int, B: int, G: int, delta_alpha: float = 0.001, *,
               grid: int = 1000, lambda_uses_gprime: bool = False) -> AlphaResult:
    """Smallest alpha on the delta_alpha lattice passing the G' condition."""
    if delta_alpha <= 0:
        raise ValueError("delta_alpha must be positive")
    model = AnalyticModel(M, S, B, G)
    steps = int(math.floor(1.0 / delta_alpha + 1e-9))
    for i in range(steps + 1):
        a = i * delta_alpha
        if alpha_condition(model, a, grid, lambda_uses_gprime):
            return AlphaResult(round(a, 12), model.theta)
    return AlphaResult(None, model.theta)
