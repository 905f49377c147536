"""Membership machinery for the generic potential classes.

A potential f (zero average, unit weighted-sup ball at width s) is admitted at
level (delta, beta) when

  * |f_k| >= delta |k|_1^{-n} e^{-|k|_1 s} for every generator with
    |k|_1 >= N(delta)   (high-mode lower bound), and
  * pi_k f is beta-Morse with distinct critical values for every generator
    with |k|_1 <= N(delta)   (low-mode Morse condition),

where the threshold N(delta) = 2 max{1, (1/s) log(c_d / (s^n delta))} with
c_d = 2^44 (2n/e)^n is calibrated so that beyond it every projection is
2^-40-cosine-like.  Membership is certified on a finite window [N, K_max];
only rule-backed potentials can carry a symbolic proof beyond the cutoff.

The module also samples the product probability measure on coefficients
(f_k = w_k e^{-|k|_1 s}, w_k uniform on the unit disk), estimates the measure
of the admissible set empirically, and samples the degeneracy locus in the
leading-coefficient plane outside of which a 1-D projection is automatically
Morse with distinct critical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import (
    Mode,
    OneDTrigPoly,
    TrigPoly,
    TWO_PI,
    generators,
    is_generator,
    iter_half_ball,
    l1,
    project_lattice,
)
from .morse import ConstantFunctionError, MorseReport, critical_points


class CutoffBelowThresholdError(ValueError):
    """Verification cutoff K_max lies below the threshold N(delta)."""


def threshold_N(n: int, s: float, delta: float) -> float:
    """High-mode threshold N(delta) = 2 max{1, (1/s) log(c_d/(s^n delta))}.

    c_d = 2^44 (2n/e)^n.  Monotone decreasing in delta and in s, and always
    >= 2 max{1, 1/s}.
    """
    if n < 1 or s <= 0 or not 0 < delta <= 1:
        raise ValueError("need n >= 1, s > 0, 0 < delta <= 1")
    c_d = 2.0 ** 44 * (2.0 * n / math.e) ** n
    return 2.0 * max(1.0, math.log(c_d / (s ** n * delta)) / s)


def c_s(s: float) -> float:
    """The width constant max{1, 1/s}."""
    return max(1.0, 1.0 / s)


@dataclass(frozen=True)
class GenericityParams:
    n: int
    s: float
    delta: float
    beta: float
    K_max: float
    N: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "N", threshold_N(self.n, self.s, self.delta))


@dataclass
class Failure:
    k: Mode
    reason: str  # "lower-bound" | "morse" | "distinct-values"

    def to_dict(self) -> dict:
        return {"k": list(self.k), "reason": self.reason}


@dataclass
class MembershipReport:
    in_class: bool
    failures: list[Failure]
    window: tuple[float, float]
    delta: float
    beta: float
    n_checked_lower: int
    n_checked_morse: int
    proved_beyond_cutoff: bool
    margins: dict

    def to_dict(self) -> dict:
        return {
            "in_class": self.in_class,
            "failures": [f.to_dict() for f in self.failures],
            "window": list(self.window),
            "delta": self.delta,
            "beta": self.beta,
            "n_checked_lower": self.n_checked_lower,
            "n_checked_morse": self.n_checked_morse,
            "proved_beyond_cutoff": self.proved_beyond_cutoff,
            "margins": self.margins,
        }


def check_lower_bound(
    f: TrigPoly, params: GenericityParams, k_min: float | None = None
) -> tuple[list[Failure], int, float]:
    """Verify |f_k| >= delta |k|_1^{-n} e^{-|k|_1 s} on the window [N, K_max].

    Returns (failures, number of generators checked, worst margin), where the
    margin is the minimum over checked k of |f_k|/(delta |k|_1^{-n} e^{-|k|_1 s}) - 1.
    Boundary equality passes.  k_min overrides the lower edge of the window
    (free-mode verification below the derived threshold).
    """
    lo = params.N if k_min is None else k_min
    if params.K_max < lo:
        raise CutoffBelowThresholdError("cutoff below threshold")
    failures: list[Failure] = []
    worst = math.inf
    count = 0
    for k in generators(f.n, params.K_max, min_order=max(1, math.ceil(lo))):
        count += 1
        bound = params.delta * l1(k) ** (-f.n) * math.exp(-l1(k) * params.s)
        ratio = abs(f.coeff(k)) / bound
        worst = min(worst, ratio - 1.0)
        if ratio < 1.0:
            failures.append(Failure(k, "lower-bound"))
    return failures, count, worst


def check_low_mode_morse(
    f: TrigPoly, params: GenericityParams, tol: float = 1e-12
) -> tuple[list[Failure], int, float]:
    """Check that pi_k f is beta-Morse with distinct values for |k|_1 <= N.

    A vanishing projection is recorded as a failure, not raised.  Returns
    (failures, generators checked, worst beta margin = min computed beta - beta).
    """
    failures: list[Failure] = []
    count = 0
    worst = math.inf
    for k in generators(f.n, params.N):
        count += 1
        F = project_lattice(f, k)
        if F.is_zero:
            failures.append(Failure(k, "morse"))
            worst = -params.beta
            continue
        try:
            report = critical_points(F, tol=tol)
        except ConstantFunctionError:
            failures.append(Failure(k, "morse"))
            worst = -params.beta
            continue
        worst = min(worst, report.beta - params.beta)
        if report.beta < params.beta:
            failures.append(Failure(k, "morse"))
        elif not report.distinct_values:
            failures.append(Failure(k, "distinct-values"))
    return failures, count, worst


def check_membership(f: TrigPoly, params: GenericityParams,
                     tol: float = 1e-12) -> MembershipReport:
    """Full class check over the finite window; reports window and margins."""
    lb_failures, n_lb, lb_margin = check_lower_bound(f, params)
    morse_failures, n_m, morse_margin = check_low_mode_morse(f, params, tol=tol)
    failures = lb_failures + morse_failures
    proved = False
    if f.rule is not None and not lb_failures:
        proved = f.rule.provable_lower_bound(params.delta)
    return MembershipReport(
        in_class=not failures,
        failures=failures,
        window=(params.N, params.K_max),
        delta=params.delta,
        beta=params.beta,
        n_checked_lower=n_lb,
        n_checked_morse=n_m,
        proved_beyond_cutoff=proved,
        margins={"lower_bound": lb_margin, "morse_beta": morse_margin},
    )


# --------------------------------------------------------------------------
# product-measure sampling
# --------------------------------------------------------------------------

def _uniform_disk(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform samples on the closed unit disk by rejection from the square."""
    out = np.empty(size, dtype=complex)
    remaining = np.arange(size)
    while remaining.size:
        cand = rng.uniform(-1.0, 1.0, size=(remaining.size, 2))
        ok = cand[:, 0] ** 2 + cand[:, 1] ** 2 <= 1.0
        out[remaining[ok]] = cand[ok, 0] + 1j * cand[ok, 1]
        remaining = remaining[~ok]
    return out


def _philox(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_product_measure(n: int, s: float, K_max: float, seed) -> TrigPoly:
    """Draw f with f_k = w_k e^{-|k|_1 s}, w_k independent uniform on the disk.

    Every k in Z^n_* with |k|_1 <= K_max receives a coefficient, drawn in
    lexicographic mode order from a counter-based (Philox) generator, so the
    result is reproducible across platforms and chunkings.
    """
    modes = list(iter_half_ball(n, K_max))
    rng = _philox(seed)
    w = _uniform_disk(rng, len(modes))
    coeffs = {k: w[i] * math.exp(-l1(k) * s) for i, k in enumerate(modes)}
    return TrigPoly(n, coeffs)


@dataclass
class GenericityEstimate:
    fraction_pass: float
    ci_low: float
    ci_high: float
    trials: int
    n_failed: int
    window: tuple[float, float]
    delta: float

    def to_dict(self) -> dict:
        return {
            "fraction_pass": self.fraction_pass,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "trials": self.trials,
            "n_failed": self.n_failed,
            "window": list(self.window),
            "delta": self.delta,
        }


def _wilson(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials ** 2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def empirical_genericity(
    n: int,
    s: float,
    delta: float,
    trials: int,
    seed,
    window: tuple[float, float] | None = None,
) -> GenericityEstimate:
    """Fraction of product-measure samples satisfying the lower bound at delta.

    The bound |f_k| >= delta |k|_1^{-n} e^{-|k|_1 s} reduces to
    |w_k| >= delta |k|_1^{-n} for the sampled disk variables, checked for
    generators in the window (default [N(delta), N(delta) + 10]).  The window
    override exists because at the derived threshold failures are too rare to
    measure at desk scale; reports always carry the window used.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if window is None:
        N = threshold_N(n, s, delta)
        window = (N, N + 10)
    lo, hi = window
    gens = [k for k in generators(n, hi) if l1(k) >= lo]
    if not gens:
        raise ValueError("empty generator window")
    thresholds = np.array([delta * l1(k) ** (-n) for k in gens])

    streams = np.random.SeedSequence(seed).spawn(trials)
    n_pass = 0
    for ss in streams:
        w = _uniform_disk(_philox(ss), len(gens))
        if np.all(np.abs(w) >= thresholds):
            n_pass += 1
    ci = _wilson(n_pass, trials)
    return GenericityEstimate(
        fraction_pass=n_pass / trials,
        ci_low=ci[0],
        ci_high=ci[1],
        trials=trials,
        n_failed=trials - n_pass,
        window=window,
        delta=delta,
    )


# --------------------------------------------------------------------------
# degeneracy locus of the leading coefficient
# --------------------------------------------------------------------------

@dataclass
class DegeneracyLocus:
    """Sampled locus of leading coefficients z for which
    F = z e^{i theta} + conj + G can fail to be Morse with distinct values.

    gamma1 parametrizes z = (1/2) e^{-i theta}(i G'(theta) + G''(theta))
    (degenerate critical point); gamma2 collects zeta over the located
    off-diagonal zero set of the equal-critical-value function g.  The
    diagonal of that zero set reproduces gamma1 and is excluded from the
    contouring.  For G = 0 the locus is the single point {0}.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    zero_pairs: np.ndarray

    def distance(self, z: complex) -> float:
        d = math.inf
        if self.gamma1.size:
            d = min(d, float(np.min(np.abs(self.gamma1 - z))))
        if self.gamma2.size:
            d = min(d, float(np.min(np.abs(self.gamma2 - z))))
        return d


def _zeta(G: OneDTrigPoly, t1: float, t2: float) -> complex:
    g1 = G.derivative(1)
    if abs(np.exp(1j * t1) - np.exp(1j * t2)) < 1e-12:
        g2 = G.derivative(2)
        return complex(
            (g2.evaluate(t1) + 1j * g1.evaluate(t1)) / (2.0 * np.exp(1j * t1))
        )
    num = (
        g1.evaluate(t1) - g1.evaluate(t2)
        + 1j * G.evaluate(t1) - 1j * G.evaluate(t2)
    )
    return complex(1j * num / (2.0 * (np.exp(1j * t1) - np.exp(1j * t2))))


def degeneracy_locus(G: OneDTrigPoly, grid: int = 512) -> DegeneracyLocus:
    """Sample the two degeneracy curves for a residual G with |j| >= 2 modes."""
    if any(j < 2 for j in G.coeffs):
        raise ValueError("residual must have modes |j| >= 2 only")
    if G.is_zero:
        return DegeneracyLocus(
            gamma1=np.array([0.0 + 0.0j]),
            gamma2=np.array([], dtype=complex),
            zero_pairs=np.zeros((0, 2)),
        )

    m1 = 4096
    theta = np.arange(m1) * (TWO_PI / m1)
    gp = G.values_on_grid(m1, order=1)
    gpp = G.values_on_grid(m1, order=2)
    gamma1 = 0.5 * np.exp(-1j * theta) * (1j * gp + gpp)

    # g(t1, t2) = (1 - cos(t1-t2)) (G'(t1) + G'(t2)) - sin(t1-t2)(G(t1) - G(t2))
    t = np.arange(grid) * (TWO_PI / grid)
    g0 = G.values_on_grid(grid, order=0)
    g1v = G.values_on_grid(grid, order=1)
    D = t[:, None] - t[None, :]
    gmat = (1.0 - np.cos(D)) * (g1v[:, None] + g1v[None, :]) - np.sin(D) * (
        g0[:, None] - g0[None, :]
    )

    gprime = G.derivative(1)

    def g_at(t1: float, t2: float) -> float:
        d = t1 - t2
        return float(
            (1.0 - math.cos(d)) * (gprime.evaluate(t1).real + gprime.evaluate(t2).real)
            - math.sin(d) * (G.evaluate(t1).real - G.evaluate(t2).real)
        )

    h = TWO_PI / grid
    zeros: list[tuple[float, float]] = []
    # the diagonal is a trivial zero line (it reproduces gamma1); skip a band
    # of two cells around it and contour the rest by edge bisection
    diag_skip = 2
    for i in range(grid):
        for j in range(grid):
            di = min((i - j) % grid, (j - i) % grid)
            if di <= diag_skip:
                continue
            a = gmat[i, j]
            b = gmat[(i + 1) % grid, j]
            if a == 0.0:
                zeros.append((t[i], t[j]))
            elif a * b < 0:
                lo, hi_ = t[i], t[i] + h
                fa = a
                for _ in range(40):
                    mid = 0.5 * (lo + hi_)
                    fm = g_at(mid, t[j])
                    if fa * fm <= 0:
                        hi_ = mid
                    else:
                        lo, fa = mid, fm
                zeros.append((0.5 * (lo + hi_), t[j]))
            c = gmat[i, (j + 1) % grid]
            if a * c < 0:
                lo, hi_ = t[j], t[j] + h
                fa = a
                for _ in range(40):
                    mid = 0.5 * (lo + hi_)
                    fm = g_at(t[i], mid)
                    if fa * fm <= 0:
                        hi_ = mid
                    else:
                        lo, fa = mid, fm
                zeros.append((t[i], 0.5 * (lo + hi_)))

    zero_pairs = np.array(zeros) if zeros else np.zeros((0, 2))
    gamma2 = np.array([_zeta(G, t1, t2) for t1, t2 in zeros], dtype=complex)
    return DegeneracyLocus(gamma1=gamma1, gamma2=gamma2, zero_pairs=zero_pairs)
