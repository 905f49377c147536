"""Resonance-zone covering of the unit action ball.

For cutoffs K >= 6 K0 >= 12 and a divisor threshold alpha the ball splits into

    R0        min |y.k| > alpha/2 over generators with |k|_1 <= K0
    R1_k      |y.k| < alpha and |P_k^perp y . l| > 3 alpha K / |k|
              for all generators l with |l|_1 <= K off the line Z k
    R2_{k,l}  |y.k| < alpha and |P_k^perp y . l| <= 3 alpha K / |k|

(|k| Euclidean in the per-k radii, ell^1 in the cutoff balls).  Every point of
the ball receives at least one label.  R0 points are (alpha/2)-nonresonant up
to order K0 and R1_k points are (2 alpha K/|k|)-nonresonant modulo Z k up to
order K; both certificates are checked by reduction to generators.  The
doubly-resonant remainder R2 has measure O(alpha^2 K^{2n}), estimated here by
Monte Carlo.

In the paper-preset parameter regime alpha = sqrt(eps) K^nu with
nu = (9/2)n + 2, which underflows/overflows double precision at useful
cutoffs; free mode decouples alpha as an independent knob and every report
records which mode produced it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .fourier import Mode, generators, l1


class OutsideDomainError(ValueError):
    """Query point lies outside the open unit ball."""


class CutoffOrderError(ValueError):
    """Paper-preset cutoffs must satisfy K >= 6 K0 >= 12."""


class CertificateError(ValueError):
    """A nonresonance certificate failed; carries the violating mode."""

    def __init__(self, message: str, mode: Mode | None = None, value: float | None = None):
        super().__init__(message)
        self.mode = mode
        self.value = value


class ContractionHypothesisError(RuntimeError):
    """The sampled displacement bound or the contraction property failed."""


@dataclass(frozen=True)
class CoveringParams:
    """Covering parameters; 'paper-preset' derives alpha = sqrt(eps) K^nu,
    'free' takes alpha as an independent knob (hypothesis flags recorded)."""

    n: int
    s: float
    K0: int
    K: int
    alpha: float
    mode: str
    epsilon: float | None = None
    nu: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.s <= 0:
            raise ValueError("need n >= 1 and s > 0")
        if self.alpha < 0 or (self.alpha == 0 and self.mode != "free"):
            raise ValueError("alpha must be positive (zero allowed in free mode)")

    # analyticity radii of the averaging domains; r_k uses the Euclidean |k|
    @property
    def r_o(self) -> float:
        return self.alpha / (16.0 * self.K0)

    @property
    def r_o_prime(self) -> float:
        return self.r_o / 2.0

    @property
    def s_o(self) -> float:
        return self.s * (1.0 - 1.0 / self.K0)

    @property
    def s_o_prime(self) -> float:
        return self.s_o * (1.0 - 1.0 / self.K0)

    @property
    def s_star(self) -> float:
        return self.s * (1.0 - 1.0 / self.K)

    @property
    def s_star_prime(self) -> float:
        return self.s_star * (1.0 - 1.0 / self.K)

    def r_k(self, k: Mode) -> float:
        return self.alpha / _euclid(k)

    def r_k_prime(self, k: Mode) -> float:
        return self.r_k(k) / 2.0

    def s_k_prime(self, k: Mode) -> float:
        return l1(k) * self.s_star_prime

    def r1_threshold(self, k: Mode) -> float:
        """The transverse gap 3 alpha K / |k| defining R1_k vs R2_{k,l}."""
        return 3.0 * self.alpha * self.K / _euclid(k)

    @cached_property
    def generators_K0(self) -> list[Mode]:
        return generators(self.n, self.K0)

    @cached_property
    def generators_K(self) -> list[Mode]:
        return generators(self.n, self.K)

    @property
    def alpha_reachable(self) -> bool:
        """Whether alpha/2 is below the ball scale, so R0 can be nonempty."""
        return self.alpha < 1.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "K0": self.K0,
            "K": self.K,
            "alpha": self.alpha,
            "mode": self.mode,
            "epsilon": self.epsilon,
            "nu": self.nu,
            "r_o": self.r_o,
            "s_o": self.s_o,
            "s_star": self.s_star,
            "alpha_reachable": self.alpha_reachable,
        }


def _euclid(k) -> float:
    return math.sqrt(sum(float(v) ** 2 for v in k))


def derive_params(n: int, s: float, epsilon: float, K0: int, K: int) -> CoveringParams:
    """Paper-preset parameters: nu = (9/2) n + 2, alpha = sqrt(eps) K^nu.

    Requires K >= 6 K0 >= 12.  When alpha reaches the ball scale the preset
    regime is numerically unreachable and the params carry a warning flag.
    """
    if not (K >= 6 * K0 >= 12):
        raise CutoffOrderError("paper-preset cutoffs must satisfy K >= 6*K0 >= 12")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    nu = 4.5 * n + 2.0
    alpha = math.sqrt(epsilon) * float(K) ** nu
    return CoveringParams(
        n=n, s=s, K0=K0, K=K, alpha=alpha, mode="paper-preset", epsilon=epsilon, nu=nu
    )


def free_params(n: int, s: float, alpha: float, K0: int, K: int) -> CoveringParams:
    """Free-mode parameters: alpha decoupled from (eps, K) so that desk-scale
    property tests are meaningful; provenance recorded as 'free'."""
    if K < K0 or K0 < 1:
        raise CutoffOrderError("need K >= K0 >= 1")
    return CoveringParams(n=n, s=s, K0=K0, K=K, alpha=alpha, mode="free")


@dataclass(frozen=True)
class RegionLabel:
    kind: str  # "R0" | "R1" | "R2"
    k: Mode | None = None
    l: Mode | None = None

    def __str__(self):
        if self.kind == "R0":
            return "R0"
        if self.kind == "R1":
            return f"R1[k={self.k}]"
        return f"R2[k={self.k},l={self.l}]"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": list(self.k) if self.k else None,
            "l": list(self.l) if self.l else None,
        }


def classify_point(y, params: CoveringParams, all_pairs: bool = True) -> list[RegionLabel]:
    """Every region label whose defining inequalities hold at y (|y| < 1).

    Always nonempty: a point not in R0 has some |y.k| <= alpha/2 < alpha, and
    for that k either the transverse gaps all hold (R1_k) or some witnessing
    l produces an R2_{k,l} label.  With all_pairs=False only the first
    witnessing l per k is enumerated.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (params.n,):
        raise ValueError(f"point must have dimension {params.n}")
    if np.linalg.norm(y) >= 1.0:
        raise OutsideDomainError("outside unit ball")
    labels: list[RegionLabel] = []
    gens0 = params.generators_K0
    prods = np.array([float(np.dot(y, k)) for k in gens0])
    if np.all(np.abs(prods) > params.alpha / 2.0):
        labels.append(RegionLabel("R0"))
    for i, k in enumerate(gens0):
        if abs(prods[i]) >= params.alpha:
            continue
        e_k = np.asarray(k, dtype=float) / _euclid(k)
        y_perp = y - np.dot(y, e_k) * e_k
        threshold = params.r1_threshold(k)
        witnesses = []
        ok = True
        for ell in params.generators_K:
            if ell == k:
                continue
            val = abs(float(np.dot(y_perp, ell)))
            if val <= threshold:
                ok = False
                witnesses.append(ell)
                if not all_pairs:
                    break
        if ok:
            labels.append(RegionLabel("R1", k=k))
        else:
            labels.extend(RegionLabel("R2", k=k, l=ell) for ell in witnesses)
    return labels


@dataclass
class BatchClassification:
    """Vectorized classification of many points.

    codes: 0 where R0 holds, else 1 where some R1_k holds, else 2 (RegionLabel
    priority for rasters); the boolean masks carry the full structure."""

    covered: np.ndarray
    is_r0: np.ndarray
    is_r1: np.ndarray
    is_r2: np.ndarray
    codes: np.ndarray


def classify_batch(Y: np.ndarray, params: CoveringParams) -> BatchClassification:
    Y = np.asarray(Y, dtype=float)
    if np.any(np.linalg.norm(Y, axis=1) >= 1.0):
        raise OutsideDomainError("outside unit ball")
    gens0 = params.generators_K0
    G0 = np.array(gens0, dtype=float)
    P = np.abs(Y @ G0.T)
    is_r0 = np.all(P > params.alpha / 2.0, axis=1)
    is_r1 = np.zeros(len(Y), dtype=bool)
    is_r2 = np.zeros(len(Y), dtype=bool)
    GK = np.array(params.generators_K, dtype=float)
    for i, k in enumerate(gens0):
        near = P[:, i] < params.alpha
        if not np.any(near):
            continue
        kv = np.asarray(k, dtype=float)
        e_k = kv / _euclid(k)
        Yn = Y[near]
        Yperp = Yn - np.outer(Yn @ e_k, e_k)
        Q = np.abs(Yperp @ GK.T)
        mask_same = np.array([ell == k for ell in params.generators_K])
        Q[:, mask_same] = np.inf
        min_q = Q.min(axis=1)
        thr = params.r1_threshold(k)
        r1_here = min_q > thr
        idx = np.nonzero(near)[0]
        is_r1[idx[r1_here]] = True
        is_r2[idx[~r1_here]] = True
    covered = is_r0 | is_r1 | is_r2
    codes = np.where(is_r0, 0, np.where(is_r1, 1, 2)).astype(np.int8)
    return BatchClassification(covered, is_r0, is_r1, is_r2, codes)


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

@dataclass
class NonresonanceCertificate:
    kind: str
    min_value: float
    minimizer: Mode
    threshold: float
    norm_convention: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "min_value": self.min_value,
            "minimizer": list(self.minimizer),
            "threshold": self.threshold,
            "norm_convention": self.norm_convention,
        }


def nonresonance_certificate(
    y,
    params: CoveringParams,
    kind: str,
    k: Mode | None = None,
    norm: str = "l1",
) -> NonresonanceCertificate:
    """Quantitative small-divisor certificate for an R0 or R1_k label.

    R0: min over nonzero integer vectors up to order K0 of |y.k| must exceed
    alpha/2.  R1_k: min over integer vectors off the line Z k up to order K of
    |y.l| must be >= 2 alpha K/|k|.  Both minimizations reduce to generators
    (a multiple j*kbar only scales |y.kbar| up).  norm selects the cutoff-ball
    convention: "l1" (default, the generator-ball convention) or "euclid"
    (the literal |k| <= K0 reading, a slightly larger ball).
    """
    y = np.asarray(y, dtype=float)
    if kind not in ("R0", "R1"):
        raise ValueError("kind must be 'R0' or 'R1'")

    def gen_ball(cutoff: float) -> list[Mode]:
        if norm == "l1":
            return generators(params.n, cutoff)
        if norm == "euclid":
            ball = generators(params.n, math.floor(cutoff * math.sqrt(params.n)))
            return [g for g in ball if _euclid(g) <= cutoff]
        raise ValueError("norm must be 'l1' or 'euclid'")

    if kind == "R0":
        gens = gen_ball(params.K0)
        vals = [abs(float(np.dot(y, g))) for g in gens]
        i = int(np.argmin(vals))
        threshold = params.alpha / 2.0
        if vals[i] <= threshold:
            raise CertificateError(
                f"R0 certificate fails at k={gens[i]}: |y.k|={vals[i]:.3e}",
                mode=gens[i],
                value=vals[i],
            )
        return NonresonanceCertificate("R0", vals[i], gens[i], threshold, norm)

    if k is None:
        raise ValueError("R1 certificate needs the resonance label k")
    k = tuple(int(v) for v in k)
    gens = [g for g in gen_ball(params.K) if g != k]
    vals = [abs(float(np.dot(y, g))) for g in gens]
    i = int(np.argmin(vals))
    threshold = 2.0 * params.alpha * params.K / _euclid(k)
    if vals[i] < threshold:
        raise CertificateError(
            f"R1 certificate fails at l={gens[i]}: |y.l|={vals[i]:.3e}",
            mode=gens[i],
            value=vals[i],
        )
    return NonresonanceCertificate("R1", vals[i], gens[i], threshold, norm)


# --------------------------------------------------------------------------
# Monte-Carlo measure of the doubly-resonant set
# --------------------------------------------------------------------------

def ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _sample_ball(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """Uniform points of the open unit ball: normalized Gaussians times a
    U^{1/n} radial factor."""
    g = rng.standard_normal((m, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=m) ** (1.0 / n)
    return g * radii[:, None]


@dataclass
class R2MeasureEstimate:
    measure_any: float
    measure_only: float
    ci_any: tuple[float, float]
    ci_only: tuple[float, float]
    fraction_any: float
    fraction_only: float
    samples: int
    seed: int
    params: CoveringParams

    def to_dict(self) -> dict:
        return {
            "measure_any": self.measure_any,
            "measure_only": self.measure_only,
            "ci_any": list(self.ci_any),
            "ci_only": list(self.ci_only),
            "fraction_any": self.fraction_any,
            "fraction_only": self.fraction_only,
            "samples": self.samples,
            "seed": self.seed,
            "params": self.params.to_dict(),
        }


_CHUNK = 1 << 16  # fixed so results depend on the seed only, not on workers


def measure_R2(params: CoveringParams, samples: int, seed: int) -> R2MeasureEstimate:
    """Monte-Carlo measure of the doubly-resonant set inside the unit ball.

    Reports both the measure of points carrying any R2 label and of points
    carrying only R2 labels (no R0, no R1), with binomial confidence
    intervals scaled by the ball volume.  Sampling is chunked with per-chunk
    derived seeds; RESOFORGE_THREADS > 1 processes chunks in a thread pool
    without changing the result.
    """
    if samples < 1000:
        raise ValueError("need at least 10^3 samples")
    n_chunks = (samples + _CHUNK - 1) // _CHUNK
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(_CHUNK, samples - i * _CHUNK) for i in range(n_chunks)]

    def work(args) -> tuple[int, int]:
        ss, m = args
        rng = np.random.Generator(np.random.Philox(ss))
        Y = _sample_ball(rng, m, params.n)
        batch = classify_batch(Y, params)
        any_r2 = int(np.count_nonzero(batch.is_r2))
        only_r2 = int(np.count_nonzero(batch.is_r2 & ~batch.is_r0 & ~batch.is_r1))
        return any_r2, only_r2

    threads = int(os.environ.get("RESOFORGE_THREADS", "1") or "1")
    jobs = list(zip(streams, sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    n_any = sum(r[0] for r in results)
    n_only = sum(r[1] for r in results)

    vol = ball_volume(params.n)

    def ci(count: int) -> tuple[float, float]:
        p = count / samples
        half = 1.96 * math.sqrt(max(p * (1 - p), 1e-300) / samples)
        return (max(0.0, p - half) * vol, min(1.0, p + half) * vol)

    return R2MeasureEstimate(
        measure_any=n_any / samples * vol,
        measure_only=n_only / samples * vol,
        ci_any=ci(n_any),
        ci_only=ci(n_only),
        fraction_any=n_any / samples,
        fraction_only=n_only / samples,
        samples=samples,
        seed=seed,
        params=params,
    )


def fit_measure_constant(estimates: list[R2MeasureEstimate]) -> float:
    """Fitted envelope constant cbar = max estimate / (alpha^2 K^{2n}).

    The doubly-resonant measure is bounded by cbar(n) alpha^2 K^{2n} for some
    dimensional constant; the fit reports the smallest constant consistent
    with the given estimates and is never asserted as a universal value.
    """
    return max(
        est.measure_any / (est.params.alpha ** 2 * est.params.K ** (2 * est.params.n))
        for est in estimates
    )


# --------------------------------------------------------------------------
# contraction preimage (boundary-covering primitive)
# --------------------------------------------------------------------------

@dataclass
class PreimageResult:
    y: np.ndarray
    residual: float
    iterations: int
    empirical_contraction: float
    sampled_displacement: float


def contraction_preimage(
    phi,
    y0,
    r: float,
    M: float,
    tol: float = 1e-13,
    max_iter: int = 500,
    hypothesis_samples: int = 64,
    seed: int = 0,
) -> PreimageResult:
    """Solve phi(y) = y0 for y in the closed r-ball around y0.

    Requires sup_{D_2r(y0)} |phi(y) - y| <= M < r (spot-checked by sampling
    the complex 2r-ball; analyticity is the caller's assertion), and iterates
    w <- -(phi(y0 + w) - (y0 + w)), a contraction with ratio at most M/r.
    Raises when the sampled bound or the contraction property fails.
    """
    y0 = np.asarray(y0, dtype=complex)
    n = y0.size
    if not M < r:
        raise ContractionHypothesisError(f"need M < r, got M={M}, r={r}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(hypothesis_samples):
        direction = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        z = y0 + direction * (2.0 * r * rng.uniform(0.0, 1.0))
        worst = max(worst, float(np.linalg.norm(np.asarray(phi(z)) - z)))
    if worst > M:
        raise ContractionHypothesisError(
            f"sampled displacement {worst:.3e} exceeds the declared bound M={M:.3e}"
        )

    w = np.zeros(n, dtype=complex)
    prev_step = None
    contraction = 0.0
    for it in range(1, max_iter + 1):
        y = y0 + w
        defect = np.asarray(phi(y)) - y
        residual = float(np.linalg.norm(defect + w))  # |phi(y) - y0|
        if residual < tol:
            return PreimageResult(y, residual, it, contraction, worst)
        w_new = -defect
        step = float(np.linalg.norm(w_new - w))
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            contraction = max(contraction, ratio)
            if ratio >= 1.0:
                raise ContractionHypothesisError("hypothesis violated")
        prev_step = step
        w = w_new
    raise ContractionHypothesisError(
        f"no convergence to {tol} within {max_iter} iterations"
    )


def projections(y, k):
    """Orthogonal split (P_k y, P_k^perp y) along e_k = k/|k|; k must be nonzero."""
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise ValueError("k must be nonzero")
    y = np.asarray(y, dtype=float)
    e_k = k / np.linalg.norm(k)
    para = np.dot(y, e_k) * e_k
    return para, y - para
