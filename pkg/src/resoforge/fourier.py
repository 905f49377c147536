"""Sparse Fourier algebra for zero-average real-analytic functions on T^n.

A function f(x) = sum_k f_k e^{i k.x} with f_0 = 0 and f_{-k} = conj(f_k) is
stored through its coefficients on the canonical half-lattice Z^n_* (integer
vectors whose first nonzero component is positive); the conjugate half is
implied.  Three norms are provided at analyticity width s > 0:

    weighted sup     sup_k |f_k| e^{|k|_1 s}
    strip sup        sup over the complex strip |Im x_j| < s   (interval only)
    majorant         sum_k |f_k| e^{|k|_1 s}

which satisfy weighted-sup <= strip-sup <= majorant.  Mode directions with
coprime components ("generators") index the 1-D lattice projections
pi_k f(theta) = sum_j f_{jk} e^{i j theta} used throughout the package.

Potentials with infinite support are handled through a coefficient rule
(currently the exponentially decaying lacunary family supported on the
generator set) materialized up to a recorded cutoff; the rule supplies exact
coefficients beyond the cutoff and exact or certified tail bounds for norms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

Mode = tuple[int, ...]

TWO_PI = 2.0 * math.pi


class NormDivergesError(ValueError):
    """Requested weighted norm diverges for the attached coefficient rule."""


class NotAGeneratorError(ValueError):
    """Mode vector is not a generator (coprime, first nonzero positive)."""


def l1(k: Iterable[int]) -> int:
    return int(sum(abs(int(c)) for c in k))


def is_canonical(k: Iterable[int]) -> bool:
    """Membership in Z^n_*: k != 0 and the first nonzero component positive."""
    for c in k:
        if c != 0:
            return c > 0
    return False


def is_generator(k: Iterable[int]) -> bool:
    """Membership in the generator set: canonical and gcd of components 1."""
    k = tuple(int(c) for c in k)
    return is_canonical(k) and math.gcd(*k) == 1


def canonical_form(k: Iterable[int]) -> tuple[Mode, bool]:
    """Return (canonical representative, flipped) with flipped = (rep == -k)."""
    k = tuple(int(c) for c in k)
    if is_canonical(k):
        return k, False
    neg = tuple(-c for c in k)
    if is_canonical(neg):
        return neg, True
    raise ValueError("zero mode has no canonical form")


def iter_half_ball(n: int, K: float) -> Iterator[Mode]:
    """Yield all k in Z^n_* with |k|_1 <= K in lexicographic order."""
    kmax = int(math.floor(K))

    def rec(prefix: list[int], budget: int, started: bool) -> Iterator[Mode]:
        i = len(prefix)
        if i == n:
            if started:
                yield tuple(prefix)
            return
        lo = 0 if not started else -budget
        for c in range(lo, budget + 1):
            prefix.append(c)
            yield from rec(prefix, budget - abs(c), started or c != 0)
            prefix.pop()

    yield from rec([], kmax, False)


def generators(n: int, K: float, min_order: int = 1) -> list[Mode]:
    """All generators k with min_order <= |k|_1 <= K, lexicographically.

    Generators are the k in Z^n_* with gcd(k_1, ..., k_n) = 1; each indexes a
    maximal 1-D sublattice Z k and hence a simple resonance y.k = 0.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if K < 1:
        raise ValueError("cutoff K must be >= 1")
    out = []
    for k in iter_half_ball(n, K):
        if l1(k) < min_order:
            continue
        if n == 1:
            if k == (1,):
                out.append(k)
        elif math.gcd(*k) == 1:
            out.append(k)
    return out


def on_ray(kp: Mode, k: Mode) -> int | None:
    """Return j >= 1 with kp == j*k, or None if kp is not on the ray of k."""
    j = None
    for a, b in zip(kp, k):
        if b == 0:
            if a != 0:
                return None
        else:
            q, r = divmod(a, b)
            if r != 0:
                return None
            if j is None:
                j = q
            elif q != j:
                return None
    if j is None or j < 1:
        return None
    return int(j)


# --------------------------------------------------------------------------
# coefficient rules (infinite-support models)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LacunaryRule:
    """Coefficient rule f_k = amplitude * e^{-s |k|_1} on generators only.

    The modes jk with |j| >= 2 all vanish (gcd(jk) = |j| > 1), so every
    projection pi_k f is an exact shifted cosine and all tail bounds along a
    ray are zero.  The full potential is f = 2*amplitude * sum_{k in G^n}
    e^{-s|k|_1} cos(k.x) with weighted sup norm equal to amplitude at width s.
    """

    n: int
    s: float
    amplitude: float = 1.0

    def coeff(self, k: Mode) -> complex:
        if is_generator(k):
            return complex(self.amplitude * math.exp(-self.s * l1(k)))
        return 0.0

    def weighted_sup_norm(self, s_eval: float) -> float:
        # sup over generators of amplitude * e^{-(s - s_eval)|k|_1}
        if s_eval > self.s:
            raise NormDivergesError("norm diverges")
        if s_eval == self.s:
            return self.amplitude
        return self.amplitude * math.exp(-(self.s - s_eval))

    def majorant_norm(self, s_eval: float, tol: float = 1e-16) -> float:
        """Sum over all modes (both half-lattices) of |f_k| e^{|k|_1 s_eval}.

        The support is the generator set, counted exactly per ell^1 shell by
        Moebius inversion; the series is summed until the (larger) full-shell
        term falls below tol relative to the accumulated value.
        """
        if s_eval >= self.s:
            raise NormDivergesError("norm diverges")
        rate = self.s - s_eval
        total = 0.0
        m = 1
        while True:
            gens2 = 2 * _count_generator_shell(self.n, m)  # both halves
            total += self.amplitude * gens2 * math.exp(-rate * m)
            gauge = self.amplitude * _count_l1_shell(self.n, m) * math.exp(-rate * m)
            if gauge < tol * max(total, 1.0) and m > 2 * self.n / rate:
                break
            m += 1
            if m > 100_000:
                break
        return total

    def line_tail_majorant(self, k: Mode, j_from: int, width: float) -> float:
        """Bound on sum_{|j| >= j_from} |f_{jk}| e^{|j| width}; zero here."""
        return 0.0

    def provable_lower_bound(self, delta: float) -> bool:
        """|f_k| >= delta |k|_1^{-n} e^{-s|k|_1} holds for all generators."""
        return delta <= self.amplitude


def _count_l1_shell(n: int, m: int) -> int:
    """Number of k in Z^n (all signs) with |k|_1 = m, m >= 1."""
    total = 0
    for j in range(1, min(n, m) + 1):
        total += (2 ** j) * math.comb(n, j) * math.comb(m - 1, j - 1)
    return total


def _mobius(m: int) -> int:
    mu, p = 1, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            mu = -mu
        p += 1
    if m > 1:
        mu = -mu
    return mu


def _count_generator_shell(n: int, m: int) -> int:
    """Number of generators (canonical, gcd 1) with |k|_1 = m, by Moebius
    inversion of the canonical shell counts."""
    total = 0
    for d in range(1, m + 1):
        if m % d == 0:
            mu = _mobius(d)
            if mu:
                total += mu * _count_l1_shell(n, m // d)
    return total // 2


# --------------------------------------------------------------------------
# multivariate series
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigPoly:
    """Zero-average real-analytic function on T^n as a sparse mode map.

    coeffs maps canonical modes k in Z^n_* to f_k; the coefficient at -k is
    conj(f_k).  An optional rule supplies coefficients beyond the materialized
    support together with exact norm tails; rule_cutoff records up to which
    |k|_1 the rule was materialized into coeffs.
    """

    n: int
    coeffs: dict[Mode, complex]
    rule: LacunaryRule | None = None
    rule_cutoff: float | None = None

    def __post_init__(self):
        clean = {}
        for k, c in self.coeffs.items():
            k = tuple(int(v) for v in k)
            if len(k) != self.n:
                raise ValueError(f"mode {k} has wrong dimension")
            if not is_canonical(k):
                raise ValueError(f"mode {k} is not in the canonical half-lattice")
            c = complex(c)
            if c != 0:
                clean[k] = c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_modes(cls, n: int, modes: Mapping[Mode, complex]) -> "TrigPoly":
        """Build from arbitrary-sign modes, folding -k entries by conjugation."""
        folded: dict[Mode, complex] = {}
        for k, c in modes.items():
            k = tuple(int(v) for v in k)
            if all(v == 0 for v in k):
                if c != 0:
                    raise ValueError("zero-average functions only (f_0 must vanish)")
                continue
            rep, flipped = canonical_form(k)
            folded[rep] = folded.get(rep, 0.0) + (np.conj(c) if flipped else complex(c))
        return cls(n, folded)

    @classmethod
    def from_cosines(cls, n: int, amplitudes: Mapping[Mode, float]) -> "TrigPoly":
        """f = sum_k a_k cos(k.x) for canonical k (coefficients a_k / 2)."""
        return cls(n, {tuple(k): a / 2.0 for k, a in amplitudes.items()})

    def coeff(self, k: Iterable[int]) -> complex:
        k = tuple(int(v) for v in k)
        if all(v == 0 for v in k):
            return 0.0
        rep, flipped = canonical_form(k)
        if rep in self.coeffs:
            c = self.coeffs[rep]
        elif self.rule is not None:
            c = self.rule.coeff(rep)
        else:
            c = 0.0
        return complex(np.conj(c)) if flipped else complex(c)

    @property
    def support(self) -> list[Mode]:
        return sorted(self.coeffs)

    def max_order(self) -> int:
        return max((l1(k) for k in self.coeffs), default=0)

    def evaluate(self, x) -> complex:
        """Value of the stored (truncated) mode sum at real or complex x."""
        x = np.asarray(x, dtype=complex)
        val = 0.0 + 0.0j
        for k, c in self.coeffs.items():
            phase = 1j * complex(np.dot(k, x))
            val += c * np.exp(phase) + np.conj(c) * np.exp(-phase)
        return complex(val)

    def evaluation_tail_bound(self, im_radius: float) -> float:
        """Truncation-error bound for evaluate on |Im x_j| <= im_radius.

        Zero for finite support; for rule-backed potentials the tail of the
        majorant beyond the materialized cutoff.
        """
        if self.rule is None or self.rule_cutoff is None:
            return 0.0
        full = self.rule.majorant_norm(im_radius)
        mat = sum(2 * abs(c) * math.exp(l1(k) * im_radius) for k, c in self.coeffs.items())
        return max(full - mat, 0.0)

    def scaled(self, factor: float) -> "TrigPoly":
        return TrigPoly(self.n, {k: factor * c for k, c in self.coeffs.items()})


@dataclass(frozen=True)
class OneDTrigPoly:
    """Zero-average real-analytic function of one angle, c_{-j} = conj(c_j).

    Coefficients are stored for j >= 1.  tail_strip1 optionally carries a
    certified bound on the strip-1 majorant of modes dropped at construction
    (nonzero only for rule-derived projections truncated in j).
    """

    coeffs: dict[int, complex]
    tail_strip1: float = 0.0

    def __post_init__(self):
        clean = {}
        for j, c in self.coeffs.items():
            j = int(j)
            if j < 1:
                raise ValueError("store only j >= 1; the conjugate half is implied")
            c = complex(c)
            if c != 0:
                clean[j] = c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_cosine(cls, amplitude: float, shift: float = 0.0) -> "OneDTrigPoly":
        """amplitude * cos(theta + shift)."""
        return cls({1: 0.5 * amplitude * np.exp(1j * shift)})

    def coeff(self, j: int) -> complex:
        if j == 0:
            return 0.0
        if j >= 1:
            return self.coeffs.get(j, 0.0)
        return complex(np.conj(self.coeffs.get(-j, 0.0)))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        return max(self.coeffs, default=0)

    def derivative(self, order: int = 1) -> "OneDTrigPoly":
        if order == 0:
            return self
        return OneDTrigPoly({j: ((1j * j) ** order) * c for j, c in self.coeffs.items()})

    def evaluate(self, theta) -> complex:
        theta = complex(theta)
        val = 0.0 + 0.0j
        for j, c in self.coeffs.items():
            val += c * np.exp(1j * j * theta) + np.conj(c) * np.exp(-1j * j * theta)
        return complex(val)

    def values_on_grid(self, m: int, order: int = 0) -> np.ndarray:
        """Real values of the order-th derivative on the uniform grid of size m."""
        theta = np.arange(m) * (TWO_PI / m)
        if not self.coeffs:
            return np.zeros(m)
        js = np.array(sorted(self.coeffs), dtype=float)
        cs = np.array([self.coeffs[int(j)] for j in js])
        cs = cs * (1j * js) ** order
        phases = np.exp(1j * np.outer(js, theta))
        return 2.0 * np.real(cs @ phases)

    def shifted(self, shift: float) -> "OneDTrigPoly":
        """theta -> value at theta + shift."""
        return OneDTrigPoly(
            {j: c * np.exp(1j * j * shift) for j, c in self.coeffs.items()},
            tail_strip1=self.tail_strip1,
        )

    def scaled(self, factor: complex) -> "OneDTrigPoly":
        return OneDTrigPoly(
            {j: factor * c for j, c in self.coeffs.items()},
            tail_strip1=abs(factor) * self.tail_strip1,
        )

    def plus(self, other: "OneDTrigPoly") -> "OneDTrigPoly":
        out = dict(self.coeffs)
        for j, c in other.coeffs.items():
            out[j] = out.get(j, 0.0) + c
        return OneDTrigPoly(out, tail_strip1=self.tail_strip1 + other.tail_strip1)


# --------------------------------------------------------------------------
# norms and projections
# --------------------------------------------------------------------------

def norm_weighted_sup(f: TrigPoly | OneDTrigPoly, s: float) -> float:
    """sup_k |f_k| e^{|k|_1 s} over the (possibly rule-extended) support."""
    if s <= 0:
        raise ValueError("width s must be positive")
    if isinstance(f, OneDTrigPoly):
        return max((abs(c) * math.exp(j * s) for j, c in f.coeffs.items()), default=0.0)
    finite = max((abs(c) * math.exp(l1(k) * s) for k, c in f.coeffs.items()), default=0.0)
    if f.rule is not None:
        return max(finite, f.rule.weighted_sup_norm(s))
    return finite


def norm_majorant(f: TrigPoly | OneDTrigPoly, s: float) -> float:
    """sum_k |f_k| e^{|k|_1 s} over both half-lattices (rule tails included)."""
    if s < 0:
        raise ValueError("width s must be nonnegative")
    if isinstance(f, OneDTrigPoly):
        tail = f.tail_strip1 if s <= 1 else (math.inf if f.tail_strip1 else 0.0)
        return 2.0 * sum(abs(c) * math.exp(j * s) for j, c in f.coeffs.items()) + tail
    finite = 2.0 * sum(abs(c) * math.exp(l1(k) * s) for k, c in f.coeffs.items())
    if f.rule is not None and f.rule_cutoff is not None:
        full = f.rule.majorant_norm(s)  # raises NormDivergesError when divergent
        return max(full, finite)
    return finite


def project_lattice(f: TrigPoly, k: Mode, j_max: int | None = None) -> OneDTrigPoly:
    """Fourier projection pi_k f(theta) = sum_j f_{jk} e^{i j theta}, k a generator.

    The decomposition f(x) = sum_{k in G^n} (pi_k f)(k.x) over the support is
    exact because every nonzero mode lies on a unique generator ray.
    """
    k = tuple(int(v) for v in k)
    if not is_generator(k):
        raise NotAGeneratorError("not a generator")
    coeffs: dict[int, complex] = {}
    for kp, c in f.coeffs.items():
        j = on_ray(kp, k)
        if j is not None:
            coeffs[j] = c
    tail = 0.0
    if f.rule is not None:
        jm = j_max
        if jm is None:
            cutoff = f.rule_cutoff if f.rule_cutoff is not None else f.max_order()
            jm = max(2, int(cutoff // max(l1(k), 1)) + 2)
        for j in range(1, jm + 1):
            c = f.rule.coeff(tuple(j * v for v in k))
            if c != 0:
                coeffs[j] = c
        tail = f.rule.line_tail_majorant(k, jm + 1, 1.0)
    return OneDTrigPoly(coeffs, tail_strip1=tail)


def strip_sup_interval(
    f: TrigPoly, s: float, samples: int = 4096, seed: int = 0
) -> tuple[float, float]:
    """Interval [grid lower bound, majorant upper bound] for sup over T^n_s.

    The lower bound samples |f| at random real parts combined with random
    corner imaginary parts Im x in {-s, +s}^n (suprema of strip-analytic
    functions are approached at the strip boundary); the upper bound is the
    ell^1 majorant, which dominates the strip sup exactly.
    """
    rng = np.random.default_rng(seed)
    real = rng.uniform(0.0, TWO_PI, size=(samples, f.n))
    signs = rng.choice((-s, s), size=(samples, f.n))
    lo = 0.0
    if f.coeffs:
        modes = sorted(f.coeffs)
        ks = np.array(modes, dtype=float)
        cs = np.array([f.coeffs[k] for k in modes])
        z = real + 1j * signs
        phase = z @ ks.T
        vals = np.exp(1j * phase) @ cs + np.exp(-1j * phase) @ np.conj(cs)
        lo = float(np.max(np.abs(vals)))
    return lo, norm_majorant(f, s)


# --------------------------------------------------------------------------
# presets and JSON interchange
# --------------------------------------------------------------------------

def lacunary_potential(n: int, s: float, k_max: float = 40, amplitude: float = 1.0) -> TrigPoly:
    """The exponentially lacunary model 2*amp*sum_{k in G^n} e^{-s|k|_1} cos k.x.

    Materialized up to |k|_1 <= k_max with the exact rule attached, so
    coefficient queries and norm tails beyond the cutoff stay exact.
    """
    rule = LacunaryRule(n=n, s=s, amplitude=amplitude)
    coeffs = {k: rule.coeff(k) for k in generators(n, k_max)}
    return TrigPoly(n, coeffs, rule=rule, rule_cutoff=float(k_max))


def two_mode_potential(s: float, n: int = 2) -> TrigPoly:
    """Two-cosine benchmark 2e^{-2s}(cos((1,1).x) + cos((1,-1).x)) (n = 2)."""
    if n != 2:
        raise ValueError("the two-mode preset is two-dimensional")
    a = math.exp(-2.0 * s)
    return TrigPoly.from_cosines(2, {(1, 1): 2 * a, (1, -1): 2 * a})


def save_potential(f: TrigPoly, s: float, path) -> None:
    doc: dict = {"n": f.n, "s": s}
    if f.rule is not None:
        doc["rule"] = "exp-lacunary"
        doc["params"] = {
            "s": f.rule.s,
            "amplitude": f.rule.amplitude,
            "k_max": f.rule_cutoff,
        }
    else:
        doc["modes"] = [
            {"k": list(k), "re": float(c.real), "im": float(c.imag)}
            for k, c in sorted(f.coeffs.items())
        ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_potential(source) -> tuple[TrigPoly, float]:
    """Load a potential file; returns (TrigPoly, s).

    Schema: {"n": int, "s": float, "modes": [{"k": [...], "re": , "im": }]}
    with modes restricted to Z^n_*, or the rule variant
    {"n":, "s":, "rule": "exp-lacunary", "params": {...}}.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)
    try:
        n = int(doc["n"])
        s = float(doc["s"])
    except KeyError as exc:
        raise ValueError(f"potential file missing field {exc}") from exc
    if "rule" in doc:
        if doc["rule"] != "exp-lacunary":
            raise ValueError(f"unknown rule preset {doc['rule']!r}")
        params = doc.get("params", {})
        return (
            lacunary_potential(
                n,
                float(params.get("s", s)),
                k_max=float(params.get("k_max", 40)),
                amplitude=float(params.get("amplitude", 1.0)),
            ),
            s,
        )
    coeffs = {}
    for entry in doc.get("modes", []):
        k = tuple(int(v) for v in entry["k"])
        if not is_canonical(k):
            raise ValueError(f"mode {k} is not in the canonical half-lattice")
        coeffs[k] = complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
    return TrigPoly(n, coeffs), s
