"""Symplectic reduction of secular Hamiltonians to Generic Standard Form.

Around a simple resonance k the averaged (secular) Hamiltonian

    Hsec(yt, theta) = 0.5 |A^T yt|^2 + eps g_o(A^T yt) + eps g(A^T yt, theta)

is driven through three exact symplectic maps:

  Phi1  the rational shear (U Y, U^{-T} X) that block-diagonalizes the
        kinetic form: Hsec o Phi1 = (|k|^2/2) Hsharp + 0.5|P_k^perp Ahat^T Yhat|^2
        with Hsharp(Y, X1) = Y1^2 + Gsharp_o(Y) + Gsharp(Y, X1);
  Phi2  the fixed-point shift Y1 = P1 + ptilde(Phat, Q1) generated by
        P.X + phi(Phat, X1), where p solves p = -0.5 d_{Y1}[Gsharp_o+Gsharp](p)
        (a 1/8-contraction under the smallness hypothesis); by Taylor's
        formula Hsharp o Phi2 = (1 + nutilde)(P1 - p_o)^2 + G0(Phat) + G(Phat, Q1);
  Phi3  the momentum translation P1 = p1 + p_o(phat) placing the secular
        equilibria on the angle axis.

The outcome is the 1-DOF Hamiltonian (1 + nu(p, q1)) p1^2 + G(phat, q1) with
reference potential Gbar = eps_k pi_k f, characteristics
(Dhat, R, r, sigma, m, eps_hat, lambda) and the single scale parameter

    kappa = max{c2, 4 c_s, c_s / beta},   c2 = 4 n^{3/2} c1,
    c1 = 5 n (n-1)^{(n-1)/2},             c_s = max{1, 1/s},

which is independent of the resonance label k.

Config note: the fully certified asymptotic regime additionally requires the
inner cutoff K0 to exceed a dimensional gate (at least c2, plus an inexplicit
averaging constant).  Nothing here assumes that gate is satisfied: every
estimate-style statement is emitted as a pass/fail flag with margins, and the
exact algebraic identities hold at any parameter values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cover import CoveringParams
from .fourier import Mode, OneDTrigPoly, TrigPoly, TWO_PI, l1, project_lattice
from .genericity import c_s, threshold_N
from .lieseries import AveragedNF, TaylorFourierSeries
from .morse import critical_points
from .unimodular import DecouplingMatrix, UnimodularMatrix, complete_to_sl, decoupling_matrix

GRID = 256            # q1 collocation grid (spectral accuracy for analytic data)
GAUSS_NODES = 32      # Taylor-integral quadrature nodes
FD_FRACTION = 0.02    # finite-difference step relative to the action radius


# --------------------------------------------------------------------------
# potential interfaces: anything with value/dY1/d2Y1/dY1_dq1/dY1_dph
# --------------------------------------------------------------------------

@dataclass
class PolyTrig1:
    """Real function sum c Y1^d phat^m (a cos(j q1) + b sin(j q1)).

    terms: dict[(d, m, j)] -> (a, b); the benchmark implementation of the
    decoupled potential with closed-form derivatives.
    """

    n_hat: int
    terms: dict[tuple[int, tuple[int, ...], int], tuple[float, float]]

    def _trig(self, j: int, q1: float, da: float, db: float) -> float:
        return da * math.cos(j * q1) + db * math.sin(j * q1)

    def value(self, Y1: float, ph, q1: float) -> float:
        ph = np.asarray(ph, dtype=float)
        total = 0.0
        for (d, m, j), (a, b) in self.terms.items():
            total += Y1 ** d * float(np.prod(ph ** np.array(m))) * self._trig(j, q1, a, b)
        return total

    def dY1(self, Y1, ph, q1) -> float:
        ph = np.asarray(ph, dtype=float)
        total = 0.0
        for (d, m, j), (a, b) in self.terms.items():
            if d >= 1:
                total += d * Y1 ** (d - 1) * float(np.prod(ph ** np.array(m))) * \
                    self._trig(j, q1, a, b)
        return total

    def d2Y1(self, Y1, ph, q1) -> float:
        ph = np.asarray(ph, dtype=float)
        total = 0.0
        for (d, m, j), (a, b) in self.terms.items():
            if d >= 2:
                total += d * (d - 1) * Y1 ** (d - 2) * \
                    float(np.prod(ph ** np.array(m))) * self._trig(j, q1, a, b)
        return total

    def dY1_dq1(self, Y1, ph, q1) -> float:
        ph = np.asarray(ph, dtype=float)
        total = 0.0
        for (d, m, j), (a, b) in self.terms.items():
            if d >= 1 and j != 0:
                total += d * Y1 ** (d - 1) * float(np.prod(ph ** np.array(m))) * \
                    j * (-a * math.sin(j * q1) + b * math.cos(j * q1))
        return total

    def dY1_dph(self, Y1, ph, q1) -> np.ndarray:
        ph = np.asarray(ph, dtype=float)
        out = np.zeros(self.n_hat)
        for (d, m, j), (a, b) in self.terms.items():
            if d < 1:
                continue
            base = d * Y1 ** (d - 1) * self._trig(j, q1, a, b)
            m = np.array(m)
            for i in range(self.n_hat):
                if m[i] >= 1:
                    mm = m.copy()
                    mm[i] -= 1
                    out[i] += base * m[i] * float(np.prod(ph ** mm))
        return out

    def dep_majorant(self, rY1: float, rph: float, width: float) -> float:
        """Bound on the Y1- or phat-dependent part over |Y1| <= rY1,
        |phat_i| <= rph, |Im q1| <= width."""
        total = 0.0
        for (d, m, j), (a, b) in self.terms.items():
            if d == 0 and sum(m) == 0:
                continue
            total += (abs(a) + abs(b)) * rY1 ** d * rph ** sum(m) * math.exp(j * width)
        return total


class SecularSeriesPotential:
    """Pipeline implementation: eps_k * g(A^T U Y, theta) with g a resonance-line
    Taylor x Fourier series around the averaging base point."""

    def __init__(self, series: TaylorFourierSeries, k: Mode, affine: np.ndarray,
                 base_point: np.ndarray, scale: float):
        self.k = tuple(int(v) for v in k)
        self.affine = affine            # y = affine @ (Y1, phat)
        self.base_point = base_point
        self.scale = scale
        self.n = len(base_point)
        self._main = self._compile(series)
        d1 = series.directional_derivative(affine[:, 0])
        self._d1 = self._compile(d1)
        self._d2 = self._compile(d1.directional_derivative(affine[:, 0]))
        self._dph = [
            self._compile(d1.directional_derivative(affine[:, i]))
            for i in range(1, self.n)
        ]
        self._series = series

    def _compile(self, series: TaylorFourierSeries):
        terms = series.ray_terms(self.k)
        if not terms:
            return None
        J = np.array([t[0] for t in terms], dtype=float)
        M = np.array([t[1] for t in terms], dtype=float).reshape(len(terms), self.n)
        C = np.array([t[2] for t in terms])
        return J, M, C

    def _eval(self, compiled, Y1, ph, q1) -> float:
        if compiled is None:
            return 0.0
        J, M, C = compiled
        Y = np.concatenate([[Y1], np.asarray(ph, dtype=float)])
        w = self.affine @ Y - self.base_point
        wp = np.where(M > 0, np.power(w[None, :], M), 1.0)
        return self.scale * float(np.real(np.sum(C * np.prod(wp, axis=1) * np.exp(1j * J * q1))))

    def value(self, Y1, ph, q1):
        return self._eval(self._main, Y1, ph, q1)

    def dY1(self, Y1, ph, q1):
        return self._eval(self._d1, Y1, ph, q1)

    def d2Y1(self, Y1, ph, q1):
        return self._eval(self._d2, Y1, ph, q1)

    def dY1_dq1(self, Y1, ph, q1):
        if self._d1 is None:
            return 0.0
        J, M, C = self._d1
        Y = np.concatenate([[Y1], np.asarray(ph, dtype=float)])
        w = self.affine @ Y - self.base_point
        wp = np.where(M > 0, np.power(w[None, :], M), 1.0)
        return self.scale * float(np.real(
            np.sum(C * (1j * J) * np.prod(wp, axis=1) * np.exp(1j * J * q1))
        ))

    def dY1_dph(self, Y1, ph, q1) -> np.ndarray:
        return np.array([self._eval(c, Y1, ph, q1) for c in self._dph])


class CombinedPotential:
    """Sum of two potentials sharing the derivative interface."""

    def __init__(self, *parts):
        self.parts = [p for p in parts if p is not None]
        self.n_hat = getattr(self.parts[0], "n_hat", None) if self.parts else None

    def value(self, Y1, ph, q1):
        return sum(p.value(Y1, ph, q1) for p in self.parts)

    def dY1(self, Y1, ph, q1):
        return sum(p.dY1(Y1, ph, q1) for p in self.parts)

    def d2Y1(self, Y1, ph, q1):
        return sum(p.d2Y1(Y1, ph, q1) for p in self.parts)

    def dY1_dq1(self, Y1, ph, q1):
        return sum(p.dY1_dq1(Y1, ph, q1) for p in self.parts)

    def dY1_dph(self, Y1, ph, q1):
        return sum(np.asarray(p.dY1_dph(Y1, ph, q1)) for p in self.parts)


# --------------------------------------------------------------------------
# characteristics and kappa
# --------------------------------------------------------------------------

def c1_constant(n: int) -> float:
    return 5.0 * n * (n - 1) ** ((n - 1) / 2.0)


def c2_constant(n: int) -> float:
    return 4.0 * n ** 1.5 * c1_constant(n)


def kappa_uniform(n: int, s: float, beta: float) -> float:
    """kappa(n, s, beta) = max{c2, 4 c_s, c_s/beta}: independent of k."""
    return max(c2_constant(n), 4.0 * c_s(s), c_s(s) / beta)


@dataclass
class DhatDomain:
    """Adiabatic-action domain: |P_k^perp Ahat^T phat| < 1 and all transverse
    gaps |(P_k^perp Ahat^T phat).l| >= 3 alpha K/|k| off the line Z k."""

    um: UnimodularMatrix
    params: CoveringParams

    def _pulled(self, phat) -> np.ndarray:
        ahat_t = np.array(self.um.A_hat, dtype=float).T
        v = ahat_t @ np.asarray(phat, dtype=float)
        k = np.array(self.um.k, dtype=float)
        return v - (v @ k) / (k @ k) * k

    def contains(self, phat) -> bool:
        v = self._pulled(phat)
        if np.linalg.norm(v) >= 1.0:
            return False
        k = self.um.k
        thr = self.params.r1_threshold(k)
        for ell in self.params.generators_K:
            if ell == k:
                continue
            if abs(float(v @ np.array(ell, dtype=float))) < thr:
                return False
        return True

    def sample(self, count: int, seed: int = 0, box: float = 1.0,
               max_tries: int = 200_000) -> np.ndarray:
        """Rejection sampling from the bounding box [-box, box]^{n-1}."""
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(max_tries):
            cand = rng.uniform(-box, box, self.um.n - 1)
            if self.contains(cand):
                out.append(cand)
                if len(out) == count:
                    break
        if len(out) < count:
            raise RuntimeError("adiabatic domain sampling failed; box too large?")
        return np.array(out)


@dataclass
class Characteristics:
    """(Dhat, R, r, sigma, m, eps_hat, lam) plus kappa and branch data."""

    k: Mode
    n: int
    s: float
    R: float
    r: float
    sigma: float
    m: float
    eps_hat: float
    lam: float
    kappa: float
    eps_k: float
    chi_k: float
    s_breve: float
    branch: str
    c1: float
    c2: float
    c_s: float
    N: float
    D_hat: DhatDomain | None = None

    def to_dict(self) -> dict:
        return {
            "k": list(self.k),
            "R": self.R,
            "r": self.r,
            "sigma": self.sigma,
            "m": self.m,
            "eps_hat": self.eps_hat,
            "lambda": self.lam,
            "kappa": self.kappa,
            "eps_k": self.eps_k,
            "chi_k": self.chi_k,
            "s_breve": self.s_breve,
            "branch": self.branch,
            "c1": self.c1,
            "c2": self.c2,
            "c_s": self.c_s,
            "N": self.N,
        }


def characteristics(
    k: Mode,
    n: int,
    s: float,
    eps: float,
    beta: float,
    f: TrigPoly,
    params: CoveringParams,
    delta: float = 1.0,
    um: UnimodularMatrix | None = None,
) -> Characteristics:
    """Analyticity characteristics of the standard form at resonance k.

    Low modes (|k|_1 < N) take the Morse constant from the class parameter
    beta; high modes take it from the leading coefficient |f_k|.  kappa is
    the same for every k.
    """
    k = tuple(int(v) for v in k)
    kk = math.sqrt(sum(v * v for v in k))
    c1 = c1_constant(n)
    c2 = c2_constant(n)
    cs = c_s(s)
    N = threshold_N(n, s, delta)
    R = params.alpha / kk ** 2
    r = R / c2
    eps_k = 2.0 * eps / kk ** 2
    lam = float(params.K) ** (-5 * n)
    if l1(k) < N:
        branch = "low"
        m = eps_k * beta
        chi = 1.0
        sigma = min(s / 2.0, 1.0)
        s_breve = params.s_k_prime(k)
    else:
        branch = "high"
        fk = abs(f.coeff(k))
        m = eps_k * fk
        chi = fk
        sigma = 1.0
        s_breve = 1.0
    eps_hat = 4.0 * cs * eps_k * chi
    dhat = DhatDomain(um, params) if um is not None else None
    return Characteristics(
        k=k, n=n, s=s, R=R, r=r, sigma=sigma, m=m, eps_hat=eps_hat, lam=lam,
        kappa=kappa_uniform(n, s, beta), eps_k=eps_k, chi_k=chi, s_breve=s_breve,
        branch=branch, c1=c1, c2=c2, c_s=cs, N=N, D_hat=dhat,
    )


# --------------------------------------------------------------------------
# secular Hamiltonian and the kinetic decoupling Phi1
# --------------------------------------------------------------------------

@dataclass
class SecularHam:
    """0.5|A^T yt|^2 + eps g_o(A^T yt) + eps g(A^T yt, theta) built from a
    resonant averaged normal form (series around the averaging base point)."""

    um: UnimodularMatrix
    eps: float
    g_o_series: TaylorFourierSeries
    g_series: TaylorFourierSeries
    base_point: np.ndarray
    k: Mode

    @classmethod
    def from_averaged(cls, nf: AveragedNF, um: UnimodularMatrix) -> "SecularHam":
        if nf.kind != "resonant" or nf.g_res is None:
            raise ValueError("secular Hamiltonian needs a resonant normal form")
        g_o = nf.g_o[1].like()
        g = nf.g_res[1].like()
        for j in range(1, nf.order + 1):
            w = nf.epsilon ** (j - 1)
            g_o = g_o.plus(nf.g_o[j].scaled(w))
            g = g.plus(nf.g_res[j].scaled(w))
        return cls(
            um=um, eps=nf.epsilon, g_o_series=g_o, g_series=g,
            base_point=nf.base_point, k=nf.res_k,
        )

    def value(self, yt, theta: float) -> float:
        at = np.array(self.um.rows, dtype=float).T
        y = at @ np.asarray(yt, dtype=float)
        zero_x = np.zeros(len(self.base_point))
        g_o = self.g_o_series.evaluate(y, zero_x).real
        # the g series depends on x only through theta = k.x; evaluate on a
        # representative x with k.x = theta via the ray decomposition
        g = _ray_value(self.g_series, self.k, y, theta)
        return 0.5 * float(y @ y) + self.eps * (g_o + g)


def _ray_value(series: TaylorFourierSeries, k: Mode, y, theta: float) -> float:
    total = 0.0 + 0.0j
    w = np.asarray(y, dtype=float) - series.base_point
    for (j, m, c) in series.ray_terms(k):
        mono = 1.0
        for wi, mi in zip(w, m):
            if mi:
                mono *= wi ** mi
        total += c * mono * np.exp(1j * j * theta)
    return float(total.real)


@dataclass
class DecoupledForm:
    """Hsharp(Y, X1) = Y1^2 + Gf(Y1, phat, X1) with Gf = Gsharp_o + Gsharp,
    plus the adiabatic part 0.5|P_k^perp Ahat^T phat|^2 split off by Phi1."""

    Gf: object                 # combined potential with the derivative interface
    G_osc: object | None       # the oscillatory part alone (zero q1 average)
    adiabatic: object          # callable(phat) -> float
    r: float
    s_breve: float
    theta_o_bound: float
    n_hat: int
    um: UnimodularMatrix | None = None
    dm: DecouplingMatrix | None = None
    secular: SecularHam | None = None
    eps_k: float | None = None

    def value(self, Y1, ph, q1) -> float:
        return Y1 * Y1 + self.Gf.value(Y1, ph, q1)

    def hypothesis_ok(self) -> bool:
        """Smallness gate theta_o/r^2 < 2^-10 s_breve/(pi + s_breve)."""
        return (
            self.theta_o_bound / self.r ** 2
            < 2.0 ** -10 * self.s_breve / (math.pi + self.s_breve)
        )


def build_phi1(secular: SecularHam, params: CoveringParams,
               r: float | None = None, s_breve: float | None = None,
               theta_o_bound: float | None = None) -> DecoupledForm:
    """Apply the rational shear and return the decoupled 1-DOF form.

    The exact identity Hsec o Phi1 = (|k|^2/2) Hsharp + adiabatic holds by the
    kinetic split |A^T U Y|^2 = |k|^2 Y1^2 + |P_k^perp Ahat^T Yhat|^2.
    """
    um = secular.um
    dm = decoupling_matrix(um)
    k = secular.k
    kk2 = float(sum(v * v for v in k))
    eps_k = 2.0 * secular.eps / kk2
    at = np.array(um.rows, dtype=float).T
    U = np.array([[float(x) for x in row] for row in dm.U])
    affine = at @ U  # y = affine @ Y; first column equals k exactly
    n = um.n

    g_o_pot = SecularSeriesPotential(
        secular.g_o_series, k, affine, secular.base_point, eps_k
    ) if not secular.g_o_series.is_empty else None
    g_pot = SecularSeriesPotential(
        secular.g_series, k, affine, secular.base_point, eps_k
    ) if not secular.g_series.is_empty else None
    ahat_t = np.array(um.A_hat, dtype=float).T
    kv = np.array(k, dtype=float)

    def adiabatic(phat) -> float:
        v = ahat_t @ np.asarray(phat, dtype=float)
        v = v - (v @ kv) / (kv @ kv) * kv
        return 0.5 * float(v @ v)

    if r is None or s_breve is None or theta_o_bound is None:
        raise ValueError("build_phi1 needs the domain data (r, s_breve, theta_o_bound)")
    return DecoupledForm(
        Gf=CombinedPotential(g_o_pot, g_pot),
        G_osc=g_pot,
        adiabatic=adiabatic,
        r=r,
        s_breve=s_breve,
        theta_o_bound=theta_o_bound,
        n_hat=n - 1,
        um=um,
        dm=dm,
        secular=secular,
        eps_k=eps_k,
    )


def phi1_identity_residual(form: DecoupledForm, points, thetas) -> float:
    """max |Hsec(Phi1(Y, X1)) - ((|k|^2/2) Hsharp + adiabatic)| over samples."""
    sec = form.secular
    U = np.array([[float(x) for x in row] for row in form.dm.U])
    kk2 = float(sum(v * v for v in sec.k))
    worst = 0.0
    for Y, theta in zip(points, thetas):
        Y = np.asarray(Y, dtype=float)
        yt = U @ Y
        lhs = sec.value(yt, theta)
        rhs = 0.5 * kk2 * form.value(Y[0], Y[1:], theta) + form.adiabatic(Y[1:])
        worst = max(worst, abs(lhs - rhs))
    return worst


# --------------------------------------------------------------------------
# fixed point of the momentum shift (Phi2) and the final translation (Phi3)
# --------------------------------------------------------------------------

class FixedPointDivergence(RuntimeError):
    pass


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_NODES)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


@dataclass
class FixedPointSolution:
    """Solution p(phat, q1) of p = -0.5 d_{Y1} Gf(p, phat, q1).

    p_o is the angle average, ptilde = p - p_o; phi is the periodic primitive
    of ptilde and q_hat = -d_phat phi.  The empirical contraction factor must
    stay below 1/8 (+ roundoff) whenever the smallness hypothesis holds.
    """

    form: DecoupledForm
    residual: float
    contraction: float
    iterations: int
    hypothesis_ok: bool
    p_sup: float
    pitale_bound: float
    pitale_ok: bool
    base_phat: np.ndarray = None
    grid: int = GRID
    tol: float = 1e-14
    _cache: dict = field(default_factory=dict)

    # -- scalar and grid solvers -------------------------------------------

    def solve_at(self, phat, q1: float) -> float:
        Gf = self.form.Gf
        ph = np.asarray(phat, dtype=float)
        u = 0.0
        for _ in range(200):
            nxt = -0.5 * Gf.dY1(u, ph, q1)
            if abs(nxt - u) < self.tol:
                return nxt
            u = nxt
        raise FixedPointDivergence("pointwise fixed-point iteration stalled")

    def _grid_key(self, phat) -> tuple:
        return tuple(np.round(np.asarray(phat, dtype=float), 14))

    def p_grid(self, phat) -> np.ndarray:
        key = ("p", self._grid_key(phat))
        if key not in self._cache:
            theta = np.arange(self.grid) * (TWO_PI / self.grid)
            self._cache[key] = np.array([self.solve_at(phat, t) for t in theta])
        return self._cache[key]

    def p_o(self, phat) -> float:
        return float(np.mean(self.p_grid(phat)))

    def p_tilde(self, phat, q1: float) -> float:
        return self.solve_at(phat, q1) - self.p_o(phat)

    # -- spectral antiderivative and phat derivatives -----------------------

    @staticmethod
    def _antiderivative_at(values: np.ndarray, x: float) -> float:
        """int_0^x of the zero-average trig interpolant of grid values."""
        m = len(values)
        vals = values - values.mean()
        coeff = np.fft.rfft(vals) / m
        j = np.arange(1, len(coeff))
        terms = coeff[1:] * (np.exp(1j * j * x) - 1.0) / (1j * j)
        return float(2.0 * np.real(np.sum(terms)))

    def phi(self, phat, x1: float) -> float:
        return self._antiderivative_at(self.p_grid(phat), x1)

    def p_ph(self, phat, q1: float) -> np.ndarray:
        """d p / d phat by implicit differentiation of the fixed-point equation."""
        Gf = self.form.Gf
        ph = np.asarray(phat, dtype=float)
        p = self.solve_at(phat, q1)
        denom = 1.0 + 0.5 * Gf.d2Y1(p, ph, q1)
        return -0.5 * np.asarray(Gf.dY1_dph(p, ph, q1)) / denom

    def p_q(self, phat, q1: float) -> float:
        Gf = self.form.Gf
        ph = np.asarray(phat, dtype=float)
        p = self.solve_at(phat, q1)
        denom = 1.0 + 0.5 * Gf.d2Y1(p, ph, q1)
        return -0.5 * Gf.dY1_dq1(p, ph, q1) / denom

    def p_ph_grid(self, phat) -> np.ndarray:
        key = ("pph", self._grid_key(phat))
        if key not in self._cache:
            theta = np.arange(self.grid) * (TWO_PI / self.grid)
            self._cache[key] = np.array([self.p_ph(phat, t) for t in theta])
        return self._cache[key]

    def d_po_dph(self, phat) -> np.ndarray:
        return np.asarray(self.p_ph_grid(phat).mean(axis=0))

    def q_hat(self, phat, q1: float) -> np.ndarray:
        """-d_phat phi(phat, q1), componentwise spectral antiderivative."""
        grid_vals = self.p_ph_grid(phat)
        return -np.array([
            self._antiderivative_at(grid_vals[:, i], q1)
            for i in range(grid_vals.shape[1])
        ])


def solve_fixed_point(form: DecoupledForm, phat, tol: float = 1e-14) -> FixedPointSolution:
    """Iterate u <- -0.5 d_{Y1} Gf(u, phat, .) on the spectral grid.

    Records the empirical contraction factor and residual; checks the |p|
    bound theta_o/(3r).  A step ratio >= 1 raises FixedPointDivergence.  When
    the smallness hypothesis fails the solver still runs, flagged as outside
    the certified regime.
    """
    ph = np.asarray(phat, dtype=float)
    theta = np.arange(GRID) * (TWO_PI / GRID)
    Gf = form.Gf
    u = np.zeros(GRID)
    contraction = 0.0
    prev_step = None
    residual = math.inf
    for it in range(1, 200):
        nxt = np.array([-0.5 * Gf.dY1(u[i], ph, theta[i]) for i in range(GRID)])
        step = float(np.max(np.abs(nxt - u)))
        residual = float(np.max(np.abs(nxt + 0.5 * np.array(
            [Gf.dY1(nxt[i], ph, theta[i]) for i in range(GRID)]
        ))))
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            contraction = max(contraction, ratio)
            if ratio >= 1.0:
                raise FixedPointDivergence(f"contraction failed: step ratio {ratio:.3f}")
        prev_step = step
        u = nxt
        if residual < tol:
            break
    else:
        raise FixedPointDivergence(f"no convergence below {tol}")
    theta_o = form.theta_o_bound
    p_sup = float(np.max(np.abs(u)))
    pitale = theta_o / (3.0 * form.r)
    sol = FixedPointSolution(
        form=form,
        residual=residual,
        contraction=contraction,
        iterations=it,
        hypothesis_ok=form.hypothesis_ok(),
        p_sup=p_sup,
        pitale_bound=pitale,
        pitale_ok=p_sup < pitale,
        base_phat=ph.copy(),
        tol=tol,
    )
    sol._cache[("p", sol._grid_key(ph))] = u
    return sol


# --------------------------------------------------------------------------
# transform objects with Jacobians
# --------------------------------------------------------------------------

def _fd_gradient(fun, x: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences, one row per output component."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = 1.0
        f1 = np.asarray(fun(x + 2 * h * e))
        f2 = np.asarray(fun(x + h * e))
        f3 = np.asarray(fun(x - h * e))
        f4 = np.asarray(fun(x - 2 * h * e))
        cols.append((-f1 + 8 * f2 - 8 * f3 + f4) / (12 * h))
    return np.array(cols).T


def omega_matrix(n: int) -> np.ndarray:
    O = np.zeros((2 * n, 2 * n))
    O[:n, n:] = np.eye(n)
    O[n:, :n] = -np.eye(n)
    return O


class ShearMap:
    """Momentum-shear group element: (p, q) -> (p1 + tau(phat), phat, q1,
    qhat - q1 dtau(phat)); symplectic for every smooth tau."""

    def __init__(self, n: int, tau, dtau, d2tau=None, fd_step: float = 1e-4):
        self.n = n
        self.tau = tau
        self.dtau = dtau
        self.d2tau = d2tau
        self.fd_step = fd_step

    def apply(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        p, q = z[:n], z[n:]
        ph = p[1:]
        out = z.astype(float).copy()
        out[0] = p[0] + float(self.tau(ph))
        out[n + 1:] = q[1:] - q[0] * np.asarray(self.dtau(ph))
        return out

    def inverse(self) -> "ShearMap":
        return ShearMap(
            self.n,
            lambda ph: -self.tau(ph),
            lambda ph: -np.asarray(self.dtau(ph)),
            None if self.d2tau is None else (lambda ph: -np.asarray(self.d2tau(ph))),
            self.fd_step,
        )

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        ph = z[1:n]
        q1 = z[n]
        J = np.eye(2 * n)
        dtau = np.asarray(self.dtau(ph))
        J[0, 1:n] = dtau
        if self.d2tau is not None:
            hess = np.asarray(self.d2tau(ph))
        else:
            hess = _fd_gradient(lambda x: np.asarray(self.dtau(x)), ph, self.fd_step)
        J[n + 1:, 1:n] = -q1 * hess
        J[n + 1:, n] = -dtau
        return J


class Phi2Map:
    """The generating-function map of the fixed-point shift:
    Y1 = P1 + ptilde(Phat, Q1), X̂ = Q̂ + q_hat(Phat, Q1)."""

    def __init__(self, fp: FixedPointSolution, n: int, fd_step: float):
        self.fp = fp
        self.n = n
        self.fd_step = fd_step

    def apply(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        P, Q = z[:n], z[n:]
        ph = P[1:]
        out = z.astype(float).copy()
        out[0] = P[0] + self.fp.p_tilde(ph, Q[0])
        out[n + 1:] = Q[1:] + self.fp.q_hat(ph, Q[0])
        return out

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        fp = self.fp
        ph = z[1:n]
        q1 = z[n]
        J = np.eye(2 * n)
        p_ph = fp.p_ph(ph, q1) - fp.d_po_dph(ph)      # d ptilde / d phat
        p_q = fp.p_q(ph, q1)                           # d ptilde / d q1
        J[0, 1:n] = p_ph
        J[0, n] = p_q
        # X̂ rows: d q_hat/d phat by finite differences, d q_hat/d q1 = -p_ph
        dqhat_dph = _fd_gradient(lambda x: fp.q_hat(x, q1), ph, self.fd_step)
        J[n + 1:, 1:n] = dqhat_dph
        J[n + 1:, n] = -p_ph
        return J


class LinearSymplectic:
    """Block map (Y, X) -> (U Y, U^{-T} X)."""

    def __init__(self, U: np.ndarray):
        self.U = U
        self.Uinv_t = np.linalg.inv(U).T
        n = U.shape[0]
        self.J = np.zeros((2 * n, 2 * n))
        self.J[:n, :n] = U
        self.J[n:, n:] = self.Uinv_t
        self.n = n

    def apply(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        return np.concatenate([self.U @ z[:n], self.Uinv_t @ z[n:]])

    def jacobian(self, _z: np.ndarray) -> np.ndarray:
        return self.J


class ComposedMap:
    """maps[0] o maps[1] o ... (rightmost applied first)."""

    def __init__(self, maps):
        self.maps = list(maps)

    def apply(self, z: np.ndarray) -> np.ndarray:
        for m in reversed(self.maps):
            z = m.apply(z)
        return z

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        J = None
        for m in reversed(self.maps):
            Jm = m.jacobian(z)
            J = Jm if J is None else Jm @ J
            z = m.apply(z)
        return J


def symplectic_check(transform, points) -> float:
    """max over points of |J^T Omega J - Omega| (max entry)."""
    worst = 0.0
    for z in points:
        z = np.asarray(z, dtype=float)
        J = transform.jacobian(z)
        n = J.shape[0] // 2
        O = omega_matrix(n)
        worst = max(worst, float(np.max(np.abs(J.T @ O @ J - O))))
    return worst


def shear_group_residual(a: ShearMap, b: ShearMap, points) -> float:
    """max |Psi_a(Psi_b(z)) - Psi_{a+b}(z)|: the abelian group law."""
    ab = ShearMap(
        a.n,
        lambda ph: a.tau(ph) + b.tau(ph),
        lambda ph: np.asarray(a.dtau(ph)) + np.asarray(b.dtau(ph)),
    )
    worst = 0.0
    for z in points:
        z = np.asarray(z, dtype=float)
        worst = max(worst, float(np.max(np.abs(a.apply(b.apply(z)) - ab.apply(z)))))
    return worst


# --------------------------------------------------------------------------
# the standard form
# --------------------------------------------------------------------------

@dataclass
class StandardFormHam:
    """(1 + nu(p, q1)) p1^2 + G(phat, q1) with reference potential Gbar."""

    k: Mode
    n: int
    eps: float
    chars: Characteristics
    fp: FixedPointSolution
    form: DecoupledForm
    G_bar: OneDTrigPoly
    phi1: LinearSymplectic | None
    phi2: Phi2Map
    phi3: ShearMap

    def nu_tilde(self, P1: float, phat, q1: float) -> float:
        """int_0^1 (1-t) d2_{Y1} Gf(p_o + t(P1 - p_o)) dt by Gauss-Legendre."""
        ph = np.asarray(phat, dtype=float)
        p_o = self.fp.p_o(ph)
        pts = p_o + _GL_T * (P1 - p_o)
        vals = np.array([self.form.Gf.d2Y1(pt, ph, q1) for pt in pts])
        return float(np.sum(_GL_W * (1.0 - _GL_T) * vals))

    def nu(self, p1: float, phat, q1: float) -> float:
        return self.nu_tilde(self.fp.p_o(phat) + p1, phat, q1)

    def G0(self, phat) -> float:
        ph = np.asarray(phat, dtype=float)
        key = ("G0", self.fp._grid_key(ph))
        cached = self.fp._cache.get(key)
        if cached is not None:
            return cached
        pg = self.fp.p_grid(ph)
        theta = np.arange(GRID) * (TWO_PI / GRID)
        gvals = np.array([self.form.Gf.value(pg[i], ph, theta[i]) for i in range(GRID)])
        out = float(np.mean(pg ** 2) + np.mean(gvals))
        self.fp._cache[key] = out
        return out

    def G(self, phat, q1: float) -> float:
        ph = np.asarray(phat, dtype=float)
        p = self.fp.solve_at(ph, q1)
        return p * p + self.form.Gf.value(p, ph, q1) - self.G0(ph)

    def h0(self, phat) -> float:
        kk2 = float(sum(v * v for v in self.k))
        return self.G0(phat) + 2.0 * self.form.adiabatic(phat) / kk2

    def value(self, p, q1: float) -> float:
        p = np.asarray(p, dtype=float)
        return (1.0 + self.nu(p[0], p[1:], q1)) * p[0] ** 2 + self.G(p[1:], q1)

    def phi_diamond(self) -> ComposedMap:
        maps = [self.phi2, self.phi3]
        if self.phi1 is not None:
            maps.insert(0, self.phi1)
        return ComposedMap(maps)

    def check_reduction_identity(self, points, q1s) -> float:
        """max |Hsharp(Phi2(Phi3(p, q1))) - ((1+nu)p1^2 + G0 + G)|."""
        worst = 0.0
        for p, q1 in zip(points, q1s):
            p = np.asarray(p, dtype=float)
            ph = p[1:]
            Y1 = p[0] + self.fp.p_o(ph) + self.fp.p_tilde(ph, q1)
            lhs = Y1 * Y1 + self.form.Gf.value(Y1, ph, q1)
            rhs = (
                (1.0 + self.nu(p[0], ph, q1)) * p[0] ** 2
                + self.G0(ph)
                + self.G(ph, q1)
            )
            worst = max(worst, abs(lhs - rhs))
        return worst


def build_phi2_phi3(fp: FixedPointSolution, chars: Characteristics,
                    G_bar: OneDTrigPoly, phi1: LinearSymplectic | None = None,
                    fd_step: float | None = None) -> StandardFormHam:
    """Assemble the standard form and its three transforms from a converged
    fixed point."""
    form = fp.form
    n = form.n_hat + 1
    fd = FD_FRACTION * form.r if fd_step is None else fd_step
    phi3 = ShearMap(n, fp.p_o, fp.d_po_dph, fd_step=fd)
    phi2 = Phi2Map(fp, n, fd_step=fd)
    eps = chars.eps_k * float(sum(v * v for v in chars.k)) / 2.0
    return StandardFormHam(
        k=chars.k, n=n, eps=eps,
        chars=chars, fp=fp, form=form, G_bar=G_bar,
        phi1=phi1, phi2=phi2, phi3=phi3,
    )


# --------------------------------------------------------------------------
# verification of the standard-form estimates
# --------------------------------------------------------------------------

@dataclass
class StandardFormReport:
    flags: dict
    passed: bool

    def to_dict(self) -> dict:
        return {"flags": self.flags, "passed": self.passed}


def verify_standard(
    sf: StandardFormHam,
    phat_samples: np.ndarray,
    morse_oracle: bool = True,
) -> StandardFormReport:
    """Check every standard-form estimate with margins.

    sup|Gbar| vs eps_hat, sup|G - Gbar| vs eps_hat*lambda, sup|nu| vs lambda,
    |h0 - adiabatic pullback| vs 6 eps_k lambda, the band 1/2 <= eps_hat/m <=
    kappa, 1/kappa <= sigma <= 1, 1 <= R/r <= kappa, and the Morse constant of
    Gbar against its branch value.  Each flag reports (value, bound, margin).
    """
    ch = sf.chars
    flags: dict[str, dict] = {}

    def put(name, value, bound, ok, margin=None):
        flags[name] = {
            "value": value,
            "bound": bound,
            "ok": bool(ok),
            "margin": (bound - value) if margin is None else margin,
        }

    # sup |Gbar| over the sigma strip via the coefficient majorant
    gbar_sup = 2.0 * sum(
        abs(c) * math.exp(j * ch.sigma) for j, c in sf.G_bar.coeffs.items()
    )
    put("gbar_sup_le_eps_hat", gbar_sup, ch.eps_hat, gbar_sup <= ch.eps_hat)

    # sup |G - Gbar| over real phat samples x q1 grid
    theta = np.arange(GRID) * (TWO_PI / GRID)
    gbar_grid = sf.G_bar.values_on_grid(GRID)
    worst_dev = 0.0
    for ph in phat_samples:
        gv = np.array([sf.G(ph, t) for t in theta])
        worst_dev = max(worst_dev, float(np.max(np.abs(gv - gbar_grid))))
    put("g_minus_gbar_le_eps_hat_lambda", worst_dev, ch.eps_hat * ch.lam,
        worst_dev <= ch.eps_hat * ch.lam)

    # sup |nu| over samples
    worst_nu = 0.0
    rng = np.random.default_rng(7)
    for ph in phat_samples:
        for q1 in rng.uniform(0, TWO_PI, 8):
            p1 = rng.uniform(-ch.r, ch.r)
            worst_nu = max(worst_nu, abs(sf.nu(p1, ph, q1)))
    put("nu_le_lambda", worst_nu, ch.lam, worst_nu <= ch.lam)

    # |h0 - |P_perp Ahat^T phat|^2/|k|^2| = |G0| <= 6 eps_k lambda
    worst_h0 = max(abs(sf.G0(ph)) for ph in phat_samples)
    put("h0_dev_le_6_eps_k_lambda", worst_h0, 6.0 * ch.eps_k * ch.lam,
        worst_h0 <= 6.0 * ch.eps_k * ch.lam)

    # scale bands
    ratio = ch.eps_hat / ch.m
    put("eps_hat_over_m_band", ratio, [0.5, ch.kappa],
        0.5 <= ratio <= ch.kappa, margin=min(ratio - 0.5, ch.kappa - ratio))
    put("sigma_band", ch.sigma, [1.0 / ch.kappa, 1.0],
        1.0 / ch.kappa <= ch.sigma <= 1.0,
        margin=min(ch.sigma - 1.0 / ch.kappa, 1.0 - ch.sigma))
    rr = ch.R / ch.r
    put("R_over_r_band", rr, [1.0, ch.kappa], 1.0 <= rr <= ch.kappa,
        margin=min(rr - 1.0, ch.kappa - rr))
    put("eps_hat_le_r2_216", ch.eps_hat, ch.r ** 2 / 2 ** 16,
        ch.eps_hat <= ch.r ** 2 / 2 ** 16)

    if morse_oracle and not sf.G_bar.is_zero:
        rep = critical_points(sf.G_bar)
        put("gbar_morse_ge_m", ch.m, rep.beta, rep.beta >= ch.m * (1 - 1e-9))
        flags["gbar_morse_computed"] = {"value": rep.beta, "bound": ch.m,
                                        "ok": rep.beta >= ch.m * (1 - 1e-9),
                                        "margin": rep.beta - ch.m}

    passed = all(v["ok"] for v in flags.values())
    return StandardFormReport(flags=flags, passed=passed)


# --------------------------------------------------------------------------
# full pipeline driver
# --------------------------------------------------------------------------

def standardize(
    f: TrigPoly,
    s: float,
    eps: float,
    k: Mode,
    params: CoveringParams,
    y0,
    beta: float,
    delta: float = 1.0,
    order: int = 2,
    max_degree: int = 3,
) -> StandardFormHam:
    """Run resonant averaging at k and reduce the secular Hamiltonian to
    Generic Standard Form; returns the assembled Hamiltonian with transforms."""
    from .lieseries import NaturalHam, lie_step_res

    k = tuple(int(v) for v in k)
    ham = NaturalHam(f.n, eps, f)
    nf = lie_step_res(ham, k, params, y0, order=order, max_degree=max_degree)
    um = complete_to_sl(k)
    secular = SecularHam.from_averaged(nf, um)
    chars = characteristics(k, f.n, s, eps, beta, f, params, delta=delta, um=um)

    # standard-form coordinates of the averaging base point: Y_c = U^{-1} A^{-T} y0
    dm = decoupling_matrix(um)
    at_inv = np.array(um.inverse, dtype=float).T  # A^{-T}
    Uinv = np.array([[float(x) for x in row] for row in dm.U_inv])
    Yc = Uinv @ (at_inv @ np.asarray(y0, dtype=float))
    phat0 = Yc[1:]

    # certified bound on |Gf - Gbar| over the working domain: series majorants
    # around the base point; the Y-excursion |Y1 - Y1c| <= 4r maps to a
    # y-polydisk of radius (4r + |Y1c|) |k|_inf plus the phat sampling slack
    eps_k = chars.eps_k
    pk = project_lattice(f, k)
    k_inf = max(abs(v) for v in k)
    r_y = (4.0 * chars.r + abs(Yc[0])) * k_inf + 4.0 * chars.r + 1e-15
    g_o_maj = secular.g_o_series.majorant(r_y, 0.0)
    diff = secular.g_series.copy()
    zero_m = (0,) * f.n
    for j, c in pk.coeffs.items():
        diff.add_term(tuple(j * v for v in k), zero_m, -c)
        diff.add_term(tuple(-j * v for v in k), zero_m, -complex(np.conj(c)))
    g_diff_maj = _ray_strip_majorant(diff, k, r_y, chars.s_breve)
    theta_o_bound = max(eps_k * g_o_maj, eps_k * g_diff_maj, 1e-300)

    form = build_phi1(secular, params, r=chars.r, s_breve=chars.s_breve,
                      theta_o_bound=theta_o_bound)
    fp = solve_fixed_point(form, phat0)
    G_bar = pk.scaled(eps_k)
    U = np.array([[float(x) for x in row] for row in dm.U])
    phi1 = LinearSymplectic(U)
    return build_phi2_phi3(fp, chars, G_bar, phi1=phi1)


def _ray_strip_majorant(series: TaylorFourierSeries, k: Mode, r: float,
                        width: float) -> float:
    return float(sum(
        abs(c) * r ** sum(m) * math.exp(abs(j) * width)
        for (j, m, c) in series.ray_terms(k)
    ))
