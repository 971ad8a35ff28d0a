"""Chebyshev approximations with Bernstein-ellipse error certificates."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numba import njit
from scipy.fft import dct
from scipy.signal import fftconvolve
from scipy.special import expit

GRID_POINTS = 10_000


@dataclass(frozen=True)
class ChebyshevApprox:
    """Truncated Chebyshev series ``sum_k coeffs[k] T_k(x)`` with an error certificate.

    Attributes
    ----------
    coeffs : ndarray
        Coefficients ``a_0 .. a_d`` (real or complex).
    target : dict
        Descriptor of the approximated function: ``name`` plus parameters.
    certified_bound : float
        Upper bound on ``max |target - p|`` over [-1, 1].
    provenance : str
        How ``certified_bound`` was obtained: ``"formula"`` (closed-form
        bound from the ellipse analysis), ``"bernstein"`` (raw ellipse bound),
        ``"measured"`` (grid error, not a proof) or ``"exact"``.
    target_sup : float or None
        Known upper bound on ``|target|`` over [-1, 1], if available.
    target_fn : callable or None
        Vectorized exact target; not serialized.
    """

    coeffs: np.ndarray
    target: dict
    certified_bound: float
    provenance: str = "measured"
    target_sup: float | None = None
    target_fn: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return eval_poly(self, x)

    def grid_error(self, points: int = GRID_POINTS) -> float:
        if self.target_fn is None:
            raise ValueError("target function not available")
        x = np.linspace(-1.0, 1.0, points)
        return float(np.max(np.abs(self.target_fn(x) - eval_poly(self, x))))

    def scaled(self, factor: complex) -> "ChebyshevApprox":
        """Approximation of ``factor * target`` with the bound scaled accordingly."""
        fn = self.target_fn
        return replace(
            self,
            coeffs=self.coeffs * factor,
            target={**self.target, "rescale": factor * self.target.get("rescale", 1.0)},
            certified_bound=self.certified_bound * abs(factor),
            target_sup=None if self.target_sup is None else self.target_sup * abs(factor),
            target_fn=None if fn is None else (lambda x, f=fn: factor * f(x)),
        )

    def to_record(self) -> str:
        c = np.asarray(self.coeffs)
        coeffs = (
            [[float(v.real), float(v.imag)] for v in c]
            if np.iscomplexobj(c)
            else [float(v) for v in c]
        )
        return json.dumps(
            {
                "target": _jsonable(self.target),
                "degree": self.degree,
                "certified_bound": self.certified_bound,
                "provenance": self.provenance,
                "target_sup": self.target_sup,
                "complex": bool(np.iscomplexobj(c)),
                "coeffs": coeffs,
            },
            sort_keys=True,
        )

    @classmethod
    def from_record(cls, text: str) -> "ChebyshevApprox":
        rec = json.loads(text)
        if rec["complex"]:
            coeffs = np.array([complex(re, im) for re, im in rec["coeffs"]])
        else:
            coeffs = np.array(rec["coeffs"], dtype=float)
        if len(coeffs) != rec["degree"] + 1:
            raise ValueError("record degree does not match coefficient count")
        return cls(
            coeffs=coeffs,
            target=rec["target"],
            certified_bound=rec["certified_bound"],
            provenance=rec["provenance"],
            target_sup=rec["target_sup"],
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# Evaluation and arithmetic
# ---------------------------------------------------------------------------


@njit(cache=True)
def _clenshaw_real(a, x):
    out = np.empty(x.shape[0])
    n = a.shape[0]
    for m in range(x.shape[0]):
        xm = x[m]
        b1 = 0.0
        b2 = 0.0
        for k in range(n - 1, 0, -1):
            b0 = a[k] + 2.0 * xm * b1 - b2
            b2 = b1
            b1 = b0
        out[m] = a[0] + xm * b1 - b2
    return out


@njit(cache=True)
def _clenshaw_complex(a, x):
    out = np.empty(x.shape[0], dtype=np.complex128)
    n = a.shape[0]
    for m in range(x.shape[0]):
        xm = x[m]
        b1 = 0j
        b2 = 0j
        for k in range(n - 1, 0, -1):
            b0 = a[k] + 2.0 * xm * b1 - b2
            b2 = b1
            b1 = b0
        out[m] = a[0] + xm * b1 - b2
    return out


def clenshaw(coeffs, x):
    """Evaluate ``sum_k coeffs[k] T_k(x)`` by the Clenshaw recurrence."""
    a = np.asarray(coeffs)
    xs = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(xs.reshape(-1))
    if np.iscomplexobj(a):
        out = _clenshaw_complex(np.ascontiguousarray(a, dtype=np.complex128), flat)
    else:
        out = _clenshaw_real(np.ascontiguousarray(a, dtype=float), flat)
    return out.reshape(xs.shape) if xs.ndim else out[0]


def eval_poly(approx: ChebyshevApprox | np.ndarray, x):
    coeffs = approx.coeffs if isinstance(approx, ChebyshevApprox) else approx
    xs = np.asarray(x, dtype=float)
    if np.any(np.abs(xs) > 1.0 + 1e-12):
        warnings.warn(
            "evaluating a Chebyshev series outside [-1, 1]; error certificate does not apply",
            RuntimeWarning,
            stacklevel=2,
        )
    return clenshaw(coeffs, xs)


def cheb_multiply(a, b) -> np.ndarray:
    """Chebyshev coefficients of the product of two Chebyshev series.

    Uses ``T_m T_n = (T_{m+n} + T_{|m-n|}) / 2`` through the symmetric
    Laurent extension and an FFT convolution.
    """
    a = np.asarray(a)
    b = np.asarray(b)

    def laurent(c):
        half = c[1:] / 2
        return np.concatenate([half[::-1], c[:1], half])

    prod = fftconvolve(laurent(a), laurent(b))
    centre = len(prod) // 2
    out = prod[centre:].copy()
    out[1:] *= 2
    if not (np.iscomplexobj(a) or np.iscomplexobj(b)):
        out = out.real
    return out


# ---------------------------------------------------------------------------
# Fitting and certificates
# ---------------------------------------------------------------------------


def bernstein_bound(r: float, C: float, d: int) -> float:
    """Tail bound ``2 C r^-d / (r - 1)`` for functions bounded by C inside E_r."""
    if r <= 1.0:
        return math.inf
    return 2.0 * C * math.exp(-d * math.log(r)) / (r - 1.0)


def roundoff_allowance(coeffs) -> float:
    """Floating-point allowance for fitting and Clenshaw evaluation in double precision."""
    a = np.abs(np.asarray(coeffs))
    return 4.0 * np.finfo(float).eps * (len(a) + 1) * float(a.sum())


def _cheb_coeffs(f: Callable, d: int) -> np.ndarray:
    """Interpolation coefficients from 4(d+1) Chebyshev points of the first kind."""
    M = 4 * (d + 1)
    theta = np.pi * (np.arange(M) + 0.5) / M
    y = np.asarray(f(np.cos(theta)))
    if y.shape != theta.shape:
        y = np.broadcast_to(y, theta.shape)
    if not np.all(np.isfinite(y)):
        raise ValueError("target function returned non-finite values on [-1, 1]")
    if np.iscomplexobj(y):
        a = (dct(np.ascontiguousarray(y.real), type=2) + 1j * dct(np.ascontiguousarray(y.imag), type=2))
    else:
        a = dct(np.ascontiguousarray(y, dtype=float), type=2)
    a = a[: d + 1] / M
    a[0] /= 2
    return a


def _ellipse_certificate(r: float, C: float, d: int) -> float:
    # truncation tail plus the aliasing contribution of the 4(d+1)-point interpolant
    M = 4 * (d + 1)
    return bernstein_bound(r, C, d) * (1.0 + r ** (-(2 * M - 2 * d)))


def chebyshev_fit(
    f: Callable,
    d: int,
    ellipse: tuple[float, float] | None = None,
    *,
    target: dict | None = None,
    target_sup: float | None = None,
) -> ChebyshevApprox:
    """Fit a degree-d Chebyshev series to ``f`` on [-1, 1].

    Parameters
    ----------
    f : callable
        Vectorized scalar function.
    d : int
        Degree.
    ellipse : (r, C), optional
        Analyticity ellipse parameter and modulus bound. When given, the
        certificate is the Bernstein tail bound; otherwise the measured error
        on a 10^4-point grid is recorded.
    """
    if d < 0:
        raise ValueError("degree must be non-negative")
    coeffs = _cheb_coeffs(f, d)
    approx = ChebyshevApprox(
        coeffs=coeffs,
        target=target or {"name": getattr(f, "__name__", "custom")},
        certified_bound=0.0,
        target_sup=target_sup,
        target_fn=f,
    )
    if ellipse is not None:
        r, C = ellipse
        bound = _ellipse_certificate(r, C, d) + roundoff_allowance(coeffs)
        return replace(approx, certified_bound=bound, provenance="bernstein")
    return replace(approx, certified_bound=approx.grid_error(), provenance="measured")


def fermi_ellipse(c: float) -> float:
    """Ellipse parameter keeping |Im(c z)| <= pi/2 inside E_r."""
    return math.sqrt((math.pi / c) ** 2 + 1.0)


def fermi_formula_bound(c: float, d: int) -> float:
    """Closed-form error bound for the degree-d Fermi-Dirac fit at sharpness c."""
    if c == 0:
        return 0.0
    if c >= 2 * math.pi:
        return 12.0 / d * (c / math.pi) ** 4
    return 40.0 / d * (c / math.pi) ** 2


def fermi_dirac_approx(c: float, d: int) -> ChebyshevApprox:
    """Degree-d fit of ``x -> 1/(4 (1 + exp(c x)))``.

    The certificate is the closed-form ellipse bound; ``target["bernstein"]``
    additionally records the raw Bernstein tail bound, which is never larger.
    """
    if c < 0:
        raise ValueError("sharpness c must be non-negative")
    if d < 1:
        raise ValueError("degree must be at least 1")
    descriptor = {"name": "fermi_dirac", "c": float(c), "scale": 0.25}
    if c == 0:
        coeffs = np.zeros(d + 1)
        coeffs[0] = 0.125
        return ChebyshevApprox(
            coeffs, descriptor, 0.0, "exact", 0.25, lambda x: np.full_like(np.asarray(x, float), 0.125)
        )

    def fd(x):
        return 0.25 * expit(-c * np.asarray(x, dtype=float))

    coeffs = _cheb_coeffs(fd, d)
    raw = _ellipse_certificate(fermi_ellipse(c), 1.0, d)
    formula = fermi_formula_bound(c, d)
    descriptor["bernstein"] = raw
    bound = max(formula, raw + roundoff_allowance(coeffs))
    return ChebyshevApprox(coeffs, descriptor, bound, "formula", 0.25, fd)


def resolvent_formula_bound(s: float, eta: float, d: int) -> float:
    """Closed-form contribution of the two resolvent factors at total degree d."""
    q = s / eta
    if 2 * q >= 1:
        return 128.0 / d * q**4
    return 32.0 / d * q**2


def _resolvents(s, eta, omega):
    def g1(x):
        return 1.0 / (1j * eta - (s * np.asarray(x, dtype=float) + omega))

    def g2(x):
        return -1.0 / (1j * eta + (s * np.asarray(x, dtype=float) + omega))

    return g1, g2


def greens_target(beta: float, s: float, eta: float, omega: float) -> Callable:
    """``x -> (eta/8) g(x)``, the scaled thermal Green's function kernel."""
    g1, g2 = _resolvents(s, eta, omega)

    def target(x):
        f = expit(-beta * s * np.asarray(x, dtype=float))
        return eta / 8 * ((1 - f) * g1(x) + f * g2(x))

    return target


def greens_scalar_approx(beta: float, s: float, eta: float, omega: float, d: int) -> ChebyshevApprox:
    """Even degree-d fit of the scaled Green's function kernel.

    The polynomial is ``(eta/8) (p1 + pf (p2 - p1))`` with ``p1``, ``p2`` the
    degree-d/2 resolvent fits and ``pf`` the degree-d/2 unscaled Fermi fit.

    The error of that product is at most
    ``(eta/8)(e1 + e2) + ef/4 + (eta/8)(e1 + e2) ef``
    where ``e1``, ``e2`` and ``ef`` are the factor errors. The closed-form
    certificate used here is the sum of the Fermi term at total degree d and
    ``resolvent_formula_bound``. It dominates that expression whenever each
    resolvent error is at most ``1/eta``. If that check fails, the raw
    product bound is reported instead.
    """
    if d < 2 or d % 2:
        raise ValueError("degree must be a positive even integer")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if beta < 0 or s <= 0:
        raise ValueError("beta must be non-negative and s positive")
    half = d // 2
    c = beta * s
    g1, g2 = _resolvents(s, eta, omega)
    p1 = _cheb_coeffs(g1, half)
    p2 = _cheb_coeffs(g2, half)

    if c == 0:
        pf = np.zeros(half + 1)
        pf[0] = 0.5
        ef = 0.0
    else:
        pf = _cheb_coeffs(lambda x: expit(-c * np.asarray(x, float)), half)
        # the ellipse argument gives C = 1 for the unscaled Fermi function too
        ef = max(fermi_formula_bound(c, half), _ellipse_certificate(fermi_ellipse(c), 1.0, half))

    diff = np.zeros(half + 1, dtype=complex)
    diff[:] = p2 - p1
    prod = cheb_multiply(pf, diff)
    coeffs = np.zeros(d + 1, dtype=complex)
    coeffs[: half + 1] += p1
    coeffs += prod[: d + 1]
    coeffs *= eta / 8

    # resolvent poles sit at distance eta/s from the real axis
    r = math.sqrt((eta / (2 * s)) ** 2 + 1.0)
    C_res = 4.0 / (3.0 * eta)
    e_res = _ellipse_certificate(r, C_res, half)
    raw = eta / 4 * e_res + ef / 4 + eta / 4 * e_res * ef + roundoff_allowance(coeffs)
    formula = (fermi_formula_bound(c, d) if c else 0.0) + resolvent_formula_bound(s, eta, d)
    precondition = e_res <= 1.0 / eta
    if precondition:
        bound, prov = max(formula, raw), "formula"
    else:
        bound, prov = raw, "bernstein"
    descriptor = {
        "name": "greens",
        "beta": float(beta),
        "s": float(s),
        "eta": float(eta),
        "omega": float(omega),
        "scale": eta / 8,
        "bernstein": raw,
        "formula": formula,
        "factor_precondition": bool(precondition),
    }
    return ChebyshevApprox(coeffs, descriptor, bound, prov, 0.125, greens_target(beta, s, eta, omega))


def log_fermi_approx(beta: float, s: float, d: int) -> ChebyshevApprox:
    """Degree-d fit of ``x -> log(1 + exp(-beta s x))``.

    Certified with the Fermi-Dirac ellipse and ``C = log(1 + e^{c a_r}) + pi/2``,
    where ``a_r = (r + 1/r)/2`` is the ellipse's real semi-axis.
    """
    if beta < 0 or s <= 0:
        raise ValueError("beta must be non-negative and s positive")
    c = beta * s
    descriptor = {"name": "log_fermi", "beta": float(beta), "s": float(s)}

    def lf(x):
        return np.logaddexp(0.0, -c * np.asarray(x, dtype=float))

    sup = float(np.logaddexp(0.0, c))
    if c == 0:
        coeffs = np.zeros(d + 1)
        coeffs[0] = math.log(2.0)
        return ChebyshevApprox(coeffs, descriptor, 0.0, "exact", sup, lf)
    r = fermi_ellipse(c)
    a_r = 0.5 * (r + 1.0 / r)
    C = float(np.logaddexp(0.0, c * a_r)) + math.pi / 2
    coeffs = _cheb_coeffs(lf, d)
    bound = _ellipse_certificate(r, C, d) + roundoff_allowance(coeffs)
    return ChebyshevApprox(coeffs, descriptor, bound, "bernstein", sup, lf)


# ---------------------------------------------------------------------------
# Taylor series of the propagator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaylorPoly:
    """Monomial-basis truncation ``sum_{k<=K} (i t x)^k / k!`` of ``exp(i t x)``."""

    t: float
    K: int
    coeffs: np.ndarray

    @property
    def bound(self) -> float:
        """Instantiated truncation bound ``(|t|/sqrt(K))^(K+1)``."""
        if self.t == 0:
            return 0.0
        if self.K == 0:
            return math.inf
        return (abs(self.t) / math.sqrt(self.K)) ** (self.K + 1)

    def evaluate(self, x, precision: int | None = None):
        """Horner evaluation; with ``precision`` (decimal digits) uses mpmath."""
        if precision is None:
            xs = np.asarray(x, dtype=float)
            out = np.zeros(xs.shape, dtype=complex)
            for a in self.coeffs[::-1]:
                out = out * xs + a
            return out
        import mpmath

        with mpmath.workdps(precision):
            it = mpmath.mpc(0, self.t)
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            res = []
            for xv in xs:
                z = it * mpmath.mpf(xv)
                acc = mpmath.mpc(1)
                for k in range(self.K, 0, -1):
                    acc = 1 + acc * z / k
                res.append(acc)
            return res

    def max_error(self, points: int = 201, precision: int | None = None) -> float:
        """Max deviation from ``exp(i t x)`` on a uniform grid of [-1, 1]."""
        x = np.linspace(-1.0, 1.0, points)
        if precision is None:
            return float(np.max(np.abs(self.evaluate(x) - np.exp(1j * self.t * x))))
        import mpmath

        vals = self.evaluate(x, precision)
        with mpmath.workdps(precision):
            errs = [abs(v - mpmath.expj(self.t * mpmath.mpf(xv))) for v, xv in zip(vals, x)]
            return float(max(errs))


def exp_taylor(t: float, K: int) -> TaylorPoly:
    if K < 0:
        raise ValueError("order must be non-negative")
    coeffs = np.empty(K + 1, dtype=complex)
    term = 1.0 + 0j
    for k in range(K + 1):
        coeffs[k] = term
        term = term * 1j * t / (k + 1)
    return TaylorPoly(float(t), K, coeffs)
