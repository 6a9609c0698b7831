"""Strictly convex, superlinear fluxes and the objects derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P


class FluxError(ValueError):
    """Raised for invalid flux definitions or failed inversions."""


_BRACKET_CAP = 2.0**60


def _as_float_array(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise FluxError("non-finite argument passed to flux evaluation")
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    return float(np.ravel(arr)[0]) if np.ndim(like) == 0 else arr


@dataclass(frozen=True, eq=False)
class FluxModel:
    """Convex polynomial flux ``f(u) = sum(coeffs[k] * u**k)``.

    The shifted quadratic ``a*(u - c)**2/2`` is stored with its parameters so
    that inversion and the convex dual use closed forms; every other
    polynomial goes through bracketed bisection on the monotone derivative.
    """

    coeffs: np.ndarray
    family: str = "polynomial"
    a: float | None = None
    c: float | None = None
    u_lo: float = -10.0
    u_hi: float = 10.0
    tol_root: float = 1e-10
    superlinear_threshold: float = 1.0
    check_samples: int = 2001
    lambda_f: float = field(init=False)
    superlinear_ok: bool = field(init=False)

    def __post_init__(self):
        coeffs = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "b")
        if coeffs.size < 3:
            raise FluxError("flux must be a polynomial of degree >= 2")
        degree = coeffs.size - 1
        if degree % 2 or coeffs[-1] <= 0:
            raise FluxError(
                "flux polynomial needs even degree and positive leading "
                "coefficient to be superlinear"
            )
        if not self.u_lo < self.u_hi:
            raise FluxError("evaluation window must satisfy u_lo < u_hi")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "_dcoeffs", P.polyder(coeffs))
        self._validate_convexity()
        object.__setattr__(self, "lambda_f", float(self.fprime_inverse(0.0)))
        object.__setattr__(self, "superlinear_ok", self._expand_window())

    # construction helpers
    @classmethod
    def shifted_quadratic(cls, a: float = 1.0, c: float = 0.0, **kw) -> "FluxModel":
        if not a > 0:
            raise FluxError("shifted quadratic needs a > 0")
        coeffs = [a * c * c / 2.0, -a * c, a / 2.0]
        kw.setdefault("u_lo", min(-10.0, c - 10.0))
        kw.setdefault("u_hi", max(10.0, c + 10.0))
        return cls(coeffs=np.array(coeffs), family="shifted_quadratic", a=a, c=c, **kw)

    @classmethod
    def burgers(cls) -> "FluxModel":
        return cls.shifted_quadratic(1.0, 0.0)

    @classmethod
    def polynomial(cls, coeffs, **kw) -> "FluxModel":
        return cls(coeffs=np.asarray(coeffs, dtype=float), family="polynomial", **kw)

    @classmethod
    def from_config(cls, spec: dict) -> "FluxModel":
        family = spec.get("family")
        extra = {k: spec[k] for k in ("u_lo", "u_hi", "tol_root") if k in spec}
        if family == "shifted_quadratic":
            return cls.shifted_quadratic(float(spec.get("a", 1.0)), float(spec.get("c", 0.0)), **extra)
        if family == "polynomial":
            return cls.polynomial(spec["coeffs"], **extra)
        raise FluxError(f"unknown flux family {family!r}")

    def to_config(self) -> dict:
        if self.family == "shifted_quadratic":
            return {"family": "shifted_quadratic", "a": self.a, "c": self.c}
        return {"family": "polynomial", "coeffs": self.coeffs.tolist()}

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def dcoeffs(self) -> np.ndarray:
        """Ascending coefficients of the derivative."""
        return self._dcoeffs

    @property
    def closed_form(self) -> bool:
        return self.family == "shifted_quadratic"

    # evaluation
    def f(self, u):
        arr = _as_float_array(u)
        return _scalar_or_array(P.polyval(arr, self.coeffs), u)

    def fprime(self, u):
        arr = _as_float_array(u)
        return _scalar_or_array(P.polyval(arr, self._dcoeffs), u)

    def fprime_inverse(self, s, numeric: bool = False):
        """Solve ``f'(u) = s``; the closed form is used for shifted quadratics."""
        arr = _as_float_array(s)
        if self.closed_form and not numeric:
            out = self.c + arr / self.a
        else:
            out = self._bisect_fprime(arr)
        return _scalar_or_array(out, s)

    def legendre_dual(self, p, numeric: bool = False):
        """Convex conjugate ``max_v (p*v - f(v))``."""
        arr = _as_float_array(p)
        if self.closed_form and not numeric:
            out = arr * arr / (2.0 * self.a) + self.c * arr
        else:
            v = self._bisect_fprime(arr)
            out = arr * v - P.polyval(v, self.coeffs)
        return _scalar_or_array(out, p)

    def dual_of_derivative(self, p):
        """``f*(f'(p))`` through the identity ``p f'(p) - f(p)``."""
        arr = _as_float_array(p)
        out = arr * P.polyval(arr, self._dcoeffs) - P.polyval(arr, self.coeffs)
        return _scalar_or_array(out, p)

    def max_speed(self, u_abs: float) -> float:
        """Largest |f'| over ``[-u_abs, u_abs]`` (attained at an end by monotonicity)."""
        return float(max(abs(self.fprime(-u_abs)), abs(self.fprime(u_abs))))

    # internals
    def _bisect_fprime(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(s).astype(float)
        d = self._dcoeffs
        lo = np.full(s.shape, -1.0)
        hi = np.full(s.shape, 1.0)
        while True:
            low_bad = P.polyval(lo, d) > s
            if not low_bad.any():
                break
            lo[low_bad] *= 2.0
            if np.abs(lo).max() > _BRACKET_CAP:
                raise FluxError("bracket expansion for (f')^-1 exceeded cap; flux not superlinear?")
        while True:
            high_bad = P.polyval(hi, d) < s
            if not high_bad.any():
                break
            hi[high_bad] *= 2.0
            if hi.max() > _BRACKET_CAP:
                raise FluxError("bracket expansion for (f')^-1 exceeded cap; flux not superlinear?")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            go_right = P.polyval(mid, d) < s
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
                break
        out = 0.5 * (lo + hi)
        resid = np.abs(P.polyval(out, d) - s)
        scale = self.tol_root * (1.0 + np.abs(s)) + 1e3 * np.finfo(float).eps * np.abs(P.polyval(np.abs(out) + 1, np.abs(d)))
        if np.any(resid > scale):
            raise FluxError("(f')^-1 did not reach tolerance")
        return out.reshape(np.shape(s)) if s.ndim else out

    def _validate_convexity(self):
        u = np.linspace(self.u_lo, self.u_hi, self.check_samples)
        d = P.polyval(u, self._dcoeffs)
        if np.any(np.diff(d) <= 0):
            bad = int(np.argmin(np.diff(d)))
            raise FluxError(f"f' is not strictly increasing near u={u[bad]:.6g}")
        u1, u2 = u[:-1], u[1:]
        mid = P.polyval(0.5 * (u1 + u2), self.coeffs)
        chord = 0.5 * (P.polyval(u1, self.coeffs) + P.polyval(u2, self.coeffs))
        slack = 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(chord))
        if np.any(mid >= chord + slack):
            raise FluxError("midpoint convexity fails on the sample grid")

    def _expand_window(self) -> bool:
        lo, hi = self.u_lo, self.u_hi
        for _ in range(40):
            ok_lo = self.f(lo) / abs(lo) > self.superlinear_threshold if lo else False
            ok_hi = self.f(hi) / abs(hi) > self.superlinear_threshold if hi else False
            if ok_lo and ok_hi:
                object.__setattr__(self, "u_lo", lo)
                object.__setattr__(self, "u_hi", hi)
                return True
            if not ok_lo:
                lo = 2.0 * lo if lo else -1.0
            if not ok_hi:
                hi = 2.0 * hi if hi else 1.0
        return False
