"""Piecewise polynomial data with exact antiderivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    """Pieces on ``[breaks[i], breaks[i+1])`` in the global variable.

    The first piece also covers arguments left of ``breaks[0]`` and the last
    piece extends to infinity. Coefficients are ascending.
    """

    breaks: np.ndarray
    coeffs: tuple
    _table: np.ndarray = field(init=False, repr=False)
    _icoeffs: tuple = field(init=False, repr=False)
    _cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        breaks = np.asarray(self.breaks, dtype=float).ravel()
        pieces = tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in self.coeffs)
        if breaks.size != len(pieces) or breaks.size == 0:
            raise ValueError("need one coefficient list per break")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        if not all(np.all(np.isfinite(c)) for c in pieces) or not np.all(np.isfinite(breaks)):
            raise ValueError("piecewise data must be finite")
        width = max(c.size for c in pieces)
        table = np.zeros((len(pieces), width))
        for i, c in enumerate(pieces):
            table[i, : c.size] = c
        icoeffs = tuple(P.polyint(c) for c in pieces)
        cumulative = np.zeros(breaks.size)
        for i in range(1, breaks.size):
            piece_integral = P.polyval(breaks[i], icoeffs[i - 1]) - P.polyval(breaks[i - 1], icoeffs[i - 1])
            cumulative[i] = cumulative[i - 1] + piece_integral
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", pieces)
        object.__setattr__(self, "_table", table)
        object.__setattr__(self, "_icoeffs", icoeffs)
        object.__setattr__(self, "_cumulative", cumulative)

    @classmethod
    def constant(cls, value: float, start: float = 0.0) -> "PiecewisePolynomial":
        return cls(np.array([start]), ([float(value)],))

    @classmethod
    def piecewise_constant(cls, breaks, values) -> "PiecewisePolynomial":
        return cls(np.asarray(breaks, dtype=float), tuple([float(v)] for v in values))

    @classmethod
    def from_config(cls, spec) -> "PiecewisePolynomial":
        if isinstance(spec, (int, float)):
            return cls.constant(float(spec))
        kind = spec.get("kind", "constant")
        if kind == "constant":
            return cls.constant(float(spec["value"]))
        if kind == "piecewise_constant":
            return cls.piecewise_constant(spec["breaks"], spec["values"])
        if kind == "piecewise_poly":
            return cls(np.asarray(spec["breaks"], dtype=float), tuple(spec["coeffs"]))
        raise ValueError(f"unknown piecewise data kind {kind!r}")

    def to_config(self) -> dict:
        if self.is_piecewise_constant:
            if self.breaks.size == 1:
                return {"kind": "constant", "value": float(self.coeffs[0][0])}
            return {
                "kind": "piecewise_constant",
                "breaks": self.breaks.tolist(),
                "values": [float(c[0]) for c in self.coeffs],
            }
        return {"kind": "piecewise_poly", "breaks": self.breaks.tolist(), "coeffs": [c.tolist() for c in self.coeffs]}

    @property
    def is_piecewise_constant(self) -> bool:
        return all(np.all(c[1:] == 0) for c in self.coeffs)

    @property
    def interior_breaks(self) -> np.ndarray:
        return self.breaks[1:]

    def _piece(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.breaks.size - 1)

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        rows = self._table[self._piece(arr)]
        out = np.zeros(arr.shape)
        for k in range(self._table.shape[1] - 1, -1, -1):
            out = out * arr + rows[..., k]
        return float(out) if np.ndim(x) == 0 else out

    def antiderivative(self, x):
        """Exact ``integral from breaks[0] to x``."""
        arr = np.asarray(x, dtype=float)
        idx = self._piece(arr)
        out = np.empty(arr.shape)
        for i in np.unique(idx):
            sel = idx == i
            ic = self._icoeffs[i]
            out[sel] = self._cumulative[i] + P.polyval(arr[sel], ic) - P.polyval(self.breaks[i], ic)
        return float(out) if np.ndim(x) == 0 else out

    def sup_norm(self, lo: float, hi: float, samples: int = 2049) -> float:
        pts = np.concatenate([np.linspace(lo, hi, samples), self.breaks[(self.breaks >= lo) & (self.breaks <= hi)]])
        vals = np.abs(self(pts))
        # left limits at breaks
        inner = self.breaks[(self.breaks > lo) & (self.breaks <= hi)]
        if inner.size:
            vals = np.concatenate([vals, np.abs(self(np.nextafter(inner, -np.inf)))])
        return float(vals.max())
