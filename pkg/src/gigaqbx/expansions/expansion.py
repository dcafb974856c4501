r"""Public multipole/local expansion type and operations.

``Expansion.coeffs`` holds the textbook coefficients: for a unit source at
``s`` and center ``c``,

.. math::

    L_n^m = \frac{1}{2n+1} \frac{Y_n^{-m}(s-c)}{|s-c|^{n+1}}, \qquad
    M_n^m = \frac{1}{2n+1} |s-c|^n Y_n^m(s-c),

evaluated as ``sum L_n^m |t-c|^n Y_n^m(t-c)`` and
``sum M_n^m Y_n^{-m}(t-c) / |t-c|^{n+1}``. All arithmetic happens on the
scaled coefficients (``Expansion.scaled``); conversion is a diagonal map.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import lgamma

import numpy as np

from ..kernels import SourceEnsemble
from .harmonics import ncoeffs, nm_table, ynorm
from .kernels import LOCAL, MULTIPOLE, eval_scaled, p2e
from .translation import KINDS, L2L, M2L, M2M, translate_dense, translate_pas

KIND_CODES = {"multipole": MULTIPOLE, "local": LOCAL}


class SingularExpansionError(ValueError):
    pass


@lru_cache(maxsize=None)
def _textbook_factors(p):
    """``(f_local, f_mpole)`` with ``lam = f_local * L`` and ``mu_n^m = f_mpole * M_n^{-m}``."""
    n, m = nm_table(p)
    am = np.abs(m)
    norm = np.array([ynorm(a, b) for a, b in zip(n, m)])
    ph = (1j) ** am
    fl = norm * ph * np.exp([lgamma(a + b + 1) for a, b in zip(n, am)])
    fm = norm * ph * np.exp([-lgamma(a - b + 1) for a, b in zip(n, am)])
    flip = n * n + n - m  # index of (n, -m)
    return fl, fm, flip


@dataclass(frozen=True)
class Expansion:
    """Truncated multipole or local expansion.

    Attributes
    ----------
    kind : {"multipole", "local"}
    center : (3,) array
    order : int
    scaled : complex array of length ``(order+1)**2``
        Internal coefficients, flat n-major.
    """

    kind: str
    center: np.ndarray
    order: int
    scaled: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown expansion kind {self.kind!r}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        sc = np.ascontiguousarray(self.scaled, dtype=np.complex128)
        if sc.shape != (ncoeffs(self.order),):
            raise ValueError("coefficient table does not match order")
        object.__setattr__(self, "scaled", sc)

    @property
    def coeffs(self):
        """Textbook coefficients, flat ``n*n + n + m``."""
        fl, fm, flip = _textbook_factors(self.order)
        if self.kind == "local":
            return self.scaled / fl
        return (self.scaled / fm)[flip]

    def coeff(self, n, m):
        return self.coeffs[n * n + n + m]

    @classmethod
    def from_coeffs(cls, kind, center, order, coeffs):
        fl, fm, flip = _textbook_factors(order)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if kind == "local":
            sc = coeffs * fl
        else:
            sc = coeffs[flip] * fm
        return cls(kind, center, order, sc)

    @classmethod
    def zeros(cls, kind, center, order):
        return cls(kind, center, order, np.zeros(ncoeffs(order), dtype=np.complex128))


def form_expansion(kind, sources: SourceEnsemble, center, p):
    """Multipole or local expansion of ``sources`` about ``center`` to order ``p``."""
    center = np.asarray(center, dtype=np.float64).reshape(3)
    code = KIND_CODES[kind]
    if len(sources) and np.any(np.all(sources.positions == center, axis=1)):
        raise SingularExpansionError("source coincides with expansion center")
    out = np.zeros(ncoeffs(p), dtype=np.complex128)
    if len(sources):
        p2e(code, sources.positions, sources.weights, sources.dipoles_or_zeros,
            sources.has_dipoles, center[0], center[1], center[2], p, out)
    return Expansion(kind, center, p, out)


def eval_expansion_complex(e: Expansion, targets):
    tgt = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    if e.kind == "multipole" and np.any(np.all(tgt == e.center, axis=1)):
        raise SingularExpansionError("multipole evaluated at its center")
    out = np.zeros(tgt.shape[0], dtype=np.complex128)
    c = e.center
    eval_scaled(KIND_CODES[e.kind], e.scaled, e.order, c[0], c[1], c[2], tgt, out)
    return out


def eval_expansion(e: Expansion, t):
    """Real value of the truncated series at ``t`` (one point or ``(M, 3)``)."""
    t = np.asarray(t, dtype=np.float64)
    val = eval_expansion_complex(e, t).real
    return float(val[0]) if t.ndim == 1 else val


def translate(e: Expansion, kind, new_center, q, path="reference"):
    """Shift an expansion: ``kind`` in {"M2M", "M2L", "L2L"}, output order ``q``."""
    code = KINDS[kind]
    expect = "local" if code == L2L else "multipole"
    if e.kind != expect:
        raise ValueError(f"{kind} needs a {expect} expansion, got {e.kind}")
    if not np.all(np.isfinite(e.scaled)):
        raise FloatingPointError("non-finite coefficients in translation input")
    new_center = np.asarray(new_center, dtype=np.float64).reshape(3)
    d = new_center - e.center
    if code == M2L and not np.any(d):
        raise SingularExpansionError("M2L between identical centers")
    if path == "reference":
        out = translate_dense(code, e.scaled, d, e.order, q)
    elif path == "point_and_shoot":
        out = translate_pas(code, e.scaled, d, e.order, q)
    else:
        raise ValueError(f"unknown translation path {path!r}")
    return Expansion("multipole" if code == M2M else "local", new_center, q, out)


def truncation_bound(kind, r, rho, p):
    """Geometric truncation bound ``(1/4pi) (1/(rho - r)) (r/rho)^(p+1)``.

    ``kind`` is accepted for symmetry; the bound is identical for multipole
    (sources within ``r``, targets beyond ``rho``) and local (the reverse).
    """
    if kind not in KIND_CODES:
        raise ValueError(f"unknown expansion kind {kind!r}")
    if not 0 <= r < rho:
        raise ValueError("need 0 <= r < rho")
    return 1.0 / (4 * np.pi) / (rho - r) * (r / rho) ** (p + 1)
